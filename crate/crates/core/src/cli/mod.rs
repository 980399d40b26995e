//! The `recap` command line. Exit codes: 0 success or compliant, 1 when an
//! error-severity diagnostic is produced, 2 for usage errors and bundles that
//! cannot be parsed. Reports go to stdout, diagnostics to stderr.

mod io;

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::audit::Stamp;
use crate::bundle::ProjectBundle;
use crate::contamination::{self, Action};
use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::id::{Identifier, LayerKind, Timestamp, Version};
use crate::layers::{self, ChangelogEntry, Law};
use crate::reporting::{self, Artifact, Format};
use crate::routing;
use crate::tiering;

use self::io::{BundleLock, Printer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "recap", version, about = "Validate, tier, route, scan and report on project bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Structured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportKind {
    StudyLog,
    TierTable,
    ReviewerBlock,
    Compliance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Md,
    Csv,
    Structured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ResolveAction {
    Quarantine,
    Reverse,
}

#[derive(clap::Args, Debug)]
struct Who {
    /// Recorded as the actor of appended audit events.
    #[arg(long, default_value = "recap")]
    actor: String,
    /// Event timestamp (YYYY-MM-DDTHH:MM:SSZ); defaults to now.
    #[arg(long)]
    at: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every check and print the compliance verdict.
    Validate {
        bundle: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Print tier decisions and the rules that fired.
    Tier {
        bundle: PathBuf,
        #[arg(long)]
        unit: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Freeze or check a project's committed route.
    Route {
        bundle: PathBuf,
        #[command(subcommand)]
        action: RouteAction,
    },
    /// Report contamination events.
    Scan {
        bundle: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Correct a detected contamination event.
    Resolve {
        bundle: PathBuf,
        event: String,
        #[arg(long, value_enum)]
        action: ResolveAction,
        /// What the violation put at risk.
        #[arg(long)]
        risks: String,
        /// How the correction is versioned.
        #[arg(long)]
        update: String,
        #[command(flatten)]
        who: Who,
    },
    /// Render a mandatory output.
    Report {
        bundle: PathBuf,
        #[arg(value_enum)]
        kind: ReportKind,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
        #[arg(long)]
        project: Option<String>,
    },
    /// Advance the system version.
    Version {
        bundle: PathBuf,
        #[command(subcommand)]
        action: VersionAction,
    },
    /// Describe a diagnostic code.
    Explain { code: String },
}

#[derive(Subcommand, Debug)]
enum RouteAction {
    Freeze {
        #[arg(long)]
        project: Option<String>,
        #[command(flatten)]
        who: Who,
    },
    Check {
        #[arg(long)]
        project: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum VersionAction {
    Bump {
        #[arg(long)]
        changelog: PathBuf,
        #[command(flatten)]
        who: Who,
    },
}

/// A changelog file: the entry plus either laws to append or the complete
/// new law set.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChangelogFile {
    from_version: Version,
    to_version: Version,
    motivating_insight: String,
    boundary_affected: String,
    generalizability_reasoning: String,
    timestamp: Timestamp,
    #[serde(default)]
    append: Vec<Law>,
    #[serde(default)]
    laws: Option<Vec<Law>>,
}

enum Failure {
    Usage(String),
    Parse(Diagnostics),
    Violations(Vec<Diagnostic>),
}

impl From<Diagnostics> for Failure {
    fn from(d: Diagnostics) -> Self {
        Failure::Violations(d.0)
    }
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    printer: Printer,
}

/// Run the CLI over `args` (including the program name).
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    let color = std::env::var_os("RECAP_NO_COLOR").is_none() && std::io::stderr().is_terminal();
    let mut ctx = Ctx { out: stdout, err: stderr, printer: Printer { color } };
    match dispatch(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(ctx.err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Parse(d)) => {
            ctx.printer.all(ctx.err, &d.0);
            EXIT_USAGE
        }
        Err(Failure::Violations(d)) => {
            ctx.printer.all(ctx.err, &d);
            if d.iter().any(|d| d.is_error()) {
                EXIT_VIOLATIONS
            } else {
                EXIT_OK
            }
        }
    }
}

fn load(path: &Path, ctx: &mut Ctx<'_>) -> Result<ProjectBundle, Failure> {
    let parsed = io::load(path).map_err(Failure::Parse)?;
    ctx.printer.all(ctx.err, &parsed.warnings);
    Ok(parsed.bundle)
}

fn stamp(who: &Who) -> Result<Stamp, Failure> {
    let ts = match &who.at {
        Some(t) => Timestamp::new(t.clone()).map_err(|e| Failure::Usage(e.to_string()))?,
        None => Timestamp::now(),
    };
    Ok(Stamp::new(who.actor.clone(), ts))
}

/// Load, mutate and atomically write back a bundle under the advisory lock.
/// A rejected mutation leaves the file untouched.
fn mutate<T>(
    path: &Path,
    ctx: &mut Ctx<'_>,
    f: impl FnOnce(&mut ProjectBundle) -> Result<T, Failure>,
) -> Result<T, Failure> {
    let _lock = BundleLock::acquire(path).map_err(Failure::Usage)?;
    let mut bundle = load(path, ctx)?;
    let value = f(&mut bundle)?;
    io::write_atomic(path, &bundle).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(value)
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializes") + "\n"
}

fn find_project(b: &ProjectBundle, given: Option<&str>) -> Result<Identifier, Failure> {
    match given {
        Some(s) => b
            .projects
            .iter()
            .find(|p| p.id.to_string() == s || p.id.local_name == s)
            .map(|p| p.id.clone())
            .ok_or_else(|| Failure::Usage(format!("no project `{s}`"))),
        None => match b.projects.as_slice() {
            [p] => Ok(p.id.clone()),
            [] => Err(Failure::Usage("the bundle declares no project".into())),
            _ => Err(Failure::Usage("the bundle declares several projects; pass --project".into())),
        },
    }
}

fn dispatch(cmd: Command, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    match cmd {
        Command::Validate { bundle, format } => validate(&bundle, format, ctx),
        Command::Tier { bundle, unit, format } => tier(&bundle, unit.as_deref(), format, ctx),
        Command::Route { bundle, action } => route(&bundle, action, ctx),
        Command::Scan { bundle, format } => scan(&bundle, format, ctx),
        Command::Resolve { bundle, event, action, risks, update, who } => {
            resolve(&bundle, &event, action, &risks, &update, &who, ctx)
        }
        Command::Report { bundle, kind, format, project } => report(&bundle, kind, format, project.as_deref(), ctx),
        Command::Version { bundle, action: VersionAction::Bump { changelog, who } } => bump(&bundle, &changelog, &who, ctx),
        Command::Explain { code } => explain(&code, ctx),
    }
}

fn validate(path: &Path, format: OutputFormat, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    let b = load(path, ctx)?;
    let report = reporting::compliance_verdict(&b);
    match format {
        OutputFormat::Text => {
            let _ = writeln!(ctx.out, "{}", report.verdict);
            ctx.printer.all(ctx.err, &report.findings);
        }
        OutputFormat::Structured => {
            let text = reporting::render_report(&Artifact::ComplianceReport(report.clone()), Format::Structured)
                .expect("structured rendering always succeeds");
            let _ = write!(ctx.out, "{text}");
        }
    }
    Ok(if report.is_compliant() { EXIT_OK } else { EXIT_VIOLATIONS })
}

fn tier(path: &Path, unit: Option<&str>, format: OutputFormat, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    let b = load(path, ctx)?;
    let units: Vec<_> = match unit {
        Some(s) => {
            let u = b
                .units
                .iter()
                .find(|u| u.study_id.to_string() == s || u.study_id.local_name == s)
                .ok_or_else(|| Failure::Usage(format!("no unit `{s}`")))?;
            vec![u]
        }
        None => {
            let mut v: Vec<_> = b.units.iter().filter(|u| u.is_active()).collect();
            v.sort_by(|a, b| a.study_id.cmp(&b.study_id));
            v
        }
    };
    let mut decisions = Vec::new();
    let mut diags = Vec::new();
    for u in &units {
        match tiering::tier_unit(u) {
            Ok(d) => {
                diags.extend(tiering::check_tier_declaration(u).into_iter().filter(|d| d.code != Code::MissingField));
                decisions.push(d);
            }
            Err(d) => diags.push(d),
        }
    }
    match format {
        OutputFormat::Structured => {
            let _ = write!(ctx.out, "{}", json(&decisions));
        }
        OutputFormat::Text if unit.is_some() => {
            for d in &decisions {
                let _ = writeln!(ctx.out, "{d}");
            }
        }
        OutputFormat::Text => {
            for d in &decisions {
                let _ = writeln!(ctx.out, "{} {d}", d.unit);
            }
        }
    }
    ctx.printer.all(ctx.err, &diags);
    Ok(if diags.iter().any(|d| d.is_error()) { EXIT_VIOLATIONS } else { EXIT_OK })
}

fn route(path: &Path, action: RouteAction, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    match action {
        RouteAction::Check { project } => {
            let b = load(path, ctx)?;
            let p = find_project(&b, project.as_deref())?;
            let diags = routing::route_compliance(&b, &p);
            let errors = diags.iter().any(|d| d.is_error());
            let _ = writeln!(ctx.out, "{p}: {}", if errors { "incoherent" } else { "coherent" });
            ctx.printer.all(ctx.err, &diags);
            Ok(if errors { EXIT_VIOLATIONS } else { EXIT_OK })
        }
        RouteAction::Freeze { project, who } => {
            let stamp = stamp(&who)?;
            let id = mutate(path, ctx, |b| {
                let p = find_project(b, project.as_deref())?;
                Ok(routing::freeze_route(b, &p, &stamp)?)
            })?;
            let _ = writeln!(ctx.out, "frozen {id}");
            Ok(EXIT_OK)
        }
    }
}

fn scan(path: &Path, format: OutputFormat, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    let b = load(path, ctx)?;
    let events = contamination::scan_bundle(&b);
    let open = contamination::flagged_unresolved(&b);
    match format {
        OutputFormat::Structured => {
            let _ = write!(ctx.out, "{}", json(&events));
        }
        OutputFormat::Text => {
            for e in &events {
                let _ = writeln!(ctx.out, "{} {} {} at {}: {}", e.id, e.direction, e.rule_violated.code(), e.site, e.message);
            }
        }
    }
    let mut diags: Vec<Diagnostic> = contamination::contamination_findings(&b);
    diags.retain(|d| !events.iter().any(|e| e.diagnostic() == *d));
    ctx.printer.all(ctx.err, &diags);
    let failed = !events.is_empty() || !open.is_empty() || diags.iter().any(|d| d.is_error());
    Ok(if failed { EXIT_VIOLATIONS } else { EXIT_OK })
}

fn resolve(
    path: &Path,
    id: &str,
    action: ResolveAction,
    risks: &str,
    update: &str,
    who: &Who,
    ctx: &mut Ctx<'_>,
) -> Result<i32, Failure> {
    let stamp = stamp(who)?;
    mutate(path, ctx, |b| {
        let found = contamination::scan_bundle(b)
            .into_iter()
            .chain(contamination::flagged_unresolved(b))
            .find(|e| e.id == id)
            .ok_or_else(|| Failure::Usage(format!("no open contamination event `{id}`")))?;
        let mut event = found;
        event.risks_introduced = risks.to_string();
        event.versioned_update = update.to_string();
        event.decisions_affected = contamination::trace_downstream(&event.site, b);
        let action = match action {
            ResolveAction::Quarantine => Action::Quarantine,
            ResolveAction::Reverse => Action::Reverse,
        };
        Ok(contamination::resolve_contamination(b, &event, action, &stamp)?)
    })?;
    let _ = writeln!(ctx.out, "resolved {id}");
    Ok(EXIT_OK)
}

fn report(path: &Path, kind: ReportKind, format: ReportFormat, project: Option<&str>, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    let b = load(path, ctx)?;
    let artifact = match kind {
        ReportKind::Compliance => Artifact::ComplianceReport(reporting::compliance_verdict(&b)),
        ReportKind::StudyLog => {
            let p = find_project(&b, project)?;
            Artifact::StudyLog(reporting::build_study_log(&b, &p)?)
        }
        ReportKind::TierTable => {
            let p = find_project(&b, project)?;
            Artifact::TierTable(reporting::build_tier_table(&b, &p))
        }
        ReportKind::ReviewerBlock => {
            let p = find_project(&b, project)?;
            let block = b.reviewer_block(&p).cloned().ok_or_else(|| {
                Failure::Violations(vec![Diagnostic::at(Code::NoReviewerBlock, p.to_string(), "no Reviewer Block")])
            })?;
            Artifact::ReviewerBlock(block)
        }
    };
    let format = match format {
        ReportFormat::Md => Format::Markdown,
        ReportFormat::Csv => Format::Csv,
        ReportFormat::Structured => Format::Structured,
    };
    let text = reporting::render_report(&artifact, format).map_err(|d| Failure::Parse(d.into()))?;
    let _ = write!(ctx.out, "{text}");
    Ok(EXIT_OK)
}

fn bump(path: &Path, changelog: &Path, who: &Who, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    let text = io::read_text(changelog).map_err(Failure::Parse)?;
    let file: ChangelogFile = serde_json::from_str(&text).map_err(|e| {
        Failure::Parse(Diagnostic::new(Code::Syntax, crate::diag::Location::line(e.line().max(1), e.column()), e.to_string()).into())
    })?;
    if file.laws.is_some() && !file.append.is_empty() {
        return Err(Failure::Usage("a changelog gives either `append` or `laws`, not both".into()));
    }
    let stamp = stamp(who)?;
    let to = file.to_version.clone();
    mutate(path, ctx, |b| {
        let gp = b.grandparent().ok_or_else(|| Failure::Violations(vec![Diagnostic::at(Code::NoGrandparent, "layers", "no grandparent layer")]))?;
        let qualify = |l: Law| Law { id: l.id.qualified_in(LayerKind::Grandparent, &gp.id), ..l };
        let laws: Vec<Law> = match file.laws {
            Some(all) => all.into_iter().map(qualify).collect(),
            None => gp.laws.iter().cloned().chain(file.append.into_iter().map(qualify)).collect(),
        };
        let entry = ChangelogEntry {
            from_version: file.from_version,
            to_version: file.to_version,
            motivating_insight: file.motivating_insight,
            boundary_affected: file.boundary_affected,
            generalizability_reasoning: file.generalizability_reasoning,
            timestamp: file.timestamp,
        };
        Ok(layers::bump_version(b, entry, laws, &stamp)?)
    })?;
    let _ = writeln!(ctx.out, "version {to}");
    Ok(EXIT_OK)
}

fn explain(code: &str, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    let c = Code::parse(code).ok_or_else(|| Failure::Usage(format!("unknown diagnostic code `{code}`")))?;
    let _ = writeln!(ctx.out, "{} ({})\n{}\nrule: {}", c.as_str(), c.default_severity().as_str(), c.summary(), c.governs());
    Ok(EXIT_OK)
}
