use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ComplianceReport, ReviewerBlock, StudyLogEntry, TierTableRow};
use crate::diag::{Code, Diagnostic, Diagnostics, Location};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "artifact", content = "data", rename_all = "snake_case")]
pub enum Artifact {
    StudyLog(Vec<StudyLogEntry>),
    TierTable(Vec<TierTableRow>),
    ReviewerBlock(ReviewerBlock),
    ComplianceReport(ComplianceReport),
}

impl Artifact {
    pub fn name(&self) -> &'static str {
        match self {
            Artifact::StudyLog(_) => "study_log",
            Artifact::TierTable(_) => "tier_table",
            Artifact::ReviewerBlock(_) => "reviewer_block",
            Artifact::ComplianceReport(_) => "compliance_report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Markdown,
    Csv,
    Structured,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "structured" | "json" => Ok(Format::Structured),
            _ => Err(format!("unknown format `{s}` (expected md, csv or structured)")),
        }
    }
}

pub const STUDY_LOG_COLUMNS: [&str; 7] = [
    "Study_ID",
    "Design_Type",
    "Tier_Assignment",
    "Reasons_for_Tiering",
    "Bias_Considerations",
    "Measurement_Definition_Issues",
    "Notes",
];

pub const TIER_TABLE_COLUMNS: [&str; 5] = ["Study_ID", "Methods_Summary", "Evidence_Type", "Strengths", "Limitations"];

pub const COMPLIANCE_COLUMNS: [&str; 4] = ["Code", "Severity", "Location", "Message"];

fn table(artifact: &Artifact) -> Option<(&'static [&'static str], Vec<Vec<String>>)> {
    match artifact {
        Artifact::StudyLog(rows) => Some((
            &STUDY_LOG_COLUMNS,
            rows.iter()
                .map(|r| {
                    vec![
                        r.study_id.local_name.clone(),
                        r.design_type.clone(),
                        r.tier_assignment.label().to_string(),
                        r.reasons_for_tiering.clone(),
                        r.bias_considerations.iter().map(|b| b.text.as_str()).collect::<Vec<_>>().join("; "),
                        r.measurement_definition_issues.clone(),
                        r.notes.clone(),
                    ]
                })
                .collect(),
        )),
        Artifact::TierTable(rows) => Some((
            &TIER_TABLE_COLUMNS,
            rows.iter()
                .map(|r| {
                    vec![
                        r.study_id.local_name.clone(),
                        r.methods_summary.clone(),
                        r.evidence_type.as_ref().map(|e| e.to_string()).unwrap_or_default(),
                        r.strengths.clone(),
                        r.limitations.clone(),
                    ]
                })
                .collect(),
        )),
        Artifact::ComplianceReport(c) => Some((
            &COMPLIANCE_COLUMNS,
            c.findings
                .iter()
                .map(|d| vec![d.code.to_string(), d.severity.to_string(), d.location.to_string(), d.message.clone()])
                .collect(),
        )),
        Artifact::ReviewerBlock(_) => None,
    }
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', "<br>")
}

fn md_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| md_cell(c)).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
}

fn md_reviewer_block(b: &ReviewerBlock) -> String {
    let mut out = format!("## Reviewer Block: {}\n\n### Methodological findings\n\n", b.project_ref);
    for (i, f) in b.methodological_findings.iter().enumerate() {
        let _ = writeln!(out, "{}. {f}", i + 1);
    }
    let _ = write!(out, "\n### Conceptual insight\n\n{}\n\n### Anticipated critique\n\n{}\n", b.conceptual_insight, b.anticipated_critique.text);
    if !b.anticipated_critique.response.is_empty() {
        let _ = write!(out, "\nResponse: {}\n", b.anticipated_critique.response);
    }
    let cited: Vec<String> = b.anticipated_critique.referenced_decisions.iter().map(|d| format!("`{d}`")).collect();
    let _ = write!(out, "\nDecisions: {}\n\n### Disconfirming model\n\n{}\n\n### Assumptions\n\n", cited.join(", "), b.disconfirming_model);
    for a in &b.assumptions_ref {
        let _ = writeln!(out, "- `{a}`");
    }
    out
}

/// Render an artifact. Identical artifacts render to identical bytes.
pub fn render_report(artifact: &Artifact, format: Format) -> Result<String, Diagnostic> {
    match format {
        Format::Structured => Ok(serde_json::to_string_pretty(artifact).expect("artifacts serialize") + "\n"),
        Format::Markdown => Ok(match artifact {
            Artifact::ReviewerBlock(b) => md_reviewer_block(b),
            Artifact::ComplianceReport(c) => {
                let (header, rows) = table(artifact).expect("tabular");
                let mut out = format!("verdict: {}\n\n", c.verdict);
                md_table(&mut out, header, &rows);
                out
            }
            _ => {
                let (header, rows) = table(artifact).expect("tabular");
                let mut out = String::new();
                md_table(&mut out, header, &rows);
                out
            }
        }),
        Format::Csv => {
            let Some((header, rows)) = table(artifact) else {
                return Err(Diagnostic::at(
                    Code::FormatUnsupported,
                    artifact.name(),
                    format!("{} is not tabular; use md or structured", artifact.name()),
                ));
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header).expect("in-memory write");
            for row in rows {
                w.write_record(&row).expect("in-memory write");
            }
            Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input"))
        }
    }
}

/// Read back a structured rendering.
pub fn parse_artifact(text: &str) -> Result<Artifact, Diagnostics> {
    serde_json::from_str(text).map_err(|e| {
        let loc = Location::line(e.line().max(1), e.column());
        Diagnostics::single(Diagnostic::new(Code::Syntax, loc, e.to_string()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_tier_table_csv_is_header_only() {
        let csv = render_report(&Artifact::TierTable(vec![]), Format::Csv).unwrap();
        assert_eq!(csv, "Study_ID,Methods_Summary,Evidence_Type,Strengths,Limitations\n");
    }

    #[test]
    fn reviewer_block_has_no_csv() {
        let b = ReviewerBlock::empty(crate::id::Identifier::child("C", "p"));
        assert_eq!(render_report(&Artifact::ReviewerBlock(b), Format::Csv).unwrap_err().code, Code::FormatUnsupported);
    }

    #[test]
    fn markdown_escapes_pipes() {
        assert_eq!(md_cell("a|b\nc"), "a\\|b<br>c");
    }
}
