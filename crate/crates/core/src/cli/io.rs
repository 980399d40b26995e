use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::bundle::{parse_bundle, serialize_bundle, ParsedBundle, ProjectBundle};
use crate::diag::{Code, Diagnostic, Diagnostics, Location, Severity};

/// An advisory lock held next to the bundle while a mutating command runs.
pub struct BundleLock {
    path: PathBuf,
}

impl BundleLock {
    pub fn acquire(bundle: &Path) -> Result<Self, String> {
        let mut name = bundle.as_os_str().to_owned();
        name.push(".lock");
        let path = PathBuf::from(name);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(BundleLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                Err(format!("{} is locked by another process (remove {} if stale)", bundle.display(), path.display()))
            }
            Err(e) => Err(format!("cannot lock {}: {e}", bundle.display())),
        }
    }
}

impl Drop for BundleLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Replace the bundle file with the serialized bundle: write a sibling
/// temporary file, flush it, then rename it over the original.
pub fn write_atomic(path: &Path, bundle: &ProjectBundle) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(serialize_bundle(bundle).as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, Diagnostics> {
    fs::read_to_string(path).map_err(|e| {
        Diagnostic::new(Code::Syntax, Location::path(path.display().to_string()), format!("cannot read: {e}")).into()
    })
}

pub fn load(path: &Path) -> Result<ParsedBundle, Diagnostics> {
    parse_bundle(&read_text(path)?)
}

/// Renders diagnostics one per line, colored when enabled.
pub struct Printer {
    pub color: bool,
}

impl Printer {
    pub fn line(&self, d: &Diagnostic) -> String {
        let code = d.code.as_str();
        let code = if self.color {
            let c = match d.severity {
                Severity::Critical => "1;31",
                Severity::Error => "31",
                Severity::Warning => "33",
            };
            format!("\x1b[{c}m{code}\x1b[0m")
        } else {
            code.to_string()
        };
        format!("{code} {} {} ({})", d.location, d.message, d.code.governs())
    }

    pub fn all(&self, out: &mut dyn Write, diags: &[Diagnostic]) {
        for d in diags {
            let _ = writeln!(out, "{}", self.line(d));
        }
    }
}
