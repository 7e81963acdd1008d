//! Report rendering and crash-safe file output.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use qaprec::RateReport;

/// An I/O failure tied to the path it happened on.
#[derive(Debug)]
pub struct OutputError {
    path: PathBuf,
    source: std::io::Error,
}

impl OutputError {
    pub fn new(path: &Path, source: std::io::Error) -> Self {
        Self { path: path.to_path_buf(), source }
    }
}

impl fmt::Display for OutputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for OutputError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Current UTC time, RFC 3339 with second precision.
pub fn timestamp() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

/// CSV report, preceded by a `# generated <time>` comment line when stamped.
pub fn csv_with_stamp(report: &RateReport, stamp: Option<&str>) -> String {
    let body = report.to_csv();
    match stamp {
        Some(t) => format!("# generated {t}\n{body}"),
        None => body,
    }
}

/// JSON report with an extra top-level `generated` field when stamped.
pub fn json_with_stamp(report: &RateReport, stamp: Option<&str>) -> String {
    let text = match stamp {
        None => report.to_json(),
        Some(t) => {
            let mut value = serde_json::to_value(report).expect("report is always serializable");
            if let Some(obj) = value.as_object_mut() {
                obj.insert("generated".into(), serde_json::Value::String(t.into()));
            }
            serde_json::to_string_pretty(&value).expect("value is always serializable")
        }
    };
    text + "\n"
}

/// Write through a temporary file in the destination directory, then rename,
/// so readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let err = |e| OutputError::new(path, e);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}
