use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::Failure;

pub const CSV_DIGITS: usize = 12;

pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        cvkit::estimate::format_significant(v, CSV_DIGITS)
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Rows joined with `,`; fields are plain numbers or identifiers, so no quoting.
pub fn csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Writes to `out`, replacing any existing file only once the new content
/// is complete, or prints to stdout.
pub fn emit(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    let Some(path) = out else {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(content.as_bytes())?;
        return Ok(stdout.flush()?);
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Failure::usage(format!("cannot write to {}: {e}", dir.display())))?;
    tmp.write_all(content.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Failure::usage(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}
