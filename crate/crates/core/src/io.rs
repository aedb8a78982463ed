use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{FmmError, Result};

/// Writes a file via a temporary sibling and a rename, so readers never see
/// a partially written file.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| FmmError::io(dir, e))?;
    let mut w = BufWriter::new(tmp);
    body(&mut w).map_err(|e| FmmError::io(path, e))?;
    let tmp = w
        .into_inner()
        .map_err(|e| FmmError::io(path, e.into_error()))?;
    tmp.as_file().sync_all().map_err(|e| FmmError::io(path, e))?;
    tmp.persist(path).map_err(|e| FmmError::io(path, e.error))?;
    Ok(())
}

/// Formats an optional metric for CSV output, using `NA` for missing or
/// non-finite values.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:e}"),
        _ => "NA".to_string(),
    }
}
