//! Atomic file output: write into a temporary file next to the target, then rename.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

fn out_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_atomic(
    path: &Path,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| out_err(dir, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| out_err(path, e))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        f(&mut w).map_err(|e| out_err(path, e))?;
        w.flush().map_err(|e| out_err(path, e))?;
    }
    tmp.persist(path).map_err(|e| out_err(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// Rows of already formatted CSV fields under `header`.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    })
}
