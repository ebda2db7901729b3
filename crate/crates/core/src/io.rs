//! CSV helpers and the provenance stamp written at the top of every artifact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Provenance line (`# config=<hash> seed=<seed>`) prefixed to generated files.
///
/// Readers in this crate skip lines starting with `#`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    pub fn comment_line(&self) -> String {
        format!("# config={} seed={}\n", self.config_hash, self.seed)
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::MissingFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(file))
}

pub(crate) fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        message: err.to_string(),
    }
}

pub(crate) fn expect_header(
    reader: &mut csv::Reader<fs::File>,
    path: &Path,
    expected: &[&str],
) -> Result<csv::StringRecord> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let ok = header.len() >= expected.len() && expected.iter().zip(header.iter()).all(|(e, h)| h.trim() == *e);
    if !ok {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: header.position().map(|p| p.line()).unwrap_or(1),
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(header)
}
