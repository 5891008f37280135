use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// A CSV file with one leading `# ...` line carrying the resolved config.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDoc {
    pub comment: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn new(comment: &str, header: &[&str]) -> Self {
        CsvDoc {
            comment: comment.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(out, "# {}", self.comment)?;
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }

    pub fn parse(bytes: &[u8]) -> CliResult<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| CliError::Validation(e.to_string()))?;
        let (first, rest) = text
            .split_once('\n')
            .ok_or_else(|| CliError::Validation("missing config header line".into()))?;
        let comment = first
            .strip_prefix("# ")
            .ok_or_else(|| CliError::Validation("first line must be a `# ` config header".into()))?;
        let mut r = csv::Reader::from_reader(rest.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(CsvDoc {
            comment: comment.to_string(),
            header,
            rows,
        })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

/// Prepends the config line to CSV produced elsewhere.
pub fn with_comment(comment: &str, csv: &[u8]) -> Vec<u8> {
    let mut out = format!("# {comment}\n").into_bytes();
    out.extend_from_slice(csv);
    out
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn num(v: f64) -> String {
    v.to_string()
}
