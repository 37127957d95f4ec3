use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use logtauber_core::model::Abscissa;

/// 17 significant digits, `.` decimal point, independent of locale.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn abscissa(x: &Abscissa) -> String {
    match x {
        Abscissa::T(t) => num(*t),
        Abscissa::LogT(v) => num(*v),
        Abscissa::N(n) => n.to_string(),
    }
}

/// CSV text with leading `#` comment lines.
pub struct Table {
    comments: Vec<String>,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Table> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Table {
            comments: Vec::new(),
            writer,
        })
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for c in &self.comments {
            writeln!(out, "# {c}")?;
        }
        out.extend(self.writer.into_inner().context("flushing csv")?);
        Ok(out)
    }
}

/// Writes to `path` through a temporary file in the same directory, so a
/// failed run never leaves a partial file behind. `None` means stdout.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    let Some(path) = path else {
        std::io::stdout().write_all(bytes)?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
