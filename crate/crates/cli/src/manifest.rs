use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const COLUMNS: [&str; 5] = [
    "method_id",
    "subject_id",
    "scanner_id",
    "reference_path",
    "prediction_path",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row {
    pub method_id: String,
    pub subject_id: String,
    pub scanner_id: String,
    pub reference_path: PathBuf,
    pub prediction_path: PathBuf,
}

/// Reads a manifest; relative paths are resolved against its directory.
pub fn read(path: &Path) -> Result<Vec<Row>> {
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("opening manifest {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    for column in COLUMNS {
        if !headers.iter().any(|h| h == column) {
            bail!("{}: missing column `{column}`", path.display());
        }
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (k, record) in rdr.deserialize::<Row>().enumerate() {
        // Header is line 1.
        let line = k + 2;
        let mut row = record.with_context(|| format!("{}: line {line}", path.display()))?;
        if !seen.insert((row.method_id.clone(), row.subject_id.clone())) {
            bail!(
                "{}: line {line}: duplicate (method_id, subject_id) = ({}, {})",
                path.display(),
                row.method_id,
                row.subject_id
            );
        }
        row.reference_path = base.join(&row.reference_path);
        row.prediction_path = base.join(&row.prediction_path);
        rows.push(row);
    }
    Ok(rows)
}

pub fn write(rows: &[Row], path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
