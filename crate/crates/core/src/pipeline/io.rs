use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::preprocess::{sidecar_path, FeatureMatrix, MatrixSidecar};
use crate::textmodel::Note;

/// Patient ids with their representation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub ids: Vec<String>,
    pub values: Matrix,
}

pub fn rep_column(j: usize) -> String {
    format!("z_{j:02}")
}

impl Representation {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["patient_id".to_string()];
        header.extend((0..self.values.cols()).map(rep_column));
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("patient_id") {
            return Err(Error::MissingColumn("patient_id".into()));
        }
        let width = headers.len() - 1;
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            ids.push(rec.get(0).unwrap_or("").to_string());
            for j in 1..=width {
                let s = rec.get(j).unwrap_or("");
                data.push(s.parse::<f64>().map_err(|e| Error::Parse {
                    what: format!("{} row {}", path.display(), row + 2),
                    detail: format!("{s:?}: {e}"),
                })?);
            }
        }
        Ok(Self {
            values: Matrix::new(ids.len(), width, data)?,
            ids,
        })
    }

    /// Rows reordered to follow `ids`; every id must be present.
    pub fn aligned_to(&self, ids: &[String]) -> Result<Matrix> {
        let index: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let rows: Vec<usize> = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidConfig(format!("patient `{id}` has no representation row")))
            })
            .collect::<Result<_>>()?;
        Ok(self.values.select_rows(&rows))
    }
}

pub fn read_matrix(csv: &Path) -> Result<(FeatureMatrix, MatrixSidecar)> {
    FeatureMatrix::read(csv, &sidecar_path(csv))
}

pub fn write_notes_jsonl(path: &Path, notes: &[Note]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for n in notes {
        serde_json::to_writer(&mut w, n)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

/// File stem up to the first dot: `out/fpm.reps.csv` → `fpm`.
pub fn base_name(path: &Path) -> String {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}
