use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PreprocessStats;
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Mortality horizon of an outcome label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Horizon {
    #[serde(rename = "30d")]
    D30,
    #[serde(rename = "60d")]
    D60,
    #[serde(rename = "90d")]
    D90,
    #[serde(rename = "365d", alias = "1y")]
    D365,
}

impl Horizon {
    pub const ALL: [Horizon; 4] = [Horizon::D30, Horizon::D60, Horizon::D90, Horizon::D365];

    pub fn as_str(self) -> &'static str {
        match self {
            Horizon::D30 => "30d",
            Horizon::D60 => "60d",
            Horizon::D90 => "90d",
            Horizon::D365 => "365d",
        }
    }

    /// Column name used in matrix CSVs.
    pub fn label_column(self) -> String {
        format!("mortality_{}", self.as_str())
    }

    /// Human-readable task name used in reports.
    pub fn task_name(self) -> &'static str {
        match self {
            Horizon::D30 => "30-day mortality",
            Horizon::D60 => "60-day mortality",
            Horizon::D90 => "90-day mortality",
            Horizon::D365 => "1-year mortality",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.strip_prefix("mortality_").unwrap_or(s);
        match key {
            "30d" => Ok(Horizon::D30),
            "60d" => Ok(Horizon::D60),
            "90d" => Ok(Horizon::D90),
            "365d" | "1y" => Ok(Horizon::D365),
            _ => Err(Error::Parse {
                what: "horizon".into(),
                detail: format!("{s:?} (expected 30d, 60d, 90d or 365d)"),
            }),
        }
    }
}

/// Patient-level analysis table: one row per patient, no missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub values: Matrix,
    pub group_column: Option<String>,
    pub groups: Option<Vec<String>>,
    /// 0 = alive, 1 = deceased.
    pub labels: BTreeMap<Horizon, Vec<u8>>,
}

/// JSON sidecar written next to a matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSidecar {
    pub id_column: String,
    pub group_column: Option<String>,
    pub label_columns: BTreeMap<Horizon, String>,
    pub feature_columns: Vec<String>,
    pub normalization: Option<PreprocessStats>,
}

impl FeatureMatrix {
    pub fn new(
        ids: Vec<String>,
        feature_names: Vec<String>,
        values: Matrix,
        group_column: Option<String>,
        groups: Option<Vec<String>>,
        labels: BTreeMap<Horizon, Vec<u8>>,
    ) -> Result<Self> {
        let n = ids.len();
        if values.rows() != n || values.cols() != feature_names.len() {
            return Err(Error::dims(
                "FeatureMatrix::new",
                format!(
                    "{n} ids and {} names for a {:?} matrix",
                    feature_names.len(),
                    values.shape()
                ),
            ));
        }
        if let Some(g) = &groups {
            if g.len() != n {
                return Err(Error::LengthMismatch { left: n, right: g.len() });
            }
        }
        for (h, l) in &labels {
            if l.len() != n {
                return Err(Error::LengthMismatch { left: n, right: l.len() });
            }
            if let Some(bad) = l.iter().find(|&&v| v > 1) {
                return Err(Error::Parse {
                    what: h.label_column(),
                    detail: format!("label {bad} is not 0/1"),
                });
            }
        }
        if !values.all_finite() {
            return Err(Error::InvalidConfig("feature matrix has non-finite values".into()));
        }
        Ok(Self {
            ids,
            feature_names,
            values,
            group_column,
            groups,
            labels,
        })
    }

    pub fn n_patients(&self) -> usize {
        self.ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn labels_for(&self, h: Horizon) -> Result<&[u8]> {
        self.labels
            .get(&h)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(h.label_column()))
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values: self.values.select_rows(rows),
            group_column: self.group_column.clone(),
            groups: self
                .groups
                .as_ref()
                .map(|g| rows.iter().map(|&r| g[r].clone()).collect()),
            labels: self
                .labels
                .iter()
                .map(|(h, l)| (*h, rows.iter().map(|&r| l[r]).collect()))
                .collect(),
        }
    }

    /// Appends columns (e.g. topic weights) to the right of the features.
    pub fn append_features(&self, names: Vec<String>, extra: &Matrix) -> Result<FeatureMatrix> {
        if extra.cols() != names.len() {
            return Err(Error::dims(
                "append_features",
                format!("{} names for {} columns", names.len(), extra.cols()),
            ));
        }
        let mut feature_names = self.feature_names.clone();
        feature_names.extend(names);
        FeatureMatrix::new(
            self.ids.clone(),
            feature_names,
            self.values.hstack(extra)?,
            self.group_column.clone(),
            self.groups.clone(),
            self.labels.clone(),
        )
    }

    pub fn sidecar(&self, normalization: Option<PreprocessStats>) -> MatrixSidecar {
        MatrixSidecar {
            id_column: "patient_id".into(),
            group_column: self.group_column.clone(),
            label_columns: self.labels.keys().map(|h| (*h, h.label_column())).collect(),
            feature_columns: self.feature_names.clone(),
            normalization,
        }
    }

    /// Writes `csv_path` plus a JSON sidecar. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn write(
        &self,
        csv_path: &Path,
        sidecar_path: &Path,
        normalization: Option<PreprocessStats>,
    ) -> Result<()> {
        let sidecar = self.sidecar(normalization);
        let mut w = csv::Writer::from_path(csv_path)?;
        let mut header = vec![sidecar.id_column.clone()];
        if let Some(g) = &sidecar.group_column {
            header.push(g.clone());
        }
        header.extend(sidecar.label_columns.values().cloned());
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        for (i, id) in self.ids.iter().enumerate() {
            rec.clear();
            rec.push(id.clone());
            if let Some(g) = &self.groups {
                rec.push(g[i].clone());
            }
            for l in self.labels.values() {
                rec.push(l[i].to_string());
            }
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        std::fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        Ok(())
    }

    /// Reads a matrix CSV written by [`FeatureMatrix::write`].
    pub fn read(csv_path: &Path, sidecar_path: &Path) -> Result<(FeatureMatrix, MatrixSidecar)> {
        let sidecar: MatrixSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
        let mut r = csv::Reader::from_path(csv_path)?;
        let headers = r.headers()?.clone();
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let id_idx = find(&sidecar.id_column)?;
        let group_idx = sidecar.group_column.as_deref().map(find).transpose()?;
        let label_idx: Vec<(Horizon, usize)> = sidecar
            .label_columns
            .iter()
            .map(|(h, c)| find(c).map(|i| (*h, i)))
            .collect::<Result<_>>()?;
        let feat_idx: Vec<usize> = sidecar
            .feature_columns
            .iter()
            .map(|c| find(c))
            .collect::<Result<_>>()?;

        let mut ids = Vec::new();
        let mut groups = Vec::new();
        let mut labels: BTreeMap<Horizon, Vec<u8>> =
            label_idx.iter().map(|(h, _)| (*h, Vec::new())).collect();
        let mut data = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let cell = |i: usize| rec.get(i).unwrap_or("");
            ids.push(cell(id_idx).to_string());
            if let Some(g) = group_idx {
                groups.push(cell(g).to_string());
            }
            for (h, i) in &label_idx {
                let v = cell(*i).parse::<u8>().map_err(|e| Error::Parse {
                    what: format!("{} row {}", h.label_column(), row + 2),
                    detail: e.to_string(),
                })?;
                labels.get_mut(h).expect("initialised").push(v);
            }
            for &i in &feat_idx {
                let s = cell(i);
                data.push(s.parse::<f64>().map_err(|e| Error::Parse {
                    what: format!("`{}` row {}", &headers[i], row + 2),
                    detail: format!("{s:?}: {e}"),
                })?);
            }
        }
        let values = Matrix::new(ids.len(), feat_idx.len(), data)?;
        let fm = FeatureMatrix::new(
            ids,
            sidecar.feature_columns.clone(),
            values,
            sidecar.group_column.clone(),
            group_idx.map(|_| groups),
            labels,
        )?;
        Ok((fm, sidecar))
    }
}

/// Sidecar path convention: `x.csv` → `x.json`.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_parsing() {
        assert_eq!("30d".parse::<Horizon>().unwrap(), Horizon::D30);
        assert_eq!("mortality_365d".parse::<Horizon>().unwrap(), Horizon::D365);
        assert!("7d".parse::<Horizon>().is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let values = Matrix::from_rows(&[[0.1, -1.0 / 3.0], [1e-300, 2.5e17]]).unwrap();
        let labels = [(Horizon::D30, vec![0, 1]), (Horizon::D365, vec![1, 1])]
            .into_iter()
            .collect();
        let fm = FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y=z".into()],
            values,
            Some("gender".into()),
            Some(vec!["female".into(), "male".into()]),
            labels,
        )
        .unwrap();
        let csv = dir.path().join("m.csv");
        fm.write(&csv, &sidecar_path(&csv), None).unwrap();
        let (back, sidecar) = FeatureMatrix::read(&csv, &sidecar_path(&csv)).unwrap();
        assert_eq!(back, fm);
        assert_eq!(sidecar.group_column.as_deref(), Some("gender"));
    }

    #[test]
    fn rejects_non_binary_labels() {
        let labels = [(Horizon::D30, vec![2])].into_iter().collect();
        let r = FeatureMatrix::new(
            vec!["a".into()],
            vec!["x".into()],
            Matrix::zeros(1, 1),
            None,
            None,
            labels,
        );
        assert!(r.is_err());
    }
}
