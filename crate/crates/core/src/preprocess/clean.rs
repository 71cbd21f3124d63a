//! Structured-table cleaning: missingness filter, imputation, z-scoring,
//! one-hot expansion and per-patient encounter aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::features::{FeatureMatrix, Horizon};
use super::table::{Column, ColumnData, ColumnKind, RawTable};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub const DEFAULT_MISSINGNESS_THRESHOLD: f64 = 0.70;

// Fractions such as 7/10 and 21/30 should compare equal to 0.7.
const FRACTION_SLACK: f64 = 1e-12;

/// Drops feature columns whose non-missing fraction is below `threshold`.
/// A column exactly at the threshold is kept.
pub fn filter_missingness(t: &RawTable, threshold: f64) -> Result<RawTable> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "missingness threshold {threshold} outside (0, 1]"
        )));
    }
    let had_features = t.feature_columns().next().is_some();
    let columns: Vec<Column> = t
        .columns
        .iter()
        .filter(|c| !c.is_feature() || c.present_fraction() + FRACTION_SLACK >= threshold)
        .cloned()
        .collect();
    if had_features && !columns.iter().any(Column::is_feature) {
        return Err(Error::EmptyResult(format!(
            "no feature column is at least {:.0}% present",
            threshold * 100.0
        )));
    }
    RawTable::new(t.id_column.clone(), t.ids.clone(), columns)
}

/// Fill values learned from a training table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Imputation {
    pub medians: BTreeMap<String, f64>,
    pub modes: BTreeMap<String, String>,
}

impl Imputation {
    /// Column medians for numeric features (mean of the middle pair for even
    /// counts) and modes for categorical features (ties go to the
    /// lexicographically smallest value).
    pub fn fit(t: &RawTable) -> Result<Self> {
        let mut out = Imputation::default();
        for c in t.feature_columns() {
            match &c.data {
                ColumnData::Numeric(v) => {
                    let present: Vec<f64> = v.iter().flatten().copied().collect();
                    let m = median(present).ok_or_else(|| Error::AllMissingColumn(c.name.clone()))?;
                    out.medians.insert(c.name.clone(), m);
                }
                ColumnData::Categorical(v) => {
                    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                    for s in v.iter().flatten() {
                        *counts.entry(s.as_str()).or_default() += 1;
                    }
                    let mode = counts
                        .iter()
                        .fold(None::<(&str, usize)>, |best, (&k, &n)| match best {
                            Some((_, bn)) if bn >= n => best,
                            _ => Some((k, n)),
                        })
                        .ok_or_else(|| Error::AllMissingColumn(c.name.clone()))?;
                    out.modes.insert(c.name.clone(), mode.0.to_string());
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, t: &RawTable) -> Result<RawTable> {
        let mut columns = Vec::with_capacity(t.columns.len());
        for c in &t.columns {
            let data = match (&c.data, c.is_feature()) {
                (ColumnData::Numeric(v), true) => {
                    let m = *self
                        .medians
                        .get(&c.name)
                        .ok_or_else(|| Error::MissingColumn(c.name.clone()))?;
                    ColumnData::Numeric(v.iter().map(|x| Some(x.unwrap_or(m))).collect())
                }
                (ColumnData::Categorical(v), true) => {
                    let m = self
                        .modes
                        .get(&c.name)
                        .ok_or_else(|| Error::MissingColumn(c.name.clone()))?;
                    ColumnData::Categorical(
                        v.iter()
                            .map(|x| Some(x.clone().unwrap_or_else(|| m.clone())))
                            .collect(),
                    )
                }
                (d, false) => d.clone(),
            };
            columns.push(Column {
                name: c.name.clone(),
                kind: c.kind,
                data,
            });
        }
        RawTable::new(t.id_column.clone(), t.ids.clone(), columns)
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Replaces missing numeric cells with the column median and missing
/// categorical cells with the column mode.
pub fn impute_median(t: &RawTable) -> Result<RawTable> {
    Imputation::fit(t)?.apply(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation; 0 marks a constant column.
    pub std: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub columns: Vec<ColumnStats>,
}

impl NormStats {
    pub fn fit(t: &RawTable) -> Result<Self> {
        let mut columns = Vec::new();
        for c in t.feature_columns() {
            if let ColumnData::Numeric(v) = &c.data {
                let vals: Vec<f64> = v
                    .iter()
                    .map(|x| x.ok_or_else(|| Error::InvalidParams(format!("`{}` still has missing cells", c.name))))
                    .collect::<Result<_>>()?;
                let n = vals.len().max(1) as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let mut std = var.sqrt();
                // Residual spread from summation rounding is not signal.
                if std <= 1e-12 * (1.0 + mean.abs()) {
                    std = 0.0;
                }
                columns.push(ColumnStats {
                    name: c.name.clone(),
                    mean,
                    std,
                });
            }
        }
        Ok(Self { columns })
    }

    pub fn apply(&self, t: &RawTable) -> Result<RawTable> {
        let by_name: HashMap<&str, &ColumnStats> =
            self.columns.iter().map(|s| (s.name.as_str(), s)).collect();
        let mut columns = Vec::with_capacity(t.columns.len());
        for c in &t.columns {
            let data = match (&c.data, c.is_feature()) {
                (ColumnData::Numeric(v), true) => {
                    let s = by_name
                        .get(c.name.as_str())
                        .ok_or_else(|| Error::MissingColumn(c.name.clone()))?;
                    ColumnData::Numeric(
                        v.iter()
                            .map(|x| {
                                x.map(|x| if s.std == 0.0 { 0.0 } else { (x - s.mean) / s.std })
                            })
                            .collect(),
                    )
                }
                (d, _) => d.clone(),
            };
            columns.push(Column {
                name: c.name.clone(),
                kind: c.kind,
                data,
            });
        }
        RawTable::new(t.id_column.clone(), t.ids.clone(), columns)
    }
}

/// Standardises numeric feature columns to mean 0 and unit population
/// standard deviation; constant columns become all zeros.
pub fn zscore_normalize(t: &RawTable) -> Result<(RawTable, NormStats)> {
    let stats = NormStats::fit(t)?;
    Ok((stats.apply(t)?, stats))
}

/// Observed levels per categorical feature, sorted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryLevels {
    pub levels: BTreeMap<String, Vec<String>>,
}

impl CategoryLevels {
    pub fn fit(t: &RawTable) -> Self {
        let mut levels = BTreeMap::new();
        for c in t.feature_columns() {
            if let ColumnData::Categorical(v) = &c.data {
                let set: BTreeSet<&String> = v.iter().flatten().collect();
                levels.insert(c.name.clone(), set.into_iter().cloned().collect());
            }
        }
        Self { levels }
    }

    /// Expands each categorical feature in place into `<col>=<value>`
    /// indicator columns. Values not seen at fit time get all zeros.
    pub fn apply(&self, t: &RawTable) -> Result<RawTable> {
        let mut columns = Vec::new();
        for c in &t.columns {
            match (&c.data, c.is_feature()) {
                (ColumnData::Categorical(v), true) => {
                    let levels = self
                        .levels
                        .get(&c.name)
                        .ok_or_else(|| Error::MissingColumn(c.name.clone()))?;
                    for level in levels {
                        let ind = v
                            .iter()
                            .map(|x| x.as_ref().map(|x| if x == level { 1.0 } else { 0.0 }))
                            .collect();
                        columns.push(Column::numeric(format!("{}={}", c.name, level), ind));
                    }
                }
                _ => columns.push(c.clone()),
            }
        }
        RawTable::new(t.id_column.clone(), t.ids.clone(), columns)
    }
}

pub fn one_hot_encode(t: &RawTable) -> Result<RawTable> {
    CategoryLevels::fit(t).apply(t)
}

/// Collapses encounter rows into one row per patient, in order of first
/// appearance. Numeric features and labels take the mean and maximum over
/// present values; the group keeps its first present value.
pub fn aggregate_encounters(t: &RawTable) -> Result<RawTable> {
    if let Some(c) = t.feature_columns().find(|c| matches!(c.data, ColumnData::Categorical(_))) {
        return Err(Error::InvalidParams(format!(
            "aggregate_encounters needs numeric features; `{}` is categorical (one-hot first)",
            c.name
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows_of: HashMap<&str, Vec<usize>> = HashMap::new();
    for (r, id) in t.ids.iter().enumerate() {
        rows_of
            .entry(id.as_str())
            .or_insert_with(|| {
                order.push(id.clone());
                Vec::new()
            })
            .push(r);
    }
    let mut columns = Vec::with_capacity(t.columns.len());
    for c in &t.columns {
        let data = match &c.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(
                order
                    .iter()
                    .map(|id| {
                        let present = rows_of[id.as_str()].iter().filter_map(|&r| v[r]);
                        if c.kind == ColumnKind::Label {
                            present.reduce(f64::max)
                        } else {
                            let (s, n) = present.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
                            (n > 0).then(|| s / n as f64)
                        }
                    })
                    .collect(),
            ),
            ColumnData::Categorical(v) => ColumnData::Categorical(
                order
                    .iter()
                    .map(|id| rows_of[id.as_str()].iter().find_map(|&r| v[r].clone()))
                    .collect(),
            ),
        };
        columns.push(Column {
            name: c.name.clone(),
            kind: c.kind,
            data,
        });
    }
    RawTable::new(t.id_column.clone(), order, columns)
}

/// Everything learned while cleaning a training table, enough to apply the
/// identical transform to held-out rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessStats {
    pub missingness_threshold: f64,
    pub kept_columns: Vec<String>,
    pub imputation: Imputation,
    pub normalization: NormStats,
    pub categories: CategoryLevels,
}

/// Fits and applies filter → impute → z-score → one-hot → aggregate.
pub fn fit_transform(t: &RawTable, threshold: f64) -> Result<(FeatureMatrix, PreprocessStats)> {
    let filtered = filter_missingness(t, threshold)?;
    let imputation = Imputation::fit(&filtered)?;
    let imputed = imputation.apply(&filtered)?;
    let (normalized, normalization) = zscore_normalize(&imputed)?;
    let categories = CategoryLevels::fit(&normalized);
    let encoded = categories.apply(&normalized)?;
    let aggregated = aggregate_encounters(&encoded)?;
    let stats = PreprocessStats {
        missingness_threshold: threshold,
        kept_columns: filtered.feature_columns().map(|c| c.name.clone()).collect(),
        imputation,
        normalization,
        categories,
    };
    Ok((table_to_matrix(&aggregated)?, stats))
}

/// Applies previously fitted statistics without refitting anything.
pub fn transform(t: &RawTable, stats: &PreprocessStats) -> Result<FeatureMatrix> {
    let mut columns = Vec::new();
    for name in &stats.kept_columns {
        let c = t
            .column(name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        columns.push(c.clone());
    }
    columns.extend(t.columns.iter().filter(|c| !c.is_feature()).cloned());
    let selected = RawTable::new(t.id_column.clone(), t.ids.clone(), columns)?;
    let imputed = stats.imputation.apply(&selected)?;
    let normalized = stats.normalization.apply(&imputed)?;
    let encoded = stats.categories.apply(&normalized)?;
    table_to_matrix(&aggregate_encounters(&encoded)?)
}

/// Converts a patient-level numeric table into a [`FeatureMatrix`]. Label
/// columns must be named after a horizon (`mortality_30d` or `30d`).
pub fn table_to_matrix(t: &RawTable) -> Result<FeatureMatrix> {
    let n = t.n_rows();
    let mut names = Vec::new();
    let mut cols: Vec<&Vec<Option<f64>>> = Vec::new();
    let mut group_column = None;
    let mut groups = None;
    let mut labels = BTreeMap::new();
    for c in &t.columns {
        match (c.kind, &c.data) {
            (ColumnKind::Group, ColumnData::Categorical(v)) => {
                if group_column.is_some() {
                    return Err(Error::InvalidConfig("more than one group column".into()));
                }
                let g: Vec<String> = v
                    .iter()
                    .map(|x| x.clone().ok_or_else(|| Error::AllMissingColumn(c.name.clone())))
                    .collect::<Result<_>>()?;
                group_column = Some(c.name.clone());
                groups = Some(g);
            }
            (ColumnKind::Label, ColumnData::Numeric(v)) => {
                let h: Horizon = c.name.parse()?;
                let l = v
                    .iter()
                    .map(|x| match x {
                        Some(x) if *x == 0.0 => Ok(0u8),
                        Some(x) if *x == 1.0 => Ok(1u8),
                        other => Err(Error::Parse {
                            what: c.name.clone(),
                            detail: format!("label {other:?} is not 0/1"),
                        }),
                    })
                    .collect::<Result<Vec<u8>>>()?;
                labels.insert(h, l);
            }
            (ColumnKind::Numeric, ColumnData::Numeric(v)) => {
                names.push(c.name.clone());
                cols.push(v);
            }
            _ => {
                return Err(Error::InvalidParams(format!(
                    "column `{}` cannot be placed in a feature matrix",
                    c.name
                )))
            }
        }
    }
    let mut values = Matrix::zeros(n, names.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            let x = x.ok_or_else(|| Error::InvalidParams(format!("`{}` has missing cells", names[j])))?;
            values.set(i, j, x);
        }
    }
    FeatureMatrix::new(t.ids.clone(), names, values, group_column, groups, labels)
}
