use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Uniform,
    InverseFrequency,
    KamiranCalders,
}

/// What the inverse-frequency class of a patient is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightBy {
    #[default]
    Group,
    Label,
    #[serde(rename = "group×label", alias = "group-label", alias = "groupxlabel")]
    GroupLabel,
}

impl std::str::FromStr for WeightBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "group" => Ok(Self::Group),
            "label" => Ok(Self::Label),
            "group×label" | "group-label" | "groupxlabel" => Ok(Self::GroupLabel),
            other => Err(Error::InvalidConfig(format!("unknown weight-by `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights {
    pub values: Vec<f64>,
    pub scheme: WeightScheme,
    pub normalized: bool,
}

impl SampleWeights {
    pub fn uniform(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
            scheme: WeightScheme::Uniform,
            normalized: true,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn counts<K: Ord + Clone>(keys: impl Iterator<Item = K>) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// w_i = N / n_{c(i)}; normalised, w_i = N / (G · n_{c(i)}) so the mean is 1.
pub fn inverse_frequency_weights<S: AsRef<str>>(classes: &[S], normalize: bool) -> Result<SampleWeights> {
    if classes.is_empty() {
        return Err(Error::EmptyGroup("<no samples>".into()));
    }
    let n = classes.len() as f64;
    let c = counts(classes.iter().map(|s| s.as_ref()));
    let g = if normalize { c.len() as f64 } else { 1.0 };
    let values = classes
        .iter()
        .map(|s| n / (g * c[s.as_ref()] as f64))
        .collect();
    Ok(SampleWeights {
        values,
        scheme: WeightScheme::InverseFrequency,
        normalized: normalize,
    })
}

/// As [`inverse_frequency_weights`], failing when a declared level has no
/// members.
pub fn inverse_frequency_weights_with_levels<S: AsRef<str>>(
    classes: &[S],
    levels: &[String],
    normalize: bool,
) -> Result<SampleWeights> {
    let c = counts(classes.iter().map(|s| s.as_ref()));
    if let Some(missing) = levels.iter().find(|l| !c.contains_key(l.as_str())) {
        return Err(Error::EmptyGroup(missing.clone()));
    }
    inverse_frequency_weights(classes, normalize)
}

/// Class key of each patient under a weight-by choice.
pub fn class_keys<S: AsRef<str>>(by: WeightBy, groups: &[S], labels: &[u8]) -> Result<Vec<String>> {
    if groups.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: groups.len(),
            right: labels.len(),
        });
    }
    Ok(groups
        .iter()
        .zip(labels)
        .map(|(g, y)| match by {
            WeightBy::Group => g.as_ref().to_string(),
            WeightBy::Label => y.to_string(),
            WeightBy::GroupLabel => format!("{}|{y}", g.as_ref()),
        })
        .collect())
}

/// w_i = P(y_i) / P(y_i | s_i) = n_y · n_s / (N · n_{s,y}); not normalised.
pub fn kamiran_calders_weights<S: AsRef<str>>(labels: &[u8], groups: &[S]) -> Result<SampleWeights> {
    if labels.len() != groups.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: groups.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyGroup("<no samples>".into()));
    }
    let n = labels.len() as f64;
    let n_y = counts(labels.iter().copied());
    let n_s = counts(groups.iter().map(|s| s.as_ref()));
    let n_sy = counts(groups.iter().map(|s| s.as_ref()).zip(labels.iter().copied()));
    for &s in n_s.keys() {
        for &y in n_y.keys() {
            if !n_sy.contains_key(&(s, y)) {
                return Err(Error::EmptyCell {
                    group: s.to_string(),
                    label: y,
                });
            }
        }
    }
    let values = labels
        .iter()
        .zip(groups)
        .map(|(&y, s)| {
            let s = s.as_ref();
            (n_y[&y] as f64 * n_s[s] as f64) / (n * n_sy[&(s, y)] as f64)
        })
        .collect();
    Ok(SampleWeights {
        values,
        scheme: WeightScheme::KamiranCalders,
        normalized: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_four_fifty_six() {
        let mut g = vec!["female"; 44];
        g.extend(vec!["male"; 56]);
        let w = inverse_frequency_weights(&g, true).unwrap();
        assert!((w.values[0] - 1.13636).abs() < 1e-5);
        assert!((w.values[99] - 0.892857).abs() < 1e-6);
        assert!((w.mean() - 1.0).abs() < 1e-12);
        let raw = inverse_frequency_weights(&g, false).unwrap();
        assert!((raw.values[0] - 100.0 / 44.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_and_single_group() {
        let g: Vec<&str> = (0..10).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
        assert!(inverse_frequency_weights(&g, true).unwrap().values.iter().all(|&w| w == 1.0));
        assert!(inverse_frequency_weights(&["x"; 7], true).unwrap().values.iter().all(|&w| w == 1.0));
        let levels = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        assert!(matches!(
            inverse_frequency_weights_with_levels(&g, &levels, true),
            Err(Error::EmptyGroup(l)) if l == "c"
        ));
    }

    #[test]
    fn kc_by_hand() {
        // Overall P(y=1) = 0.5; group A has P(y=1|A) = 0.25.
        let groups = ["A", "A", "A", "A", "B", "B", "B", "B"];
        let labels = [1, 0, 0, 0, 1, 1, 1, 0];
        let w = kamiran_calders_weights(&labels, &groups).unwrap();
        assert_eq!(w.values[0], 2.0);
        assert!(!w.normalized);
        let flat = kamiran_calders_weights(&[1, 0, 1, 0], &["a", "a", "b", "b"]).unwrap();
        assert!(flat.values.iter().all(|&v| v == 1.0));
        assert!(matches!(
            kamiran_calders_weights(&[1, 1, 0], &["a", "a", "b"]),
            Err(Error::EmptyCell { .. })
        ));
    }

    #[test]
    fn class_keys_variants() {
        let g = ["f", "m"];
        let y = [1, 0];
        assert_eq!(class_keys(WeightBy::Group, &g, &y).unwrap(), ["f", "m"]);
        assert_eq!(class_keys(WeightBy::Label, &g, &y).unwrap(), ["1", "0"]);
        assert_eq!(class_keys(WeightBy::GroupLabel, &g, &y).unwrap(), ["f|1", "m|0"]);
        assert_eq!("group-label".parse::<WeightBy>().unwrap(), WeightBy::GroupLabel);
    }
}
