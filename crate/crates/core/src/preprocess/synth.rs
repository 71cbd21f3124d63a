//! Synthetic EHR-like patient matrices calibrated to the gender split and
//! per-gender mortality counts of an ICU cohort.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::{FeatureMatrix, Horizon};
use crate::error::{Error, Result};
use crate::numcore::{Matrix, Rng};

/// Alive/deceased counts per gender and horizon (30d, 60d, 90d, 1y) from the
/// calibration cohort; default mortality rates are deceased / group total.
const FEMALE_DECEASED: [f64; 4] = [2552.0, 2963.0, 3242.0, 4585.0];
const FEMALE_TOTAL: f64 = 12798.0 + 2552.0;
const MALE_DECEASED: [f64; 4] = [3088.0, 3597.0, 3981.0, 5613.0];
const MALE_TOTAL: f64 = 16913.0 + 3088.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub group_column: String,
    pub groups: Vec<String>,
    pub group_proportions: Vec<f64>,
    /// Per group, mortality rate at 30d, 60d, 90d and 365d (non-decreasing).
    pub mortality_rates: Vec<[f64; 4]>,
    pub n_numeric: usize,
    pub n_categorical: usize,
    pub levels_per_categorical: usize,
    /// Fraction of numeric features whose mean shifts with the 30d label;
    /// the same number of further features shift with group.
    pub informative_fraction: f64,
    /// Mean shift (in noise standard deviations) applied by the 30d label.
    pub label_effect: f64,
    /// Scale of group-specific mean shifts and category-logit offsets.
    pub group_effect: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let rates = |d: [f64; 4], t: f64| [d[0] / t, d[1] / t, d[2] / t, d[3] / t];
        Self {
            n_patients: 20_000,
            group_column: "gender".into(),
            groups: vec!["female".into(), "male".into()],
            group_proportions: vec![0.44, 0.56],
            mortality_rates: vec![
                rates(FEMALE_DECEASED, FEMALE_TOTAL),
                rates(MALE_DECEASED, MALE_TOTAL),
            ],
            n_numeric: 180,
            n_categorical: 5,
            levels_per_categorical: 4,
            informative_fraction: 0.1,
            label_effect: 0.5,
            group_effect: 0.5,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn n_features(&self) -> usize {
        self.n_numeric + self.n_categorical * self.levels_per_categorical
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_patients == 0 {
            return bad("n_patients must be positive".into());
        }
        if self.groups.is_empty() || self.groups.len() != self.group_proportions.len() {
            return bad("one proportion per group is required".into());
        }
        if self.mortality_rates.len() != self.groups.len() {
            return bad("one mortality-rate row per group is required".into());
        }
        if self.group_proportions.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("group proportions must be non-negative".into());
        }
        let total: f64 = self.group_proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("group proportions sum to {total}, not 1"));
        }
        for (g, r) in self.groups.iter().zip(&self.mortality_rates) {
            if r.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad(format!("mortality rates for `{g}` must lie in [0, 1]"));
            }
            if r.windows(2).any(|w| w[1] < w[0]) {
                return bad(format!("mortality rates for `{g}` must not decrease with horizon"));
            }
        }
        if self.n_numeric + self.n_categorical == 0 {
            return bad("at least one feature is required".into());
        }
        if self.n_categorical > 0 && self.levels_per_categorical == 0 {
            return bad("categorical features need at least one level".into());
        }
        if !(0.0..=0.5).contains(&self.informative_fraction) {
            return bad("informative_fraction must lie in [0, 0.5]".into());
        }
        if !self.label_effect.is_finite() || !self.group_effect.is_finite() {
            return bad("effect sizes must be finite".into());
        }
        Ok(())
    }
}

/// Generates a patient matrix.
///
/// Each patient draws a group from `group_proportions` and one uniform `u`;
/// they are deceased at horizon `h` iff `u < rate[group][h]`, so death at a
/// shorter horizon implies death at every longer one. Numeric features are
/// unit-variance Gaussians whose means shift by `label_effect` (30d label)
/// on the first informative block and by group-specific offsets on the
/// next block. Categorical features draw a level from group-dependent
/// softmax probabilities and are emitted one-hot.
pub fn synth_generate(cfg: &SynthConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed);
    let n_groups = cfg.groups.len();
    let n_inf = (cfg.informative_fraction * cfg.n_numeric as f64).round() as usize;

    let label_dir: Vec<f64> = (0..cfg.n_numeric)
        .map(|j| {
            if j < n_inf {
                if rng.bernoulli(0.5) { 1.0 } else { -1.0 }
            } else {
                0.0
            }
        })
        .collect();
    // Group 0 is the reference; others get N(0,1) offsets on the group block.
    let group_shift: Vec<Vec<f64>> = (0..n_groups)
        .map(|g| {
            (0..cfg.n_numeric)
                .map(|j| {
                    let in_block = j >= n_inf && j < 2 * n_inf;
                    let draw = rng.normal();
                    if g > 0 && in_block {
                        cfg.group_effect * draw
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let levels = cfg.levels_per_categorical;
    let base_logits: Vec<Vec<f64>> = (0..cfg.n_categorical)
        .map(|_| (0..levels).map(|_| rng.normal()).collect())
        .collect();
    let group_logits: Vec<Vec<Vec<f64>>> = (0..n_groups)
        .map(|g| {
            (0..cfg.n_categorical)
                .map(|_| {
                    (0..levels)
                        .map(|_| {
                            let d = rng.normal();
                            if g > 0 { cfg.group_effect * d } else { 0.0 }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let cat_probs: Vec<Vec<Vec<f64>>> = group_logits
        .iter()
        .map(|per_feature| {
            per_feature
                .iter()
                .zip(&base_logits)
                .map(|(off, base)| softmax(&base.iter().zip(off).map(|(a, b)| a + b).collect::<Vec<_>>()))
                .collect()
        })
        .collect();

    let n = cfg.n_patients;
    let width = cfg.n_features();
    let mut values = Matrix::zeros(n, width);
    let mut groups = Vec::with_capacity(n);
    let mut labels: BTreeMap<Horizon, Vec<u8>> =
        Horizon::ALL.iter().map(|h| (*h, Vec::with_capacity(n))).collect();
    for i in 0..n {
        let g = rng.categorical(&cfg.group_proportions);
        let u = rng.uniform();
        for h in Horizon::ALL {
            let dead = u < cfg.mortality_rates[g][h.index()];
            labels.get_mut(&h).expect("all horizons").push(dead as u8);
        }
        let y30 = (u < cfg.mortality_rates[g][0]) as u8 as f64;
        let row = values.row_mut(i);
        for j in 0..cfg.n_numeric {
            row[j] = cfg.label_effect * label_dir[j] * y30 + group_shift[g][j] + rng.normal();
        }
        for c in 0..cfg.n_categorical {
            let level = rng.categorical(&cat_probs[g][c]);
            row[cfg.n_numeric + c * levels + level] = 1.0;
        }
        groups.push(cfg.groups[g].clone());
    }

    let width_digits = cfg.n_numeric.max(1).to_string().len().max(3);
    let mut names: Vec<String> = (0..cfg.n_numeric)
        .map(|j| format!("num_{j:0width_digits$}"))
        .collect();
    for c in 0..cfg.n_categorical {
        for l in 0..levels {
            names.push(format!("cat_{c:02}=l{l}"));
        }
    }
    let ids = (0..n).map(|i| format!("P{i:06}")).collect();
    FeatureMatrix::new(
        ids,
        names,
        values,
        Some(cfg.group_column.clone()),
        Some(groups),
        labels,
    )
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}
