//! Seeded, stratified train/validation/test partitioning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::{FeatureMatrix, Horizon};
use crate::error::{Error, Result};
use crate::numcore::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = Self { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidFractions(format!("{parts:?} has a negative part")));
        }
        let s: f64 = parts.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidFractions(format!("{parts:?} sums to {s}")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Row indices of each part, each sorted ascending.
///
/// With `stratify`, patients are bucketed by (group, 30d label) where those
/// columns exist. Per-bucket part sizes are a controlled rounding of
/// `bucket_size × fraction`: every entry is the floor or ceiling of its
/// exact quota, every bucket sums to its size, and every part's total is the
/// largest-remainder rounding of `N × fraction`.
pub fn split_indices(
    fm: &FeatureMatrix,
    fractions: SplitFractions,
    seed: u64,
    stratify: bool,
) -> Result<SplitIndices> {
    fractions.validate()?;
    let n = fm.n_patients();
    let mut cells: BTreeMap<(String, u8), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let key = if stratify {
            (
                fm.groups().map(|g| g[i].clone()).unwrap_or_default(),
                fm.labels.get(&Horizon::D30).map_or(0, |l| l[i]),
            )
        } else {
            (String::new(), 0)
        };
        cells.entry(key).or_default().push(i);
    }
    let sizes: Vec<usize> = cells.values().map(Vec::len).collect();
    let counts = controlled_rounding(&sizes, fractions.as_array());

    let mut rng = Rng::new(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (members, c) in cells.into_values().zip(counts) {
        let mut members = members;
        rng.shuffle(&mut members);
        let mut start = 0;
        for (part, &k) in parts.iter_mut().zip(&c) {
            part.extend_from_slice(&members[start..start + k]);
            start += k;
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    let [train, val, test] = parts;
    Ok(SplitIndices { train, val, test })
}

/// Splits a matrix into disjoint train/validation/test parts.
pub fn split(
    fm: &FeatureMatrix,
    fractions: SplitFractions,
    seed: u64,
    stratify: bool,
) -> Result<(FeatureMatrix, FeatureMatrix, FeatureMatrix)> {
    let idx = split_indices(fm, fractions, seed, stratify)?;
    Ok((
        fm.select_rows(&idx.train),
        fm.select_rows(&idx.val),
        fm.select_rows(&idx.test),
    ))
}

const QUOTA_SLACK: f64 = 1e-9;

fn controlled_rounding(sizes: &[usize], f: [f64; 3]) -> Vec<[usize; 3]> {
    let n: usize = sizes.iter().sum();
    // Part totals: largest remainder, ties to the earlier part.
    let exact: Vec<f64> = f.iter().map(|p| n as f64 * p).collect();
    let mut totals: Vec<usize> = exact.iter().map(|q| (q + QUOTA_SLACK).floor() as usize).collect();
    let mut rem: Vec<(f64, usize)> = exact
        .iter()
        .zip(&totals)
        .enumerate()
        .map(|(s, (q, t))| (q - *t as f64, s))
        .collect();
    rem.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = n - totals.iter().sum::<usize>().min(n);
    for &(_, s) in rem.iter().take(short) {
        totals[s] += 1;
    }

    let mut base: Vec<[usize; 3]> = Vec::with_capacity(sizes.len());
    let mut can_round_up: Vec<[bool; 3]> = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let mut b = [0usize; 3];
        let mut up = [false; 3];
        for s in 0..3 {
            let q = m as f64 * f[s];
            b[s] = (q + QUOTA_SLACK).floor() as usize;
            up[s] = q - b[s] as f64 > QUOTA_SLACK;
        }
        base.push(b);
        can_round_up.push(up);
    }

    // Distribute the leftover units with a small max-flow:
    // source → bucket (leftover) → part (≤1 per bucket, only if fractional) → sink (deficit).
    let k = sizes.len();
    let nodes = k + 5;
    let (src, sink) = (0, k + 4);
    let mut cap = vec![vec![0i64; nodes]; nodes];
    for (c, (&m, b)) in sizes.iter().zip(&base).enumerate() {
        cap[src][1 + c] = (m - b.iter().sum::<usize>()) as i64;
        for s in 0..3 {
            if can_round_up[c][s] {
                cap[1 + c][k + 1 + s] = 1;
            }
        }
    }
    for s in 0..3 {
        let assigned: usize = base.iter().map(|b| b[s]).sum();
        cap[k + 1 + s][sink] = totals[s] as i64 - assigned as i64;
    }
    let flow = max_flow(&mut cap, src, sink);
    let needed: i64 = (0..k).map(|c| (sizes[c] - base[c].iter().sum::<usize>()) as i64).sum();

    let mut out = base;
    if flow == needed {
        for (c, row) in out.iter_mut().enumerate() {
            for s in 0..3 {
                // Residual capacity 0 on a unit edge means one unit flowed.
                if can_round_up[c][s] && cap[1 + c][k + 1 + s] == 0 {
                    row[s] += 1;
                }
            }
        }
    } else {
        // Only reachable through quota rounding noise; fall back to giving
        // each bucket's leftovers to its largest fractional parts.
        log::warn!("stratified split fell back to per-bucket rounding");
        for (c, row) in out.iter_mut().enumerate() {
            let mut left = sizes[c] - row.iter().sum::<usize>();
            let mut order: Vec<usize> = (0..3).collect();
            order.sort_by(|&a, &b| {
                let fa = sizes[c] as f64 * f[a] - row[a] as f64;
                let fb = sizes[c] as f64 * f[b] - row[b] as f64;
                fb.total_cmp(&fa)
            });
            for s in order {
                if left == 0 {
                    break;
                }
                row[s] += 1;
                left -= 1;
            }
        }
    }
    out
}

/// Ford-Fulkerson with DFS augmenting paths; graphs here have < 20 nodes.
fn max_flow(cap: &mut [Vec<i64>], src: usize, sink: usize) -> i64 {
    fn augment(cap: &mut [Vec<i64>], u: usize, sink: usize, seen: &mut [bool]) -> bool {
        if u == sink {
            return true;
        }
        seen[u] = true;
        for v in 0..cap.len() {
            if !seen[v] && cap[u][v] > 0 && augment(cap, v, sink, seen) {
                cap[u][v] -= 1;
                cap[v][u] += 1;
                return true;
            }
        }
        false
    }
    let mut flow = 0;
    loop {
        let mut seen = vec![false; cap.len()];
        if !augment(cap, src, sink, &mut seen) {
            return flow;
        }
        flow += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Matrix;

    fn toy(n: usize, group_of: impl Fn(usize) -> &'static str, label_of: impl Fn(usize) -> u8) -> FeatureMatrix {
        let labels = [(Horizon::D30, (0..n).map(&label_of).collect())].into_iter().collect();
        FeatureMatrix::new(
            (0..n).map(|i| format!("p{i}")).collect(),
            vec!["x".into()],
            Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap(),
            Some("g".into()),
            Some((0..n).map(|i| group_of(i).to_string()).collect()),
            labels,
        )
        .unwrap()
    }

    #[test]
    fn everything_in_train() {
        let fm = toy(10, |i| if i % 2 == 0 { "a" } else { "b" }, |i| (i % 3 == 0) as u8);
        let (tr, va, te) = split(&fm, SplitFractions::new(1.0, 0.0, 0.0).unwrap(), 1, true).unwrap();
        assert_eq!(tr, fm);
        assert_eq!(va.n_patients(), 0);
        assert_eq!(te.n_patients(), 0);
    }

    #[test]
    fn exact_sizes() {
        let fm = toy(100, |i| if i % 3 == 0 { "a" } else { "b" }, |i| (i % 7 == 0) as u8);
        let idx = split_indices(&fm, SplitFractions::default(), 5, true).unwrap();
        assert_eq!((idx.train.len(), idx.val.len(), idx.test.len()), (80, 10, 10));
    }

    #[test]
    fn stratified_halves() {
        let fm = toy(60, |i| if i < 30 { "a" } else { "b" }, |_| 0);
        let idx = split_indices(&fm, SplitFractions::default(), 9, true).unwrap();
        for part in [&idx.train, &idx.val, &idx.test] {
            let a = part.iter().filter(|&&i| i < 30).count() as i64;
            let b = part.len() as i64 - a;
            assert!((a - b).abs() <= 1, "{a} vs {b}");
        }
    }

    #[test]
    fn partition_is_disjoint_exhaustive_and_deterministic() {
        let fm = toy(257, |i| ["a", "b", "c"][i % 3], |i| (i % 5 == 0) as u8);
        let f = SplitFractions::new(0.6, 0.25, 0.15).unwrap();
        let idx = split_indices(&fm, f, 77, true).unwrap();
        let mut all: Vec<usize> = idx.train.iter().chain(&idx.val).chain(&idx.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..257).collect::<Vec<_>>());
        assert_eq!(idx, split_indices(&fm, f, 77, true).unwrap());
        assert_ne!(idx, split_indices(&fm, f, 78, true).unwrap());
    }

    #[test]
    fn bad_fractions() {
        assert!(SplitFractions::new(0.5, 0.5, 0.5).is_err());
        assert!(SplitFractions::new(1.2, -0.1, -0.1).is_err());
    }

    #[test]
    fn rounding_respects_cells_and_totals() {
        let sizes = [1usize, 1, 7, 13, 2, 9];
        for f in [[0.45, 0.1, 0.45], [0.8, 0.1, 0.1], [0.34, 0.33, 0.33], [0.5, 0.05, 0.45]] {
            let out = controlled_rounding(&sizes, f);
            let n: usize = sizes.iter().sum();
            for (m, row) in sizes.iter().zip(&out) {
                assert_eq!(row.iter().sum::<usize>(), *m);
                for s in 0..3 {
                    assert!((row[s] as f64 - *m as f64 * f[s]).abs() < 1.0 + 1e-9);
                }
            }
            for s in 0..3 {
                let t: usize = out.iter().map(|r| r[s]).sum();
                assert!((t as f64 - n as f64 * f[s]).abs() < 1.0 + 1e-9);
            }
        }
    }
}
