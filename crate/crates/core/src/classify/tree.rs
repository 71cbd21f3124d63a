use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

/// Binary tree stored as a node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tree {
    pub n_features: usize,
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidParams("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match *n {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= self.n_features
                        || !threshold.is_finite()
                        || left <= i
                        || right <= i
                        || left >= self.nodes.len()
                        || right >= self.nodes.len()
                    {
                        return Err(Error::InvalidParams(format!("malformed split node {i}")));
                    }
                }
                TreeNode::Leaf { value } if !value.is_finite() => {
                    return Err(Error::InvalidParams(format!("non-finite leaf {i}")));
                }
                TreeNode::Leaf { .. } => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Gini impurity of a binary target.
    Gini,
    /// Sum of squared deviations of a real target.
    Variance,
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Stats {
    fn push(&mut self, y: f64) {
        self.n += 1.0;
        self.sum += y;
        self.sum_sq += y * y;
    }

    fn minus(&self, o: &Stats) -> Stats {
        Stats {
            n: self.n - o.n,
            sum: self.sum - o.sum,
            sum_sq: self.sum_sq - o.sum_sq,
        }
    }

    /// Impurity times node size.
    fn weighted_impurity(&self, c: Criterion) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        match c {
            Criterion::Gini => {
                let p = self.sum / self.n;
                self.n * 2.0 * p * (1.0 - p)
            }
            Criterion::Variance => (self.sum_sq - self.sum * self.sum / self.n).max(0.0),
        }
    }
}

/// Settings of one tree build.
#[derive(Debug, Clone, Copy)]
pub struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` for all of them.
    pub max_features: Option<usize>,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    /// Impurity decrease divided by the node size.
    pub gain: f64,
}

struct Grower<'a, L: Fn(&[usize]) -> f64> {
    x: &'a Matrix,
    y: &'a [f64],
    params: GrowParams,
    leaf: L,
    rng: Option<&'a mut Rng>,
    nodes: Vec<TreeNode>,
}

impl<L: Fn(&[usize]) -> f64> Grower<'_, L> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.cols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut all: Vec<usize> = (0..d).collect();
                // Partial Fisher-Yates: the first m entries are a uniform sample.
                for i in 0..m {
                    let j = i + rng.below(d - i);
                    all.swap(i, j);
                }
                let mut chosen = all[..m].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..d).collect(),
        }
    }

    /// `sorted[f]` lists this node's sample ids ordered by feature f.
    fn best_split(&mut self, sorted: &[Vec<usize>]) -> Option<BestSplit> {
        let rows = &sorted[0];
        let mut total = Stats::default();
        for &i in rows {
            total.push(self.y[i]);
        }
        let parent = total.weighted_impurity(self.params.criterion);
        if parent <= 0.0 {
            return None;
        }
        let min_leaf = self.params.min_samples_leaf.max(1);
        let n = rows.len();
        let mut best: Option<BestSplit> = None;
        for f in self.candidate_features() {
            let order = &sorted[f];
            let mut left = Stats::default();
            for k in 0..n - 1 {
                left.push(self.y[order[k]]);
                let (a, b) = (self.x.get(order[k], f), self.x.get(order[k + 1], f));
                if a == b || k + 1 < min_leaf || n - k - 1 < min_leaf {
                    continue;
                }
                let right = total.minus(&left);
                let child = left.weighted_impurity(self.params.criterion) + right.weighted_impurity(self.params.criterion);
                let gain = (parent - child) / n as f64;
                let threshold = a + (b - a) / 2.0;
                if gain > 0.0 && best.is_none_or(|bst| gain > bst.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        let split = if depth < self.params.max_depth && sorted[0].len() >= 2 * self.params.min_samples_leaf.max(1) {
            self.best_split(&sorted)
        } else {
            None
        };
        let Some(s) = split else {
            self.nodes[id] = TreeNode::Leaf {
                value: (self.leaf)(&sorted[0]),
            };
            return id;
        };
        let goes_left = |i: usize| self.x.get(i, s.feature) <= s.threshold;
        let (mut l, mut r) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
        for order in &sorted {
            let (a, b): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| goes_left(i));
            l.push(a);
            r.push(b);
        }
        drop(sorted);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: s.feature,
            threshold: s.threshold,
            left,
            right,
        };
        id
    }
}

fn presort(x: &Matrix, rows: &[usize]) -> Vec<Vec<usize>> {
    (0..x.cols())
        .map(|f| {
            let mut o = rows.to_vec();
            o.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            o
        })
        .collect()
}

/// Greedy CART growth on the given rows (repeats allowed).
pub fn grow_tree(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    params: GrowParams,
    rng: Option<&mut Rng>,
    leaf: impl Fn(&[usize]) -> f64,
) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.rows(),
        });
    }
    if x.cols() == 0 {
        return Err(Error::InvalidParams("no features".into()));
    }
    let mut g = Grower {
        x,
        y,
        params,
        leaf,
        rng,
        nodes: Vec::new(),
    };
    g.grow(presort(x, rows), 0);
    Ok(Tree {
        n_features: x.cols(),
        nodes: g.nodes,
    })
}

/// Best root split under the Gini criterion, searched the same way as in
/// tree growth.
pub fn best_root_split(x: &Matrix, y: &[u8], min_samples_leaf: usize) -> Option<BestSplit> {
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let rows: Vec<usize> = (0..x.rows()).collect();
    let mut g = Grower {
        x,
        y: &yf,
        params: GrowParams {
            max_depth: 1,
            min_samples_leaf,
            max_features: None,
            criterion: Criterion::Gini,
        },
        leaf: |_: &[usize]| 0.0,
        rng: None,
        nodes: Vec::new(),
    };
    g.best_split(&presort(x, &rows))
}

pub fn positive_fraction(y: &[f64]) -> impl Fn(&[usize]) -> f64 + '_ {
    move |rows: &[usize]| rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64
}
