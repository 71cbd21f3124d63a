use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, positive_fraction, Criterion, GrowParams, Tree};
use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Tree,
    Forest,
    Gbm,
    Logistic,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [Self::Tree, Self::Forest, Self::Gbm, Self::Logistic];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tree => "tree",
            Self::Forest => "forest",
            Self::Gbm => "gbm",
            Self::Logistic => "logistic",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::Tree => "Decision Tree",
            Self::Forest => "Random Forest",
            Self::Gbm => "Gradient Boosting",
            Self::Logistic => "Logistic Regression",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(Self::Tree),
            "forest" => Ok(Self::Forest),
            "gbm" => Ok(Self::Gbm),
            "logistic" => Ok(Self::Logistic),
            other => Err(Error::InvalidConfig(format!("unknown classifier `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_trees: usize,
    /// Share of features examined at each forest split.
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub shrinkage: f64,
    pub n_rounds: usize,
    /// Depth of boosted trees (at most 3).
    pub gbm_depth: usize,
    /// L2 penalty in the Newton leaf values of boosted trees.
    pub gbm_lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_samples_leaf: 5,
            n_trees: 100,
            feature_fraction: 0.3,
            bootstrap: true,
            shrinkage: 0.1,
            n_rounds: 100,
            gbm_depth: 3,
            gbm_lambda: 1.0,
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ClassifierParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1");
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return bad("feature_fraction must lie in (0, 1]");
        }
        if !(self.shrinkage > 0.0 && self.shrinkage.is_finite()) {
            return bad("shrinkage must be positive");
        }
        if self.gbm_depth == 0 || self.gbm_depth > 3 {
            return bad("gbm_depth must be 1, 2 or 3");
        }
        if !(self.gbm_lambda >= 0.0 && self.gbm_lambda.is_finite()) {
            return bad("gbm_lambda must be non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }
}

fn check_xy(x: &Matrix, y: &[u8]) -> Result<Vec<f64>> {
    if x.rows() == 0 {
        return Err(Error::EmptyData);
    }
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.rows(),
        });
    }
    if let Some(v) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidParams(format!("label {v} is not binary")));
    }
    Ok(y.iter().map(|&v| v as f64).collect())
}

/// CART with Gini impurity; leaves hold the positive fraction.
pub fn fit_tree(x: &Matrix, y: &[u8], params: &ClassifierParams) -> Result<Tree> {
    params.validate()?;
    let yf = check_xy(x, y)?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    grow_tree(
        x,
        &yf,
        &rows,
        GrowParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            max_features: None,
            criterion: Criterion::Gini,
        },
        None,
        positive_fraction(&yf),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub tree_seeds: Vec<u64>,
}

/// Bagged Gini trees with per-split feature subsampling; tree `t` draws
/// from seed `seed + t`.
pub fn fit_forest(x: &Matrix, y: &[u8], params: &ClassifierParams) -> Result<ForestModel> {
    params.validate()?;
    let yf = check_xy(x, y)?;
    let n = x.rows();
    let d = x.cols();
    let m = ((params.feature_fraction * d as f64).ceil() as usize).clamp(1, d.max(1));
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut seeds = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let seed = params.seed.wrapping_add(t as u64);
        let mut rng = Rng::new(seed);
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.below(n)).collect()
        } else {
            (0..n).collect()
        };
        trees.push(grow_tree(
            x,
            &yf,
            &rows,
            GrowParams {
                max_depth: params.max_depth,
                min_samples_leaf: params.min_samples_leaf,
                max_features: Some(m),
                criterion: Criterion::Gini,
            },
            Some(&mut rng),
            positive_fraction(&yf),
        )?);
        seeds.push(seed);
    }
    Ok(ForestModel {
        trees,
        tree_seeds: seeds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmModel {
    pub init: f64,
    pub shrinkage: f64,
    pub trees: Vec<Tree>,
    /// Mean logistic loss on the training rows after init and each round.
    pub train_loss: Vec<f64>,
}

fn log_loss(y: &[f64], f: &[f64]) -> f64 {
    // log(1 + e^f) − y f, computed stably.
    let total: f64 = y
        .iter()
        .zip(f)
        .map(|(&y, &f)| f.max(0.0) + (-f.abs()).exp().ln_1p() - y * f)
        .sum();
    total / y.len() as f64
}

/// Logistic-loss boosting with shallow regression trees and Newton leaves.
pub fn fit_gbm(x: &Matrix, y: &[u8], params: &ClassifierParams) -> Result<GbmModel> {
    params.validate()?;
    let yf = check_xy(x, y)?;
    let n = x.rows();
    let pos = yf.iter().sum::<f64>();
    if pos == 0.0 || pos == n as f64 {
        return Err(Error::DegenerateLabels);
    }
    let base = pos / n as f64;
    let init = (base / (1.0 - base)).ln();
    let mut f = vec![init; n];
    let rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut losses = vec![log_loss(&yf, &f)];
    for _ in 0..params.n_rounds {
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let resid: Vec<f64> = yf.iter().zip(&p).map(|(y, p)| y - p).collect();
        let hess: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let lambda = params.gbm_lambda;
        let tree = grow_tree(
            x,
            &resid,
            &rows,
            GrowParams {
                max_depth: params.gbm_depth,
                min_samples_leaf: params.min_samples_leaf,
                max_features: None,
                criterion: Criterion::Variance,
            },
            None,
            |leaf: &[usize]| {
                let g: f64 = leaf.iter().map(|&i| resid[i]).sum();
                let h: f64 = leaf.iter().map(|&i| hess[i]).sum();
                if h + lambda > 0.0 {
                    g / (h + lambda)
                } else {
                    0.0
                }
            },
        )?;
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += params.shrinkage * tree.predict_row(x.row(i));
        }
        losses.push(log_loss(&yf, &f));
        trees.push(tree);
    }
    Ok(GbmModel {
        init,
        shrinkage: params.shrinkage,
        trees,
        train_loss: losses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Mini-batch SGD on the mean logistic loss with seeded shuffling.
pub fn fit_logistic(x: &Matrix, y: &[u8], params: &ClassifierParams) -> Result<LogisticModel> {
    params.validate()?;
    let yf = check_xy(x, y)?;
    let (n, d) = x.shape();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut rng = Rng::new(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut gw = vec![0.0; d];
    for _ in 0..params.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(params.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for &i in batch {
                let row = x.row(i);
                let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let r = sigmoid(z) - yf[i];
                gw.iter_mut().zip(row).for_each(|(g, a)| *g += r * a);
                gb += r;
            }
            let scale = params.learning_rate / batch.len() as f64;
            w.iter_mut().zip(&gw).for_each(|(wj, g)| *wj -= scale * g);
            b -= scale * gb;
        }
    }
    Ok(LogisticModel { weights: w, bias: b })
}

/// Any fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierModel {
    Tree(Tree),
    Forest(ForestModel),
    Gbm(GbmModel),
    Logistic(LogisticModel),
}

impl ClassifierModel {
    pub fn fit(kind: ClassifierKind, x: &Matrix, y: &[u8], params: &ClassifierParams) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::Tree => Self::Tree(fit_tree(x, y, params)?),
            ClassifierKind::Forest => Self::Forest(fit_forest(x, y, params)?),
            ClassifierKind::Gbm => Self::Gbm(fit_gbm(x, y, params)?),
            ClassifierKind::Logistic => Self::Logistic(fit_logistic(x, y, params)?),
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Tree(_) => ClassifierKind::Tree,
            Self::Forest(_) => ClassifierKind::Forest,
            Self::Gbm(_) => ClassifierKind::Gbm,
            Self::Logistic(_) => ClassifierKind::Logistic,
        }
    }

    pub fn n_features(&self) -> Option<usize> {
        match self {
            Self::Tree(t) => Some(t.n_features),
            Self::Forest(f) => f.trees.first().map(|t| t.n_features),
            Self::Gbm(g) => g.trees.first().map(|t| t.n_features),
            Self::Logistic(l) => Some(l.weights.len()),
        }
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        match self {
            Self::Tree(t) => t.predict_row(row),
            Self::Forest(f) => f.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / f.trees.len() as f64,
            Self::Gbm(g) => sigmoid(g.init + g.shrinkage * g.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()),
            Self::Logistic(l) => sigmoid(l.bias + row.iter().zip(&l.weights).map(|(a, w)| a * w).sum::<f64>()),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let trees: Vec<&Tree> = match &m {
            Self::Tree(t) => vec![t],
            Self::Forest(f) => f.trees.iter().collect(),
            Self::Gbm(g) => g.trees.iter().collect(),
            Self::Logistic(_) => vec![],
        };
        for t in trees {
            t.validate()?;
        }
        Ok(m)
    }
}

/// Scores in [0, 1], one per row.
pub fn predict_proba(model: &ClassifierModel, x: &Matrix) -> Result<Vec<f64>> {
    if let Some(d) = model.n_features() {
        if d != x.cols() {
            return Err(Error::dims("predict_proba", format!("model has {d} features, data {}", x.cols())));
        }
    }
    Ok(x.iter_rows().map(|r| model.score_row(r)).collect())
}

/// Labels `score >= threshold`.
pub fn predict(model: &ClassifierModel, x: &Matrix, threshold: f64) -> Result<Vec<u8>> {
    Ok(threshold_scores(&predict_proba(model, x)?, threshold))
}

pub fn threshold_scores(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| (s >= threshold) as u8).collect()
}
