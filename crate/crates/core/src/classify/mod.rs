//! Mortality classifiers and their evaluation metrics.

mod metrics;
mod models;
mod tree;

pub use metrics::{accuracy, auroc};
pub use models::{
    fit_forest, fit_gbm, fit_logistic, fit_tree, predict, predict_proba, threshold_scores, ClassifierKind,
    ClassifierModel, ClassifierParams, ForestModel, GbmModel, LogisticModel,
};
pub use tree::{best_root_split, BestSplit, Tree, TreeNode};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{Matrix, Rng};

    fn col(v: &[f64]) -> Matrix {
        Matrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    fn blobs(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let c = if label == 1 { 2.0 } else { -2.0 };
            rows.push(vec![c + 0.5 * rng.normal(), c + 0.5 * rng.normal()]);
            y.push(label);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn acc(model: &ClassifierModel, x: &Matrix, y: &[u8]) -> f64 {
        accuracy(y, &predict(model, x, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn pure_labels_give_one_leaf() {
        let t = fit_tree(&col(&[0.0, 1.0, 2.0]), &[1, 1, 1], &ClassifierParams::default()).unwrap();
        assert_eq!(t.nodes, [TreeNode::Leaf { value: 1.0 }]);
    }

    #[test]
    fn single_threshold_split() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let p = ClassifierParams { min_samples_leaf: 1, ..Default::default() };
        let t = fit_tree(&x, &[0, 0, 1, 1], &p).unwrap();
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, threshold, .. } if threshold == 1.5));
        assert_eq!(t.depth(), 1);
        assert_eq!(acc(&ClassifierModel::Tree(t), &x, &[0, 0, 1, 1]), 1.0);
    }

    #[test]
    fn depth_zero_is_majority_rate() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let p = ClassifierParams { max_depth: 0, ..Default::default() };
        let t = fit_tree(&x, &[0, 0, 0, 1], &p).unwrap();
        assert_eq!(t.nodes, [TreeNode::Leaf { value: 0.25 }]);
    }

    #[test]
    fn tie_breaks_prefer_lowest_feature() {
        // Both columns separate the labels equally well.
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let p = ClassifierParams { min_samples_leaf: 1, ..Default::default() };
        let t = fit_tree(&x, &[0, 0, 1, 1], &p).unwrap();
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn degenerate_forest_equals_tree() {
        let (x, y) = blobs(60, 1);
        let p = ClassifierParams {
            n_trees: 1,
            bootstrap: false,
            feature_fraction: 1.0,
            ..Default::default()
        };
        let f = fit_forest(&x, &y, &p).unwrap();
        assert_eq!(f.trees[0], fit_tree(&x, &y, &p).unwrap());
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = blobs(400, 2);
        let (xt, yt) = blobs(200, 3);
        for kind in ClassifierKind::ALL {
            let p = ClassifierParams { n_trees: 20, n_rounds: 30, seed: 4, ..Default::default() };
            let m = ClassifierModel::fit(kind, &x, &y, &p).unwrap();
            assert!(acc(&m, &xt, &yt) >= 0.95, "{kind:?}");
            assert_eq!(m, ClassifierModel::fit(kind, &x, &y, &p).unwrap());
        }
    }

    #[test]
    fn gbm_edges() {
        let x = col(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0, 0, 0, 1, 1, 1];
        let p0 = ClassifierParams { n_rounds: 0, ..Default::default() };
        let g = ClassifierModel::fit(ClassifierKind::Gbm, &x, &y, &p0).unwrap();
        assert!(predict_proba(&g, &x).unwrap().iter().all(|&s| (s - 0.5).abs() < 1e-15));

        let p = ClassifierParams { n_rounds: 50, shrinkage: 0.1, min_samples_leaf: 1, ..Default::default() };
        let g = fit_gbm(&x, &y, &p).unwrap();
        assert!(g.train_loss.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert_eq!(acc(&ClassifierModel::Gbm(g), &x, &y), 1.0);
        assert!(matches!(fit_gbm(&x, &[1; 6], &p), Err(crate::Error::DegenerateLabels)));
    }

    #[test]
    fn logistic_constant_features() {
        let x = Matrix::filled(40, 2, 0.0);
        let y: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let m = fit_logistic(&x, &y, &ClassifierParams::default()).unwrap();
        assert!(m.bias.abs() < 0.05, "{}", m.bias);
        let s = predict_proba(&ClassifierModel::Logistic(m), &x).unwrap();
        assert!(s.iter().all(|&v| (v - 0.5).abs() < 0.02));
    }

    #[test]
    fn logistic_one_dimensional() {
        let mut rng = Rng::new(5);
        let gen = |rng: &mut Rng, n| {
            let v: Vec<f64> = (0..n).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
            let y: Vec<u8> = v.iter().map(|&a| (a > 0.0) as u8).collect();
            (col(&v), y)
        };
        let (x, y) = gen(&mut rng, 300);
        let (xt, yt) = gen(&mut rng, 300);
        let m = ClassifierModel::fit(ClassifierKind::Logistic, &x, &y, &ClassifierParams::default()).unwrap();
        assert!(acc(&m, &xt, &yt) >= 0.95);
    }

    #[test]
    fn thresholds() {
        let (x, y) = blobs(50, 6);
        let m = ClassifierModel::fit(ClassifierKind::Logistic, &x, &y, &ClassifierParams::default()).unwrap();
        assert!(predict(&m, &x, 0.0).unwrap().iter().all(|&v| v == 1));
        let scores = predict_proba(&m, &x).unwrap();
        let at_one = predict(&m, &x, 1.0).unwrap();
        for (s, l) in scores.iter().zip(&at_one) {
            if *s < 1.0 {
                assert_eq!(*l, 0);
            }
        }
        assert_eq!(predict(&m, &x, 0.5).unwrap(), threshold_scores(&scores, 0.5));
        assert!(predict_proba(&m, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let (x, y) = blobs(80, 7);
        let dir = tempfile::tempdir().unwrap();
        for kind in ClassifierKind::ALL {
            let p = ClassifierParams { n_trees: 3, n_rounds: 3, ..Default::default() };
            let m = ClassifierModel::fit(kind, &x, &y, &p).unwrap();
            let path = dir.path().join("m.json");
            m.save(&path).unwrap();
            let back = ClassifierModel::load(&path).unwrap();
            assert_eq!(back, m);
            assert_eq!(predict_proba(&back, &x).unwrap(), predict_proba(&m, &x).unwrap());
        }
    }

    #[test]
    fn empty_data() {
        let p = ClassifierParams::default();
        assert!(matches!(fit_tree(&Matrix::zeros(0, 2), &[], &p), Err(crate::Error::EmptyData)));
        assert!(fit_forest(&Matrix::zeros(0, 2), &[], &p).is_err());
    }
}
