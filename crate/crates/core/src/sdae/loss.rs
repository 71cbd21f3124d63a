use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

fn check_shapes(op: &'static str, x: &Matrix, x_hat: &Matrix) -> Result<()> {
    if x.shape() != x_hat.shape() {
        return Err(Error::dims(op, format!("{:?} vs {:?}", x.shape(), x_hat.shape())));
    }
    Ok(())
}

/// Squared reconstruction error of each sample, summed over features.
pub fn sample_errors(x: &Matrix, x_hat: &Matrix) -> Result<Vec<f64>> {
    check_shapes("sample_errors", x, x_hat)?;
    Ok(x.iter_rows()
        .zip(x_hat.iter_rows())
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum())
        .collect())
}

/// Σ_i ‖x_i − x'_i‖² divided by the number of samples.
pub fn mse_loss(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    check_shapes("mse_loss", x, x_hat)?;
    if x.rows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = sample_errors(x, x_hat)?.iter().sum();
    Ok(total / x.rows() as f64)
}

pub fn check_weights(weights: &[f64]) -> Result<()> {
    match weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
        Some(index) => Err(Error::NegativeWeight {
            index,
            value: weights[index],
        }),
        None => Ok(()),
    }
}

/// (1/n) Σ_i w_i ‖x_i − x'_i‖².
pub fn weighted_loss(x: &Matrix, x_hat: &Matrix, weights: &[f64]) -> Result<f64> {
    check_shapes("weighted_loss", x, x_hat)?;
    if weights.len() != x.rows() {
        return Err(Error::dims(
            "weighted_loss",
            format!("{} weights for {} samples", weights.len(), x.rows()),
        ));
    }
    check_weights(weights)?;
    if x.rows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = sample_errors(x, x_hat)?
        .iter()
        .zip(weights)
        .map(|(e, w)| w * e)
        .sum();
    Ok(total / x.rows() as f64)
}

/// Mean over group pairs of the squared distance between group-mean
/// latent vectors, with its gradient with respect to `z`.
///
/// `groups[i]` is the group index of row `i`. Groups absent from the batch
/// are ignored; fewer than two present groups give `None`.
pub fn latent_penalty_with_grad(z: &Matrix, groups: &[usize]) -> Result<Option<(f64, Matrix)>> {
    if groups.len() != z.rows() {
        return Err(Error::LengthMismatch {
            left: groups.len(),
            right: z.rows(),
        });
    }
    let n_groups = groups.iter().max().map_or(0, |g| g + 1);
    let d = z.cols();
    let mut counts = vec![0usize; n_groups];
    let mut means = vec![vec![0.0; d]; n_groups];
    for (row, &g) in z.iter_rows().zip(groups) {
        counts[g] += 1;
        means[g].iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    let present: Vec<usize> = (0..n_groups).filter(|&g| counts[g] > 0).collect();
    if present.len() < 2 {
        return Ok(None);
    }
    for &g in &present {
        let c = counts[g] as f64;
        means[g].iter_mut().for_each(|m| *m /= c);
    }
    let n_pairs = (present.len() * (present.len() - 1) / 2) as f64;
    let mut penalty = 0.0;
    // dP/dμ_g = (2 / n_pairs) Σ_{h ≠ g} (μ_g − μ_h)
    let mut dmean = vec![vec![0.0; d]; n_groups];
    for (ia, &a) in present.iter().enumerate() {
        for &b in &present[ia + 1..] {
            for j in 0..d {
                let diff = means[a][j] - means[b][j];
                penalty += diff * diff;
                dmean[a][j] += 2.0 * diff / n_pairs;
                dmean[b][j] -= 2.0 * diff / n_pairs;
            }
        }
    }
    let mut grad = Matrix::zeros(z.rows(), d);
    for (i, &g) in groups.iter().enumerate() {
        let c = counts[g] as f64;
        grad.row_mut(i).iter_mut().zip(&dmean[g]).for_each(|(o, v)| *o = v / c);
    }
    Ok(Some((penalty / n_pairs, grad)))
}

/// Penalty value for per-group latent matrices; 0 with a warning when
/// fewer than two groups are non-empty.
pub fn latent_penalty(z_by_group: &[Matrix]) -> Result<f64> {
    let present: Vec<&Matrix> = z_by_group.iter().filter(|m| m.rows() > 0).collect();
    if present.len() < 2 {
        log::warn!("latent penalty needs at least two non-empty groups; using 0");
        return Ok(0.0);
    }
    let d = present[0].cols();
    if present.iter().any(|m| m.cols() != d) {
        return Err(Error::dims("latent_penalty", "groups have different latent widths"));
    }
    let mut stacked = Vec::new();
    let mut groups = Vec::new();
    for (g, m) in present.iter().enumerate() {
        stacked.extend_from_slice(m.data());
        groups.extend(std::iter::repeat(g).take(m.rows()));
    }
    let z = Matrix::new(groups.len(), d, stacked)?;
    Ok(latent_penalty_with_grad(&z, &groups)?.map_or(0.0, |(p, _)| p))
}

/// Per-feature mean squared error, ranked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureErrors {
    pub errors: Vec<f64>,
}

impl FeatureErrors {
    /// Feature indices in increasing error order (ties by index).
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.errors.len()).collect();
        idx.sort_by(|&a, &b| self.errors[a].total_cmp(&self.errors[b]).then(a.cmp(&b)));
        idx
    }

    pub fn best(&self, n: usize) -> Vec<usize> {
        self.ranked().into_iter().take(n).collect()
    }

    /// Highest-error features first.
    pub fn worst(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.errors.len()).collect();
        idx.sort_by(|&a, &b| self.errors[b].total_cmp(&self.errors[a]).then(a.cmp(&b)));
        idx.truncate(n);
        idx
    }
}

/// Mean over samples of (x_ij − x'_ij)² for each feature j.
pub fn feature_errors(x: &Matrix, x_hat: &Matrix) -> Result<FeatureErrors> {
    check_shapes("per_feature_errors", x, x_hat)?;
    let mut errors = vec![0.0; x.cols()];
    for (a, b) in x.iter_rows().zip(x_hat.iter_rows()) {
        for ((e, p), q) in errors.iter_mut().zip(a).zip(b) {
            *e += (p - q) * (p - q);
        }
    }
    if x.rows() > 0 {
        let n = x.rows() as f64;
        errors.iter_mut().for_each(|e| *e /= n);
    }
    Ok(FeatureErrors { errors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn mse_by_hand() {
        assert_eq!(mse_loss(&m(&[&[1.0, 2.0]]), &m(&[&[0.0, 0.0]])).unwrap(), 5.0);
        let x = m(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let z = Matrix::zeros(2, 2);
        assert_eq!(mse_loss(&x, &z).unwrap(), 5.0);
        assert_eq!(mse_loss(&x, &x).unwrap(), 0.0);
        assert!(mse_loss(&x, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn weighted_by_hand() {
        let x = m(&[&[1.0, 2.0]]);
        let z = Matrix::zeros(1, 2);
        assert_eq!(weighted_loss(&x, &z, &[2.0]).unwrap(), 10.0);
        assert_eq!(weighted_loss(&x, &z, &[1.0]).unwrap(), mse_loss(&x, &z).unwrap());
        assert_eq!(weighted_loss(&x, &x, &[7.0]).unwrap(), 0.0);
        assert!(matches!(
            weighted_loss(&x, &z, &[-1.0]),
            Err(Error::NegativeWeight { index: 0, .. })
        ));
        assert!(matches!(weighted_loss(&x, &z, &[1.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn penalty_by_hand() {
        let a = m(&[&[0.0, 0.0]]);
        let b = m(&[&[3.0, 4.0], &[3.0, 4.0]]);
        assert_eq!(latent_penalty(&[a.clone(), b]).unwrap(), 25.0);
        assert_eq!(latent_penalty(&[a.clone(), a.clone()]).unwrap(), 0.0);
        assert_eq!(latent_penalty(&[a, Matrix::zeros(0, 2)]).unwrap(), 0.0);
    }

    #[test]
    fn penalty_gradient_matches_differences() {
        let z = m(&[&[0.3, -1.0], &[2.0, 0.5], &[-0.7, 1.1], &[0.2, 0.9], &[1.5, -0.4]]);
        let groups = [0, 1, 2, 0, 1];
        let (_, grad) = latent_penalty_with_grad(&z, &groups).unwrap().unwrap();
        let h = 1e-6;
        for i in 0..z.rows() {
            for j in 0..z.cols() {
                let mut up = z.clone();
                up.set(i, j, z.get(i, j) + h);
                let mut dn = z.clone();
                dn.set(i, j, z.get(i, j) - h);
                let p = |m: &Matrix| latent_penalty_with_grad(m, &groups).unwrap().unwrap().0;
                let num = (p(&up) - p(&dn)) / (2.0 * h);
                assert!((num - grad.get(i, j)).abs() < 1e-7, "{num} vs {}", grad.get(i, j));
            }
        }
        assert!(latent_penalty_with_grad(&z, &[0, 0, 0, 0, 0]).unwrap().is_none());
    }

    #[test]
    fn per_feature_by_hand() {
        let x = m(&[&[0.0, 1.0], &[0.0, 3.0]]);
        let fe = feature_errors(&x, &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(fe.errors, [0.0, 5.0]);
        assert_eq!(fe.best(1), [0]);
        assert_eq!(fe.worst(1), [1]);
        assert_eq!(feature_errors(&x, &x).unwrap().errors, [0.0, 0.0]);
    }

    #[test]
    fn per_feature_mean_is_mse_over_width() {
        let x = m(&[&[0.5, -1.0, 2.0], &[1.5, 0.0, -2.0], &[0.1, 0.2, 0.3]]);
        let y = m(&[&[0.0, -1.5, 2.5], &[1.0, 1.0, -1.0], &[0.4, 0.2, 0.0]]);
        let fe = feature_errors(&x, &y).unwrap();
        let mean = fe.errors.iter().sum::<f64>() / 3.0;
        assert!((mean - mse_loss(&x, &y).unwrap() / 3.0).abs() < 1e-12);
    }
}
