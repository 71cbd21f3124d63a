use crate::error::{Error, Result};

/// Fraction of positions where the labels agree.
pub fn accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyData);
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// P(score⁺ > score⁻) + ½ P(tie) over all positive/negative pairs.
///
/// Sorts once and counts, per positive, the negatives strictly below it
/// (twice) plus the tied ones, so the statistic is an exact integer before
/// the final division.
pub fn auroc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParams("NaN score".into()));
    }
    let n_pos = y_true.iter().filter(|&&y| y == 1).count() as u128;
    let n_neg = y_true.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        // -0.0 and 0.0 compare equal as scores.
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let tie_neg = idx[start..end].iter().filter(|&&i| y_true[i] != 1).count() as u128;
        let tie_pos = (end - start) as u128 - tie_neg;
        twice_u += tie_pos * (2 * neg_below + tie_neg);
        neg_below += tie_neg;
        start = end;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_by_hand() {
        assert_eq!(accuracy(&[1, 0, 1, 0], &[1, 1, 1, 0]).unwrap(), 0.75);
        assert_eq!(accuracy(&[1, 0], &[1, 0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &[0, 1]).unwrap(), 0.0);
        assert!(matches!(accuracy(&[1], &[1, 0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn auroc_by_hand() {
        assert_eq!(auroc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
        assert_eq!(auroc(&[0, 0, 1, 1], &[0.1, 0.2, 0.3, 0.8]).unwrap(), 1.0);
        assert_eq!(auroc(&[0, 1, 0, 1], &[0.5; 4]).unwrap(), 0.5);
        assert!(matches!(auroc(&[1, 1], &[0.2, 0.3]), Err(Error::SingleClass)));
    }
}
