//! Classification metrics over probability matrices. All return fractions in `[0, 1]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Row-sum tolerance for probability matrices.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(Error::Empty("predictions"));
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(preds.len(), labels.len())?;
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Per-class F1 for every class in `0..classes`; `None` for classes absent
/// from `labels`.
pub fn per_class_f1(preds: &[usize], labels: &[usize], classes: usize) -> Result<Vec<Option<f64>>> {
    check_lengths(preds.len(), labels.len())?;
    let mut tp = vec![0u64; classes];
    let mut pred_n = vec![0u64; classes];
    let mut true_n = vec![0u64; classes];
    for (&p, &l) in preds.iter().zip(labels) {
        for (c, v) in [(p, &mut pred_n), (l, &mut true_n)] {
            if c >= classes {
                return Err(Error::ClassOutOfRange { class: c, classes });
            }
            v[c] += 1;
        }
        if p == l {
            tp[l] += 1;
        }
    }
    Ok((0..classes)
        .map(|c| {
            (true_n[c] > 0).then(|| {
                let precision = if pred_n[c] == 0 { 0.0 } else { tp[c] as f64 / pred_n[c] as f64 };
                let recall = tp[c] as f64 / true_n[c] as f64;
                if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                }
            })
        })
        .collect())
}

/// Mean F1 over classes present in `labels`.
pub fn macro_f1(preds: &[usize], labels: &[usize]) -> Result<f64> {
    let classes = preds.iter().chain(labels).max().map_or(0, |&m| m + 1);
    present_mean(&per_class_f1(preds, labels, classes)?)
}

fn present_mean(values: &[Option<f64>]) -> Result<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Empty("classes"));
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Binary AUC of `scores` against `positive` via average ranks; ties count 1/2.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), positive.len())?;
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * idx[i..j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

fn check_scores(scores: &[f64], labels: &[usize], classes: usize) -> Result<()> {
    if classes == 0 || scores.len() != labels.len() * classes {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len() * classes,
        });
    }
    if labels.len() < 2 {
        return Err(Error::Empty("at least two samples"));
    }
    for (row, r) in scores.chunks_exact(classes).enumerate() {
        if math::abs(r.iter().sum::<f64>() - 1.0) > ROW_SUM_TOLERANCE {
            return Err(Error::Shape(alloc::format!("score row {row} does not sum to 1")));
        }
    }
    if let Some(&c) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::ClassOutOfRange { class: c, classes });
    }
    Ok(())
}

/// One-vs-rest AUC for every class; `None` for classes absent from `labels`.
pub fn per_class_auc(scores: &[f64], labels: &[usize], classes: usize) -> Result<Vec<Option<f64>>> {
    check_scores(scores, labels, classes)?;
    let mut present = vec![false; classes];
    labels.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::SingleClass);
    }
    (0..classes)
        .map(|c| {
            if !present[c] {
                return Ok(None);
            }
            let column: Vec<f64> = scores.chunks_exact(classes).map(|r| r[c]).collect();
            let positive: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            binary_auc(&column, &positive).map(Some)
        })
        .collect()
}

/// Macro one-vs-rest AUC over classes present in `labels`; `scores` is
/// row-major `N x classes`.
pub fn auc_ovr_macro(scores: &[f64], labels: &[usize], classes: usize) -> Result<f64> {
    present_mean(&per_class_auc(scores, labels, classes)?)
}

/// Row-wise argmax, first index on ties.
pub fn argmax_rows(scores: &[f64], classes: usize) -> Vec<usize> {
    scores
        .chunks_exact(classes)
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_and_f1_hand_computed() {
        let labels = [0, 0, 1, 1];
        let preds = [0, 1, 0, 1];
        assert_eq!(accuracy(&preds, &labels).unwrap(), 0.5);
        assert_eq!(per_class_f1(&preds, &labels, 2).unwrap(), vec![Some(0.5), Some(0.5)]);
        assert_eq!(macro_f1(&preds, &labels).unwrap(), 0.5);
        assert_eq!(macro_f1(&labels, &labels).unwrap(), 1.0);
        assert_eq!(accuracy(&labels, &labels).unwrap(), 1.0);
    }

    #[test]
    fn absent_class_excluded_from_macro() {
        // class 2 never true and never predicted; class 1 never predicted
        let f = per_class_f1(&[0, 0, 0], &[0, 0, 1], 3).unwrap();
        assert_eq!(f[2], None);
        assert_eq!(f[1], Some(0.0));
        assert!((macro_f1(&[0, 0, 0], &[0, 0, 1]).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(macro_f1(&[], &[]).is_err());
    }

    #[test]
    fn auc_perfect_and_tied() {
        let scores = [0.9, 0.1, 0.2, 0.8, 0.7, 0.3];
        assert_eq!(auc_ovr_macro(&scores, &[0, 1, 0], 2).unwrap(), 1.0);
        let tied = [0.5; 8];
        assert_eq!(auc_ovr_macro(&tied, &[0, 1, 0, 1], 2).unwrap(), 0.5);
    }

    #[test]
    fn auc_rejects_single_class_and_bad_rows() {
        assert_eq!(auc_ovr_macro(&[0.5, 0.5, 0.4, 0.6], &[1, 1], 2), Err(Error::SingleClass));
        assert!(auc_ovr_macro(&[0.5, 0.6, 0.4, 0.6], &[0, 1], 2).is_err());
    }

    #[test]
    fn argmax_first_on_ties() {
        assert_eq!(argmax_rows(&[0.2, 0.4, 0.4, 0.9, 0.05, 0.05], 3), vec![1, 0]);
    }
}
