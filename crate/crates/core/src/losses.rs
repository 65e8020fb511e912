//! Dynamic hybrid loss: weighted cross-entropy on class logits plus an
//! instance-discrimination (NT-Xent) term on unit-norm embeddings, blended by
//! a linearly decaying `alpha`. All gradients are analytic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Rows whose norm deviates from 1 by more than this are rejected by [`ntxent`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

/// Class scores with labels and per-sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsBatch {
    classes: usize,
    logits: Vec<f64>,
    labels: Vec<usize>,
    weights: Vec<f64>,
}

impl LogitsBatch {
    pub fn new(classes: usize, logits: Vec<f64>, labels: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if classes == 0 || logits.len() != n * classes {
            return Err(Error::Shape(format!(
                "{} logits for {n} rows of {classes} classes",
                logits.len()
            )));
        }
        if weights.len() != n {
            return Err(Error::LengthMismatch {
                left: weights.len(),
                right: n,
            });
        }
        for (row, &label) in labels.iter().enumerate() {
            if label >= classes {
                return Err(Error::LabelOutOfRange { row, label, classes });
            }
        }
        for (row, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidWeight { row });
            }
        }
        Ok(Self {
            classes,
            logits,
            labels,
            weights,
        })
    }

    /// Batch with every sample weighted 1.
    pub fn unweighted(classes: usize, logits: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let n = labels.len();
        Self::new(classes, logits, labels, vec![1.0; n])
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Scalar loss with its gradient, laid out like the input it differentiates.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Numerically stable softmax of one row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = row.iter().map(|z| math::exp(z - max)).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Weighted mean of `-log softmax(z_i)[y_i]` and its gradient w.r.t. logits.
pub fn cross_entropy(batch: &LogitsBatch) -> Result<LossGrad> {
    let c = batch.classes;
    let total_w: f64 = batch.weights.iter().sum();
    if !(total_w > 0.0) {
        return Err(Error::ZeroWeightSum);
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; batch.logits.len()];
    for (i, row) in batch.logits.chunks_exact(c).enumerate() {
        let y = batch.labels[i];
        let lse = math::log_sum_exp(row.iter().copied());
        let w = batch.weights[i];
        loss += w * (lse - row[y]);
        let scale = w / total_w;
        let g = &mut grad[i * c..(i + 1) * c];
        for (k, (gk, &zk)) in g.iter_mut().zip(row).enumerate() {
            let p = math::exp(zk - lse);
            *gk = scale * (p - if k == y { 1.0 } else { 0.0 });
        }
    }
    Ok(LossGrad {
        loss: loss / total_w,
        grad,
    })
}

/// Paired unit-norm features: strong view row `i` is positive for weak row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    dim: usize,
    strong: Vec<f64>,
    weak: Vec<f64>,
}

impl EmbeddingBatch {
    /// Rows must already be unit length (within [`UNIT_NORM_TOLERANCE`]).
    pub fn new(dim: usize, strong: Vec<f64>, weak: Vec<f64>) -> Result<Self> {
        if dim == 0 || strong.len() % dim != 0 || strong.len() != weak.len() {
            return Err(Error::Shape(format!(
                "strong {} / weak {} values for dim {dim}",
                strong.len(),
                weak.len()
            )));
        }
        let batch = Self { dim, strong, weak };
        for (row, f) in batch.rows().enumerate() {
            let norm = math::sqrt(f.iter().map(|v| v * v).sum());
            if !(math::abs(norm - 1.0) <= UNIT_NORM_TOLERANCE) {
                return Err(Error::NonUnitNorm { row, norm });
            }
        }
        Ok(batch)
    }

    /// L2-normalizes every row, then builds the batch.
    pub fn normalized(dim: usize, mut strong: Vec<f64>, mut weak: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("zero embedding dimension".into()));
        }
        for row in strong.chunks_mut(dim).chain(weak.chunks_mut(dim)) {
            let norm = math::sqrt(row.iter().map(|v| v * v).sum());
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Self::new(dim, strong, weak)
    }

    pub fn pairs(&self) -> usize {
        self.strong.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn strong(&self) -> &[f64] {
        &self.strong
    }

    pub fn weak(&self) -> &[f64] {
        &self.weak
    }

    /// All `2N` rows: strong first, then weak.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.strong
            .chunks_exact(self.dim)
            .chain(self.weak.chunks_exact(self.dim))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NtXentOptions {
    /// Also use weak rows as anchors (SimCLR-style); off reproduces the
    /// strong-anchor-only objective.
    pub symmetric: bool,
    /// Optional per-pair weights on the anchor terms (normalized by their sum).
    pub pair_weights: Option<Vec<f64>>,
}

/// Instance-discrimination loss with strong rows as anchors.
///
/// For anchor `i` the positive is weak row `i`; the denominator runs over every
/// other row of both views. The returned gradient covers all `2N` rows, strong
/// rows first.
pub fn ntxent(batch: &EmbeddingBatch, tau: f64) -> Result<LossGrad> {
    ntxent_with(batch, tau, &NtXentOptions::default())
}

pub fn ntxent_with(batch: &EmbeddingBatch, tau: f64, opts: &NtXentOptions) -> Result<LossGrad> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidTemperature(tau));
    }
    let n = batch.pairs();
    if n == 0 {
        return Err(Error::Empty("embedding batch"));
    }
    let d = batch.dim;
    let rows: Vec<&[f64]> = batch.rows().collect();
    let total = 2 * n;
    let anchors = if opts.symmetric { total } else { n };
    let anchor_weight = |a: usize| -> f64 {
        match &opts.pair_weights {
            Some(w) => w[a % n],
            None => 1.0,
        }
    };
    if let Some(w) = &opts.pair_weights {
        if w.len() != n {
            return Err(Error::LengthMismatch {
                left: w.len(),
                right: n,
            });
        }
    }
    let weight_sum: f64 = (0..anchors).map(anchor_weight).sum();
    if !(weight_sum > 0.0) {
        return Err(Error::ZeroWeightSum);
    }

    let mut sim = vec![0.0; total * total];
    for a in 0..total {
        for b in a..total {
            let s: f64 = rows[a].iter().zip(rows[b]).map(|(x, y)| x * y).sum();
            sim[a * total + b] = s;
            sim[b * total + a] = s;
        }
    }

    let mut loss = 0.0;
    let mut grad = vec![0.0; total * d];
    let mut probs = vec![0.0; total];
    for a in 0..anchors {
        let pos = if a < n { a + n } else { a - n };
        let logits = (0..total)
            .filter(|&k| k != a)
            .map(|k| sim[a * total + k] / tau);
        let lse = math::log_sum_exp(logits);
        let wa = anchor_weight(a);
        loss += wa * (lse - sim[a * total + pos] / tau);
        for k in 0..total {
            probs[k] = if k == a {
                0.0
            } else {
                math::exp(sim[a * total + k] / tau - lse)
            };
        }
        probs[pos] -= 1.0;
        let scale = wa / (weight_sum * tau);
        for k in 0..total {
            if k == a {
                continue;
            }
            let c = scale * probs[k];
            if c == 0.0 {
                continue;
            }
            for t in 0..d {
                grad[a * d + t] += c * rows[k][t];
                grad[k * d + t] += c * rows[a][t];
            }
        }
    }
    Ok(LossGrad {
        loss: loss / weight_sum,
        grad,
    })
}

/// Linear decay of `alpha` from 1 at the first epoch to 0 at the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlphaSchedule {
    pub total_epochs: usize,
}

impl AlphaSchedule {
    pub fn new(total_epochs: usize) -> Result<Self> {
        if total_epochs == 0 {
            return Err(Error::InvalidTrainConfig("total_epochs must be >= 1".into()));
        }
        Ok(Self { total_epochs })
    }

    pub fn alpha_at(&self, epoch: usize) -> Result<f64> {
        alpha_at(self, epoch)
    }
}

pub fn alpha_at(schedule: &AlphaSchedule, epoch: usize) -> Result<f64> {
    let total = schedule.total_epochs;
    if epoch >= total {
        return Err(Error::EpochOutOfRange { epoch, total });
    }
    if total == 1 {
        return Ok(0.0);
    }
    Ok(1.0 - epoch as f64 / (total - 1) as f64)
}

/// `(1 - alpha) * sup + alpha * scon`, with each gradient set scaled to match.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridLoss {
    pub loss: f64,
    pub sup_loss: f64,
    pub scon_loss: f64,
    pub alpha: f64,
    /// Flows to the classifier logits.
    pub logit_grad: Vec<f64>,
    /// Flows to the normalized embeddings.
    pub embedding_grad: Vec<f64>,
}

pub fn dahloss_combine(sup: &LossGrad, scon: &LossGrad, alpha: f64) -> Result<HybridLoss> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let ws = 1.0 - alpha;
    Ok(HybridLoss {
        loss: ws * sup.loss + alpha * scon.loss,
        sup_loss: sup.loss,
        scon_loss: scon.loss,
        alpha,
        logit_grad: sup.grad.iter().map(|g| ws * g).collect(),
        embedding_grad: scon.grad.iter().map(|g| alpha * g).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn random_embeddings(n: usize, d: usize, seed: u64) -> EmbeddingBatch {
        let mut rng = RngStream::new(seed);
        let strong = (0..n * d).map(|_| rng.normal()).collect();
        let weak = (0..n * d).map(|_| rng.normal()).collect();
        EmbeddingBatch::normalized(d, strong, weak).unwrap()
    }

    #[test]
    fn ce_uniform_logits_is_ln_c() {
        let b = LogitsBatch::unweighted(5, vec![0.3; 15], vec![0, 2, 4]).unwrap();
        let out = cross_entropy(&b).unwrap();
        assert!((out.loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ce_confident_logits_near_zero() {
        let b = LogitsBatch::unweighted(3, vec![30.0, 0.0, 0.0, 0.0, 0.0, 30.0], vec![0, 2]).unwrap();
        assert!(cross_entropy(&b).unwrap().loss < 1e-9);
    }

    #[test]
    fn ce_rejects_zero_weights_and_bad_labels() {
        let b = LogitsBatch::new(2, vec![0.0; 4], vec![0, 1], vec![0.0, 0.0]).unwrap();
        assert_eq!(cross_entropy(&b), Err(Error::ZeroWeightSum));
        assert!(LogitsBatch::unweighted(2, vec![0.0; 4], vec![0, 2]).is_err());
        assert!(LogitsBatch::new(2, vec![0.0; 4], vec![0, 1], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn ce_weights_are_normalized() {
        let logits = vec![1.0, -0.5, 0.2, 0.3, 2.0, -1.0];
        let a = LogitsBatch::new(3, logits.clone(), vec![0, 1], vec![1.0, 1.0]).unwrap();
        let b = LogitsBatch::new(3, logits, vec![0, 1], vec![7.0, 7.0]).unwrap();
        let (la, lb) = (cross_entropy(&a).unwrap(), cross_entropy(&b).unwrap());
        assert!((la.loss - lb.loss).abs() < 1e-12);
    }

    #[test]
    fn ntxent_single_pair_is_zero() {
        let b = random_embeddings(1, 8, 1);
        assert_eq!(ntxent(&b, 0.1).unwrap().loss, 0.0);
    }

    #[test]
    fn ntxent_identical_rows_is_ln3() {
        let row = [0.6, 0.8];
        let strong = [row, row].concat();
        let b = EmbeddingBatch::new(2, strong.clone(), strong).unwrap();
        for tau in [0.01, 0.1, 1.0] {
            let out = ntxent(&b, tau).unwrap();
            assert!((out.loss - 3f64.ln()).abs() < 1e-12, "tau {tau}: {}", out.loss);
        }
    }

    #[test]
    fn ntxent_rejects_bad_inputs() {
        let b = random_embeddings(2, 4, 2);
        assert_eq!(ntxent(&b, 0.0), Err(Error::InvalidTemperature(0.0)));
        assert!(ntxent(&b, -1.0).is_err());
        assert!(matches!(
            EmbeddingBatch::new(2, vec![1.0, 0.1], vec![1.0, 0.0]),
            Err(Error::NonUnitNorm { row: 0, .. })
        ));
    }

    #[test]
    fn ntxent_nonnegative_for_many_pairs() {
        for seed in 0..20 {
            let b = random_embeddings(4, 6, seed);
            assert!(ntxent(&b, 0.1).unwrap().loss >= 0.0);
        }
    }

    #[test]
    fn ntxent_permutation_invariant() {
        let b = random_embeddings(5, 4, 3);
        let perm = [3usize, 0, 4, 1, 2];
        let pick = |src: &[f64]| -> Vec<f64> {
            perm.iter().flat_map(|&i| src[i * 4..i * 4 + 4].to_vec()).collect()
        };
        let p = EmbeddingBatch::new(4, pick(b.strong()), pick(b.weak())).unwrap();
        let (l0, l1) = (ntxent(&b, 0.2).unwrap().loss, ntxent(&p, 0.2).unwrap().loss);
        assert!((l0 - l1).abs() < 1e-12);
    }

    #[test]
    fn symmetric_variant_differs_but_agrees_on_symmetric_data() {
        let b = random_embeddings(3, 5, 4);
        let sym = NtXentOptions {
            symmetric: true,
            ..Default::default()
        };
        let swapped = EmbeddingBatch::new(5, b.weak().to_vec(), b.strong().to_vec()).unwrap();
        let avg = 0.5 * (ntxent(&b, 0.3).unwrap().loss + ntxent(&swapped, 0.3).unwrap().loss);
        assert!((ntxent_with(&b, 0.3, &sym).unwrap().loss - avg).abs() < 1e-12);
    }

    #[test]
    fn alpha_schedule_values() {
        let s = AlphaSchedule::new(100).unwrap();
        assert_eq!(s.alpha_at(0).unwrap(), 1.0);
        assert_eq!(s.alpha_at(99).unwrap(), 0.0);
        assert!((s.alpha_at(49).unwrap() - 50.0 / 99.0).abs() < 1e-15);
        assert!(s.alpha_at(100).is_err());
        assert_eq!(AlphaSchedule::new(1).unwrap().alpha_at(0).unwrap(), 0.0);
        let mut prev = 1.0;
        for e in 0..100 {
            let a = s.alpha_at(e).unwrap();
            assert!(a <= prev && (0.0..=1.0).contains(&a));
            prev = a;
        }
    }

    #[test]
    fn combine_boundaries() {
        let sup = LossGrad {
            loss: 2.0,
            grad: vec![1.0, -1.0],
        };
        let scon = LossGrad {
            loss: 4.0,
            grad: vec![0.5, 0.25, 3.0],
        };
        let a0 = dahloss_combine(&sup, &scon, 0.0).unwrap();
        assert_eq!(a0.loss, 2.0);
        assert!(a0.embedding_grad.iter().all(|&g| g == 0.0));
        assert_eq!(a0.logit_grad, sup.grad);
        assert_eq!(dahloss_combine(&sup, &scon, 1.0).unwrap().loss, 4.0);
        assert_eq!(dahloss_combine(&sup, &scon, 0.5).unwrap().loss, 3.0);
        assert!(dahloss_combine(&sup, &scon, 1.5).is_err());
    }

    #[test]
    fn combine_is_linear() {
        let mk = |l: f64| LossGrad {
            loss: l,
            grad: vec![l],
        };
        let base = dahloss_combine(&mk(1.3), &mk(0.7), 0.3).unwrap();
        let scaled = dahloss_combine(&mk(3.0 * 1.3), &mk(3.0 * 0.7), 0.3).unwrap();
        assert!((scaled.loss - 3.0 * base.loss).abs() < 1e-12);
    }
}
