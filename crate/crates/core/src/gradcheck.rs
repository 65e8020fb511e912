//! Central finite-difference checks of every analytic gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::image::ImageRgb;
use crate::losses::{cross_entropy, ntxent_with, EmbeddingBatch, LogitsBatch, NtXentOptions};
use crate::math;
use crate::model::{batch_objective, Method, NetConfig, ObjectiveSpec, TinyNet};
use crate::rng::{Purpose, RngStream};

pub const FD_EPSILON: f64 = 1e-5;

/// Denominator floor of [`rel_error`]; below it the error is effectively absolute.
pub const REL_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = math::abs(analytic).max(math::abs(numeric)).max(REL_FLOOR);
    math::abs(analytic - numeric) / scale
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> Result<f64>, x: &[f64], eps: f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let plus = f(&probe)?;
        probe[i] = x[i] - eps;
        let minus = f(&probe)?;
        probe[i] = x[i];
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub instances: usize,
    /// Total number of scalar partial derivatives compared.
    pub coordinates: usize,
    pub max_rel_error: f64,
}

impl GradReport {
    fn new() -> Self {
        Self {
            instances: 0,
            coordinates: 0,
            max_rel_error: 0.0,
        }
    }

    fn absorb(&mut self, analytic: &[f64], numeric: &[f64]) {
        self.instances += 1;
        self.coordinates += analytic.len();
        for (&a, &n) in analytic.iter().zip(numeric) {
            self.max_rel_error = self.max_rel_error.max(rel_error(a, n));
        }
    }
}

/// Weighted cross-entropy on random logits, labels, weights, and shapes.
pub fn check_cross_entropy(instances: usize, seed: u64) -> Result<GradReport> {
    let mut report = GradReport::new();
    for k in 0..instances {
        let mut rng = RngStream::derive(seed, k as u64, 0, Purpose::Synth);
        let classes = 2 + rng.below(5);
        let rows = 1 + rng.below(6);
        let logits: Vec<f64> = (0..rows * classes).map(|_| 3.0 * rng.normal()).collect();
        let labels: Vec<usize> = (0..rows).map(|_| rng.below(classes)).collect();
        let weights: Vec<f64> = (0..rows).map(|_| rng.range(0.1, 5.0)).collect();
        let make = |l: &[f64]| LogitsBatch::new(classes, l.to_vec(), labels.clone(), weights.clone());
        let analytic = cross_entropy(&make(&logits)?)?.grad;
        let numeric = central_diff(|l| Ok(cross_entropy(&make(l)?)?.loss), &logits, FD_EPSILON)?;
        report.absorb(&analytic, &numeric);
    }
    Ok(report)
}

fn unit_rows(rng: &mut RngStream, rows: usize, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..rows * dim).map(|_| rng.normal()).collect();
    for row in v.chunks_exact_mut(dim) {
        let norm = math::sqrt(row.iter().map(|x| x * x).sum());
        row.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// NT-Xent on random unit embeddings, alternating plain, symmetric, and
/// pair-weighted variants.
pub fn check_ntxent(instances: usize, seed: u64) -> Result<GradReport> {
    let mut report = GradReport::new();
    for k in 0..instances {
        let mut rng = RngStream::derive(seed, k as u64, 1, Purpose::Synth);
        let pairs = 1 + rng.below(5);
        let dim = 2 + rng.below(7);
        let tau = [0.1, 0.5, 1.0][k % 3];
        let opts = NtXentOptions {
            symmetric: k % 2 == 1,
            pair_weights: (k % 4 >= 2).then(|| (0..pairs).map(|_| rng.range(0.2, 3.0)).collect()),
        };
        let x = unit_rows(&mut rng, 2 * pairs, dim);
        let loss = |v: &[f64]| -> Result<_> {
            let (s, w) = v.split_at(pairs * dim);
            ntxent_with(&EmbeddingBatch::new(dim, s.to_vec(), w.to_vec())?, tau, &opts)
        };
        let analytic = loss(&x)?.grad;
        let numeric = central_diff(|v| Ok(loss(v)?.loss), &x, FD_EPSILON)?;
        report.absorb(&analytic, &numeric);
    }
    Ok(report)
}

/// Network small enough that a full finite-difference sweep is cheap.
pub fn small_net_config() -> NetConfig {
    NetConfig {
        input_width: 16,
        input_height: 16,
        input_pool: 2,
        conv1_channels: 3,
        conv2_channels: 6,
        classes: 3,
        proj_hidden: 5,
        embed_dim: 4,
    }
}

fn random_image(cfg: &NetConfig, rng: &mut RngStream) -> Result<ImageRgb> {
    let data = (0..cfg.input_width * cfg.input_height * 3)
        .map(|_| rng.uniform())
        .collect();
    ImageRgb::new(cfg.input_width, cfg.input_height, data)
}

/// Full forward/backward through the training objective of each method in
/// turn, checked against differences of the loss in every parameter.
pub fn check_network(instances: usize, seed: u64, cfg: NetConfig) -> Result<GradReport> {
    let mut report = GradReport::new();
    for k in 0..instances {
        let method = Method::ALL[k % Method::ALL.len()];
        let comps = method.components();
        let mut rng = RngStream::derive(seed, k as u64, 2, Purpose::Synth);
        let net = TinyNet::init(cfg, &mut rng)?;
        let n = 2 + rng.below(2);
        let strong = (0..n)
            .map(|_| random_image(&cfg, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let weak = if comps.hybrid_loss {
            (0..n)
                .map(|_| random_image(&cfg, &mut rng))
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![]
        };
        let labels: Vec<usize> = (0..n).map(|_| rng.below(cfg.classes)).collect();
        let weights: Vec<f64> = if comps.dcr {
            (0..n).map(|_| rng.range(0.5, 4.0)).collect()
        } else {
            vec![1.0; n]
        };
        let spec = ObjectiveSpec {
            labels: &labels,
            weights: &weights,
            alpha: if comps.hybrid_loss { rng.range(0.1, 0.9) } else { 0.0 },
            tau: 0.5,
            hybrid: comps.hybrid_loss,
            contrastive: NtXentOptions::default(),
        };
        let s: Vec<&ImageRgb> = strong.iter().collect();
        let w: Vec<&ImageRgb> = weak.iter().collect();
        let analytic = batch_objective(&net, &s, &w, &spec)?.grads;
        let numeric = central_diff(
            |p| {
                let probe = TinyNet::from_params(cfg, p.to_vec())?;
                Ok(batch_objective(&probe, &s, &w, &spec)?.loss)
            },
            net.params(),
            FD_EPSILON,
        )?;
        report.absorb(&analytic, &numeric);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_error_floor() {
        assert_eq!(rel_error(1.0, 1.0), 0.0);
        assert!((rel_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((rel_error(0.0, 1e-9) - 1e-5).abs() < 1e-15);
    }

    #[test]
    fn central_diff_of_cubic() {
        let g = central_diff(|x| Ok(x[0] * x[0] * x[0] + 2.0 * x[1]), &[2.0, 5.0], 1e-4).unwrap();
        assert!((g[0] - 12.0).abs() < 1e-7 && (g[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn losses_pass() {
        assert!(check_cross_entropy(5, 1).unwrap().max_rel_error < 1e-5);
        assert!(check_ntxent(5, 1).unwrap().max_rel_error < 1e-5);
    }

    #[test]
    fn network_passes_for_every_method() {
        let r = check_network(Method::ALL.len(), 3, small_net_config()).unwrap();
        assert_eq!(r.instances, 9);
        assert!(r.max_rel_error < 1e-4, "{}", r.max_rel_error);
    }
}
