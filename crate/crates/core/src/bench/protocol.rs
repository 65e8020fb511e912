use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::metrics::{accuracy, argmax_rows, per_class_auc, per_class_f1};
use super::splits::{make_splits, Protocol, SplitRun};
use crate::data::{Dataset, View};
use crate::error::{Error, Result};
use crate::image::ImageRgb;
use crate::model::{train, TinyNet, TrainConfig};

/// Images per forward pass during evaluation.
const EVAL_BATCH: usize = 64;

/// Metrics in percent; per-class entries are `None` for grades absent from
/// the evaluated labels, and those grades are left out of the macro means.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalMetrics {
    pub samples: usize,
    pub auc: f64,
    pub acc: f64,
    pub f1: f64,
    pub per_class_auc: Vec<Option<f64>>,
    pub per_class_f1: Vec<Option<f64>>,
}

impl EvalMetrics {
    pub fn absent_classes(&self) -> Vec<usize> {
        (0..self.per_class_f1.len())
            .filter(|&c| self.per_class_f1[c].is_none())
            .collect()
    }
}

fn mean_present(v: &[Option<f64>]) -> f64 {
    let p: Vec<f64> = v.iter().flatten().copied().collect();
    p.iter().sum::<f64>() / p.len() as f64
}

/// Scores `net` on every sample of `view`.
pub fn evaluate(net: &TinyNet, view: &View<'_>) -> Result<EvalMetrics> {
    let classes = net.config().classes;
    let mut scores = Vec::with_capacity(view.len() * classes);
    for chunk in view.samples.chunks(EVAL_BATCH) {
        let imgs: Vec<&ImageRgb> = chunk.iter().map(|s| &s.image).collect();
        scores.extend(net.predict(&imgs)?);
    }
    let labels: Vec<usize> = view.samples.iter().map(|s| s.grade).collect();
    let preds = argmax_rows(&scores, classes);
    let pct = |v: Vec<Option<f64>>| v.into_iter().map(|x| x.map(|f| 100.0 * f)).collect::<Vec<_>>();
    let per_class_auc = pct(per_class_auc(&scores, &labels, classes)?);
    let per_class_f1 = pct(per_class_f1(&preds, &labels, classes)?);
    Ok(EvalMetrics {
        samples: labels.len(),
        auc: mean_present(&per_class_auc),
        acc: 100.0 * accuracy(&preds, &labels)?,
        f1: mean_present(&per_class_f1),
        per_class_auc,
        per_class_f1,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunMetrics {
    pub train_domains: Vec<String>,
    pub test_domains: Vec<String>,
    pub train_samples: usize,
    pub metrics: EvalMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricAverages {
    pub auc: f64,
    pub acc: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub protocol: Protocol,
    pub method: String,
    pub seed: u64,
    /// FNV-1a hash of the effective training configuration.
    pub config_hash: u64,
    pub runs: Vec<RunMetrics>,
    /// Arithmetic means over `runs`.
    pub average: MetricAverages,
}

impl MetricsReport {
    /// Merges run rows in plan order.
    pub fn assemble(protocol: Protocol, cfg: &TrainConfig, runs: Vec<RunMetrics>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Empty("protocol runs"));
        }
        let k = runs.len() as f64;
        let avg = |f: fn(&EvalMetrics) -> f64| runs.iter().map(|r| f(&r.metrics)).sum::<f64>() / k;
        let average = MetricAverages {
            auc: avg(|m| m.auc),
            acc: avg(|m| m.acc),
            f1: avg(|m| m.f1),
        };
        Ok(Self {
            protocol,
            method: cfg.method.name().to_string(),
            seed: cfg.seed,
            config_hash: config_hash(cfg),
            runs,
            average,
        })
    }
}

/// FNV-1a over the configuration's debug rendering.
pub fn config_hash(cfg: &TrainConfig) -> u64 {
    format!("{cfg:?}")
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Trains on the run's source domains and evaluates on its targets.
pub fn run_single(dataset: &Dataset, run: &SplitRun, cfg: &TrainConfig) -> Result<RunMetrics> {
    let train_view = dataset.subset(&run.train_domains)?;
    let test_view = dataset.subset(&run.test_domains)?;
    let trained = train(cfg, &train_view)?;
    Ok(RunMetrics {
        train_domains: run.train_domains.clone(),
        test_domains: run.test_domains.clone(),
        train_samples: train_view.len(),
        metrics: evaluate(&trained.net, &test_view)?,
    })
}

/// Every run of the protocol, one after another.
pub fn run_protocol(dataset: &Dataset, protocol: Protocol, cfg: &TrainConfig) -> Result<MetricsReport> {
    let plan = make_splits(&dataset.domains, protocol)?;
    let runs = plan
        .runs
        .iter()
        .map(|r| run_single(dataset, r, cfg))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::assemble(protocol, cfg, runs)
}
