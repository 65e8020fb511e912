//! Training loop: strong/weak view generation, hybrid loss with DCR sample
//! weights, backward pass, and SGD, fully determined by the config seed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{lr_at, NetConfig, OptimState, TinyNet};
use crate::augment::{apply_weak, fundus_aug, sample_weak, AugConfig, WeakConfig};
use crate::data::{Sample, View};
use crate::dcr::{dcr_weights, occurrence_probs_with, DcrTable, QMode};
use crate::error::{Error, Result};
use crate::image::ImageRgb;
use crate::losses::{
    alpha_at, cross_entropy, dahloss_combine, ntxent_with, AlphaSchedule, EmbeddingBatch,
    LogitsBatch, NtXentOptions,
};
use crate::rng::{Purpose, RngStream};

/// How DCR weights enter training when the method enables DCR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DcrApplication {
    /// Per-sample multipliers on the supervised term.
    #[default]
    LossWeights,
    /// Each epoch draws `len` samples with replacement, proportional to
    /// weight; the loss then sees unit weights.
    Sampling,
}

impl DcrApplication {
    pub fn name(self) -> &'static str {
        match self {
            DcrApplication::LossWeights => "loss",
            DcrApplication::Sampling => "sampling",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loss" => Some(DcrApplication::LossWeights),
            "sampling" => Some(DcrApplication::Sampling),
            _ => None,
        }
    }
}

/// Training recipe: the ERM baseline, the full method, or one ablation cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    Erm,
    GdrNet,
    /// Visual transforms only.
    A,
    /// Image degradations only.
    B,
    /// DCR only.
    C,
    /// Hybrid loss only.
    D,
    /// Visual + degradation.
    E,
    /// Visual + degradation + DCR.
    F,
    /// Visual + degradation + hybrid loss.
    G,
}

/// Which components a method switches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Components {
    pub visual: bool,
    pub degradation: bool,
    pub dcr: bool,
    pub hybrid_loss: bool,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Erm,
        Method::A,
        Method::B,
        Method::C,
        Method::D,
        Method::E,
        Method::F,
        Method::G,
        Method::GdrNet,
    ];

    pub fn components(self) -> Components {
        let c = |visual, degradation, dcr, hybrid_loss| Components {
            visual,
            degradation,
            dcr,
            hybrid_loss,
        };
        match self {
            Method::Erm => c(false, false, false, false),
            Method::A => c(true, false, false, false),
            Method::B => c(false, true, false, false),
            Method::C => c(false, false, true, false),
            Method::D => c(false, false, false, true),
            Method::E => c(true, true, false, false),
            Method::F => c(true, true, true, false),
            Method::G => c(true, true, false, true),
            Method::GdrNet => c(true, true, true, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::GdrNet => "gdrnet",
            Method::A => "A",
            Method::B => "B",
            Method::C => "C",
            Method::D => "D",
            Method::E => "E",
            Method::F => "F",
            Method::G => "G",
        }
    }

    /// Accepts `erm`, `gdrnet`, and `A`..`G` (case-insensitive).
    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(&lower))
    }
}

/// How `alpha` evolves over epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AlphaMode {
    /// 1 at the first epoch, 0 at the last.
    Linear,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Epochs over which the step size ramps linearly per step up to the
    /// scheduled value; 0 disables the ramp.
    pub warmup_epochs: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub tau: f64,
    pub beta: f64,
    pub q_mode: QMode,
    pub alpha: AlphaMode,
    /// Forces every DCR weight to 1 even when the method enables DCR.
    pub unit_weights: bool,
    pub dcr_application: DcrApplication,
    /// Also weight the contrastive anchors by DCR weights.
    pub dcr_on_contrastive: bool,
    pub symmetric_contrastive: bool,
    pub seed: u64,
    pub aug: AugConfig,
    pub weak: WeakConfig,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::GdrNet,
            epochs: 30,
            batch_size: 16,
            lr_initial: 1e-3,
            lr_final: 1e-4,
            warmup_epochs: 0,
            momentum: 0.9,
            weight_decay: 5e-4,
            tau: 0.1,
            beta: crate::dcr::DEFAULT_BETA,
            q_mode: QMode::Joint,
            alpha: AlphaMode::Linear,
            unit_weights: false,
            dcr_application: DcrApplication::LossWeights,
            dcr_on_contrastive: false,
            symmetric_contrastive: false,
            seed: 0,
            aug: AugConfig::default(),
            weak: WeakConfig::default(),
            net: NetConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidTrainConfig(msg));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.method.components().hybrid_loss && self.batch_size < 2 {
            return bad("batch_size must be >= 2 for the contrastive term".into());
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive (got {})", self.tau));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1]", self.beta));
        }
        if let AlphaMode::Constant(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("alpha {a} outside [0, 1]"));
            }
        }
        if !(self.lr_initial >= 0.0 && self.lr_final >= 0.0) {
            return bad("learning rates must be nonnegative".into());
        }
        self.aug.validate()?;
        self.net.validate()
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        lr_at(self.lr_initial, self.lr_final, self.epochs, epoch)
    }

    pub fn alpha_at(&self, epoch: usize) -> Result<f64> {
        if !self.method.components().hybrid_loss {
            return Ok(0.0);
        }
        match self.alpha {
            AlphaMode::Linear => alpha_at(&AlphaSchedule::new(self.epochs)?, epoch),
            AlphaMode::Constant(a) => Ok(a),
        }
    }

    /// Augmentation config restricted to the method's transform families.
    pub fn effective_aug(&self) -> AugConfig {
        let c = self.method.components();
        let mut aug = self.aug.clone();
        if !c.visual {
            aug = aug.with_visual(false);
        }
        if !c.degradation {
            aug = aug.with_degradation(false);
        }
        aug
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub alpha: f64,
    pub lr: f64,
    /// Means over the epoch's steps.
    pub loss: f64,
    pub sup_loss: f64,
    pub scon_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Total loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub net: TinyNet,
    pub history: TrainHistory,
    pub dcr: Option<DcrTable>,
}

/// View fed to the supervised term: the base flip/crop, followed by
/// FundusAug when the method enables any of its transforms.
pub fn strong_view(
    image: &ImageRgb,
    cfg: &TrainConfig,
    aug: &AugConfig,
    index: u64,
    epoch: u64,
) -> ImageRgb {
    let mut base_rng = RngStream::derive(cfg.seed, index, epoch, Purpose::StrongView);
    let base = apply_weak(image, &sample_weak(image, &cfg.weak, &mut base_rng));
    let c = cfg.method.components();
    if c.visual || c.degradation {
        let mut rng = RngStream::derive(cfg.seed, index, epoch, Purpose::FundusAug);
        fundus_aug(&base, aug, &mut rng).0
    } else {
        base
    }
}

/// Lightly augmented counterpart used as the contrastive positive.
pub fn weak_view(image: &ImageRgb, cfg: &TrainConfig, index: u64, epoch: u64) -> ImageRgb {
    let mut rng = RngStream::derive(cfg.seed, index, epoch, Purpose::WeakView);
    apply_weak(image, &sample_weak(image, &cfg.weak, &mut rng))
}

/// Loss inputs for one batch besides the images.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec<'a> {
    pub labels: &'a [usize],
    pub weights: &'a [f64],
    pub alpha: f64,
    pub tau: f64,
    /// When false only the weighted cross-entropy is used and `weak` must be empty.
    pub hybrid: bool,
    pub contrastive: NtXentOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchObjective {
    pub loss: f64,
    pub sup_loss: f64,
    pub scon_loss: f64,
    /// Gradient of `loss` with respect to every network parameter.
    pub grads: Vec<f64>,
}

/// Forward pass, loss, and full parameter gradient for one batch.
///
/// Strong views occupy the first rows of the forward batch and weak views the
/// rest, so row `i` and row `i + n` form a positive pair.
pub fn batch_objective(
    net: &TinyNet,
    strong: &[&ImageRgb],
    weak: &[&ImageRgb],
    spec: &ObjectiveSpec<'_>,
) -> Result<BatchObjective> {
    let n = strong.len();
    let expected_weak = if spec.hybrid { n } else { 0 };
    if weak.len() != expected_weak {
        return Err(Error::LengthMismatch {
            left: weak.len(),
            right: expected_weak,
        });
    }
    let (nc, emb) = (net.config().classes, net.config().embed_dim);
    let mut all: Vec<&ImageRgb> = Vec::with_capacity(n + weak.len());
    all.extend_from_slice(strong);
    all.extend_from_slice(weak);
    let out = net.forward(&all)?;
    let ce = cross_entropy(&LogitsBatch::new(
        nc,
        out.logits[..n * nc].to_vec(),
        spec.labels.to_vec(),
        spec.weights.to_vec(),
    )?)?;
    let rows = out.cache.rows();
    let mut grad_logits = vec![0.0; rows * nc];
    let mut grad_emb = vec![0.0; rows * emb];
    let (loss, scon_loss) = if spec.hybrid {
        let batch = EmbeddingBatch::new(
            emb,
            out.embeddings[..n * emb].to_vec(),
            out.embeddings[n * emb..].to_vec(),
        )?;
        let scon = ntxent_with(&batch, spec.tau, &spec.contrastive)?;
        let hybrid = dahloss_combine(&ce, &scon, spec.alpha)?;
        grad_logits[..n * nc].copy_from_slice(&hybrid.logit_grad);
        grad_emb.copy_from_slice(&hybrid.embedding_grad);
        (hybrid.loss, scon.loss)
    } else {
        grad_logits.copy_from_slice(&ce.grad);
        (ce.loss, 0.0)
    };
    let grads = net.backward(&out.cache, &grad_logits, &grad_emb)?;
    Ok(BatchObjective {
        loss,
        sup_loss: ce.loss,
        scon_loss,
        grads,
    })
}

fn build_dcr(cfg: &TrainConfig, data: &View<'_>) -> Result<Option<DcrTable>> {
    if !cfg.method.components().dcr || cfg.unit_weights {
        return Ok(None);
    }
    let counts = data.counts()?;
    Ok(Some(dcr_weights(
        &occurrence_probs_with(&counts, cfg.q_mode)?,
        cfg.beta,
    )?))
}

fn sample_weight(table: Option<&DcrTable>, s: &Sample) -> Result<f64> {
    match table {
        Some(t) => t.weight(s.domain, s.grade),
        None => Ok(1.0),
    }
}

fn cumulative_weights(table: &DcrTable, data: &View<'_>) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    data.samples
        .iter()
        .map(|s| {
            acc += table.weight(s.domain, s.grade)?;
            Ok(acc)
        })
        .collect()
}

/// Index of the first cumulative weight exceeding a uniform draw.
fn draw(cdf: &[f64], rng: &mut RngStream) -> usize {
    let total = cdf[cdf.len() - 1];
    let u = rng.uniform() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Trains a fresh network on `data`.
pub fn train(cfg: &TrainConfig, data: &View<'_>) -> Result<Trained> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if data.distinct_classes() < 2 {
        return Err(Error::SingleClass);
    }
    if cfg.batch_size > data.len() {
        return Err(Error::BatchAssembly(format!(
            "batch_size {} exceeds {} training samples",
            cfg.batch_size,
            data.len()
        )));
    }
    if data.n_classes != cfg.net.classes {
        return Err(Error::InvalidTrainConfig(format!(
            "dataset has {} classes, network {}",
            data.n_classes, cfg.net.classes
        )));
    }
    let comps = cfg.method.components();
    let aug = cfg.effective_aug();
    let dcr = build_dcr(cfg, data)?;
    let mut net = TinyNet::init(
        cfg.net,
        &mut RngStream::derive(cfg.seed, 0, 0, Purpose::Init),
    )?;
    let mut opt = OptimState::new(
        net.params().len(),
        cfg.lr_initial,
        cfg.momentum,
        cfg.weight_decay,
    );
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let warmup_steps = cfg.warmup_epochs * data.len().div_ceil(cfg.batch_size);
    let mut global_step = 0usize;

    let sampling = match (&dcr, cfg.dcr_application) {
        (Some(t), DcrApplication::Sampling) => Some(cumulative_weights(t, data)?),
        _ => None,
    };
    let loss_dcr = if sampling.is_some() { None } else { dcr.as_ref() };

    for epoch in 0..cfg.epochs {
        let alpha = cfg.alpha_at(epoch)?;
        let scheduled = cfg.lr_at(epoch);
        let mut rng = RngStream::derive(cfg.seed, 0, epoch as u64, Purpose::Shuffle);
        match &sampling {
            Some(cdf) => order.iter_mut().for_each(|o| *o = draw(cdf, &mut rng)),
            None => {
                order.sort_unstable();
                rng.shuffle(&mut order);
            }
        }

        let (mut sum_loss, mut sum_sup, mut sum_scon, mut steps) = (0.0, 0.0, 0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let n = batch.len();
            let samples: Vec<&Sample> = batch.iter().map(|&i| data.samples[i]).collect();
            let mut views: Vec<ImageRgb> = batch
                .iter()
                .zip(&samples)
                .map(|(&i, s)| strong_view(&s.image, cfg, &aug, i as u64, epoch as u64))
                .collect();
            if comps.hybrid_loss {
                views.extend(
                    batch
                        .iter()
                        .zip(&samples)
                        .map(|(&i, s)| weak_view(&s.image, cfg, i as u64, epoch as u64)),
                );
            }
            let weights = samples
                .iter()
                .map(|s| sample_weight(loss_dcr, s))
                .collect::<Result<Vec<f64>>>()?;
            let labels: Vec<usize> = samples.iter().map(|s| s.grade).collect();
            let (strong, weak) = views.split_at(n);
            let obj = batch_objective(
                &net,
                &strong.iter().collect::<Vec<_>>(),
                &weak.iter().collect::<Vec<_>>(),
                &ObjectiveSpec {
                    labels: &labels,
                    weights: &weights,
                    alpha,
                    tau: cfg.tau,
                    hybrid: comps.hybrid_loss,
                    contrastive: NtXentOptions {
                        symmetric: cfg.symmetric_contrastive,
                        pair_weights: cfg.dcr_on_contrastive.then(|| weights.clone()),
                    },
                },
            )?;
            let (loss, grads) = (obj.loss, obj.grads);
            opt.lr = if global_step < warmup_steps {
                scheduled * (global_step + 1) as f64 / warmup_steps as f64
            } else {
                scheduled
            };
            global_step += 1;
            net.apply_sgd(&grads, &mut opt)?;
            history.step_losses.push(loss);
            sum_loss += loss;
            sum_sup += obj.sup_loss;
            sum_scon += obj.scon_loss;
            steps += 1;
        }
        let k = steps.max(1) as f64;
        history.epochs.push(EpochRecord {
            epoch,
            alpha,
            lr: scheduled,
            loss: sum_loss / k,
            sup_loss: sum_sup / k,
            scon_loss: sum_scon / k,
        });
    }
    Ok(Trained { net, history, dcr })
}
