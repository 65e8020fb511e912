//! Evaluation protocols, metrics, synthetic corpora, and domain statistics.

pub mod metrics;
mod preset;
mod protocol;
mod splits;
pub mod stats;
pub mod synth;

pub use metrics::{accuracy, auc_ovr_macro, macro_f1};
pub use protocol::{
    config_hash, evaluate, run_protocol, run_single, EvalMetrics, MetricAverages, MetricsReport,
    RunMetrics,
};
pub use preset::{
    desk_aug, desk_preset, DESK_BLUR_MAX, DESK_HALO_SCALE, DESK_LR_FINAL, DESK_LR_INITIAL,
    DESK_RANGE_SCALE, DESK_WARMUP_EPOCHS,
};
pub use splits::{make_splits, Protocol, SplitPlan, SplitRun};
pub use stats::{domain_stats, DomainStats};
pub use synth::{default_specs, generate, SynthCorpus, SynthDomainSpec};
