//! Training recipe used for the desk-scale synthetic benchmark.
//!
//! [`TrainConfig::default`] carries the full-scale recipe, which assumes a
//! pretrained backbone and full-resolution photographs. A 64×64 network
//! trained from scratch on a few hundred images needs a larger step size,
//! a short warmup, and augmentation ranges scaled to the image size.

use crate::augment::{AugConfig, TransformKind};
use crate::model::{Method, TrainConfig};

pub const DESK_LR_INITIAL: f64 = 0.1;
pub const DESK_LR_FINAL: f64 = 0.01;
pub const DESK_WARMUP_EPOCHS: usize = 2;
/// Photometric, hole and spot ranges keep this fraction of their default
/// spread around identity.
pub const DESK_RANGE_SCALE: f64 = 0.5;
/// Halo strength keeps this fraction of its default spread.
pub const DESK_HALO_SCALE: f64 = 0.3;
/// Upper blur sigma in pixels, roughly the default bound scaled by 64/224.
pub const DESK_BLUR_MAX: f64 = 0.6;

/// Augmentation ranges for 64×64 inputs.
pub fn desk_aug() -> AugConfig {
    let mut aug = AugConfig::default();
    for k in TransformKind::ALL {
        let scale = match k {
            TransformKind::Blur => continue,
            TransformKind::Halo => DESK_HALO_SCALE,
            _ => DESK_RANGE_SCALE,
        };
        let id = k.identity();
        let s = aug.setting_mut(k);
        s.lo = id + (s.lo - id) * scale;
        s.hi = id + (s.hi - id) * scale;
    }
    aug.setting_mut(TransformKind::Blur).hi = DESK_BLUR_MAX;
    aug
}

/// The benchmark recipe for `method`; everything not listed above keeps
/// its default.
pub fn desk_preset(method: Method, seed: u64) -> TrainConfig {
    TrainConfig {
        method,
        seed,
        lr_initial: DESK_LR_INITIAL,
        lr_final: DESK_LR_FINAL,
        warmup_epochs: DESK_WARMUP_EPOCHS,
        aug: desk_aug(),
        ..TrainConfig::default()
    }
}
