//! Fundus visual-artifact augmentation.
//!
//! Five visual adjustments (brightness, contrast, saturation, hue, sharpness)
//! and four imaging degradations (halo, hole, spot, blur) are composed in a
//! fixed order. Each transform fires independently with its own probability
//! and draws an intensity uniformly from its configured range. Every draw is
//! recorded in an [`AugPlan`] so an augmented view can be replayed exactly.

mod degrade;
mod visual;
mod weak;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use degrade::{add_halo, add_hole, add_spot, apply_halo, apply_hole, apply_spots, blur};
pub use visual::{
    adjust_brightness, adjust_contrast, adjust_hue, adjust_saturation, adjust_sharpness,
    box_blur3,
};
pub use weak::{apply_weak, sample_weak, weak_augment, WeakConfig, WeakParams};

use crate::error::{Error, Result};
use crate::image::ImageRgb;
use crate::rng::RngStream;

/// Attempts a geometric sampler makes to land inside the field of view.
pub const MAX_PLACEMENT_TRIES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TransformKind {
    Brightness,
    Contrast,
    Saturation,
    Hue,
    Sharpness,
    Halo,
    Hole,
    Spot,
    Blur,
}

impl TransformKind {
    /// Canonical composition order: scene appearance first, imaging chain after.
    pub const ALL: [TransformKind; 9] = [
        TransformKind::Brightness,
        TransformKind::Contrast,
        TransformKind::Saturation,
        TransformKind::Hue,
        TransformKind::Sharpness,
        TransformKind::Halo,
        TransformKind::Hole,
        TransformKind::Spot,
        TransformKind::Blur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Brightness => "brightness",
            TransformKind::Contrast => "contrast",
            TransformKind::Saturation => "saturation",
            TransformKind::Hue => "hue",
            TransformKind::Sharpness => "sharpness",
            TransformKind::Halo => "halo",
            TransformKind::Hole => "hole",
            TransformKind::Spot => "spot",
            TransformKind::Blur => "blur",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Visual transformation (as opposed to image degradation).
    pub fn is_visual(self) -> bool {
        self.index() < 5
    }

    pub fn default_range(self) -> (f64, f64) {
        match self {
            TransformKind::Brightness => (-0.5, 0.5),
            TransformKind::Contrast | TransformKind::Saturation | TransformKind::Sharpness => {
                (0.5, 1.5)
            }
            TransformKind::Hue => (-18.0, 18.0),
            TransformKind::Halo | TransformKind::Hole | TransformKind::Spot => (0.0, 1.0),
            TransformKind::Blur => (0.1, 2.0),
        }
    }

    /// Hard limits any configured range is clamped into.
    pub fn domain(self) -> (f64, f64) {
        match self {
            TransformKind::Brightness => (-1.0, 1.0),
            TransformKind::Contrast | TransformKind::Saturation | TransformKind::Sharpness => {
                (0.0, 3.0)
            }
            TransformKind::Hue => (-180.0, 180.0),
            TransformKind::Halo | TransformKind::Hole | TransformKind::Spot => (0.0, 1.0),
            TransformKind::Blur => (0.05, 5.0),
        }
    }

    /// Intensity at which the transform leaves an image unchanged (blur: the
    /// smallest admissible sigma, which is numerically the identity).
    pub fn identity(self) -> f64 {
        match self {
            TransformKind::Brightness | TransformKind::Hue => 0.0,
            TransformKind::Contrast | TransformKind::Saturation | TransformKind::Sharpness => 1.0,
            TransformKind::Halo | TransformKind::Hole | TransformKind::Spot => 0.0,
            TransformKind::Blur => 0.1,
        }
    }

    pub(crate) fn clamp_intensity(self, m: f64) -> f64 {
        let (lo, hi) = self.domain();
        if m.is_nan() {
            self.identity()
        } else {
            m.clamp(lo, hi)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransformSetting {
    pub enabled: bool,
    pub probability: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Per-transform probability and intensity range plus composition order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AugConfig {
    settings: [TransformSetting; 9],
    order: Vec<TransformKind>,
}

impl Default for AugConfig {
    fn default() -> Self {
        let settings = TransformKind::ALL.map(|k| {
            let (lo, hi) = k.default_range();
            TransformSetting {
                enabled: true,
                probability: 0.5,
                lo,
                hi,
            }
        });
        Self {
            settings,
            order: TransformKind::ALL.to_vec(),
        }
    }
}

impl AugConfig {
    pub fn setting(&self, kind: TransformKind) -> &TransformSetting {
        &self.settings[kind.index()]
    }

    pub fn setting_mut(&mut self, kind: TransformKind) -> &mut TransformSetting {
        &mut self.settings[kind.index()]
    }

    pub fn order(&self) -> &[TransformKind] {
        &self.order
    }

    pub fn set_order(&mut self, order: Vec<TransformKind>) -> Result<()> {
        let mut seen = [false; 9];
        for k in &order {
            if core::mem::replace(&mut seen[k.index()], true) {
                return Err(Error::InvalidAugConfig(format!(
                    "transform '{}' listed twice in order",
                    k.name()
                )));
            }
        }
        self.order = order;
        Ok(())
    }

    /// Sets every transform's probability.
    pub fn with_probability(mut self, p: f64) -> Self {
        for s in &mut self.settings {
            s.probability = p;
        }
        self
    }

    /// Enables or disables the five visual transforms.
    pub fn with_visual(mut self, on: bool) -> Self {
        for k in TransformKind::ALL.into_iter().filter(|k| k.is_visual()) {
            self.settings[k.index()].enabled = on;
        }
        self
    }

    /// Enables or disables the four degradation transforms.
    pub fn with_degradation(mut self, on: bool) -> Self {
        for k in TransformKind::ALL.into_iter().filter(|k| !k.is_visual()) {
            self.settings[k.index()].enabled = on;
        }
        self
    }

    /// Collapses every range onto its identity intensity.
    pub fn with_identity_ranges(mut self) -> Self {
        for k in TransformKind::ALL {
            let id = k.identity();
            let s = &mut self.settings[k.index()];
            s.lo = id;
            s.hi = id;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for k in TransformKind::ALL {
            let s = self.setting(k);
            if !(0.0..=1.0).contains(&s.probability) {
                return Err(Error::InvalidAugConfig(format!(
                    "{}: probability {} outside [0, 1]",
                    k.name(),
                    s.probability
                )));
            }
            if !(s.lo <= s.hi) {
                return Err(Error::InvalidAugConfig(format!(
                    "{}: range [{}, {}] is inverted",
                    k.name(),
                    s.lo,
                    s.hi
                )));
            }
            let (dlo, dhi) = k.domain();
            if s.lo < dlo || s.hi > dhi {
                return Err(Error::InvalidAugConfig(format!(
                    "{}: range [{}, {}] exceeds admissible [{dlo}, {dhi}]",
                    k.name(),
                    s.lo,
                    s.hi
                )));
            }
        }
        Ok(())
    }

    /// Pulls every range into its transform's admissible domain, returning a
    /// message for each adjustment made.
    pub fn clamp_to_domains(&mut self) -> Vec<String> {
        let mut notes = Vec::new();
        for k in TransformKind::ALL {
            let (dlo, dhi) = k.domain();
            let s = &mut self.settings[k.index()];
            let (lo, hi) = (s.lo.clamp(dlo, dhi), s.hi.clamp(dlo, dhi));
            if lo != s.lo || hi != s.hi {
                notes.push(format!(
                    "{}: range [{}, {}] clamped to [{lo}, {hi}]",
                    k.name(),
                    s.lo,
                    s.hi
                ));
                s.lo = lo;
                s.hi = hi;
            }
        }
        notes
    }
}

/// One disk placed on the image (hole or spot).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HaloGeometry {
    pub cx: f64,
    pub cy: f64,
    /// Radius at which the ramp peaks.
    pub ring_radius: f64,
    /// Distance over which the ramp falls from 1 to 0 on either side.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Geometry {
    None,
    Halo(HaloGeometry),
    Hole(Disk),
    Spots(Vec<Disk>),
}

/// Realized draw for one transform.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanStep {
    pub kind: TransformKind,
    pub applied: bool,
    pub intensity: f64,
    pub geometry: Geometry,
}

/// Everything drawn during one augmentation call.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AugPlan {
    pub steps: Vec<PlanStep>,
}

impl AugPlan {
    pub fn applied(&self) -> impl Iterator<Item = &PlanStep> {
        self.steps.iter().filter(|s| s.applied)
    }

    pub fn step(&self, kind: TransformKind) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.kind == kind)
    }
}

/// Draws the plan for `img` without touching pixels.
///
/// Disabled transforms consume no randomness. For enabled ones the draw
/// sequence is: Bernoulli gate, then (if it fires) intensity, then geometry.
pub fn sample_plan(img: &ImageRgb, cfg: &AugConfig, rng: &mut RngStream) -> AugPlan {
    let mask = img.effective_mask();
    let fov = img.fov();
    let mut steps = Vec::with_capacity(cfg.order.len());
    for &kind in &cfg.order {
        let s = cfg.setting(kind);
        if !s.enabled {
            continue;
        }
        let fire = rng.bernoulli(s.probability);
        if !fire {
            steps.push(PlanStep {
                kind,
                applied: false,
                intensity: kind.identity(),
                geometry: Geometry::None,
            });
            continue;
        }
        let intensity = rng.range(s.lo, s.hi);
        let geometry = match kind {
            TransformKind::Halo => degrade::sample_halo(img, &mask, fov, rng).map(Geometry::Halo),
            TransformKind::Hole => degrade::sample_hole(img, &mask, fov, rng).map(Geometry::Hole),
            TransformKind::Spot => degrade::sample_spots(img, &mask, fov, rng).map(Geometry::Spots),
            _ => Some(Geometry::None),
        };
        match geometry {
            Some(geometry) => steps.push(PlanStep {
                kind,
                applied: true,
                intensity,
                geometry,
            }),
            // no valid placement inside the field of view: transform skipped
            None => steps.push(PlanStep {
                kind,
                applied: false,
                intensity,
                geometry: Geometry::None,
            }),
        }
    }
    AugPlan { steps }
}

/// Replays a plan on `img`.
pub fn apply_plan(img: &ImageRgb, plan: &AugPlan) -> ImageRgb {
    let mut out = img.clone();
    for step in plan.applied() {
        let m = step.intensity;
        out = match (&step.kind, &step.geometry) {
            (TransformKind::Brightness, _) => adjust_brightness(&out, m),
            (TransformKind::Contrast, _) => adjust_contrast(&out, m),
            (TransformKind::Saturation, _) => adjust_saturation(&out, m),
            (TransformKind::Hue, _) => adjust_hue(&out, m),
            (TransformKind::Sharpness, _) => adjust_sharpness(&out, m),
            (TransformKind::Halo, Geometry::Halo(g)) => apply_halo(&out, m, g),
            (TransformKind::Hole, Geometry::Hole(d)) => apply_hole(&out, m, d),
            (TransformKind::Spot, Geometry::Spots(ds)) => apply_spots(&out, m, ds),
            (TransformKind::Blur, _) => blur(&out, m),
            // geometry missing for a degradation: nothing to place
            _ => out,
        };
    }
    out
}

/// Strong view: draws a plan from `rng` and applies it.
pub fn fundus_aug(img: &ImageRgb, cfg: &AugConfig, rng: &mut RngStream) -> (ImageRgb, AugPlan) {
    let plan = sample_plan(img, cfg, rng);
    (apply_plan(img, &plan), plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_image(seed: u64) -> ImageRgb {
        let mut rng = RngStream::new(seed);
        ImageRgb::from_fn(24, 20, |_, _| [rng.uniform(), rng.uniform(), rng.uniform()]).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = AugConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.order(), &TransformKind::ALL);
        assert!(TransformKind::ALL
            .iter()
            .all(|&k| cfg.setting(k).probability == 0.5));
    }

    #[test]
    fn names_roundtrip() {
        for k in TransformKind::ALL {
            assert_eq!(TransformKind::from_name(k.name()), Some(k));
        }
        assert_eq!(TransformKind::from_name("warp"), None);
    }

    #[test]
    fn validate_rejects_bad_settings() {
        let mut cfg = AugConfig::default();
        cfg.setting_mut(TransformKind::Hue).probability = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = AugConfig::default();
        cfg.setting_mut(TransformKind::Blur).lo = 3.0;
        assert!(cfg.validate().is_err());
        let mut cfg = AugConfig::default();
        assert!(cfg
            .set_order(alloc::vec![TransformKind::Hue, TransformKind::Hue])
            .is_err());
    }

    #[test]
    fn clamp_to_domains_reports() {
        let mut cfg = AugConfig::default();
        cfg.setting_mut(TransformKind::Brightness).hi = 4.0;
        let notes = cfg.clamp_to_domains();
        assert_eq!(notes.len(), 1);
        assert_eq!(cfg.setting(TransformKind::Brightness).hi, 1.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn zero_probability_is_identity() {
        let img = test_image(1);
        let cfg = AugConfig::default().with_probability(0.0);
        let (out, plan) = fundus_aug(&img, &cfg, &mut RngStream::new(5));
        assert_eq!(out, img);
        assert_eq!(plan.steps.len(), 9);
        assert!(plan.steps.iter().all(|s| !s.applied));
    }

    #[test]
    fn identity_ranges_compose_to_identity() {
        let img = test_image(2);
        let cfg = AugConfig::default()
            .with_probability(1.0)
            .with_identity_ranges();
        let (out, plan) = fundus_aug(&img, &cfg, &mut RngStream::new(6));
        assert_eq!(plan.applied().count(), 9);
        assert!(out.max_abs_diff(&img).unwrap() <= 1e-4);
    }

    #[test]
    fn deterministic_given_seed() {
        let img = test_image(3);
        let cfg = AugConfig::default();
        let a = fundus_aug(&img, &cfg, &mut RngStream::new(77));
        let b = fundus_aug(&img, &cfg, &mut RngStream::new(77));
        assert_eq!(a, b);
    }

    #[test]
    fn plan_replay_reproduces() {
        let img = test_image(4);
        let cfg = AugConfig::default().with_probability(0.9);
        for seed in 0..20 {
            let (out, plan) = fundus_aug(&img, &cfg, &mut RngStream::new(seed));
            assert_eq!(apply_plan(&img, &plan), out);
        }
    }

    #[test]
    fn applied_intensities_within_range() {
        let img = test_image(5);
        let cfg = AugConfig::default();
        for seed in 0..50 {
            let plan = sample_plan(&img, &cfg, &mut RngStream::new(seed));
            for step in plan.applied() {
                let s = cfg.setting(step.kind);
                assert!(step.intensity >= s.lo && step.intensity <= s.hi);
            }
        }
    }

    #[test]
    fn disabled_transforms_are_not_planned() {
        let img = test_image(6);
        let cfg = AugConfig::default().with_visual(false);
        let plan = sample_plan(&img, &cfg, &mut RngStream::new(1));
        assert!(plan.steps.iter().all(|s| !s.kind.is_visual()));
        let cfg = AugConfig::default().with_degradation(false);
        let plan = sample_plan(&img, &cfg, &mut RngStream::new(1));
        assert!(plan.steps.iter().all(|s| s.kind.is_visual()));
    }

    #[test]
    fn degenerate_images_pass_through() {
        let cfg = AugConfig::default().with_probability(1.0);
        for img in [
            ImageRgb::filled(1, 1, [0.0; 3]).unwrap(),
            ImageRgb::filled(16, 16, [0.0; 3]).unwrap(),
            ImageRgb::filled(5, 5, [0.3; 3])
                .unwrap()
                .with_mask(alloc::vec![false; 25])
                .unwrap(),
        ] {
            let (out, _) = fundus_aug(&img, &cfg, &mut RngStream::new(3));
            assert!(out.min_channel() >= 0.0 && out.max_channel() <= 1.0);
        }
    }

    #[test]
    fn empty_mask_skips_geometric_transforms() {
        let img = ImageRgb::filled(8, 8, [0.5; 3])
            .unwrap()
            .with_mask(alloc::vec![false; 64])
            .unwrap();
        let cfg = AugConfig::default().with_probability(1.0);
        let plan = sample_plan(&img, &cfg, &mut RngStream::new(9));
        for kind in [TransformKind::Halo, TransformKind::Hole, TransformKind::Spot] {
            assert!(!plan.step(kind).unwrap().applied);
        }
    }
}
