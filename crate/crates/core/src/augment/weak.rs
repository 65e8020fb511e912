//! Weak view: optional horizontal flip plus a near-full-area crop resized back
//! to the original dimensions.

use crate::image::{resize_bilinear, ImageRgb};
use crate::math;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeakConfig {
    pub flip_probability: f64,
    /// Crop area fraction is drawn uniformly from `[min_area, max_area]`.
    pub min_area: f64,
    pub max_area: f64,
}

impl Default for WeakConfig {
    fn default() -> Self {
        Self {
            flip_probability: 0.5,
            min_area: 0.9,
            max_area: 1.0,
        }
    }
}

/// Realized weak-augmentation draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeakParams {
    pub flip: bool,
    pub x0: usize,
    pub y0: usize,
    pub crop_w: usize,
    pub crop_h: usize,
}

impl WeakParams {
    pub fn identity(img: &ImageRgb) -> Self {
        Self {
            flip: false,
            x0: 0,
            y0: 0,
            crop_w: img.width(),
            crop_h: img.height(),
        }
    }
}

pub fn sample_weak(img: &ImageRgb, cfg: &WeakConfig, rng: &mut RngStream) -> WeakParams {
    let flip = rng.bernoulli(cfg.flip_probability);
    let area = rng.range(cfg.min_area, cfg.max_area).clamp(0.0, 1.0);
    let side = math::sqrt(area);
    let (w, h) = (img.width(), img.height());
    let crop_w = (math::round(w as f64 * side) as usize).clamp(1, w);
    let crop_h = (math::round(h as f64 * side) as usize).clamp(1, h);
    let x0 = rng.below(w - crop_w + 1);
    let y0 = rng.below(h - crop_h + 1);
    WeakParams {
        flip,
        x0,
        y0,
        crop_w,
        crop_h,
    }
}

pub fn apply_weak(img: &ImageRgb, p: &WeakParams) -> ImageRgb {
    let flipped;
    let src = if p.flip {
        flipped = img.flip_horizontal();
        &flipped
    } else {
        img
    };
    if p.x0 == 0 && p.y0 == 0 && p.crop_w == img.width() && p.crop_h == img.height() {
        return src.clone();
    }
    // crop bounds come from sample_weak and always fit
    let cropped = src
        .crop(p.x0, p.y0, p.crop_w, p.crop_h)
        .expect("crop inside image");
    resize_bilinear(&cropped, img.width(), img.height()).expect("nonzero dimensions")
}

/// Draws and applies a weak augmentation with the default recipe.
pub fn weak_augment(img: &ImageRgb, rng: &mut RngStream) -> ImageRgb {
    let p = sample_weak(img, &WeakConfig::default(), rng);
    apply_weak(img, &p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> ImageRgb {
        ImageRgb::new(2, 1, alloc::vec![0.1, 0.2, 0.3, 0.7, 0.8, 0.9]).unwrap()
    }

    #[test]
    fn identity_params_are_identity() {
        let img = pair();
        assert_eq!(apply_weak(&img, &WeakParams::identity(&img)), img);
    }

    #[test]
    fn no_flip_full_crop_seed_is_identity() {
        let img = pair();
        let cfg = WeakConfig::default();
        let seed = (0..1000)
            .find(|&s| !sample_weak(&img, &cfg, &mut RngStream::new(s)).flip)
            .unwrap();
        let out = weak_augment(&img, &mut RngStream::new(seed));
        assert!(out.max_abs_diff(&img).unwrap() <= 1e-6);
    }

    #[test]
    fn flip_seed_swaps_pair() {
        let img = pair();
        let cfg = WeakConfig::default();
        let seed = (0..1000)
            .find(|&s| sample_weak(&img, &cfg, &mut RngStream::new(s)).flip)
            .unwrap();
        let out = weak_augment(&img, &mut RngStream::new(seed));
        assert_eq!(out.pixel(0, 0), [0.7, 0.8, 0.9]);
        assert_eq!(out.pixel(1, 0), [0.1, 0.2, 0.3]);
    }

    #[test]
    fn deterministic_and_shape_preserving() {
        let mut rng = RngStream::new(2);
        let img = ImageRgb::from_fn(20, 16, |_, _| [rng.uniform(), rng.uniform(), rng.uniform()])
            .unwrap();
        for seed in 0..20 {
            let a = weak_augment(&img, &mut RngStream::new(seed));
            let b = weak_augment(&img, &mut RngStream::new(seed));
            assert_eq!(a, b);
            assert_eq!((a.width(), a.height()), (20, 16));
        }
    }

    #[test]
    fn crop_covers_at_least_ninety_percent() {
        let img = ImageRgb::filled(64, 64, [0.5; 3]).unwrap();
        for seed in 0..100 {
            let p = sample_weak(&img, &WeakConfig::default(), &mut RngStream::new(seed));
            let frac = (p.crop_w * p.crop_h) as f64 / 4096.0;
            assert!(frac >= 0.88 && frac <= 1.0, "{frac}");
            assert!(p.x0 + p.crop_w <= 64 && p.y0 + p.crop_h <= 64);
        }
    }
}
