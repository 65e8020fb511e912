//! Imaging degradations: halo, hole, spot, and Gaussian blur.
//!
//! Halo, hole, and spot only touch pixels inside the field-of-view mask. Blur
//! is applied to the whole frame.

use alloc::vec;
use alloc::vec::Vec;

use super::{Disk, HaloGeometry, TransformKind, MAX_PLACEMENT_TRIES};
use crate::image::{Fov, ImageRgb};
use crate::math;
use crate::rng::RngStream;

/// Color painted by spot artifacts (dust / reflections read as bright specks).
pub const SPOT_COLOR: [f64; 3] = [1.0, 0.96, 0.86];
/// Hole edge falloff width in pixels, measured inward from the radius.
pub const HOLE_EDGE: f64 = 2.0;
/// Spot edge falloff width in pixels, measured outward from the radius.
pub const SPOT_EDGE: f64 = 1.0;

const HALO_RING: (f64, f64) = (0.5, 1.0);
const HALO_WIDTH: (f64, f64) = (0.15, 0.5);
const HOLE_RADIUS: (f64, f64) = (0.04, 0.12);
const SPOT_RADIUS: (f64, f64) = (0.01, 0.03);
const MAX_SPOTS: usize = 5;

fn in_mask(img: &ImageRgb, mask: &[bool], x: f64, y: f64) -> bool {
    if x < 0.0 || y < 0.0 {
        return false;
    }
    let (xi, yi) = (x as usize, y as usize);
    xi < img.width() && yi < img.height() && mask[yi * img.width() + xi]
}

/// Area-uniform point in a disk, retried until it lands on a masked pixel.
fn place_in_disk(
    img: &ImageRgb,
    mask: &[bool],
    cx: f64,
    cy: f64,
    radius: f64,
    rng: &mut RngStream,
) -> Option<(f64, f64)> {
    for _ in 0..MAX_PLACEMENT_TRIES {
        let r = radius * math::sqrt(rng.uniform());
        let theta = 2.0 * core::f64::consts::PI * rng.uniform();
        let (x, y) = (cx + r * math::cos(theta), cy + r * math::sin(theta));
        if in_mask(img, mask, x, y) {
            return Some((x, y));
        }
    }
    None
}

pub(super) fn sample_halo(
    img: &ImageRgb,
    mask: &[bool],
    fov: Fov,
    rng: &mut RngStream,
) -> Option<HaloGeometry> {
    let (cx, cy) = place_in_disk(img, mask, fov.cx, fov.cy, fov.radius / 3.0, rng)?;
    let ring_radius = fov.radius * rng.range(HALO_RING.0, HALO_RING.1);
    let width = (fov.radius * rng.range(HALO_WIDTH.0, HALO_WIDTH.1)).max(1e-6);
    Some(HaloGeometry {
        cx,
        cy,
        ring_radius,
        width,
    })
}

pub(super) fn sample_hole(
    img: &ImageRgb,
    mask: &[bool],
    fov: Fov,
    rng: &mut RngStream,
) -> Option<Disk> {
    let (cx, cy) = place_in_disk(img, mask, fov.cx, fov.cy, fov.radius, rng)?;
    let radius = img.width() as f64 * rng.range(HOLE_RADIUS.0, HOLE_RADIUS.1);
    Some(Disk { cx, cy, radius })
}

pub(super) fn sample_spots(
    img: &ImageRgb,
    mask: &[bool],
    fov: Fov,
    rng: &mut RngStream,
) -> Option<Vec<Disk>> {
    let k = 1 + rng.below(MAX_SPOTS);
    let mut spots = Vec::with_capacity(k);
    for _ in 0..k {
        if let Some((cx, cy)) = place_in_disk(img, mask, fov.cx, fov.cy, fov.radius, rng) {
            let radius = img.width() as f64 * rng.range(SPOT_RADIUS.0, SPOT_RADIUS.1);
            spots.push(Disk { cx, cy, radius });
        }
    }
    (!spots.is_empty()).then_some(spots)
}

/// Halo ramp: 1 at the ring radius, falling linearly to 0 at `width` away on
/// either side.
pub fn halo_profile(d: f64, g: &HaloGeometry) -> f64 {
    (1.0 - math::abs(d - g.ring_radius) / g.width).max(0.0)
}

/// Hole opacity: 1 inside `radius - HOLE_EDGE`, linear to 0 at `radius`.
pub fn hole_profile(d: f64, radius: f64) -> f64 {
    ((radius - d) / HOLE_EDGE).clamp(0.0, 1.0)
}

/// Spot opacity: 1 inside `radius`, linear to 0 at `radius + SPOT_EDGE`.
pub fn spot_profile(d: f64, radius: f64) -> f64 {
    ((radius + SPOT_EDGE - d) / SPOT_EDGE).clamp(0.0, 1.0)
}

fn for_each_masked(img: &mut ImageRgb, mut f: impl FnMut(f64, f64, &mut [f64])) {
    let mask = img.effective_mask();
    let w = img.width();
    for (i, px) in img.data.chunks_exact_mut(3).enumerate() {
        if mask[i] {
            let (x, y) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            f(x, y, px);
        }
    }
}

fn dist(x: f64, y: f64, cx: f64, cy: f64) -> f64 {
    math::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy))
}

pub fn apply_halo(img: &ImageRgb, m: f64, g: &HaloGeometry) -> ImageRgb {
    let m = TransformKind::Halo.clamp_intensity(m);
    let mut out = img.clone();
    if m == 0.0 {
        return out;
    }
    for_each_masked(&mut out, |x, y, px| {
        let add = m * halo_profile(dist(x, y, g.cx, g.cy), g);
        for v in px {
            *v = math::clamp01(*v + add);
        }
    });
    out
}

pub fn apply_hole(img: &ImageRgb, m: f64, disk: &Disk) -> ImageRgb {
    let m = TransformKind::Hole.clamp_intensity(m);
    let mut out = img.clone();
    if m == 0.0 {
        return out;
    }
    for_each_masked(&mut out, |x, y, px| {
        let a = hole_profile(dist(x, y, disk.cx, disk.cy), disk.radius);
        if a > 0.0 {
            let factor = 1.0 - m * a;
            for v in px {
                *v = math::clamp01(*v * factor);
            }
        }
    });
    out
}

pub fn apply_spots(img: &ImageRgb, m: f64, spots: &[Disk]) -> ImageRgb {
    let m = TransformKind::Spot.clamp_intensity(m);
    let mut out = img.clone();
    if m == 0.0 {
        return out;
    }
    for spot in spots {
        for_each_masked(&mut out, |x, y, px| {
            let alpha = m * spot_profile(dist(x, y, spot.cx, spot.cy), spot.radius);
            if alpha > 0.0 {
                for (v, c) in px.iter_mut().zip(SPOT_COLOR) {
                    *v = math::clamp01((1.0 - alpha) * *v + alpha * c);
                }
            }
        });
    }
    out
}

/// Halo with freshly sampled geometry; returns the input unchanged when no
/// center can be placed.
pub fn add_halo(img: &ImageRgb, m: f64, rng: &mut RngStream) -> (ImageRgb, Option<HaloGeometry>) {
    let g = sample_halo(img, &img.effective_mask(), img.fov(), rng);
    match g {
        Some(g) => (apply_halo(img, m, &g), Some(g)),
        None => (img.clone(), None),
    }
}

pub fn add_hole(img: &ImageRgb, m: f64, rng: &mut RngStream) -> (ImageRgb, Option<Disk>) {
    let d = sample_hole(img, &img.effective_mask(), img.fov(), rng);
    match d {
        Some(d) => (apply_hole(img, m, &d), Some(d)),
        None => (img.clone(), None),
    }
}

pub fn add_spot(img: &ImageRgb, m: f64, rng: &mut RngStream) -> (ImageRgb, Vec<Disk>) {
    let spots = sample_spots(img, &img.effective_mask(), img.fov(), rng).unwrap_or_default();
    (apply_spots(img, m, &spots), spots)
}

/// Normalized 1-D Gaussian taps truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = math::ceil(3.0 * sigma).max(1.0) as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| math::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur with replicated borders; `sigma` in pixels.
pub fn blur(img: &ImageRgb, sigma: f64) -> ImageRgb {
    let sigma = TransformKind::Blur.clamp_intensity(sigma);
    let kernel = gaussian_kernel(sigma);
    let r = kernel.len() / 2;
    let (w, h) = (img.width(), img.height());
    let row = w * 3;
    let src = img.data();
    // taps accumulate in kernel order, matching a direct per-pixel sum
    let mut tmp = vec![0.0; src.len()];
    let mut padded = vec![0.0; (w + 2 * r) * 3];
    for y in 0..h {
        let line = &src[y * row..][..row];
        for (i, px) in padded.chunks_exact_mut(3).enumerate() {
            let x = i.saturating_sub(r).min(w - 1);
            px.copy_from_slice(&line[x * 3..x * 3 + 3]);
        }
        let dst = &mut tmp[y * row..][..row];
        for (t, &kv) in kernel.iter().enumerate() {
            for (d, s) in dst.iter_mut().zip(&padded[t * 3..][..row]) {
                *d += kv * s;
            }
        }
    }
    let mut out = img.clone();
    let mut acc = vec![0.0; row];
    for y in 0..h {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (t, &kv) in kernel.iter().enumerate() {
            let yy = (y + t).saturating_sub(r).min(h - 1);
            for (a, s) in acc.iter_mut().zip(&tmp[yy * row..][..row]) {
                *a += kv * s;
            }
        }
        for (o, a) in out.data[y * row..][..row].iter_mut().zip(&acc) {
            *o = math::clamp01(*a);
        }
    }
    out
}
