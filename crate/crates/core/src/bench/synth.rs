//! Synthetic multi-domain fundus-like corpus.
//!
//! Each image is a circular field of view with radial shading, a bright disc,
//! curved dark vessels, and grade-dependent lesion dots. Domains differ in
//! color cast, illumination, degradation incidence, and class balance.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::augment::{add_halo, add_spot, blur};
use crate::data::{Dataset, Sample, N_GRADES};
use crate::error::{Error, Result};
use crate::image::{inscribed_circle, inscribed_circle_mask, ImageRgb};
use crate::math;
use crate::rng::{Purpose, RngStream};

const RETINA: [f64; 3] = [0.80, 0.42, 0.22];
const DISC: [f64; 3] = [0.98, 0.88, 0.62];
const VESSEL_GAIN: [f64; 3] = [0.62, 0.40, 0.42];
const HEMORRHAGE: [f64; 3] = [0.40, 0.07, 0.05];
const EXUDATE: [f64; 3] = [0.96, 0.86, 0.38];
/// Probability that a lesion of grade `g` is an exudate rather than a red dot.
const EXUDATE_SHARE: [f64; N_GRADES] = [0.0, 0.0, 0.35, 0.45, 0.5];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthDomainSpec {
    pub name: String,
    /// Additive RGB offset applied after shading.
    pub color_cast: [f64; 3],
    /// Multiplicative brightness of the whole field.
    pub illumination: f64,
    pub halo_rate: f64,
    pub blur_rate: f64,
    pub spot_rate: f64,
    /// Images per grade.
    pub class_counts: Vec<usize>,
    /// Mean lesion count per grade.
    pub lesion_density: Vec<f64>,
    /// Mean lesion radius in pixels per grade.
    pub lesion_size: Vec<f64>,
    pub width: usize,
    pub height: usize,
}

impl SynthDomainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSynthSpec(alloc::format!("{}: {m}", self.name)));
        if self.name.is_empty() {
            return bad("empty domain name".to_string());
        }
        if self.class_counts.len() != N_GRADES
            || self.lesion_density.len() != N_GRADES
            || self.lesion_size.len() != N_GRADES
        {
            return bad(alloc::format!("per-grade lists must have {N_GRADES} entries"));
        }
        if self.class_counts.iter().filter(|&&c| c > 0).count() < 2 {
            return bad("at least two grades need a nonzero count".to_string());
        }
        for (what, r) in [("halo_rate", self.halo_rate), ("blur_rate", self.blur_rate), ("spot_rate", self.spot_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(alloc::format!("{what} {r} outside [0, 1]"));
            }
        }
        if !(self.illumination > 0.0) {
            return bad("illumination must be positive".to_string());
        }
        if self.lesion_density.iter().chain(&self.lesion_size).any(|&v| !(v >= 0.0)) {
            return bad("lesion parameters must be nonnegative".to_string());
        }
        if self.width < 8 || self.height < 8 {
            return bad(alloc::format!("image {}x{} smaller than 8x8", self.width, self.height));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.class_counts.iter().sum()
    }
}

/// Four 64x64 domains of 200 images: two mild clinics, one heavily degraded,
/// one heavily imbalanced.
pub fn default_specs() -> Vec<SynthDomainSpec> {
    let mk = |name: &str, cast: [f64; 3], illum: f64, rates: [f64; 3], counts: [usize; 5]| SynthDomainSpec {
        name: name.to_string(),
        color_cast: cast,
        illumination: illum,
        halo_rate: rates[0],
        blur_rate: rates[1],
        spot_rate: rates[2],
        class_counts: counts.to_vec(),
        lesion_density: vec![0.0, 5.0, 11.0, 19.0, 30.0],
        lesion_size: vec![0.0, 1.3, 1.6, 1.9, 2.2],
        width: 64,
        height: 64,
    };
    vec![
        mk("alpha", [0.0, 0.0, 0.0], 1.0, [0.1, 0.1, 0.05], [70, 40, 40, 25, 25]),
        mk("beta", [0.15, -0.06, -0.10], 0.8, [0.1, 0.15, 0.05], [60, 45, 40, 30, 25]),
        mk("gamma", [-0.10, 0.06, 0.15], 1.15, [0.7, 0.6, 0.5], [55, 45, 40, 35, 25]),
        mk("delta", [0.05, 0.12, -0.05], 0.62, [0.05, 0.1, 0.05], [130, 35, 20, 10, 5]),
    ]
}

/// One rendered image with the number of pixels covered by lesions.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub image: ImageRgb,
    pub lesion_pixels: usize,
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn point_in_disk(rng: &mut RngStream, cx: f64, cy: f64, radius: f64) -> (f64, f64) {
    let r = radius * math::sqrt(rng.uniform());
    let t = 2.0 * core::f64::consts::PI * rng.uniform();
    (cx + r * math::cos(t), cy + r * math::sin(t))
}

/// Renders one image of grade `grade` in the style of `spec`.
pub fn render(spec: &SynthDomainSpec, grade: usize, rng: &mut RngStream) -> Result<SynthImage> {
    let (w, h) = (spec.width, spec.height);
    let fov = inscribed_circle(w, h);
    let mask = inscribed_circle_mask(w, h);
    let mut px = vec![[0.0f64; 3]; w * h];
    let centre = |i: usize| ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);

    let gain = 1.0 + 0.06 * rng.normal();
    for (i, p) in px.iter_mut().enumerate() {
        let (x, y) = centre(i);
        let d = math::sqrt((x - fov.cx) * (x - fov.cx) + (y - fov.cy) * (y - fov.cy)) / fov.radius;
        let shade = gain * (1.0 - 0.3 * d * d);
        *p = [RETINA[0] * shade, RETINA[1] * shade, RETINA[2] * shade];
    }

    let angle = 2.0 * core::f64::consts::PI * rng.uniform();
    let dist = rng.range(0.35, 0.5) * fov.radius;
    let (dx, dy) = (fov.cx + dist * math::cos(angle), fov.cy + dist * math::sin(angle));
    let disc_r = rng.range(0.12, 0.16) * fov.radius;
    for (i, p) in px.iter_mut().enumerate() {
        let (x, y) = centre(i);
        let d = math::sqrt((x - dx) * (x - dx) + (y - dy) * (y - dy));
        let t = math::clamp01((disc_r - d) / 1.5);
        *p = mix(*p, DISC, t);
    }

    let mut vessel = vec![0.0f64; w * h];
    for _ in 0..5 {
        let ea = 2.0 * core::f64::consts::PI * rng.uniform();
        let er = rng.range(0.6, 0.95) * fov.radius;
        let (ex, ey) = (fov.cx + er * math::cos(ea), fov.cy + er * math::sin(ea));
        let (mx, my) = point_in_disk(rng, (dx + ex) / 2.0, (dy + ey) / 2.0, 0.3 * fov.radius);
        let thick = rng.range(0.6, 1.1);
        let len = math::sqrt((ex - dx) * (ex - dx) + (ey - dy) * (ey - dy)) * 1.5;
        let steps = (len * 4.0) as usize + 2;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let a = (1.0 - t) * (1.0 - t);
            let b = 2.0 * t * (1.0 - t);
            let c = t * t;
            let (qx, qy) = (a * dx + b * mx + c * ex, a * dy + b * my + c * ey);
            let x0 = (qx - 2.0).max(0.0) as usize;
            let y0 = (qy - 2.0).max(0.0) as usize;
            for y in y0..((qy + 3.0) as usize).min(h) {
                for x in x0..((qx + 3.0) as usize).min(w) {
                    let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                    let d = math::sqrt((cx - qx) * (cx - qx) + (cy - qy) * (cy - qy));
                    let v = math::clamp01(thick + 0.5 - d);
                    let cell = &mut vessel[y * w + x];
                    *cell = cell.max(v);
                }
            }
        }
    }
    for (p, &v) in px.iter_mut().zip(&vessel) {
        let dark = [p[0] * VESSEL_GAIN[0], p[1] * VESSEL_GAIN[1], p[2] * VESSEL_GAIN[2]];
        *p = mix(*p, dark, v);
    }

    let mut lesion = vec![false; w * h];
    let density = spec.lesion_density[grade];
    let count = if density > 0.0 {
        math::floor(density * rng.range(0.8, 1.2) + rng.uniform()) as usize
    } else {
        0
    };
    for _ in 0..count {
        let (lx, ly) = point_in_disk(rng, fov.cx, fov.cy, 0.85 * fov.radius);
        let radius = (spec.lesion_size[grade] * rng.range(0.75, 1.25)).max(0.6);
        let color = if rng.bernoulli(EXUDATE_SHARE[grade]) { EXUDATE } else { HEMORRHAGE };
        for (i, p) in px.iter_mut().enumerate() {
            let (x, y) = centre(i);
            let d = math::sqrt((x - lx) * (x - lx) + (y - ly) * (y - ly));
            let cover = math::clamp01(radius + 0.5 - d);
            if cover > 0.0 && mask[i] {
                *p = mix(*p, color, cover);
                lesion[i] |= cover >= 0.5;
            }
        }
    }

    let mut data = Vec::with_capacity(w * h * 3);
    for (i, p) in px.iter().enumerate() {
        for c in 0..3 {
            let v = p[c] * spec.illumination + spec.color_cast[c];
            data.push(if mask[i] { math::clamp01(v) } else { 0.0 });
        }
    }
    let mut image = ImageRgb::new(w, h, data)?.with_mask(mask)?;
    if rng.bernoulli(spec.halo_rate) {
        let m = rng.range(0.4, 0.9);
        image = add_halo(&image, m, rng).0;
    }
    if rng.bernoulli(spec.blur_rate) {
        let sigma = rng.range(0.7, 1.5);
        image = blur(&image, sigma);
    }
    if rng.bernoulli(spec.spot_rate) {
        let m = rng.range(0.5, 1.0);
        image = add_spot(&image, m, rng).0;
    }
    Ok(SynthImage {
        image,
        lesion_pixels: lesion.iter().filter(|&&b| b).count(),
    })
}

/// Generated corpus; `lesion_pixels[k]` belongs to `dataset.samples[k]`.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dataset: Dataset,
    pub lesion_pixels: Vec<usize>,
}

/// Renders every domain in spec order, grades ascending within a domain.
/// Image `k` of domain `d` draws from its own stream, so the corpus is a pure
/// function of `(specs, seed)`.
pub fn generate(specs: &[SynthDomainSpec], seed: u64) -> Result<SynthCorpus> {
    if specs.is_empty() {
        return Err(Error::InvalidSynthSpec("no domains".to_string()));
    }
    for (i, s) in specs.iter().enumerate() {
        s.validate()?;
        if specs[..i].iter().any(|o| o.name == s.name) {
            return Err(Error::InvalidSynthSpec(alloc::format!("duplicate domain '{}'", s.name)));
        }
    }
    let mut samples = Vec::new();
    let mut lesion_pixels = Vec::new();
    for (d, spec) in specs.iter().enumerate() {
        let mut k = 0u64;
        for (grade, &n) in spec.class_counts.iter().enumerate() {
            for _ in 0..n {
                let mut rng = RngStream::derive(seed, k, d as u64, Purpose::Synth);
                let img = render(spec, grade, &mut rng)?;
                samples.push(Sample {
                    image: img.image,
                    grade,
                    domain: d,
                });
                lesion_pixels.push(img.lesion_pixels);
                k += 1;
            }
        }
    }
    Ok(SynthCorpus {
        dataset: Dataset::new(specs.iter().map(|s| s.name.clone()).collect(), N_GRADES, samples)?,
        lesion_pixels,
    })
}
