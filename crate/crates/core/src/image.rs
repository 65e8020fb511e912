//! Floating-point RGB rasters, HSV conversion, and resampling.
//!
//! Channels are stored as `f64` in `[0, 1]` and only quantized at file
//! boundaries, so chained augmentations never accumulate 8-bit rounding.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Row-major RGB raster with an optional circular field-of-view mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    pub(crate) data: Vec<f64>,
    fov_mask: Option<Vec<bool>>,
}

/// Center and radius of the fundus field of view, in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fov {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Fov {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

impl ImageRgb {
    /// Builds an image from interleaved RGB data; values are clamped into `[0, 1]`.
    pub fn new(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height * 3 {
            return Err(Error::RasterLength {
                width,
                height,
                channels: 3,
                got: data.len(),
            });
        }
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { math::clamp01(*v) };
        }
        Ok(Self {
            width,
            height,
            data,
            fov_mask: None,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Attaches an explicit field-of-view mask.
    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.width * self.height {
            return Err(Error::RasterLength {
                width: self.width,
                height: self.height,
                channels: 1,
                got: mask.len(),
            });
        }
        self.fov_mask = Some(mask);
        Ok(self)
    }

    pub fn without_mask(mut self) -> Self {
        self.fov_mask = None;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.fov_mask.as_deref()
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        for c in 0..3 {
            self.data[i + c] = math::clamp01(rgb[c]);
        }
    }

    pub(crate) fn map_channels(&mut self, mut f: impl FnMut(f64) -> f64) {
        for v in &mut self.data {
            *v = math::clamp01(f(*v));
        }
    }

    /// The supplied mask, or the largest inscribed circle when none is attached.
    pub fn effective_mask(&self) -> Vec<bool> {
        match &self.fov_mask {
            Some(m) => m.clone(),
            None => inscribed_circle_mask(self.width, self.height),
        }
    }

    /// Circle approximating the field of view: the inscribed circle, or the
    /// centroid and equal-area radius of an explicit mask.
    pub fn fov(&self) -> Fov {
        match &self.fov_mask {
            None => inscribed_circle(self.width, self.height),
            Some(mask) => {
                let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
                for y in 0..self.height {
                    for x in 0..self.width {
                        if mask[y * self.width + x] {
                            sx += x as f64 + 0.5;
                            sy += y as f64 + 0.5;
                            n += 1;
                        }
                    }
                }
                if n == 0 {
                    return Fov {
                        cx: self.width as f64 / 2.0,
                        cy: self.height as f64 / 2.0,
                        radius: 0.0,
                    };
                }
                Fov {
                    cx: sx / n as f64,
                    cy: sy / n as f64,
                    radius: math::sqrt(n as f64 / core::f64::consts::PI),
                }
            }
        }
    }

    pub fn min_channel(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_channel(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest per-channel absolute difference; `None` when shapes differ.
    pub fn max_abs_diff(&self, other: &ImageRgb) -> Option<f64> {
        if self.width != other.width || self.height != other.height {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| math::abs(a - b))
                .fold(0.0, f64::max),
        )
    }

    /// Horizontal mirror of pixels and mask.
    pub fn flip_horizontal(&self) -> ImageRgb {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0.0; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let src = (y * w + (w - 1 - x)) * 3;
                let dst = (y * w + x) * 3;
                data[dst..dst + 3].copy_from_slice(&self.data[src..src + 3]);
            }
        }
        let fov_mask = self.fov_mask.as_ref().map(|m| {
            let mut out = vec![false; m.len()];
            for y in 0..h {
                for x in 0..w {
                    out[y * w + x] = m[y * w + (w - 1 - x)];
                }
            }
            out
        });
        ImageRgb {
            width: w,
            height: h,
            data,
            fov_mask,
        }
    }

    /// Sub-rectangle `[x0, x0+w) x [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<ImageRgb> {
        check_dims(w, h)?;
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Shape(alloc::format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width,
                self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * 3);
        for y in y0..y0 + h {
            let row = (y * self.width + x0) * 3;
            data.extend_from_slice(&self.data[row..row + w * 3]);
        }
        let fov_mask = self.fov_mask.as_ref().map(|m| {
            let mut out = Vec::with_capacity(w * h);
            for y in y0..y0 + h {
                out.extend_from_slice(&m[y * self.width + x0..y * self.width + x0 + w]);
            }
            out
        });
        Ok(ImageRgb {
            width: w,
            height: h,
            data,
            fov_mask,
        })
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        Err(Error::ZeroDimension { width, height })
    } else {
        Ok(())
    }
}

pub fn inscribed_circle(width: usize, height: usize) -> Fov {
    Fov {
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        radius: width.min(height) as f64 / 2.0,
    }
}

/// Pixels whose centers lie in the largest circle inscribed in the frame.
pub fn inscribed_circle_mask(width: usize, height: usize) -> Vec<bool> {
    let fov = inscribed_circle(width, height);
    let mut mask = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            mask.push(fov.contains(x as f64 + 0.5, y as f64 + 0.5));
        }
    }
    mask
}

/// Rec. 601 luma.
#[inline]
pub fn luminance(rgb: [f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

/// Bilinear resampling with half-pixel-centered sample positions; the mask
/// follows by nearest neighbour.
pub fn resize_bilinear(img: &ImageRgb, new_w: usize, new_h: usize) -> Result<ImageRgb> {
    check_dims(new_w, new_h)?;
    let (sw, sh) = (img.width, img.height);
    if sw == new_w && sh == new_h {
        return Ok(img.clone());
    }
    let sx = sw as f64 / new_w as f64;
    let sy = sh as f64 / new_h as f64;
    let taps = |dst: usize, scale: f64, limit: usize| {
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (limit - 1) as f64);
        let i0 = math::floor(pos) as usize;
        let i1 = (i0 + 1).min(limit - 1);
        (i0, i1, pos - i0 as f64)
    };
    let xtaps: Vec<_> = (0..new_w).map(|x| taps(x, sx, sw)).collect();
    let mut data = Vec::with_capacity(new_w * new_h * 3);
    for y in 0..new_h {
        let (y0, y1, fy) = taps(y, sy, sh);
        for &(x0, x1, fx) in &xtaps {
            for c in 0..3 {
                let p = |xx: usize, yy: usize| img.data[(yy * sw + xx) * 3 + c];
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                data.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    let mut out = ImageRgb::new(new_w, new_h, data)?;
    if let Some(mask) = &img.fov_mask {
        let mut m = Vec::with_capacity(new_w * new_h);
        for y in 0..new_h {
            let yy = (((y as f64 + 0.5) * sy) as usize).min(sh - 1);
            for x in 0..new_w {
                let xx = (((x as f64 + 0.5) * sx) as usize).min(sw - 1);
                m.push(mask[yy * sw + xx]);
            }
        }
        out.fov_mask = Some(m);
    }
    Ok(out)
}

/// Hexcone HSV pixel: hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl HsvPixel {
    /// Wraps hue and clamps saturation/value into range.
    pub fn new(h: f64, s: f64, v: f64) -> Self {
        Self {
            h: math::rem_euclid(h, 360.0),
            s: math::clamp01(s),
            v: math::clamp01(v),
        }
    }
}

pub fn rgb_to_hsv(rgb: [f64; 3]) -> HsvPixel {
    let [r, g, b] = rgb.map(math::clamp01);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    // gray axis: hue is undefined, pinned to 0
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        60.0 * math::rem_euclid((g - b) / delta, 6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    HsvPixel::new(h, s, v)
}

pub fn hsv_to_rgb(hsv: HsvPixel) -> [f64; 3] {
    let HsvPixel { h, s, v } = HsvPixel::new(hsv.h, hsv.s, hsv.v);
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - math::abs(math::rem_euclid(hp, 2.0) - 1.0));
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r1 + m, g1 + m, b1 + m].map(math::clamp01)
}
