use alloc::vec::Vec;

use super::TransformKind;
use crate::image::{hsv_to_rgb, luminance, rgb_to_hsv, HsvPixel, ImageRgb};
use crate::math;

/// `v <- clamp(v + m)` on every channel.
pub fn adjust_brightness(img: &ImageRgb, m: f64) -> ImageRgb {
    let m = TransformKind::Brightness.clamp_intensity(m);
    let mut out = img.clone();
    out.map_channels(|v| v + m);
    out
}

/// Scales each channel's distance from the mean luminance inside the FOV.
pub fn adjust_contrast(img: &ImageRgb, m: f64) -> ImageRgb {
    let m = TransformKind::Contrast.clamp_intensity(m);
    let mu = fov_mean_luminance(img);
    let mut out = img.clone();
    out.map_channels(|v| mu + m * (v - mu));
    out
}

pub(crate) fn fov_mean_luminance(img: &ImageRgb) -> f64 {
    let mask = img.effective_mask();
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        if mask[i] {
            sum += luminance([px[0], px[1], px[2]]);
            n += 1;
        }
    }
    if n == 0 {
        // empty field of view: fall back to the whole frame
        let all: f64 = img
            .data()
            .chunks_exact(3)
            .map(|px| luminance([px[0], px[1], px[2]]))
            .sum();
        return all / (img.width() * img.height()) as f64;
    }
    sum / n as f64
}

fn map_hsv(img: &ImageRgb, f: impl Fn(HsvPixel) -> HsvPixel) -> ImageRgb {
    let mut out = img.clone();
    for px in out.data.chunks_exact_mut(3) {
        let rgb = hsv_to_rgb(f(rgb_to_hsv([px[0], px[1], px[2]])));
        px.copy_from_slice(&rgb);
    }
    out
}

/// `s <- clamp(m * s)` in HSV space.
///
/// With hue and value fixed every channel is affine in `s` around `v`, so the
/// update runs directly in RGB.
pub fn adjust_saturation(img: &ImageRgb, m: f64) -> ImageRgb {
    let m = TransformKind::Saturation.clamp_intensity(m);
    let mut out = img.clone();
    for px in out.data.chunks_exact_mut(3) {
        let v = px[0].max(px[1]).max(px[2]);
        let lo = px[0].min(px[1]).min(px[2]);
        if v <= 0.0 || v == lo {
            continue;
        }
        let s = (v - lo) / v;
        let ratio = math::clamp01(m * s) / s;
        for c in px.iter_mut() {
            *c = math::clamp01(v - ratio * (v - *c));
        }
    }
    out
}

/// `h <- (h + m) mod 360`, `m` in degrees.
pub fn adjust_hue(img: &ImageRgb, m: f64) -> ImageRgb {
    let m = TransformKind::Hue.clamp_intensity(m);
    map_hsv(img, |p| HsvPixel::new(p.h + m, p.s, p.v))
}

/// 3x3 box filter with replicated borders.
pub fn box_blur3(img: &ImageRgb) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let data = img.data();
    let row = w * 3;
    // horizontal 3-tap sums
    let mut tmp = alloc::vec![0.0; data.len()];
    for y in 0..h {
        let src = &data[y * row..][..row];
        let dst = &mut tmp[y * row..][..row];
        for x in 0..w {
            let l = x.saturating_sub(1) * 3;
            let r = (x + 1).min(w - 1) * 3;
            for c in 0..3 {
                dst[x * 3 + c] = src[l + c] + src[x * 3 + c] + src[r + c];
            }
        }
    }
    let mut out = alloc::vec![0.0; data.len()];
    for y in 0..h {
        let up = &tmp[y.saturating_sub(1) * row..][..row];
        let mid = &tmp[y * row..][..row];
        let down = &tmp[(y + 1).min(h - 1) * row..][..row];
        for (i, o) in out[y * row..][..row].iter_mut().enumerate() {
            *o = (up[i] + mid[i] + down[i]) / 9.0;
        }
    }
    out
}

/// `v <- clamp((1 - m) * blur3(v) + m * v)`: m < 1 softens, m > 1 sharpens.
pub fn adjust_sharpness(img: &ImageRgb, m: f64) -> ImageRgb {
    let m = TransformKind::Sharpness.clamp_intensity(m);
    if m == 1.0 {
        return img.clone();
    }
    let blurred = box_blur3(img);
    let mut out = img.clone();
    for (v, b) in out.data.iter_mut().zip(&blurred) {
        *v = math::clamp01((1.0 - m) * b + m * *v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn random_image(seed: u64) -> ImageRgb {
        let mut rng = RngStream::new(seed);
        ImageRgb::from_fn(9, 7, |_, _| [rng.uniform(), rng.uniform(), rng.uniform()]).unwrap()
    }

    fn assert_constant(img: &ImageRgb, rgb: [f64; 3], tol: f64) {
        for px in img.data().chunks_exact(3) {
            for c in 0..3 {
                assert!((px[c] - rgb[c]).abs() <= tol, "{px:?} vs {rgb:?}");
            }
        }
    }

    #[test]
    fn brightness_cases() {
        let img = random_image(1);
        assert_eq!(adjust_brightness(&img, 0.0), img);
        let half = ImageRgb::filled(3, 3, [0.5; 3]).unwrap();
        assert_constant(&adjust_brightness(&half, 0.3), [0.8; 3], 1e-12);
        let bright = ImageRgb::filled(3, 3, [0.9; 3]).unwrap();
        assert_constant(&adjust_brightness(&bright, 0.3), [1.0; 3], 0.0);
    }

    #[test]
    fn contrast_cases() {
        let img = random_image(2);
        assert!(adjust_contrast(&img, 1.0).max_abs_diff(&img).unwrap() <= 1e-12);
        let c = ImageRgb::filled(4, 4, [0.3, 0.6, 0.2]).unwrap();
        // per-channel values differ from luminance, but every pixel maps identically
        let out = adjust_contrast(&c, 1.4);
        let p0 = out.pixel(0, 0);
        assert_constant(&out, p0, 1e-12);
        let gray = ImageRgb::filled(4, 4, [0.4; 3]).unwrap();
        assert_constant(&adjust_contrast(&gray, 0.5), [0.4; 3], 1e-12);
    }

    #[test]
    fn contrast_two_pixel_oracle() {
        let img = ImageRgb::new(2, 1, alloc::vec![0.25, 0.25, 0.25, 0.75, 0.75, 0.75]).unwrap();
        let out = adjust_contrast(&img, 2.0);
        // mu = 0.5 over both pixels; 0.5 + 2 * (v - 0.5)
        let expect = |v: f64| (0.5 + 2.0 * (v - 0.5)).clamp(0.0, 1.0);
        assert_constant(&out.crop(0, 0, 1, 1).unwrap(), [expect(0.25); 3], 1e-12);
        assert_constant(&out.crop(1, 0, 1, 1).unwrap(), [expect(0.75); 3], 1e-12);
    }

    #[test]
    fn saturation_and_hue_identity() {
        let img = random_image(3);
        assert!(adjust_saturation(&img, 1.0).max_abs_diff(&img).unwrap() <= 1e-6);
        assert!(adjust_hue(&img, 0.0).max_abs_diff(&img).unwrap() <= 1e-6);
    }

    #[test]
    fn hue_leaves_gray_unchanged() {
        let gray = ImageRgb::filled(3, 3, [0.37; 3]).unwrap();
        for m in [-18.0, 7.5, 18.0, 120.0] {
            assert!(adjust_hue(&gray, m).max_abs_diff(&gray).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn red_plus_120_is_green() {
        let red = ImageRgb::filled(1, 1, [1.0, 0.0, 0.0]).unwrap();
        let out = adjust_hue(&red, 120.0);
        assert_constant(&out, [0.0, 1.0, 0.0], 1e-6);
    }

    #[test]
    fn saturation_zero_gives_gray() {
        let img = random_image(4);
        let out = adjust_saturation(&img, 0.0);
        for px in out.data().chunks_exact(3) {
            assert!((px[0] - px[1]).abs() < 1e-12 && (px[1] - px[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn sharpness_cases() {
        let img = random_image(5);
        assert_eq!(adjust_sharpness(&img, 1.0), img);
        let c = ImageRgb::filled(5, 5, [0.2, 0.5, 0.7]).unwrap();
        assert_constant(&adjust_sharpness(&c, 1.5), [0.2, 0.5, 0.7], 1e-12);
        assert_constant(&adjust_sharpness(&c, 0.5), [0.2, 0.5, 0.7], 1e-12);
    }

    #[test]
    fn sharpness_center_impulse_oracle() {
        // 3x3, center 0.6, rest 0.3. With replicated borders the box mean is
        // (8 * 0.3 + 0.6) / 9 = 1/3 at every pixel (each window sees the center once).
        let mut img = ImageRgb::filled(3, 3, [0.3; 3]).unwrap();
        img.set_pixel(1, 1, [0.6; 3]);
        let out = adjust_sharpness(&img, 1.5);
        let blur_c = (8.0 * 0.3 + 0.6) / 9.0;
        let center = (-0.5 * blur_c + 1.5 * 0.6_f64).clamp(0.0, 1.0);
        assert!((out.pixel(1, 1)[0] - center).abs() < 1e-12);
        // corner (0,0): window rows/cols {0,0,1} -> center pixel counted once
        let corner = (-0.5 * blur_c + 1.5 * 0.3_f64).clamp(0.0, 1.0);
        assert!((out.pixel(0, 0)[0] - corner).abs() < 1e-12);
        // edge (1,0): window rows {0,0,1}, cols {0,1,2} -> center counted once
        assert!((out.pixel(1, 0)[0] - corner).abs() < 1e-12);
    }
}
