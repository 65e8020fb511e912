//! Small classifier-plus-embedder with hand-written forward and backward passes.
//!
//! Layout: fixed average pooling of the input, two stride-2 3x3 convolutions
//! with SiLU, global average pooling into the trunk feature, then a linear
//! classifier head and a two-layer projection head whose output is
//! L2-normalized. Parameters live in one flat buffer so optimizers and
//! finite-difference checks can treat them uniformly.

mod optim;
mod train;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use optim::{lr_at, sgd_step, OptimState};
pub use train::{
    batch_objective, strong_view, train, DcrApplication, weak_view, AlphaMode, BatchObjective, Components,
    EpochRecord, Method, ObjectiveSpec, TrainConfig, TrainHistory, Trained,
};

use crate::error::{Error, Result};
use crate::image::ImageRgb;
use crate::math;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetConfig {
    pub input_width: usize,
    pub input_height: usize,
    /// Side of the fixed average-pooling window applied to the input.
    pub input_pool: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub classes: usize,
    pub proj_hidden: usize,
    pub embed_dim: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            input_width: 64,
            input_height: 64,
            input_pool: 2,
            conv1_channels: 8,
            conv2_channels: 32,
            classes: 5,
            proj_hidden: 32,
            embed_dim: 32,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.input_width,
            self.input_height,
            self.input_pool,
            self.conv1_channels,
            self.conv2_channels,
            self.classes,
            self.proj_hidden,
            self.embed_dim,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidTrainConfig(format!(
                "network dimensions must be positive: {self:?}"
            )));
        }
        if self.input_width < self.input_pool || self.input_height < self.input_pool {
            return Err(Error::InvalidTrainConfig(format!(
                "input {}x{} smaller than pooling window {}",
                self.input_width, self.input_height, self.input_pool
            )));
        }
        Ok(())
    }

    fn pooled(&self) -> (usize, usize) {
        (
            self.input_width / self.input_pool,
            self.input_height / self.input_pool,
        )
    }

    fn conv_out(n: usize) -> usize {
        (n - 1) / 2 + 1
    }

    fn grid1(&self) -> (usize, usize) {
        let (w, h) = self.pooled();
        (Self::conv_out(w), Self::conv_out(h))
    }

    fn grid2(&self) -> (usize, usize) {
        let (w, h) = self.grid1();
        (Self::conv_out(w), Self::conv_out(h))
    }

    fn layout(&self) -> Layout {
        let mut off = 0;
        let mut take = |n: usize| {
            let r = off..off + n;
            off += n;
            r
        };
        let c0 = 3;
        let (c1, c2) = (self.conv1_channels, self.conv2_channels);
        Layout {
            conv1_w: take(c1 * 9 * c0),
            conv1_b: take(c1),
            conv2_w: take(c2 * 9 * c1),
            conv2_b: take(c2),
            cls_w: take(self.classes * c2),
            cls_b: take(self.classes),
            proj1_w: take(self.proj_hidden * c2),
            proj1_b: take(self.proj_hidden),
            proj2_w: take(self.embed_dim * self.proj_hidden),
            proj2_b: take(self.embed_dim),
            total: off,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

type Span = core::ops::Range<usize>;

#[derive(Debug, Clone)]
struct Layout {
    conv1_w: Span,
    conv1_b: Span,
    conv2_w: Span,
    conv2_b: Span,
    cls_w: Span,
    cls_b: Span,
    proj1_w: Span,
    proj1_b: Span,
    proj2_w: Span,
    proj2_b: Span,
    total: usize,
}

/// Named parameter groups, for reporting and targeted checks.
/// Centered input intensities are multiplied by this so first-layer units
/// start in the nonlinear range of SiLU.
pub const INPUT_GAIN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Conv1,
    Conv2,
    Classifier,
    Projection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyNet {
    cfg: NetConfig,
    params: Vec<f64>,
    version: u64,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + math::exp(-x))
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Intermediates of one sample's forward pass.
#[derive(Debug, Clone)]
struct SampleCache {
    /// Unfolded conv1 input patches, `cells1 x 9*3`.
    cols1: Vec<f64>,
    /// SiLU derivative at each conv1 pre-activation.
    dact1: Vec<f64>,
    /// Unfolded conv2 input patches, `cells2 x 9*c1`.
    cols2: Vec<f64>,
    dact2: Vec<f64>,
    trunk: Vec<f64>,
    proj_pre: Vec<f64>,
    proj_act: Vec<f64>,
    embedding: Vec<f64>,
    norm: f64,
}

/// Everything `backward` needs, tied to the parameter version it came from.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    samples: Vec<SampleCache>,
}

impl ForwardCache {
    pub fn rows(&self) -> usize {
        self.samples.len()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `rows x classes`.
    pub logits: Vec<f64>,
    /// `rows x embed_dim`, every row unit length.
    pub embeddings: Vec<f64>,
    pub cache: ForwardCache,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += a * x`.
#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// Patches of a 3x3 stride-2 window with zero padding 1 over a channel-last
/// grid; row `oy * ow + ox` holds taps in `(ky, kx, channel)` order.
fn im2col_s2(input: &[f64], (iw, ih, ic): (usize, usize, usize), (ow, oh): (usize, usize)) -> Vec<f64> {
    let k = 9 * ic;
    let mut cols = vec![0.0; ow * oh * k];
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &mut cols[(oy * ow + ox) * k..][..k];
            for ky in 0..3 {
                let iy = (2 * oy + ky) as isize - 1;
                if iy < 0 || iy >= ih as isize {
                    continue;
                }
                for kx in 0..3 {
                    let ix = (2 * ox + kx) as isize - 1;
                    if ix < 0 || ix >= iw as isize {
                        continue;
                    }
                    let src = &input[(iy as usize * iw + ix as usize) * ic..][..ic];
                    row[(ky * 3 + kx) * ic..][..ic].copy_from_slice(src);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col_s2`]: scatters patch gradients back onto the grid.
fn col2im_s2(cols: &[f64], (iw, ih, ic): (usize, usize, usize), (ow, oh): (usize, usize), out: &mut [f64]) {
    let k = 9 * ic;
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &cols[(oy * ow + ox) * k..][..k];
            for ky in 0..3 {
                let iy = (2 * oy + ky) as isize - 1;
                if iy < 0 || iy >= ih as isize {
                    continue;
                }
                for kx in 0..3 {
                    let ix = (2 * ox + kx) as isize - 1;
                    if ix < 0 || ix >= iw as isize {
                        continue;
                    }
                    let dst = &mut out[(iy as usize * iw + ix as usize) * ic..][..ic];
                    for (d, s) in dst.iter_mut().zip(&row[(ky * 3 + kx) * ic..][..ic]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// `out[cell, f] = bias[f] + <weights[f], cols[cell]>`.
fn conv_forward(cols: &[f64], k: usize, weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let oc = bias.len();
    let mut out = Vec::with_capacity(cols.len() / k * oc);
    for patch in cols.chunks_exact(k) {
        for (f, b) in bias.iter().enumerate() {
            out.push(b + dot(&weights[f * k..][..k], patch));
        }
    }
    out
}

/// Accumulates weight/bias gradients; returns patch gradients when asked.
fn conv_backward(
    cols: &[f64],
    k: usize,
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let oc = grad_b.len();
    let mut g_cols = want_input.then(|| vec![0.0; cols.len()]);
    for (cell, (patch, g)) in cols.chunks_exact(k).zip(grad_out.chunks_exact(oc)).enumerate() {
        for (f, &gf) in g.iter().enumerate() {
            grad_b[f] += gf;
            axpy(gf, patch, &mut grad_w[f * k..][..k]);
            if let Some(gc) = g_cols.as_mut() {
                axpy(gf, &weights[f * k..][..k], &mut gc[cell * k..][..k]);
            }
        }
    }
    g_cols
}

fn matvec(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, bias)| bias + w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect()
}

impl TinyNet {
    /// Fresh network with He-scaled normal weights and zero biases.
    pub fn init(cfg: NetConfig, rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        let l = cfg.layout();
        let mut params = vec![0.0; l.total];
        let mut fill = |span: &Span, fan_in: usize, gain: f64| {
            let std = math::sqrt(gain / fan_in as f64);
            for p in &mut params[span.clone()] {
                *p = std * rng.normal();
            }
        };
        fill(&l.conv1_w, 27, 2.0);
        fill(&l.conv2_w, 9 * cfg.conv1_channels, 2.0);
        fill(&l.cls_w, cfg.conv2_channels, 1.0);
        fill(&l.proj1_w, cfg.conv2_channels, 2.0);
        fill(&l.proj2_w, cfg.proj_hidden, 1.0);
        Ok(Self {
            cfg,
            params,
            version: 0,
        })
    }

    pub fn from_params(cfg: NetConfig, params: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if params.len() != cfg.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters for a network expecting {}",
                params.len(),
                cfg.param_count()
            )));
        }
        Ok(Self {
            cfg,
            params,
            version: 0,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; bumps the version so older caches go stale.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn group_span(&self, group: ParamGroup) -> core::ops::Range<usize> {
        let l = self.cfg.layout();
        match group {
            ParamGroup::Conv1 => l.conv1_w.start..l.conv1_b.end,
            ParamGroup::Conv2 => l.conv2_w.start..l.conv2_b.end,
            ParamGroup::Classifier => l.cls_w.start..l.cls_b.end,
            ParamGroup::Projection => l.proj1_w.start..l.proj2_b.end,
        }
    }

    /// Zeroes the classifier head.
    pub fn zero_classifier(&mut self) {
        let span = self.group_span(ParamGroup::Classifier);
        self.params_mut()[span].iter_mut().for_each(|p| *p = 0.0);
    }

    fn prepare_input(&self, img: &ImageRgb) -> Result<Vec<f64>> {
        let cfg = &self.cfg;
        if img.width() != cfg.input_width || img.height() != cfg.input_height {
            return Err(Error::Shape(format!(
                "image {}x{} does not match network input {}x{}",
                img.width(),
                img.height(),
                cfg.input_width,
                cfg.input_height
            )));
        }
        let (pw, ph) = cfg.pooled();
        let k = cfg.input_pool;
        let inv = 1.0 / (k * k) as f64;
        let data = img.data();
        let mut out = vec![0.0; pw * ph * 3];
        for py in 0..ph {
            for px in 0..pw {
                let o = (py * pw + px) * 3;
                for dy in 0..k {
                    for dx in 0..k {
                        let i = ((py * k + dy) * cfg.input_width + px * k + dx) * 3;
                        for c in 0..3 {
                            out[o + c] += data[i + c];
                        }
                    }
                }
                for c in 0..3 {
                    out[o + c] = (out[o + c] * inv - 0.5) * INPUT_GAIN;
                }
            }
        }
        Ok(out)
    }

    fn forward_one(&self, img: &ImageRgb) -> Result<(Vec<f64>, SampleCache)> {
        let cfg = &self.cfg;
        let l = cfg.layout();
        let p = &self.params;
        let input = self.prepare_input(img)?;
        let (pw, ph) = cfg.pooled();
        let (w1, h1) = cfg.grid1();
        let (w2, h2) = cfg.grid2();
        let (c1, c2) = (cfg.conv1_channels, cfg.conv2_channels);

        let cols1 = im2col_s2(&input, (pw, ph, 3), (w1, h1));
        let pre1 = conv_forward(&cols1, 27, &p[l.conv1_w.clone()], &p[l.conv1_b.clone()]);
        let mut act1 = Vec::with_capacity(pre1.len());
        let mut dact1 = Vec::with_capacity(pre1.len());
        for &x in &pre1 {
            let s = sigmoid(x);
            act1.push(x * s);
            dact1.push(s * (1.0 + x * (1.0 - s)));
        }

        let cols2 = im2col_s2(&act1, (w1, h1, c1), (w2, h2));
        let pre2 = conv_forward(&cols2, 9 * c1, &p[l.conv2_w.clone()], &p[l.conv2_b.clone()]);
        let mut trunk = vec![0.0; c2];
        let mut dact2 = Vec::with_capacity(pre2.len());
        for cell in pre2.chunks_exact(c2) {
            for (t, &x) in trunk.iter_mut().zip(cell) {
                let s = sigmoid(x);
                *t += x * s;
                dact2.push(s * (1.0 + x * (1.0 - s)));
            }
        }
        let cells = (w2 * h2) as f64;
        trunk.iter_mut().for_each(|t| *t /= cells);

        let logits = matvec(&p[l.cls_w.clone()], &p[l.cls_b.clone()], &trunk);
        let proj_pre = matvec(&p[l.proj1_w.clone()], &p[l.proj1_b.clone()], &trunk);
        let proj_act: Vec<f64> = proj_pre.iter().map(|&x| silu(x)).collect();
        let z = matvec(&p[l.proj2_w.clone()], &p[l.proj2_b.clone()], &proj_act);
        let norm = math::sqrt(z.iter().map(|v| v * v).sum::<f64>()).max(1e-12);
        let embedding: Vec<f64> = z.iter().map(|v| v / norm).collect();
        Ok((
            logits,
            SampleCache {
                cols1,
                dact1,
                cols2,
                dact2,
                trunk,
                proj_pre,
                proj_act,
                embedding,
                norm,
            },
        ))
    }

    /// Logits and unit-norm embeddings for a batch of same-sized images.
    pub fn forward(&self, images: &[&ImageRgb]) -> Result<ForwardOutput> {
        let mut logits = Vec::with_capacity(images.len() * self.cfg.classes);
        let mut embeddings = Vec::with_capacity(images.len() * self.cfg.embed_dim);
        let mut samples = Vec::with_capacity(images.len());
        for img in images {
            let (lg, cache) = self.forward_one(img)?;
            logits.extend_from_slice(&lg);
            embeddings.extend_from_slice(&cache.embedding);
            samples.push(cache);
        }
        Ok(ForwardOutput {
            logits,
            embeddings,
            cache: ForwardCache {
                version: self.version,
                samples,
            },
        })
    }

    /// Class probabilities (row-wise softmax of the logits).
    pub fn predict(&self, images: &[&ImageRgb]) -> Result<Vec<f64>> {
        let out = self.forward(images)?;
        Ok(out
            .logits
            .chunks_exact(self.cfg.classes)
            .flat_map(crate::losses::softmax)
            .collect())
    }

    /// Parameter gradient of a scalar loss given its partials w.r.t. the
    /// logits and the normalized embeddings of every cached row.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_logits: &[f64],
        grad_embeddings: &[f64],
    ) -> Result<Vec<f64>> {
        if cache.version != self.version {
            return Err(Error::StaleCache {
                cache: cache.version,
                net: self.version,
            });
        }
        let cfg = &self.cfg;
        let rows = cache.samples.len();
        if grad_logits.len() != rows * cfg.classes || grad_embeddings.len() != rows * cfg.embed_dim {
            return Err(Error::Shape(format!(
                "upstream gradients {} / {} for {rows} rows",
                grad_logits.len(),
                grad_embeddings.len()
            )));
        }
        let l = cfg.layout();
        let p = &self.params;

        let (w1, h1) = cfg.grid1();
        let (w2, h2) = cfg.grid2();
        let (c1, c2) = (cfg.conv1_channels, cfg.conv2_channels);
        let (nc, hid, emb) = (cfg.classes, cfg.proj_hidden, cfg.embed_dim);
        let mut grad = vec![0.0; l.total];

        for (r, s) in cache.samples.iter().enumerate() {
            let gl = &grad_logits[r * nc..(r + 1) * nc];
            let gf = &grad_embeddings[r * emb..(r + 1) * emb];
            let mut g_trunk = vec![0.0; c2];

            // classifier head
            for k in 0..nc {
                let g = gl[k];
                grad[l.cls_b.start + k] += g;
                let row = l.cls_w.start + k * c2;
                for j in 0..c2 {
                    grad[row + j] += g * s.trunk[j];
                    g_trunk[j] += g * p[row + j];
                }
            }

            // unit normalization: dz = (gf - f <f, gf>) / |z|
            let dot: f64 = s.embedding.iter().zip(gf).map(|(f, g)| f * g).sum();
            let gz: Vec<f64> = s
                .embedding
                .iter()
                .zip(gf)
                .map(|(f, g)| (g - f * dot) / s.norm)
                .collect();

            // projection head
            let mut g_hidden = vec![0.0; hid];
            for k in 0..emb {
                let g = gz[k];
                grad[l.proj2_b.start + k] += g;
                let row = l.proj2_w.start + k * hid;
                for j in 0..hid {
                    grad[row + j] += g * s.proj_act[j];
                    g_hidden[j] += g * p[row + j];
                }
            }
            for j in 0..hid {
                let g = g_hidden[j] * silu_grad(s.proj_pre[j]);
                grad[l.proj1_b.start + j] += g;
                let row = l.proj1_w.start + j * c2;
                for t in 0..c2 {
                    grad[row + t] += g * s.trunk[t];
                    g_trunk[t] += g * p[row + t];
                }
            }

            // global average pool + SiLU
            let cells = (w2 * h2) as f64;
            let mut g_pre2 = Vec::with_capacity(s.dact2.len());
            for dcell in s.dact2.chunks_exact(c2) {
                g_pre2.extend(dcell.iter().zip(&g_trunk).map(|(d, g)| g / cells * d));
            }

            let g_cols2 = {
                let (gw, rest) = grad.split_at_mut(l.conv2_b.start);
                conv_backward(
                    &s.cols2,
                    9 * c1,
                    &p[l.conv2_w.clone()],
                    &g_pre2,
                    &mut gw[l.conv2_w.clone()],
                    &mut rest[..c2],
                    true,
                )
            };
            let mut g_act1 = vec![0.0; s.dact1.len()];
            if let Some(gc) = g_cols2 {
                col2im_s2(&gc, (w1, h1, c1), (w2, h2), &mut g_act1);
            }
            let g_pre1: Vec<f64> = g_act1.iter().zip(&s.dact1).map(|(g, d)| g * d).collect();
            let (gw, rest) = grad.split_at_mut(l.conv1_b.start);
            conv_backward(
                &s.cols1,
                27,
                &p[l.conv1_w.clone()],
                &g_pre1,
                &mut gw[l.conv1_w.clone()],
                &mut rest[..c1],
                false,
            );
        }
        Ok(grad)
    }

    /// One optimizer step; the parameter version advances.
    pub fn apply_sgd(&mut self, grads: &[f64], state: &mut OptimState) -> Result<()> {
        sgd_step(&mut self.params, grads, state)?;
        self.version += 1;
        Ok(())
    }
}
