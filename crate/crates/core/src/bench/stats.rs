//! Per-domain color statistics and class histograms.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::View;
use crate::math;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainStats {
    pub domain: String,
    pub images: usize,
    /// Number of field-of-view pixels the moments are taken over.
    pub pixels: u64,
    pub mean: [f64; 3],
    /// Population standard deviation.
    pub std: [f64; 3],
    pub class_histogram: Vec<u64>,
}

/// Statistics for every domain in `view.domains`, in that order. Domains
/// without samples report zero moments.
pub fn domain_stats(view: &View<'_>) -> Vec<DomainStats> {
    let nd = view.domains.len();
    let mut sum = vec![[0.0f64; 3]; nd];
    let mut sum_sq = vec![[0.0f64; 3]; nd];
    let mut pixels = vec![0u64; nd];
    let mut images = vec![0usize; nd];
    let mut hist = vec![vec![0u64; view.n_classes]; nd];
    for s in &view.samples {
        let d = s.domain;
        images[d] += 1;
        hist[d][s.grade] += 1;
        let mask = s.image.effective_mask();
        for (px, &inside) in s.image.data().chunks_exact(3).zip(&mask) {
            if !inside {
                continue;
            }
            pixels[d] += 1;
            for c in 0..3 {
                sum[d][c] += px[c];
                sum_sq[d][c] += px[c] * px[c];
            }
        }
    }
    (0..nd)
        .map(|d| {
            let n = pixels[d].max(1) as f64;
            let mean = sum[d].map(|v| v / n);
            let mut std = [0.0; 3];
            for c in 0..3 {
                std[c] = math::sqrt((sum_sq[d][c] / n - mean[c] * mean[c]).max(0.0));
            }
            DomainStats {
                domain: view.domains[d].clone(),
                images: images[d],
                pixels: pixels[d],
                mean,
                std,
                class_histogram: hist[d].clone(),
            }
        })
        .collect()
}
