//! Domain-class-aware re-balancing.
//!
//! Each `(domain, class)` pair with occurrence probability `q` gets weight
//! `sum_{pairs} q'^beta / q^beta`. `beta = 0` weights every pair equally,
//! `beta = 1` is plain inverse-frequency weighting.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Default balancing intensity.
pub const DEFAULT_BETA: f64 = 0.5;

/// Raw `(domain, class)` sample counts, row-major by domain.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainClassCounts {
    domains: Vec<String>,
    n_classes: usize,
    counts: Vec<u64>,
}

impl DomainClassCounts {
    pub fn new(domains: Vec<String>, n_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if domains.is_empty() || n_classes == 0 {
            return Err(Error::EmptyCounts);
        }
        if counts.len() != domains.len() * n_classes {
            return Err(Error::LengthMismatch {
                left: counts.len(),
                right: domains.len() * n_classes,
            });
        }
        Ok(Self {
            domains,
            n_classes,
            counts,
        })
    }

    /// Tallies `(domain index, class)` observations.
    pub fn from_samples(
        domains: Vec<String>,
        n_classes: usize,
        samples: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut counts = alloc::vec![0u64; domains.len() * n_classes];
        for (d, c) in samples {
            if d >= domains.len() {
                return Err(Error::UnknownDomain(d));
            }
            if c >= n_classes {
                return Err(Error::ClassOutOfRange {
                    class: c,
                    classes: n_classes,
                });
            }
            counts[d * n_classes + c] += 1;
        }
        Self::new(domains, n_classes, counts)
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn count(&self, domain: usize, class: usize) -> u64 {
        self.counts[domain * self.n_classes + class]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Same table with every count multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        Self {
            counts: self.counts.iter().map(|c| c * k).collect(),
            ..self.clone()
        }
    }
}

/// How `q` is estimated from counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QMode {
    /// `n_c^d / total` over all training samples.
    #[default]
    Joint,
    /// `n_c^d / n^d` within each domain.
    Conditional,
}

/// Occurrence probability per `(domain, class)`, row-major by domain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OccurrenceProbs {
    pub domains: Vec<String>,
    pub n_classes: usize,
    pub q: Vec<f64>,
}

pub fn occurrence_probs(counts: &DomainClassCounts) -> Result<OccurrenceProbs> {
    occurrence_probs_with(counts, QMode::Joint)
}

pub fn occurrence_probs_with(counts: &DomainClassCounts, mode: QMode) -> Result<OccurrenceProbs> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::EmptyCounts);
    }
    let n = counts.n_classes;
    let q = match mode {
        QMode::Joint => counts
            .counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect(),
        QMode::Conditional => counts
            .counts
            .chunks_exact(n)
            .flat_map(|row| {
                let nd: u64 = row.iter().sum();
                row.iter()
                    .map(move |&c| if nd == 0 { 0.0 } else { c as f64 / nd as f64 })
            })
            .collect(),
    };
    Ok(OccurrenceProbs {
        domains: counts.domains.clone(),
        n_classes: n,
        q,
    })
}

/// Occurrence probabilities and the resulting per-pair weights.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DcrTable {
    pub beta: f64,
    pub domains: Vec<String>,
    pub n_classes: usize,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn dcr_weights(probs: &OccurrenceProbs, beta: f64) -> Result<DcrTable> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    if probs.q.iter().all(|&q| q <= 0.0) {
        return Err(Error::EmptyCounts);
    }
    let numerator: f64 = probs
        .q
        .iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| math::powf(q, beta))
        .sum();
    let w = probs
        .q
        .iter()
        .map(|&q| {
            if q > 0.0 {
                numerator / math::powf(q, beta)
            } else {
                0.0
            }
        })
        .collect();
    Ok(DcrTable {
        beta,
        domains: probs.domains.clone(),
        n_classes: probs.n_classes,
        q: probs.q.clone(),
        w,
    })
}

impl DcrTable {
    /// Builds the table straight from counts with joint probabilities.
    pub fn from_counts(counts: &DomainClassCounts, beta: f64) -> Result<Self> {
        dcr_weights(&occurrence_probs(counts)?, beta)
    }

    pub fn n_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn weight(&self, domain: usize, class: usize) -> Result<f64> {
        sample_weight(self, domain, class)
    }

    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d == name)
    }

    /// `max w / min w` over pairs that occur.
    pub fn dispersion(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (&q, &w) in self.q.iter().zip(&self.w) {
            if q > 0.0 {
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
        hi / lo
    }
}

/// Weight for one sample's `(domain, class)` pair.
pub fn sample_weight(table: &DcrTable, domain: usize, class: usize) -> Result<f64> {
    if domain >= table.domains.len() {
        return Err(Error::UnknownDomain(domain));
    }
    if class >= table.n_classes {
        return Err(Error::ClassOutOfRange {
            class,
            classes: table.n_classes,
        });
    }
    Ok(table.w[domain * table.n_classes + class])
}
