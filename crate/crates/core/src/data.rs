//! In-memory labelled samples shared by training and the benchmark.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dcr::DomainClassCounts;
use crate::error::{Error, Result};
use crate::image::ImageRgb;

/// Number of DR severity grades.
pub const N_GRADES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: ImageRgb,
    pub grade: usize,
    /// Index into the owning dataset's domain list.
    pub domain: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub domains: Vec<String>,
    pub n_classes: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(domains: Vec<String>, n_classes: usize, samples: Vec<Sample>) -> Result<Self> {
        for s in &samples {
            if s.domain >= domains.len() {
                return Err(Error::UnknownDomain(s.domain));
            }
            if s.grade >= n_classes {
                return Err(Error::ClassOutOfRange {
                    class: s.grade,
                    classes: n_classes,
                });
            }
        }
        Ok(Self {
            domains,
            n_classes,
            samples,
        })
    }

    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d == name)
    }

    /// Borrowed view over samples whose domain is in `names`.
    pub fn subset(&self, names: &[String]) -> Result<View<'_>> {
        let mut keep = alloc::vec![false; self.domains.len()];
        for n in names {
            let i = self
                .domain_index(n)
                .ok_or_else(|| Error::InvalidTrainConfig(alloc::format!("unknown domain '{n}'")))?;
            keep[i] = true;
        }
        Ok(View {
            domains: &self.domains,
            n_classes: self.n_classes,
            samples: self.samples.iter().filter(|s| keep[s.domain]).collect(),
        })
    }

    pub fn view(&self) -> View<'_> {
        View {
            domains: &self.domains,
            n_classes: self.n_classes,
            samples: self.samples.iter().collect(),
        }
    }
}

/// Borrowed selection of samples; domain indices refer to `domains`.
#[derive(Debug, Clone)]
pub struct View<'a> {
    pub domains: &'a [String],
    pub n_classes: usize,
    pub samples: Vec<&'a Sample>,
}

impl View<'_> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn counts(&self) -> Result<DomainClassCounts> {
        DomainClassCounts::from_samples(
            self.domains.to_vec(),
            self.n_classes,
            self.samples.iter().map(|s| (s.domain, s.grade)),
        )
    }

    pub fn distinct_classes(&self) -> usize {
        let mut seen = alloc::vec![false; self.n_classes];
        for s in &self.samples {
            seen[s.grade] = true;
        }
        seen.iter().filter(|&&b| b).count()
    }
}
