use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Protocol {
    /// Leave one domain out for testing, train on the rest.
    Dg,
    /// Train on one domain, test on every other.
    Esdg,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Dg => "dg",
            Protocol::Esdg => "esdg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dg" => Some(Protocol::Dg),
            "esdg" => Some(Protocol::Esdg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitRun {
    pub train_domains: Vec<String>,
    pub test_domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitPlan {
    pub protocol: Protocol,
    pub runs: Vec<SplitRun>,
}

/// Run `k` is built around `domains[k]`: its test domain under DG, its
/// training domain under ESDG.
pub fn make_splits(domains: &[String], protocol: Protocol) -> Result<SplitPlan> {
    if domains.len() < 2 {
        return Err(Error::TooFewDomains(domains.len()));
    }
    if let Some(d) = domains.iter().enumerate().find(|(i, d)| domains[..*i].contains(d)) {
        return Err(Error::InvalidTrainConfig(alloc::format!("duplicate domain '{}'", d.1)));
    }
    let runs = domains
        .iter()
        .map(|focus| {
            let focus_set = alloc::vec![focus.clone()];
            let rest: Vec<String> = domains.iter().filter(|d| *d != focus).cloned().collect();
            match protocol {
                Protocol::Dg => SplitRun {
                    train_domains: rest,
                    test_domains: focus_set,
                },
                Protocol::Esdg => SplitRun {
                    train_domains: focus_set,
                    test_domains: rest,
                },
            }
        })
        .collect();
    Ok(SplitPlan { protocol, runs })
}
