//! Protocol runs spread over the rayon pool. Results are merged in plan
//! order, so reports do not depend on the thread count.

use gdrkit_core::bench::{make_splits, run_single, MetricsReport, Protocol};
use gdrkit_core::data::Dataset;
use gdrkit_core::model::TrainConfig;
use gdrkit_core::Result;
use rayon::prelude::*;

pub fn run_protocol(dataset: &Dataset, protocol: Protocol, cfg: &TrainConfig) -> Result<MetricsReport> {
    run_protocols(dataset, protocol, std::slice::from_ref(cfg)).map(|mut v| v.remove(0))
}

/// One report per config. Every (config, run) pair is an independent job.
pub fn run_protocols(dataset: &Dataset, protocol: Protocol, cfgs: &[TrainConfig]) -> Result<Vec<MetricsReport>> {
    let plan = make_splits(&dataset.domains, protocol)?;
    let jobs: Vec<(usize, usize)> = (0..cfgs.len())
        .flat_map(|c| (0..plan.runs.len()).map(move |r| (c, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, r)| run_single(dataset, &plan.runs[r], &cfgs[c]))
        .collect::<Result<Vec<_>>>()?;
    let mut results = results.into_iter();
    cfgs.iter()
        .map(|cfg| {
            let runs = results.by_ref().take(plan.runs.len()).collect();
            MetricsReport::assemble(protocol, cfg, runs)
        })
        .collect()
}
