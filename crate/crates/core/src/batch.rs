//! Many protocol runs over independent seeds.
//!
//! Each seed owns its own simulator, operator and learner, so runs share no
//! state. With the `parallel` feature the seeds are spread over a rayon pool;
//! results come back in input order either way.

use crate::config::ExperimentConfig;
use crate::report::{run_protocol, ProtocolOutcome};
use crate::Result;

pub fn run_protocols_sequential(
    config: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Vec<ProtocolOutcome>> {
    seeds.iter().map(|&s| run_protocol(config, s)).collect()
}

#[cfg(feature = "parallel")]
pub fn run_protocols_parallel(
    config: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Vec<ProtocolOutcome>> {
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| run_protocol(config, s)).collect()
}

/// Parallel when the feature is enabled, sequential otherwise.
pub fn run_protocols(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<ProtocolOutcome>> {
    #[cfg(feature = "parallel")]
    {
        run_protocols_parallel(config, seeds)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_protocols_sequential(config, seeds)
    }
}
