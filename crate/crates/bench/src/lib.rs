//! Inputs shared by the pipeline benchmarks.

use chor_core::gen::{well_typed, GenConfig, Generated};
use chor_core::{parse_scenario, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const JFS: &str = include_str!("../../../corpus/jfs.chor");
pub const LISTING: &str = include_str!("../../../corpus/listing.chor");

pub fn jfs_scenario() -> Scenario {
    parse_scenario(include_str!("../../../corpus/jfs.scn")).expect("corpus scenario parses")
}

/// A generated choreography with the maximum number of processes.
pub fn wide(seed: u64) -> Generated {
    let cfg = GenConfig { max_statements: 12, ..GenConfig::default() };
    well_typed(&mut ChaCha8Rng::seed_from_u64(seed), &cfg)
}
