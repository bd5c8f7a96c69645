//! Fixed inputs shared by the kernel benchmarks.

use salem_core::patterns::{ap3_translational, RoughPattern};
use salem_core::sampler::build;
use salem_core::{ConstructionParams, GridMeasure, PatternSpec, WeightedConfiguration};

/// `n` uniform unit-weight points on `T^dim` (an empty pattern removes nothing).
pub fn uniform_config(n: usize, dim: usize, seed: u64) -> WeightedConfiguration {
    let empty = PatternSpec::Rough(RoughPattern::empty(2, dim, 2).expect("valid pattern"));
    build(&ConstructionParams::new(n, 0.45, seed), &empty).expect("nothing to remove")
}

pub fn ap3() -> PatternSpec {
    PatternSpec::Translational(ap3_translational().expect("builtin pattern"))
}

pub fn bump_measure(dim: usize, g: usize) -> GridMeasure {
    GridMeasure::bump(dim, g, &vec![0.5; dim], 0.25).expect("valid bump")
}
