//! Shared workloads for the criterion benches.

use splitnet::{build_full, Policy, Topology};

/// Full networks at the sizes the benches sweep.
pub fn full_networks() -> Vec<(u32, Topology)> {
    [9u32, 16, 64, 100].iter().map(|&n| (n, build_full(n).expect("n > 0"))).collect()
}

pub const POLICIES: [Policy; 3] = [Policy::RoundRobin, Policy::Random, Policy::Adversary];
