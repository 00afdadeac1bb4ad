//! Fixtures shared by the benchmarks.

use solharm_core::{FilterSpec, SystemSpec};

/// The binary circle map with a bundled filter.
pub fn circle(filter: &str) -> (SystemSpec, FilterSpec) {
    let sys = SystemSpec::circle(2).expect("N = 2 is valid");
    let f = FilterSpec::by_name(filter, &sys).expect("bundled filter");
    (sys, f)
}

