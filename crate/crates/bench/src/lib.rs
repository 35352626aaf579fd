//! Fixtures shared by the benchmarks.

use zwalk_core::WalkSpec;

pub fn constant_walk() -> WalkSpec {
    WalkSpec::constant(0.125, 0.75, 0.125).expect("valid walk")
}

pub fn force_walk() -> WalkSpec {
    WalkSpec::force(0.125, 0.375).expect("valid walk")
}
