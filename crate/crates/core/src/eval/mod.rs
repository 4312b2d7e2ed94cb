//! Scoring, sweeps, significance testing, export and the synthetic suite.

pub mod export;
pub mod las;
pub mod significance;
pub mod sweep;
pub mod synth;

pub use las::{las, micro_average};
pub use significance::{paired_permutation, significance, SignificanceResult};
pub use sweep::{median_over_seeds, sweep, AggregateLas, SweepResult};
