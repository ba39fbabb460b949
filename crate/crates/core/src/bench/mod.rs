//! Ground-truth generation: the timed stencil kernel, synthetic oracles,
//! and the trace-driven cache simulator.

pub mod cachesim;
pub mod kernel;
pub mod runner;
pub mod synth;

pub use cachesim::{simulate, simulate_misses, stencil_trace, SimStats};
pub use kernel::{stencil_step, Coefficients, Grid};
pub use runner::{run_stencil_bench, Axis, BenchOutcome, BenchPlan, GridSweep};
pub use synth::{gen_synthetic, synthesize, Perturbation, QuadraticTerm, SyntheticOracleSpec, Values};
