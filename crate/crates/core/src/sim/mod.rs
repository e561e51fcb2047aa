//! Simulation harness: seeded model generators, method evaluation,
//! replicated experiments and timing.

pub mod method;
pub mod model;
pub mod rng;
pub mod run;

pub use method::{
    run_method, run_method_on_grids, LaterResponse, Method, MethodOptions, MethodOutcome, ShiftRule, StageMethod, StageOutcome,
};
pub use model::{gen_model, metric, Dataset, ModelId, ModelSpec, PositivityPolicy};
pub use run::{run_experiment, timing_probe, ExperimentConfig, MethodSummary, ReplicateRecord, SimReport, TimingRow};
