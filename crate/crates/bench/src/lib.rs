//! Seeded experiment harness: result tables, convergence curves, and
//! matrix snapshots for every sequencing method.

pub mod convergence;
pub mod experiment;
pub mod stats;
pub mod trajectory;

pub use convergence::{convergence_curve, mean_curve, CurvePoint};
pub use experiment::{
    load_manifest, no_provider, replay, run_experiment, CellKey, ExperimentError, ExperimentReport, ExperimentSpec,
    Manifest, Method, ProviderFactory, ReplayReport, ResultRow, RunRow,
};
pub use stats::{aggregate_stats, format_mean_std, StdKind, Summary};
pub use trajectory::{render_trajectory, Snapshot};
