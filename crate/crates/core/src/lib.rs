//! Design structure matrix (DSM) sequencing: case model, feedback-loop
//! objective, solution archive, and the deterministic and genetic baselines.

pub mod deterministic;
pub mod error;
pub mod evaluator;
pub mod ga;
pub mod metrics;
pub mod model;
pub mod solution_base;

pub use error::{BaseError, BaselineError, EvalError, GaError, ModelError};
pub use evaluator::{
    brute_force_optimum, is_valid_sequence, reorder_matrix, score_permutation, score_sequence, Score, Sequence,
    Validation,
};
pub use metrics::{network_metrics, NetworkMetrics};
pub use model::{anonymize_ids, build_adjacency, load_case, AdjacencyMatrix, DsmCase, Edge, IdMapping, Node, NodeId};
pub use solution_base::{SamplingPolicy, SolutionBase, SolutionRecord, SolutionSource, TerminationPolicy};
