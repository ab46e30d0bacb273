//! Deterministic orderings from structural node measures.
//!
//! Every method computes a per-node primary key (and for the walk-based and
//! visibility methods a column-sum secondary key), sorts by it, and breaks
//! any residual ties with a seeded shuffle.

mod functions;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::BaselineError;
use crate::evaluator::Sequence;
use crate::model::{AdjacencyMatrix, NodeId};

pub use functions::{
    matrix_exponential, perron_vector, reachability_closure, resolvent, PerronResult, DEFAULT_DELTA,
};

/// Keys closer than this (relative) are treated as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Largest primary key first, secondary key ascending.
    #[default]
    Descending,
    /// Smallest primary key first, secondary key descending.
    Ascending,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeterministicMethod {
    OutIn,
    Eig,
    Exp,
    Resolvent,
    Visibility,
}

impl DeterministicMethod {
    pub const ALL: [DeterministicMethod; 5] = [
        DeterministicMethod::OutIn,
        DeterministicMethod::Eig,
        DeterministicMethod::Exp,
        DeterministicMethod::Resolvent,
        DeterministicMethod::Visibility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeterministicMethod::OutIn => "outin",
            DeterministicMethod::Eig => "eig",
            DeterministicMethod::Exp => "exp",
            DeterministicMethod::Resolvent => "resolvent",
            DeterministicMethod::Visibility => "visibility",
        }
    }

    pub fn run(
        self,
        matrix: &AdjacencyMatrix,
        direction: Direction,
        seed: u64,
    ) -> Result<NodeRanking, BaselineError> {
        Ok(match self {
            DeterministicMethod::OutIn => out_in_degree_order(matrix, direction, seed),
            DeterministicMethod::Eig => eigenvector_order(matrix, direction, seed),
            DeterministicMethod::Exp => walk_exponential_order(matrix, direction, seed),
            DeterministicMethod::Resolvent => walk_resolvent_order(matrix, DEFAULT_DELTA, direction, seed)?,
            DeterministicMethod::Visibility => visibility_order(matrix, direction, seed),
        })
    }
}

impl fmt::Display for DeterministicMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeterministicMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeterministicMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown deterministic method {s:?} (outin, eig, exp, resolvent, visibility)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeKey {
    pub id: NodeId,
    pub primary: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secondary: Option<f64>,
}

/// Result of a deterministic ordering, with its keys and the tie groups that
/// were resolved randomly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRanking {
    pub method: DeterministicMethod,
    pub direction: Direction,
    pub order: Sequence,
    /// Per node, in matrix index order.
    pub keys: Vec<NodeKey>,
    pub tie_groups: Vec<Vec<NodeId>>,
    pub warnings: Vec<String>,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * 1f64.max(a.abs()).max(b.abs())
}

/// Split an already sorted run of indices into maximal chains of tied keys.
fn split_ties(sorted: &[usize], key: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in sorted {
        match groups.last_mut() {
            Some(g) if tied(key[*g.last().unwrap()], key[i]) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

fn sort_by_key(idx: &mut [usize], key: &[f64], descending: bool) {
    idx.sort_by(|&a, &b| {
        let ord = key[a].total_cmp(&key[b]);
        if descending { ord.reverse() } else { ord }.then(a.cmp(&b))
    });
}

/// Returns the ordered indices and the residual tie groups.
pub(crate) fn rank_indices(
    primary: &[f64],
    secondary: Option<&[f64]>,
    direction: Direction,
    seed: u64,
) -> (Vec<usize>, Vec<Vec<usize>>) {
    let descending = direction == Direction::Descending;
    let mut idx: Vec<usize> = (0..primary.len()).collect();
    sort_by_key(&mut idx, primary, descending);
    let mut groups = split_ties(&idx, primary);
    if let Some(sec) = secondary {
        groups = groups
            .into_iter()
            .flat_map(|mut g| {
                if g.len() > 1 {
                    sort_by_key(&mut g, sec, !descending);
                    split_ties(&g, sec)
                } else {
                    vec![g]
                }
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(primary.len());
    let mut ties = Vec::new();
    for mut g in groups {
        if g.len() > 1 {
            g.shuffle(&mut rng);
            let mut members = g.clone();
            members.sort_unstable();
            ties.push(members);
        }
        order.extend(g);
    }
    (order, ties)
}

fn finish(
    matrix: &AdjacencyMatrix,
    method: DeterministicMethod,
    direction: Direction,
    primary: Vec<f64>,
    secondary: Option<Vec<f64>>,
    seed: u64,
    warnings: Vec<String>,
) -> NodeRanking {
    let (order, ties) = rank_indices(&primary, secondary.as_deref(), direction, seed);
    let ids = matrix.ids();
    let keys = (0..matrix.n())
        .map(|i| NodeKey {
            id: ids[i].clone(),
            primary: primary[i],
            secondary: secondary.as_ref().map(|s| s[i]),
        })
        .collect();
    for w in &warnings {
        log::warn!("{method}: {w}");
    }
    NodeRanking {
        method,
        direction,
        order: Sequence::from_indices(matrix, &order),
        keys,
        tie_groups: ties.into_iter().map(|g| g.into_iter().map(|i| ids[i].clone()).collect()).collect(),
        warnings,
    }
}

pub(crate) fn to_dmatrix(matrix: &AdjacencyMatrix) -> DMatrix<f64> {
    let n = matrix.n();
    DMatrix::from_fn(n, n, |i, j| if matrix.get(i, j) { 1.0 } else { 0.0 })
}

fn row_and_column_sums(f: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let rows = f.row_iter().map(|r| r.sum()).collect();
    let cols = f.column_iter().map(|c| c.sum()).collect();
    (rows, cols)
}

/// Key = out-degree − in-degree, where out-degree counts the dependencies a
/// node supplies (its column sum) and in-degree those it consumes (row sum).
pub fn out_in_degree_order(matrix: &AdjacencyMatrix, direction: Direction, seed: u64) -> NodeRanking {
    let rows = matrix.row_sums();
    let cols = matrix.column_sums();
    let key = (0..matrix.n()).map(|i| cols[i] as f64 - rows[i] as f64).collect();
    finish(matrix, DeterministicMethod::OutIn, direction, key, None, seed, Vec::new())
}

/// Rank by the Perron vector of `A`.
pub fn eigenvector_order(matrix: &AdjacencyMatrix, direction: Direction, seed: u64) -> NodeRanking {
    let result = perron_vector(&to_dmatrix(matrix));
    finish(matrix, DeterministicMethod::Eig, direction, result.vector, None, seed, result.warnings)
}

/// Rank by row sums of `exp(A)`, column sums breaking ties.
pub fn walk_exponential_order(matrix: &AdjacencyMatrix, direction: Direction, seed: u64) -> NodeRanking {
    let f = matrix_exponential(&to_dmatrix(matrix));
    let (rows, cols) = row_and_column_sums(&f);
    finish(matrix, DeterministicMethod::Exp, direction, rows, Some(cols), seed, Vec::new())
}

/// Rank by row sums of `(I − δA)⁻¹`, column sums breaking ties.
pub fn walk_resolvent_order(
    matrix: &AdjacencyMatrix,
    delta: f64,
    direction: Direction,
    seed: u64,
) -> Result<NodeRanking, BaselineError> {
    let f = resolvent(&to_dmatrix(matrix), delta)?;
    let (rows, cols) = row_and_column_sums(&f);
    Ok(finish(matrix, DeterministicMethod::Resolvent, direction, rows, Some(cols), seed, Vec::new()))
}

/// Rank by row sums of the binarized reachability matrix `Σ_{k=0}^{n} A^k`.
pub fn visibility_order(matrix: &AdjacencyMatrix, direction: Direction, seed: u64) -> NodeRanking {
    let f = reachability_closure(matrix);
    let n = matrix.n();
    let rows = (0..n).map(|i| f[i].iter().filter(|&&b| b).count() as f64).collect();
    let cols = (0..n).map(|j| (0..n).filter(|&i| f[i][j]).count() as f64).collect();
    finish(matrix, DeterministicMethod::Visibility, direction, rows, Some(cols), seed, Vec::new())
}
