//! Feedback-loop objective and sequence validation.
//!
//! A feedback loop is a dependency whose predecessor is placed after its
//! dependent; after reordering rows and columns by the sequence it is a
//! 1-entry above the diagonal.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::model::{AdjacencyMatrix, DsmCase, NodeId};

/// Largest instance [`brute_force_optimum`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// A candidate ordering of node ids. Validity is checked against a case or
/// matrix, not at construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence(pub Vec<NodeId>);

impl Sequence {
    pub fn ids(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> Sequence {
        Sequence(self.0.iter().rev().cloned().collect())
    }

    /// Sequence whose `p`-th element is `matrix.ids()[perm[p]]`.
    pub fn from_indices(matrix: &AdjacencyMatrix, perm: &[usize]) -> Sequence {
        Sequence(perm.iter().map(|&i| matrix.ids()[i].clone()).collect())
    }

    /// Comma-joined form used in prompts and CSV files.
    pub fn joined(&self) -> String {
        self.0.iter().map(NodeId::as_str).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score(pub usize);

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Outcome of [`is_valid_sequence`]; `valid` is true iff all lists are empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub valid: bool,
    pub missing: Vec<NodeId>,
    pub duplicated: Vec<NodeId>,
    pub unknown: Vec<String>,
    pub violated: Vec<Precedence>,
}

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return f.write_str("valid permutation");
        }
        let list = |v: &[NodeId]| v.iter().map(NodeId::as_str).collect::<Vec<_>>().join(", ");
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing ids: {}", list(&self.missing)));
        }
        if !self.duplicated.is_empty() {
            parts.push(format!("duplicated ids: {}", list(&self.duplicated)));
        }
        if !self.unknown.is_empty() {
            parts.push(format!("unknown id: {}", self.unknown.join(", ")));
        }
        for p in &self.violated {
            parts.push(format!("{} must precede {}", p.before, p.after));
        }
        f.write_str(&parts.join("; "))
    }
}

/// Optional user constraint: `before` must be placed ahead of `after`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precedence {
    pub before: NodeId,
    pub after: NodeId,
}

/// Check that `candidate` lists every node of the case exactly once.
pub fn is_valid_sequence(case: &DsmCase, candidate: &[String]) -> Validation {
    validate_against(case.node_ids(), candidate, &[])
}

/// [`is_valid_sequence`] plus user-supplied precedence constraints.
pub fn is_valid_sequence_with(case: &DsmCase, candidate: &[String], constraints: &[Precedence]) -> Validation {
    validate_against(case.node_ids(), candidate, constraints)
}

fn validate_against<'a>(
    nodes: impl Iterator<Item = &'a NodeId>,
    candidate: &[String],
    constraints: &[Precedence],
) -> Validation {
    let nodes: Vec<&NodeId> = nodes.collect();
    let known: HashMap<&str, &NodeId> = nodes.iter().map(|id| (id.as_str(), *id)).collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut unknown = Vec::new();
    let mut position = HashMap::new();
    for (pos, raw) in candidate.iter().enumerate() {
        if known.contains_key(raw.as_str()) {
            *counts.entry(raw.as_str()).or_default() += 1;
            position.entry(raw.as_str()).or_insert(pos);
        } else if !unknown.contains(raw) {
            unknown.push(raw.clone());
        }
    }
    let missing: Vec<NodeId> =
        nodes.iter().filter(|id| !counts.contains_key(id.as_str())).map(|id| (*id).clone()).collect();
    let duplicated: Vec<NodeId> = nodes
        .iter()
        .filter(|id| counts.get(id.as_str()).copied().unwrap_or(0) > 1)
        .map(|id| (*id).clone())
        .collect();
    let violated: Vec<Precedence> = constraints
        .iter()
        .filter(|c| match (position.get(c.before.as_str()), position.get(c.after.as_str())) {
            (Some(b), Some(a)) => b > a,
            _ => false,
        })
        .cloned()
        .collect();
    let valid = missing.is_empty() && duplicated.is_empty() && unknown.is_empty() && violated.is_empty();
    Validation { valid, missing, duplicated, unknown, violated }
}

/// Map a sequence onto matrix indices, rejecting non-permutations.
pub fn sequence_to_indices(matrix: &AdjacencyMatrix, s: &Sequence) -> Result<Vec<usize>, EvalError> {
    let n = matrix.n();
    let mut seen = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut ok = s.len() == n;
    for id in s.ids() {
        match matrix.index_of(id) {
            Some(i) if !seen[i] => {
                seen[i] = true;
                perm.push(i);
            }
            _ => ok = false,
        }
    }
    if ok {
        return Ok(perm);
    }
    let raw: Vec<String> = s.ids().iter().map(|id| id.to_string()).collect();
    let diag = validate_against(matrix.ids().iter(), &raw, &[]);
    Err(EvalError::InvalidSequence(diag.to_string()))
}

/// Feedback count of an index permutation (`perm[p]` is the node at position `p`).
pub fn score_permutation(matrix: &AdjacencyMatrix, perm: &[usize]) -> usize {
    let mut pos = vec![0usize; matrix.n()];
    for (p, &node) in perm.iter().enumerate() {
        pos[node] = p;
    }
    score_positions(matrix, &pos)
}

/// Feedback count given each node's position.
pub fn score_positions(matrix: &AdjacencyMatrix, pos: &[usize]) -> usize {
    matrix
        .edge_indices()
        .iter()
        .filter(|&&(dependent, predecessor)| pos[dependent] < pos[predecessor])
        .count()
}

pub fn score_sequence(matrix: &AdjacencyMatrix, s: &Sequence) -> Result<Score, EvalError> {
    let perm = sequence_to_indices(matrix, s)?;
    Ok(Score(score_permutation(matrix, &perm)))
}

/// Simultaneous row/column permutation into the order given by `s`.
pub fn reorder_matrix(matrix: &AdjacencyMatrix, s: &Sequence) -> Result<AdjacencyMatrix, EvalError> {
    let perm = sequence_to_indices(matrix, s)?;
    Ok(matrix.permuted(&perm))
}

/// Count of 1-entries strictly above the diagonal, in the matrix's own order.
pub fn upper_triangle_count(matrix: &AdjacencyMatrix) -> usize {
    matrix.edge_indices().iter().filter(|&&(i, j)| i < j).count()
}

/// Exhaustive global optimum for `n <= 10`. Among optimal sequences the
/// lexicographically smallest (in node-index order) is returned.
pub fn brute_force_optimum(matrix: &AdjacencyMatrix) -> Result<(Score, Sequence), EvalError> {
    let n = matrix.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(EvalError::TooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    let mut search = Search {
        matrix,
        placed: vec![false; n],
        prefix: Vec::with_capacity(n),
        best_score: usize::MAX,
        best: Vec::new(),
    };
    search.descend(0);
    Ok((Score(search.best_score), Sequence::from_indices(matrix, &search.best)))
}

struct Search<'a> {
    matrix: &'a AdjacencyMatrix,
    placed: Vec<bool>,
    prefix: Vec<usize>,
    best_score: usize,
    best: Vec<usize>,
}

impl Search<'_> {
    // Visiting candidates in index order and only accepting strict
    // improvements makes the first optimum found the lexicographic minimum.
    fn descend(&mut self, partial: usize) {
        let n = self.matrix.n();
        if self.prefix.len() == n {
            if partial < self.best_score {
                self.best_score = partial;
                self.best = self.prefix.clone();
            }
            return;
        }
        for v in 0..n {
            if self.placed[v] {
                continue;
            }
            // Placing v after u costs 1 for every placed u that depends on v.
            let added = self.prefix.iter().filter(|&&u| self.matrix.get(u, v)).count();
            let cost = partial + added;
            if cost >= self.best_score {
                continue;
            }
            self.placed[v] = true;
            self.prefix.push(v);
            self.descend(cost);
            self.prefix.pop();
            self.placed[v] = false;
        }
    }
}

/// True iff the dependency digraph has no directed cycle.
pub fn is_acyclic(matrix: &AdjacencyMatrix) -> bool {
    let n = matrix.n();
    let mut indeg = matrix.row_sums();
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(j) = ready.pop() {
        seen += 1;
        for i in 0..n {
            if matrix.get(i, j) {
                indeg[i] -= 1;
                if indeg[i] == 0 {
                    ready.push(i);
                }
            }
        }
    }
    seen == n
}

/// Every node id in a set, used to compare node sets of sequences.
pub fn id_set(s: &Sequence) -> HashSet<&NodeId> {
    s.ids().iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_adjacency, random_case};

    fn seq(ids: &[&str]) -> Sequence {
        Sequence(ids.iter().map(|s| NodeId::new(*s).unwrap()).collect())
    }

    fn strings(ids: &[&str]) -> Vec<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn cycle3() -> DsmCase {
        DsmCase::from_ids(&["A", "B", "C"], &[("B", "A"), ("C", "B"), ("A", "C")]).unwrap()
    }

    #[test]
    fn validation_diagnostics() {
        let case = cycle3();
        assert!(is_valid_sequence(&case, &strings(&["C", "A", "B"])).valid);

        let v = is_valid_sequence(&case, &strings(&["A", "A", "B"]));
        assert!(!v.valid);
        assert_eq!(v.duplicated, vec![NodeId::new("A").unwrap()]);
        assert_eq!(v.missing, vec![NodeId::new("C").unwrap()]);

        let v = is_valid_sequence(&case, &strings(&["A", "B", "C", "Q"]));
        assert!(!v.valid);
        assert_eq!(v.unknown, vec!["Q".to_string()]);
        assert!(v.to_string().contains("unknown id"));
    }

    #[test]
    fn precedence_hook() {
        let case = cycle3();
        let c = [Precedence { before: NodeId::new("B").unwrap(), after: NodeId::new("A").unwrap() }];
        assert!(is_valid_sequence(&case, &strings(&["A", "B", "C"])).valid);
        assert!(!is_valid_sequence_with(&case, &strings(&["A", "B", "C"]), &c).valid);
        assert!(is_valid_sequence_with(&case, &strings(&["B", "A", "C"]), &c).valid);
    }

    #[test]
    fn single_edge_scores() {
        let m = build_adjacency(&DsmCase::from_ids(&["A", "B"], &[("B", "A")]).unwrap());
        assert_eq!(score_sequence(&m, &seq(&["B", "A"])).unwrap(), Score(1));
        assert_eq!(score_sequence(&m, &seq(&["A", "B"])).unwrap(), Score(0));
    }

    #[test]
    fn three_cycle_rotations_score_one_reversals_two() {
        // edges 0->1->2->0; orders following the cycle break one arc, the others break two
        let m = build_adjacency(&cycle3());
        for perm in [[0, 1, 2], [1, 2, 0], [2, 0, 1]] {
            assert_eq!(score_permutation(&m, &perm), 1);
        }
        for perm in [[0, 2, 1], [2, 1, 0], [1, 0, 2]] {
            assert_eq!(score_permutation(&m, &perm), 2);
        }
        assert_eq!(brute_force_optimum(&m).unwrap().0, Score(1));
    }

    #[test]
    fn invalid_sequence_rejected() {
        let m = build_adjacency(&cycle3());
        let err = score_sequence(&m, &seq(&["A", "A", "B"])).unwrap_err();
        assert!(matches!(err, EvalError::InvalidSequence(ref d) if d.contains("missing ids: C")));
    }

    #[test]
    fn reorder_identity_and_consistency() {
        let case = random_case(7, 0.4, 11);
        let m = build_adjacency(&case);
        let identity = Sequence(m.ids().to_vec());
        assert_eq!(reorder_matrix(&m, &identity).unwrap(), m);

        let s = seq(&["v3", "v0", "v6", "v1", "v5", "v2", "v4"]);
        let r = reorder_matrix(&m, &s).unwrap();
        assert_eq!(r.edge_count(), m.edge_count());
        let mut a = m.row_sums();
        let mut b = r.row_sums();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        assert_eq!(upper_triangle_count(&r), score_sequence(&m, &s).unwrap().0);
    }

    #[test]
    fn brute_force_small_cases() {
        let empty = build_adjacency(&DsmCase::from_ids(&["A", "B", "C"], &[]).unwrap());
        let (score, best) = brute_force_optimum(&empty).unwrap();
        assert_eq!(score, Score(0));
        assert_eq!(best, seq(&["A", "B", "C"]));

        assert_eq!(brute_force_optimum(&build_adjacency(&cycle3())).unwrap().0, Score(1));

        let two_cycles = DsmCase::from_ids(
            &["a", "b", "c", "x", "y", "z"],
            &[("b", "a"), ("c", "b"), ("a", "c"), ("y", "x"), ("z", "y"), ("x", "z")],
        )
        .unwrap();
        assert_eq!(brute_force_optimum(&build_adjacency(&two_cycles)).unwrap().0, Score(2));
    }

    #[test]
    fn brute_force_refuses_large() {
        let m = build_adjacency(&random_case(11, 0.2, 0));
        assert_eq!(brute_force_optimum(&m).unwrap_err(), EvalError::TooLarge { n: 11, limit: 10 });
    }

    #[test]
    fn brute_force_returns_lexicographic_minimum() {
        // single edge B<-A among three nodes: many optimal orders, smallest is A,B,C
        let m = build_adjacency(&DsmCase::from_ids(&["A", "B", "C"], &[("A", "B")]).unwrap());
        let (score, best) = brute_force_optimum(&m).unwrap();
        assert_eq!(score, Score(0));
        assert_eq!(best, seq(&["B", "A", "C"]));
    }
}
