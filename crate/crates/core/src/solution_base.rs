//! Archive of every explored sequence with its score.
//!
//! The base deduplicates sequences, serves the top-`k_p` plus random-`k_q`
//! sample used for prompt construction, and answers the termination test.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::BaseError;
use crate::evaluator::{score_sequence, Score, Sequence};
use crate::model::AdjacencyMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionSource {
    InitialRandom,
    Llm,
    Ga,
    Deterministic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub sequence: Sequence,
    pub score: Score,
    pub iteration_found: usize,
    pub source: SolutionSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub k_p: usize,
    pub k_q: usize,
}

impl SamplingPolicy {
    pub fn new(k_p: usize, k_q: usize) -> Result<Self, BaseError> {
        if k_p == 0 {
            return Err(BaseError::Policy("k_p must be at least 1"));
        }
        Ok(SamplingPolicy { k_p, k_q })
    }
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy { k_p: 5, k_q: 5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminationPolicy {
    pub max_iterations: usize,
    pub optimal_threshold: Option<Score>,
}

impl TerminationPolicy {
    pub fn new(max_iterations: usize, optimal_threshold: Option<Score>) -> Result<Self, BaseError> {
        if max_iterations == 0 {
            return Err(BaseError::Policy("max_iterations must be at least 1"));
        }
        Ok(TerminationPolicy { max_iterations, optimal_threshold })
    }
}

impl Default for TerminationPolicy {
    fn default() -> Self {
        TerminationPolicy { max_iterations: 20, optimal_threshold: None }
    }
}

/// Ranking used both for `best()` and the top-`k_p` selection: lower score,
/// then earlier iteration, then lexicographically smaller sequence.
fn rank(a: &SolutionRecord, b: &SolutionRecord) -> Ordering {
    a.score
        .cmp(&b.score)
        .then(a.iteration_found.cmp(&b.iteration_found))
        .then_with(|| a.sequence.cmp(&b.sequence))
}

#[derive(Clone, Debug)]
pub struct SolutionBase {
    matrix: AdjacencyMatrix,
    records: Vec<SolutionRecord>,
    seen: HashSet<Sequence>,
    best: Option<usize>,
}

impl SolutionBase {
    pub fn new(matrix: AdjacencyMatrix) -> Self {
        SolutionBase { matrix, records: Vec::new(), seen: HashSet::new(), best: None }
    }

    pub fn matrix(&self) -> &AdjacencyMatrix {
        &self.matrix
    }

    /// Insert a record. Returns `Ok(false)` without storing anything when the
    /// sequence is already present.
    pub fn insert(&mut self, record: SolutionRecord) -> Result<bool, BaseError> {
        let actual = score_sequence(&self.matrix, &record.sequence)?;
        if actual != record.score {
            return Err(BaseError::ScoreMismatch { claimed: record.score.0, actual: actual.0 });
        }
        if self.seen.contains(&record.sequence) {
            return Ok(false);
        }
        self.seen.insert(record.sequence.clone());
        let is_better = match self.best {
            None => true,
            Some(b) => rank(&record, &self.records[b]) == Ordering::Less,
        };
        self.records.push(record);
        if is_better {
            self.best = Some(self.records.len() - 1);
        }
        Ok(true)
    }

    /// Score and insert in one step.
    pub fn insert_sequence(
        &mut self,
        sequence: Sequence,
        iteration_found: usize,
        source: SolutionSource,
    ) -> Result<(bool, Score), BaseError> {
        let score = score_sequence(&self.matrix, &sequence)?;
        let inserted = self.insert(SolutionRecord { sequence, score, iteration_found, source })?;
        Ok((inserted, score))
    }

    pub fn contains(&self, sequence: &Sequence) -> bool {
        self.seen.contains(sequence)
    }

    pub fn unique_count(&self) -> usize {
        self.seen.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SolutionRecord] {
        &self.records
    }

    pub fn best(&self) -> Result<&SolutionRecord, BaseError> {
        self.best.map(|i| &self.records[i]).ok_or(BaseError::Empty)
    }

    /// Top `k_p` records plus `k_q` drawn uniformly without replacement from
    /// the rest, ordered worst first so the best record is listed last.
    pub fn sample_for_prompt(&self, policy: SamplingPolicy, seed: u64) -> Result<Vec<SolutionRecord>, BaseError> {
        if self.records.is_empty() {
            return Err(BaseError::Empty);
        }
        let mut order: Vec<usize> = (0..self.records.len()).collect();
        order.sort_by(|&a, &b| rank(&self.records[a], &self.records[b]));
        let top = policy.k_p.min(order.len());
        let rest = &order[top..];
        let take = policy.k_q.min(rest.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = order[..top].to_vec();
        picked.extend(index::sample(&mut rng, rest.len(), take).into_iter().map(|i| rest[i]));
        picked.sort_by(|&a, &b| rank(&self.records[b], &self.records[a]));
        Ok(picked.into_iter().map(|i| self.records[i].clone()).collect())
    }

    pub fn should_terminate(&self, policy: &TerminationPolicy, iterations_done: usize) -> bool {
        if iterations_done >= policy.max_iterations {
            return true;
        }
        match (policy.optimal_threshold, self.best()) {
            (Some(threshold), Ok(best)) => best.score <= threshold,
            _ => false,
        }
    }

    pub fn snapshot(&self) -> Vec<SnapshotEntry> {
        self.records
            .iter()
            .map(|r| SnapshotEntry {
                sequence: r.sequence.ids().iter().map(|id| id.to_string()).collect(),
                score: r.score.0,
                iteration_found: r.iteration_found,
                source: r.source,
            })
            .collect()
    }

    pub fn snapshot_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("snapshot serializes")
    }
}

/// Row of the JSON snapshot export.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub sequence: Vec<String>,
    pub score: usize,
    pub iteration_found: usize,
    pub source: SolutionSource,
}
