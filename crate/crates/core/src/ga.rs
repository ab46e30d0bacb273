//! Generational permutation GA: tournament selection, ordered (or PMX)
//! crossover, and shuffle-index mutation, with unique-solution accounting.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GaError;
use crate::evaluator::{score_permutation, Score, Sequence};
use crate::model::AdjacencyMatrix;
use crate::solution_base::{SolutionRecord, SolutionSource};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossoverKind {
    #[default]
    Ordered,
    Pmx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    /// Per-gene swap probability inside a mutation.
    pub indpb: f64,
    pub tournament_size: usize,
    pub cxpb: f64,
    pub mutpb: f64,
    pub seed: u64,
    #[serde(default)]
    pub crossover: CrossoverKind,
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        for (name, p) in [("indpb", self.indpb), ("cxpb", self.cxpb), ("mutpb", self.mutpb)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GaError::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if self.population_size == 0 {
            return Err(GaError::Config("population_size must be at least 1".into()));
        }
        if self.tournament_size == 0 {
            return Err(GaError::Config("tournament_size must be at least 1".into()));
        }
        if self.generations == 0 {
            return Err(GaError::Config("generations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaPreset {
    Exploration,
    Exploitation,
    Balanced,
}

impl GaPreset {
    pub const ALL: [GaPreset; 3] = [GaPreset::Exploration, GaPreset::Exploitation, GaPreset::Balanced];

    pub fn as_str(self) -> &'static str {
        match self {
            GaPreset::Exploration => "exploration",
            GaPreset::Exploitation => "exploitation",
            GaPreset::Balanced => "balanced",
        }
    }

    pub fn config(self, seed: u64) -> GaConfig {
        let (population_size, indpb, tournament_size, cxpb, mutpb) = match self {
            GaPreset::Exploration => (50, 0.05, 5, 0.6, 0.4),
            GaPreset::Exploitation => (10, 0.01, 20, 0.9, 0.1),
            GaPreset::Balanced => (20, 0.02, 10, 0.7, 0.3),
        };
        GaConfig {
            population_size,
            generations: 2000,
            indpb,
            tournament_size,
            cxpb,
            mutpb,
            seed,
            crossover: CrossoverKind::Ordered,
        }
    }
}

impl fmt::Display for GaPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GaPreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GaPreset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown GA preset {s:?} (exploration, exploitation, balanced)"))
    }
}

/// Best-so-far after the `unique_count`-th distinct permutation was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub unique_count: usize,
    pub best_score: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaOutcome {
    pub best: SolutionRecord,
    pub convergence: Vec<ConvergencePoint>,
    pub evaluations: usize,
    pub unique_count: usize,
}

#[derive(Clone, Debug)]
struct Individual {
    genes: Vec<usize>,
    fitness: Option<usize>,
}

/// Draw `k` contestants uniformly with replacement; return the index of the
/// lowest-score one (first drawn wins ties).
pub fn tournament_select<R: Rng>(scores: &[usize], k: usize, rng: &mut R) -> usize {
    assert!(!scores.is_empty(), "tournament over an empty population");
    let mut winner = rng.random_range(0..scores.len());
    for _ in 1..k {
        let c = rng.random_range(0..scores.len());
        if scores[c] < scores[winner] {
            winner = c;
        }
    }
    winner
}

/// Each position, with probability `indpb`, swaps with a different uniformly
/// chosen position. Returns whether anything was attempted.
pub fn shuffle_mutation<T, R: Rng>(genes: &mut [T], indpb: f64, rng: &mut R) -> bool {
    let n = genes.len();
    if n < 2 {
        return false;
    }
    let mut touched = false;
    for i in 0..n {
        if rng.random_bool(indpb) {
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            genes.swap(i, j);
            touched = true;
        }
    }
    touched
}

fn random_segment<R: Rng>(n: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    (a.min(b), a.max(b))
}

/// OX child: keep `template[start..=end]` in place, fill the remaining
/// slots (wrapping from `end + 1`) with `donor`'s genes in donor order.
pub fn ox_child(template: &[usize], donor: &[usize], start: usize, end: usize) -> Vec<usize> {
    let n = template.len();
    let mut child = vec![usize::MAX; n];
    let mut kept = vec![false; n];
    for i in start..=end {
        child[i] = template[i];
        kept[template[i]] = true;
    }
    let mut pos = (end + 1) % n;
    for offset in 0..n {
        let gene = donor[(end + 1 + offset) % n];
        if !kept[gene] {
            child[pos] = gene;
            pos = (pos + 1) % n;
        }
    }
    child
}

/// PMX child: keep `template[start..=end]`, place the rest of `donor` by
/// following the segment mapping.
pub fn pmx_child(template: &[usize], donor: &[usize], start: usize, end: usize) -> Vec<usize> {
    let n = template.len();
    let mut child = vec![usize::MAX; n];
    let mut donor_pos = vec![0; n];
    for (i, &g) in donor.iter().enumerate() {
        donor_pos[g] = i;
    }
    let mut placed = vec![false; n];
    for i in start..=end {
        child[i] = template[i];
        placed[template[i]] = true;
    }
    for i in start..=end {
        let gene = donor[i];
        if placed[gene] {
            continue;
        }
        let mut slot = i;
        while (start..=end).contains(&slot) {
            slot = donor_pos[template[slot]];
        }
        child[slot] = gene;
        placed[gene] = true;
    }
    for i in 0..n {
        if child[i] == usize::MAX {
            child[i] = donor[i];
        }
    }
    child
}

fn check_same_set(p1: &[usize], p2: &[usize]) -> Result<(), GaError> {
    let n = p1.len();
    let mut seen = vec![0u8; n];
    if p2.len() != n || n == 0 {
        return Err(GaError::MismatchedParents);
    }
    for &g in p1 {
        if g >= n || seen[g] != 0 {
            return Err(GaError::MismatchedParents);
        }
        seen[g] = 1;
    }
    for &g in p2 {
        if g >= n || seen[g] != 1 {
            return Err(GaError::MismatchedParents);
        }
        seen[g] = 2;
    }
    Ok(())
}

/// Ordered crossover on index permutations of `0..n`.
pub fn order_crossover<R: Rng>(p1: &[usize], p2: &[usize], rng: &mut R) -> Result<(Vec<usize>, Vec<usize>), GaError> {
    check_same_set(p1, p2)?;
    let (start, end) = random_segment(p1.len(), rng);
    Ok((ox_child(p1, p2, start, end), ox_child(p2, p1, start, end)))
}

pub fn pmx_crossover<R: Rng>(p1: &[usize], p2: &[usize], rng: &mut R) -> Result<(Vec<usize>, Vec<usize>), GaError> {
    check_same_set(p1, p2)?;
    let (start, end) = random_segment(p1.len(), rng);
    Ok((pmx_child(p1, p2, start, end), pmx_child(p2, p1, start, end)))
}

/// Ordered crossover on id sequences; both parents must cover the same ids.
pub fn order_crossover_sequences<R: Rng>(
    p1: &Sequence,
    p2: &Sequence,
    rng: &mut R,
) -> Result<(Sequence, Sequence), GaError> {
    let ids = p1.ids();
    let index: std::collections::HashMap<_, _> = ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    if index.len() != ids.len() {
        return Err(GaError::MismatchedParents);
    }
    let a: Vec<usize> = (0..ids.len()).collect();
    let b = p2
        .ids()
        .iter()
        .map(|id| index.get(id).copied().ok_or(GaError::MismatchedParents))
        .collect::<Result<Vec<_>, _>>()?;
    let (c1, c2) = order_crossover(&a, &b, rng)?;
    let back = |c: Vec<usize>| Sequence(c.into_iter().map(|i| ids[i].clone()).collect());
    Ok((back(c1), back(c2)))
}

struct Tracker<'a> {
    matrix: &'a AdjacencyMatrix,
    seen: HashSet<Vec<usize>>,
    evaluations: usize,
    best_score: usize,
    best_genes: Vec<usize>,
    best_generation: usize,
    convergence: Vec<ConvergencePoint>,
}

impl Tracker<'_> {
    fn evaluate(&mut self, genes: &[usize], generation: usize) -> usize {
        let score = score_permutation(self.matrix, genes);
        self.evaluations += 1;
        if score < self.best_score {
            self.best_score = score;
            self.best_genes = genes.to_vec();
            self.best_generation = generation;
        }
        if !self.seen.contains(genes) {
            self.seen.insert(genes.to_vec());
            self.convergence.push(ConvergencePoint { unique_count: self.seen.len(), best_score: self.best_score });
        }
        score
    }
}

/// Run the GA for `cfg.generations` generations with no elitism; the best
/// individual ever evaluated is tracked outside the population.
pub fn run_ga(matrix: &AdjacencyMatrix, cfg: &GaConfig) -> Result<GaOutcome, GaError> {
    cfg.validate()?;
    let n = matrix.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tracker = Tracker {
        matrix,
        seen: HashSet::new(),
        evaluations: 0,
        best_score: usize::MAX,
        best_genes: Vec::new(),
        best_generation: 0,
        convergence: Vec::new(),
    };

    let mut population: Vec<Individual> = (0..cfg.population_size)
        .map(|_| {
            let mut genes: Vec<usize> = (0..n).collect();
            genes.shuffle(&mut rng);
            Individual { genes, fitness: None }
        })
        .collect();
    for ind in &mut population {
        ind.fitness = Some(tracker.evaluate(&ind.genes, 0));
    }

    for generation in 1..=cfg.generations {
        let scores: Vec<usize> = population.iter().map(|i| i.fitness.expect("evaluated")).collect();
        let mut offspring: Vec<Individual> = (0..population.len())
            .map(|_| population[tournament_select(&scores, cfg.tournament_size, &mut rng)].clone())
            .collect();

        for pair in offspring.chunks_mut(2) {
            if let [a, b] = pair {
                if rng.random_bool(cfg.cxpb) {
                    let (c1, c2) = match cfg.crossover {
                        CrossoverKind::Ordered => order_crossover(&a.genes, &b.genes, &mut rng)?,
                        CrossoverKind::Pmx => pmx_crossover(&a.genes, &b.genes, &mut rng)?,
                    };
                    a.genes = c1;
                    b.genes = c2;
                    a.fitness = None;
                    b.fitness = None;
                }
            }
        }
        for ind in &mut offspring {
            if rng.random_bool(cfg.mutpb) {
                shuffle_mutation(&mut ind.genes, cfg.indpb, &mut rng);
                ind.fitness = None;
            }
        }
        for ind in &mut offspring {
            if ind.fitness.is_none() {
                ind.fitness = Some(tracker.evaluate(&ind.genes, generation));
            }
        }
        population = offspring;
    }

    let best = SolutionRecord {
        sequence: Sequence::from_indices(matrix, &tracker.best_genes),
        score: Score(tracker.best_score),
        iteration_found: tracker.best_generation,
        source: SolutionSource::Ga,
    };
    Ok(GaOutcome {
        best,
        unique_count: tracker.seen.len(),
        evaluations: tracker.evaluations,
        convergence: tracker.convergence,
    })
}

/// Best-so-far at `unique_count == x`, or the final value when fewer unique
/// solutions were explored.
pub fn best_at_unique(convergence: &[ConvergencePoint], x: usize) -> Option<usize> {
    let idx = convergence.partition_point(|p| p.unique_count <= x);
    if idx == 0 {
        None
    } else {
        Some(convergence[idx - 1].best_score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::brute_force_optimum;
    use crate::model::{build_adjacency, random_dag_case, DsmCase};

    fn is_perm(v: &[usize]) -> bool {
        let mut s = v.to_vec();
        s.sort_unstable();
        s == (0..v.len()).collect::<Vec<_>>()
    }

    #[test]
    fn presets_match_published_table() {
        let e = GaPreset::Exploration.config(0);
        assert_eq!((e.population_size, e.indpb, e.tournament_size, e.cxpb, e.mutpb), (50, 0.05, 5, 0.6, 0.4));
        let x = GaPreset::Exploitation.config(0);
        assert_eq!((x.population_size, x.indpb, x.tournament_size, x.cxpb, x.mutpb), (10, 0.01, 20, 0.9, 0.1));
        let b = GaPreset::Balanced.config(0);
        assert_eq!((b.population_size, b.indpb, b.tournament_size, b.cxpb, b.mutpb), (20, 0.02, 10, 0.7, 0.3));
        assert!(GaPreset::ALL.iter().all(|p| p.config(0).generations == 2000));
    }

    #[test]
    fn config_validation() {
        let mut c = GaPreset::Balanced.config(0);
        c.cxpb = 1.5;
        assert!(c.validate().is_err());
        let mut c = GaPreset::Balanced.config(0);
        c.generations = 0;
        assert!(c.validate().is_err());
        // tournament larger than population is allowed
        assert!(GaPreset::Exploitation.config(0).validate().is_ok());
    }

    #[test]
    fn ox_boundaries() {
        let p1 = vec![0, 1, 2, 3, 4];
        let p2 = vec![4, 2, 0, 3, 1];
        assert_eq!(ox_child(&p1, &p2, 0, 4), p1);
        assert_eq!(ox_child(&p1, &p1, 1, 3), p1);
        // keep (0, 1); donor read from index 2 gives 0,3,1,4,2 -> fill 3,4,2
        assert_eq!(ox_child(&p1, &p2, 0, 1), vec![0, 1, 3, 4, 2]);
    }

    #[test]
    fn pmx_known_example() {
        let p1 = vec![0, 1, 2, 3, 4, 5, 6, 7];
        let p2 = vec![2, 4, 6, 1, 7, 5, 0, 3];
        let c = pmx_child(&p1, &p2, 2, 4);
        assert!(is_perm(&c));
        assert_eq!(&c[2..=4], &[2, 3, 4]);
    }

    #[test]
    fn crossover_rejects_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(order_crossover(&[0, 1, 2], &[0, 1, 1], &mut rng), Err(GaError::MismatchedParents));
        assert_eq!(order_crossover(&[0, 1, 2], &[0, 1], &mut rng), Err(GaError::MismatchedParents));
    }

    #[test]
    fn sequence_crossover_keeps_ids() {
        let case = DsmCase::from_ids(&["a", "b", "c", "d"], &[]).unwrap();
        let m = build_adjacency(&case);
        let p1 = Sequence::from_indices(&m, &[0, 1, 2, 3]);
        let p2 = Sequence::from_indices(&m, &[3, 1, 0, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (c1, c2) = order_crossover_sequences(&p1, &p2, &mut rng).unwrap();
        for c in [c1, c2] {
            assert_eq!(crate::evaluator::id_set(&c), crate::evaluator::id_set(&p1));
        }
    }

    #[test]
    fn mutation_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = vec![0, 1, 2, 3];
        shuffle_mutation(&mut s, 0.0, &mut rng);
        assert_eq!(s, vec![0, 1, 2, 3]);
        let mut two = vec![0, 1];
        shuffle_mutation(&mut two, 1.0, &mut rng);
        assert!(is_perm(&two));
    }

    #[test]
    fn tournament_pressure() {
        let scores: Vec<usize> = (0..10).map(|i| 10 - i).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let best_hits = (0..1000).filter(|_| tournament_select(&scores, 200, &mut rng) == 9).count();
        assert!(best_hits > 990, "{best_hits}");

        let flat = vec![3usize; 4];
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            counts[tournament_select(&flat, 3, &mut rng)] += 1;
        }
        // first contestant wins ties, so the pick is uniform
        assert!(counts.iter().all(|&c| (850..1150).contains(&c)), "{counts:?}");

        let mut k1 = [0usize; 10];
        for _ in 0..5000 {
            k1[tournament_select(&scores, 1, &mut rng)] += 1;
        }
        assert!(k1.iter().all(|&c| (380..620).contains(&c)), "{k1:?}");
    }

    #[test]
    fn three_cycle_exploitation_finds_one() {
        let m = build_adjacency(
            &DsmCase::from_ids(&["A", "B", "C"], &[("B", "A"), ("C", "B"), ("A", "C")]).unwrap(),
        );
        let mut cfg = GaPreset::Exploitation.config(3);
        cfg.generations = 50;
        let out = run_ga(&m, &cfg).unwrap();
        assert_eq!(out.best.score, Score(1));
        assert!(out.unique_count <= 6);
    }

    #[test]
    fn dag_balanced_reaches_zero() {
        let case = random_dag_case(6, 0.5, 12);
        let m = build_adjacency(&case);
        assert_eq!(brute_force_optimum(&m).unwrap().0, Score(0));
        let hits = (0..10).filter(|&s| run_ga(&m, &GaPreset::Balanced.config(s)).unwrap().best.score == Score(0)).count();
        assert!(hits >= 9);
    }

    #[test]
    fn convergence_accounting() {
        let case = random_dag_case(8, 0.4, 2);
        let m = build_adjacency(&case);
        let mut cfg = GaPreset::Balanced.config(5);
        cfg.generations = 100;
        let a = run_ga(&m, &cfg).unwrap();
        let b = run_ga(&m, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.unique_count <= a.evaluations);
        assert_eq!(a.convergence.len(), a.unique_count);
        assert!(a.convergence.windows(2).all(|w| w[0].unique_count + 1 == w[1].unique_count));
        assert!(a.convergence.windows(2).all(|w| w[0].best_score >= w[1].best_score));
        assert_eq!(a.convergence.last().unwrap().best_score, a.best.score.0);
        assert_eq!(best_at_unique(&a.convergence, 0), None);
        assert_eq!(best_at_unique(&a.convergence, usize::MAX), Some(a.best.score.0));
    }
}
