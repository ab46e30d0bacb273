//! The generate, validate, score, insert loop.

use std::fs;
use std::path::PathBuf;

use dsm_core::solution_base::SolutionSource;
use dsm_core::{build_adjacency, BaseError, DsmCase, SamplingPolicy, Sequence, SolutionBase, SolutionRecord, TerminationPolicy};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::client::{ChatProvider, ChatRequest, ClientError};
use crate::parse::{parse_order_response, FailureKind};
use crate::prompt::{build_prompt, correction_note, shuffled_edges, KnowledgeMode, PromptContext, PromptError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub sampling: SamplingPolicy,
    pub termination: TerminationPolicy,
    pub knowledge_mode: KnowledgeMode,
    pub seed: u64,
    /// Extra attempts per iteration after an unparsable or invalid answer.
    pub invalid_retry_budget: u32,
    pub reshuffle_edges_each_iteration: bool,
    /// Dump every prompt and raw response here when set.
    pub audit_dir: Option<PathBuf>,
    pub model: String,
    /// Forwarded to the provider untouched.
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            sampling: SamplingPolicy::default(),
            termination: TerminationPolicy::default(),
            knowledge_mode: KnowledgeMode::With,
            seed: 0,
            invalid_retry_budget: 2,
            reshuffle_edges_each_iteration: false,
            audit_dir: None,
            model: String::new(),
            params: Default::default(),
        }
    }
}

/// One line of the JSONL trace. Iteration 0 is the random initial solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub prompt_hash: Option<String>,
    pub response_hash: Option<String>,
    pub attempts: u32,
    pub sequence: Option<Vec<String>>,
    pub failure: Option<FailureKind>,
    pub diagnostic: Option<String>,
    pub duplicate: bool,
    pub score: Option<usize>,
    pub unique_count: usize,
    pub best_so_far: usize,
    pub best_sequence: Vec<String>,
}

#[derive(Debug)]
pub struct OptimizationOutcome {
    pub best: SolutionRecord,
    pub trace: Vec<TraceEntry>,
    pub base: SolutionBase,
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("provider failed at iteration {iteration}: {source}")]
    Client {
        iteration: usize,
        #[source]
        source: ClientError,
        trace: Vec<TraceEntry>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Base(#[from] BaseError),
    #[error("cannot write audit file: {0}")]
    Audit(#[from] std::io::Error),
}

impl OptimizeError {
    /// Trace recorded before the failure, if any.
    pub fn partial_trace(&self) -> &[TraceEntry] {
        match self {
            OptimizeError::Client { trace, .. } => trace,
            _ => &[],
        }
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn trace_to_jsonl(trace: &[TraceEntry]) -> String {
    trace.iter().map(|e| serde_json::to_string(e).expect("trace entry serializes") + "\n").collect()
}

/// Best-so-far after `budget` model iterations (clamped to the trace length).
pub fn best_within_budget(trace: &[TraceEntry], budget: usize) -> Option<usize> {
    trace.iter().take_while(|e| e.iteration <= budget).last().map(|e| e.best_so_far)
}

fn validate(case: &DsmCase, cfg: &OptimizerConfig) -> Result<(), OptimizeError> {
    if cfg.termination.max_iterations == 0 {
        return Err(OptimizeError::Config("max_iterations must be at least 1".into()));
    }
    if cfg.sampling.k_p == 0 {
        return Err(OptimizeError::Config("k_p must be at least 1".into()));
    }
    if cfg.knowledge_mode == KnowledgeMode::With {
        if case.description().trim().is_empty() {
            return Err(PromptError::MissingKnowledge("a network description").into());
        }
        if case.nodes().iter().any(|n| n.name.trim().is_empty()) {
            return Err(PromptError::MissingKnowledge("a name for every node").into());
        }
    }
    Ok(())
}

struct Audit(Option<PathBuf>);

impl Audit {
    fn dump(&self, iteration: usize, attempt: u32, kind: &str, body: &str) -> std::io::Result<()> {
        if let Some(dir) = &self.0 {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("iter{iteration:04}_try{attempt}_{kind}.txt")), body)?;
        }
        Ok(())
    }
}

pub fn run_optimization(
    case: &DsmCase,
    cfg: &OptimizerConfig,
    client: &dyn ChatProvider,
) -> Result<OptimizationOutcome, OptimizeError> {
    validate(case, cfg)?;
    let matrix = build_adjacency(case);
    let mut base = SolutionBase::new(matrix.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let audit = Audit(cfg.audit_dir.clone());

    let mut perm: Vec<usize> = (0..matrix.n()).collect();
    perm.shuffle(&mut rng);
    let initial = Sequence::from_indices(&matrix, &perm);
    let (_, initial_score) = base.insert_sequence(initial.clone(), 0, SolutionSource::InitialRandom)?;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        prompt_hash: None,
        response_hash: None,
        attempts: 0,
        sequence: Some(initial.ids().iter().map(ToString::to_string).collect()),
        failure: None,
        diagnostic: None,
        duplicate: false,
        score: Some(initial_score.0),
        unique_count: 1,
        best_so_far: initial_score.0,
        best_sequence: initial.ids().iter().map(ToString::to_string).collect(),
    }];

    let mut edges = shuffled_edges(case, rng.next_u64());
    let mut iteration = 0;
    while !base.should_terminate(&cfg.termination, iteration) {
        iteration += 1;
        if cfg.reshuffle_edges_each_iteration && iteration > 1 {
            edges = shuffled_edges(case, rng.next_u64());
        }
        let sample = base.sample_for_prompt(cfg.sampling, rng.next_u64())?;
        let ctx = PromptContext::new(case, edges.clone(), &sample, cfg.knowledge_mode);
        let prompt = build_prompt(&ctx)?;

        let mut entry = TraceEntry {
            iteration,
            prompt_hash: None,
            response_hash: None,
            attempts: 0,
            sequence: None,
            failure: None,
            diagnostic: None,
            duplicate: false,
            score: None,
            unique_count: 0,
            best_so_far: 0,
            best_sequence: Vec::new(),
        };
        let mut text = prompt.clone();
        for attempt in 0..=cfg.invalid_retry_budget {
            entry.attempts = attempt + 1;
            let mut request = ChatRequest::single_turn(cfg.model.clone(), text.clone());
            request.params = cfg.params.clone();
            entry.prompt_hash = Some(sha256_hex(&text));
            audit.dump(iteration, attempt, "prompt", &text)?;
            let completion = match client.complete(&request) {
                Ok(c) => c,
                Err(source) => return Err(OptimizeError::Client { iteration, source, trace }),
            };
            audit.dump(iteration, attempt, "response", &completion.text)?;
            entry.response_hash = Some(sha256_hex(&completion.text));
            match parse_order_response(&completion.text, case) {
                Ok(sequence) => {
                    entry.failure = None;
                    entry.diagnostic = None;
                    let (inserted, score) = base.insert_sequence(sequence.clone(), iteration, SolutionSource::Llm)?;
                    entry.duplicate = !inserted;
                    entry.score = Some(score.0);
                    entry.sequence = Some(sequence.ids().iter().map(ToString::to_string).collect());
                    break;
                }
                Err(failure) => {
                    log::debug!("iteration {iteration} attempt {}: {failure}", attempt + 1);
                    let diagnostic = failure.to_string();
                    entry.failure = Some(failure.kind());
                    text = format!("{prompt}{}", correction_note(&diagnostic));
                    entry.diagnostic = Some(diagnostic);
                }
            }
        }
        if entry.failure.is_some() {
            log::warn!("iteration {iteration} wasted after {} attempt(s)", entry.attempts);
        }
        entry.unique_count = base.unique_count();
        let best = base.best()?;
        entry.best_so_far = best.score.0;
        entry.best_sequence = best.sequence.ids().iter().map(ToString::to_string).collect();
        trace.push(entry);
    }

    Ok(OptimizationOutcome { best: base.best()?.clone(), trace, base })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::scripted_stub;
    use dsm_core::Score;

    fn cfg(max: usize) -> OptimizerConfig {
        OptimizerConfig {
            termination: TerminationPolicy { max_iterations: max, optimal_threshold: None },
            knowledge_mode: KnowledgeMode::Without,
            seed: 7,
            ..Default::default()
        }
    }

    fn chain() -> DsmCase {
        DsmCase::from_ids(&["a", "b", "c"], &[("b", "a"), ("c", "b")]).unwrap()
    }

    #[test]
    fn initial_solution_is_iteration_zero() {
        let stub = scripted_stub(["<order> a, b, c </order>"]);
        let out = run_optimization(&chain(), &cfg(1), &stub).unwrap();
        assert_eq!(out.trace.len(), 2);
        assert_eq!(out.trace[0].iteration, 0);
        assert!(out.trace[0].prompt_hash.is_none());
        assert_eq!(out.best.score, Score(0));
        assert_eq!(out.trace[1].best_so_far, 0);
    }

    #[test]
    fn retry_then_success_uses_correction() {
        let stub = scripted_stub(["no tags here", "<order> a, a, c </order>", "<order> c, b, a </order>"]);
        let out = run_optimization(&chain(), &cfg(1), &stub).unwrap();
        let e = &out.trace[1];
        assert_eq!(e.attempts, 3);
        assert!(e.failure.is_none());
        assert_eq!(e.score, Some(2));
        let prompts = stub.recorded_prompts();
        assert!(!prompts[0].contains("rejected"));
        assert!(prompts[1].contains("no <order>"));
        assert!(prompts[2].contains("duplicated ids: a"));
    }

    #[test]
    fn exhausted_budget_consumes_the_iteration() {
        let stub = scripted_stub(["x", "y", "z", "<order> a, b, c </order>"]);
        let out = run_optimization(&chain(), &cfg(2), &stub).unwrap();
        assert_eq!(out.trace[1].failure, Some(FailureKind::MissingTags));
        assert_eq!(out.trace[1].attempts, 3);
        assert_eq!(out.trace[1].unique_count, 1);
        assert_eq!(out.trace[2].score, Some(0));
    }

    #[test]
    fn transport_failure_keeps_partial_trace() {
        let stub = scripted_stub(["<order> b, a, c </order>"]);
        let err = run_optimization(&chain(), &cfg(3), &stub).unwrap_err();
        assert!(matches!(err, OptimizeError::Client { iteration: 2, .. }));
        assert_eq!(err.partial_trace().len(), 2);
    }

    #[test]
    fn knowledge_mode_requires_names() {
        let mut c = cfg(1);
        c.knowledge_mode = KnowledgeMode::With;
        let undescribed = DsmCase::from_ids(&["a", "b"], &[]).unwrap();
        let err = run_optimization(&undescribed, &c, &scripted_stub(["<order> a, b </order>"])).unwrap_err();
        assert!(matches!(err, OptimizeError::Prompt(PromptError::MissingKnowledge(_))));
        let nodes = vec![
            dsm_core::Node { id: dsm_core::NodeId::new("a").unwrap(), name: String::new() },
            dsm_core::Node { id: dsm_core::NodeId::new("b").unwrap(), name: "B".into() },
        ];
        let unnamed = DsmCase::new(nodes, vec![], "d", None).unwrap();
        let err = run_optimization(&unnamed, &c, &scripted_stub(["<order> a, b </order>"])).unwrap_err();
        assert!(matches!(err, OptimizeError::Prompt(PromptError::MissingKnowledge(_))));
    }

    #[test]
    fn budget_prefix_reads_best_so_far() {
        let stub = scripted_stub(["<order> c, b, a </order>", "<order> b, a, c </order>", "<order> a, b, c </order>"]);
        let out = run_optimization(&chain(), &cfg(3), &stub).unwrap();
        let scores: Vec<_> = out.trace.iter().map(|e| e.best_so_far).collect();
        assert!(scores.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(best_within_budget(&out.trace, 3), Some(0));
        assert_eq!(best_within_budget(&out.trace, 99), Some(0));
        assert_eq!(best_within_budget(&out.trace, 0), Some(out.trace[0].best_so_far));
    }

    #[test]
    fn jsonl_has_one_line_per_entry() {
        let stub = scripted_stub(["<order> a, b, c </order>"]);
        let out = run_optimization(&chain(), &cfg(1), &stub).unwrap();
        let text = trace_to_jsonl(&out.trace);
        assert_eq!(text.lines().count(), 2);
        let back: TraceEntry = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        assert_eq!(back, out.trace[1]);
    }
}
