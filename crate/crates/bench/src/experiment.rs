//! Seeded experiment grids over cases, methods, and runs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dsm_core::deterministic::{DeterministicMethod, Direction};
use dsm_core::ga::{best_at_unique, run_ga, GaPreset};
use dsm_core::{
    anonymize_ids, build_adjacency, load_case, DsmCase, ModelError, SamplingPolicy, Score, Sequence,
    TerminationPolicy,
};
use dsm_llm::{
    best_within_budget, run_optimization, trace_to_jsonl, ChatProvider, ClientError, KnowledgeMode, OptimizeError,
    OptimizerConfig, TraceEntry,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::convergence::{convergence_curve, curve_csv, mean_curve, mean_curve_csv, truncate, CurvePoint};
use crate::stats::{aggregate_stats, StdKind};
use crate::trajectory::{render_trajectory, Snapshot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Llm(KnowledgeMode),
    Ga(GaPreset),
    Deterministic(DeterministicMethod, Direction),
}

impl Method {
    pub fn is_llm(&self) -> bool {
        matches!(self, Method::Llm(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Llm(KnowledgeMode::With) => f.write_str("llm-with-knowledge"),
            Method::Llm(KnowledgeMode::Without) => f.write_str("llm-without-knowledge"),
            Method::Ga(p) => write!(f, "ga-{}", p.as_str()),
            Method::Deterministic(m, Direction::Descending) => write!(f, "det-{}", m.as_str()),
            Method::Deterministic(m, Direction::Ascending) => write!(f, "det-{}-asc", m.as_str()),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm-with-knowledge" => return Ok(Method::Llm(KnowledgeMode::With)),
            "llm-without-knowledge" => return Ok(Method::Llm(KnowledgeMode::Without)),
            _ => {}
        }
        if let Some(p) = s.strip_prefix("ga-") {
            return p.parse().map(Method::Ga).map_err(|e: String| e);
        }
        if let Some(rest) = s.strip_prefix("det-") {
            let (name, dir) = match rest.strip_suffix("-asc") {
                Some(n) => (n, Direction::Ascending),
                None => (rest, Direction::Descending),
            };
            return name.parse().map(|m| Method::Deterministic(m, dir));
        }
        Err(format!(
            "unknown method {s:?}; expected llm-with-knowledge, llm-without-knowledge, ga-<preset>, or det-<name>[-asc]"
        ))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_runs() -> usize {
    10
}
fn default_budgets() -> Vec<usize> {
    vec![1, 5, 20]
}
fn default_window() -> usize {
    10_000
}
fn default_true() -> bool {
    true
}
fn default_retry() -> u32 {
    2
}
fn default_trajectory() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

/// Experiment description. Run `r` uses seed `base_seed + r` for every method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub cases: Vec<PathBuf>,
    pub methods: Vec<Method>,
    #[serde(default = "default_runs")]
    pub runs_per_method: usize,
    /// LLM iteration budgets read off each run's best-so-far.
    #[serde(default = "default_budgets")]
    pub trial_budgets: Vec<usize>,
    #[serde(default)]
    pub base_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub std_kind: StdKind,
    /// GA scores are read at this many unique solutions.
    #[serde(default = "default_window")]
    pub ga_window: usize,
    /// Override the preset's generation count.
    #[serde(default)]
    pub ga_generations: Option<usize>,
    /// Replace ids with random 5-character tokens before prompting.
    #[serde(default = "default_true")]
    pub anonymize: bool,
    /// Stop an LLM run once the case's known optimum is reached.
    #[serde(default = "default_true")]
    pub stop_at_known_optimum: bool,
    #[serde(default)]
    pub sampling: SamplingPolicy,
    #[serde(default = "default_retry")]
    pub invalid_retry_budget: u32,
    /// Iterations rendered as matrix snapshots for run 0 of each LLM method.
    #[serde(default = "default_trajectory")]
    pub trajectory_iterations: Vec<usize>,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    /// Also run every `det-*` method in the opposite direction.
    #[serde(default = "default_true")]
    pub report_both_directions: bool,
    /// Worker threads for independent cells; `None` uses all cores.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(cases: Vec<PathBuf>, methods: Vec<Method>, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            cases,
            methods,
            runs_per_method: default_runs(),
            trial_budgets: default_budgets(),
            base_seed: 0,
            output_dir: output_dir.into(),
            std_kind: StdKind::Population,
            ga_window: default_window(),
            ga_generations: None,
            anonymize: true,
            stop_at_known_optimum: true,
            sampling: SamplingPolicy::default(),
            invalid_retry_budget: default_retry(),
            trajectory_iterations: default_trajectory(),
            model: String::new(),
            params: Default::default(),
            report_both_directions: true,
            parallelism: None,
        }
    }

    /// Read a spec file; relative case and output paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::Io(path.to_path_buf(), e))?;
        let mut spec: ExperimentSpec =
            serde_json::from_str(&text).map_err(|e| ExperimentError::Spec(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut spec.cases {
            if c.is_relative() {
                *c = base.join(&*c);
            }
        }
        if spec.output_dir.is_relative() {
            spec.output_dir = base.join(&spec.output_dir);
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: &str| Err(ExperimentError::Spec(m.to_string()));
        if self.runs_per_method == 0 {
            return fail("runs_per_method must be at least 1");
        }
        if self.cases.is_empty() || self.methods.is_empty() {
            return fail("at least one case and one method are required");
        }
        if self.methods.iter().any(Method::is_llm) && (self.trial_budgets.is_empty() || self.trial_budgets.contains(&0))
        {
            return fail("trial_budgets must be non-empty and positive for LLM methods");
        }
        if self.ga_window == 0 || self.ga_generations == Some(0) {
            return fail("ga_window and ga_generations must be positive");
        }
        if self.sampling.k_p == 0 {
            return fail("sampling.k_p must be at least 1");
        }
        Ok(())
    }

    /// Methods to execute, with mirrored deterministic directions appended
    /// after each deterministic entry when requested.
    pub fn expanded_methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for &m in &self.methods {
            let mut push = |m: Method| {
                if !out.contains(&m) {
                    out.push(m);
                }
            };
            push(m);
            if let (true, Method::Deterministic(d, dir)) = (self.report_both_directions, m) {
                let flipped = match dir {
                    Direction::Descending => Direction::Ascending,
                    Direction::Ascending => Direction::Descending,
                };
                push(Method::Deterministic(d, flipped));
            }
        }
        out
    }

    pub fn seed_for(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("cannot load case {0}: {1}")]
    Case(PathBuf, #[source] ModelError),
    #[error("I/O error on {0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("cannot build thread pool: {0}")]
    Pool(String),
}

/// Identifies one grid cell for the provider factory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub case: String,
    pub method: Method,
    pub run: usize,
    pub seed: u64,
}

/// Supplies a chat provider per LLM cell.
pub type ProviderFactory<'a> = dyn Fn(&CellKey) -> Result<Box<dyn ChatProvider>, ClientError> + Sync + 'a;

/// Factory for grids without LLM methods.
pub fn no_provider(_: &CellKey) -> Result<Box<dyn ChatProvider>, ClientError> {
    Err(ClientError::Config("no LLM provider configured".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub case: String,
    pub method: Method,
    pub budget: String,
    pub run: usize,
    pub seed: u64,
    pub score: Option<usize>,
    pub unique_count: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub case: String,
    pub method: Method,
    pub budget: String,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub best: Option<f64>,
    pub scores: Vec<usize>,
}

impl ResultRow {
    pub fn formatted(&self) -> String {
        match (self.mean, self.std) {
            (Some(m), Some(s)) => crate::stats::format_mean_std(m, s),
            _ => "failed".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub case: String,
    pub method: Method,
    pub run: usize,
    pub seed: u64,
    pub failed: bool,
}

/// Everything needed to replay the experiment, plus hashes of its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ExperimentSpec,
    pub cases: Vec<CaseEntry>,
    pub cells: Vec<CellEntry>,
    /// Relative output path to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub results: Vec<ResultRow>,
    pub runs: Vec<RunRow>,
    pub manifest: Manifest,
}

struct LoadedCase {
    name: String,
    case: DsmCase,
}

struct CellOutcome {
    key: CellKey,
    rows: Vec<RunRow>,
    curve: Option<Vec<CurvePoint>>,
    files: Vec<(String, String)>,
    failed: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn case_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("case");
    stem.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write via a temporary sibling and rename so readers never see partial files.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    let io = |e| ExperimentError::Io(path.to_path_buf(), e);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn budget_label(b: usize) -> String {
    format!("trials={b}")
}

fn run_cell(spec: &ExperimentSpec, lc: &LoadedCase, key: CellKey, provider: &ProviderFactory<'_>) -> CellOutcome {
    let stem = format!("{}__{}__run{}", key.case, key.method, key.run);
    let row = |budget: String, score: Option<usize>, unique: usize, error: Option<String>| RunRow {
        case: key.case.clone(),
        method: key.method,
        budget,
        run: key.run,
        seed: key.seed,
        score,
        unique_count: unique,
        error,
    };
    match key.method {
        Method::Deterministic(m, dir) => {
            let matrix = build_adjacency(&lc.case);
            match m.run(&matrix, dir, key.seed) {
                Ok(r) => {
                    let score = dsm_core::score_sequence(&matrix, &r.order).expect("ranking is a permutation").0;
                    let mut files = Vec::new();
                    if key.run == 0 {
                        let snap = Snapshot::build(&matrix, key.method.to_string(), r.order.clone())
                            .expect("ranking is a permutation");
                        files.push((format!("figures/{}__{}__order.csv", key.case, key.method), snap.to_csv()));
                        files.push((format!("figures/{}__{}__order.svg", key.case, key.method), snap.to_svg()));
                    }
                    CellOutcome {
                        rows: vec![row("deterministic".into(), Some(score), 1, None)],
                        key,
                        curve: None,
                        files,
                        failed: false,
                    }
                }
                Err(e) => CellOutcome {
                    rows: vec![row("deterministic".into(), None, 0, Some(e.to_string()))],
                    key,
                    curve: None,
                    files: Vec::new(),
                    failed: true,
                },
            }
        }
        Method::Ga(preset) => {
            let matrix = build_adjacency(&lc.case);
            let mut cfg = preset.config(key.seed);
            if let Some(g) = spec.ga_generations {
                cfg.generations = g;
            }
            let label = format!("unique={}", spec.ga_window);
            match run_ga(&matrix, &cfg) {
                Ok(out) => {
                    let curve = truncate(
                        &convergence_curve(out.convergence.iter().map(|p| (p.unique_count, p.best_score))),
                        spec.ga_window,
                    );
                    let score = best_at_unique(&out.convergence, spec.ga_window);
                    let unique = out.unique_count.min(spec.ga_window);
                    CellOutcome {
                        rows: vec![row(label, score, unique, None)],
                        files: vec![(format!("convergence/{stem}.csv"), curve_csv(&curve))],
                        curve: Some(curve),
                        key,
                        failed: false,
                    }
                }
                Err(e) => CellOutcome {
                    rows: vec![row(label, None, 0, Some(e.to_string()))],
                    key,
                    curve: None,
                    files: Vec::new(),
                    failed: true,
                },
            }
        }
        Method::Llm(mode) => run_llm_cell(spec, lc, key, mode, provider, &stem),
    }
}

fn run_llm_cell(
    spec: &ExperimentSpec,
    lc: &LoadedCase,
    key: CellKey,
    mode: KnowledgeMode,
    provider: &ProviderFactory<'_>,
    stem: &str,
) -> CellOutcome {
    let mut files = Vec::new();
    let (case, mapping) = if spec.anonymize {
        let (c, m) = anonymize_ids(&lc.case, key.seed);
        (c, Some(m))
    } else {
        (lc.case.clone(), None)
    };
    if let Some(m) = &mapping {
        let pairs: Vec<(String, String)> = m.pairs().iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        files.push((format!("traces/{stem}__ids.json"), serde_json::to_string_pretty(&pairs).expect("pairs") + "\n"));
    }
    let max_budget = spec.trial_budgets.iter().copied().max().unwrap_or(1);
    let threshold = if spec.stop_at_known_optimum { lc.case.known_optimum().map(Score) } else { None };
    let cfg = OptimizerConfig {
        sampling: spec.sampling,
        termination: TerminationPolicy { max_iterations: max_budget, optimal_threshold: threshold },
        knowledge_mode: mode,
        seed: key.seed,
        invalid_retry_budget: spec.invalid_retry_budget,
        reshuffle_edges_each_iteration: false,
        audit_dir: None,
        model: spec.model.clone(),
        params: spec.params.clone(),
    };
    let failed_rows = |error: String| -> Vec<RunRow> {
        spec.trial_budgets
            .iter()
            .map(|&b| RunRow {
                case: key.case.clone(),
                method: key.method,
                budget: budget_label(b),
                run: key.run,
                seed: key.seed,
                score: None,
                unique_count: 0,
                error: Some(error.clone()),
            })
            .collect()
    };
    let client = match provider(&key) {
        Ok(c) => c,
        Err(e) => {
            return CellOutcome { rows: failed_rows(e.to_string()), key, curve: None, files, failed: true };
        }
    };
    let result = run_optimization(&case, &cfg, client.as_ref());
    let (trace, error): (Vec<TraceEntry>, Option<OptimizeError>) = match result {
        Ok(out) => (out.trace, None),
        Err(e) => (e.partial_trace().to_vec(), Some(e)),
    };
    files.push((format!("traces/{stem}.jsonl"), trace_to_jsonl(&trace)));
    if let Some(e) = error {
        log::warn!("{stem} failed: {e}");
        return CellOutcome { rows: failed_rows(e.to_string()), key, curve: None, files, failed: true };
    }
    let curve = convergence_curve(trace.iter().map(|e| (e.unique_count, e.best_so_far)));
    files.push((format!("convergence/{stem}.csv"), curve_csv(&curve)));
    if key.run == 0 {
        let matrix = build_adjacency(&case);
        let wanted: Vec<usize> =
            spec.trajectory_iterations.iter().copied().filter(|i| trace.iter().any(|e| e.iteration == *i)).collect();
        if let Ok(snaps) = render_trajectory(&matrix, &trace, &wanted) {
            for (it, snap) in wanted.iter().zip(snaps) {
                files.push((format!("figures/{stem}__iter{it}.csv"), snap.to_csv()));
                files.push((format!("figures/{stem}__iter{it}.svg"), snap.to_svg()));
            }
        }
    }
    let rows = spec
        .trial_budgets
        .iter()
        .map(|&b| {
            let unique = trace.iter().take_while(|e| e.iteration <= b).last().map_or(0, |e| e.unique_count);
            RunRow {
                case: key.case.clone(),
                method: key.method,
                budget: budget_label(b),
                run: key.run,
                seed: key.seed,
                score: best_within_budget(&trace, b),
                unique_count: unique,
                error: None,
            }
        })
        .collect();
    CellOutcome { rows, key, curve: Some(curve), files, failed: false }
}

fn aggregate(runs: &[RunRow], kind: StdKind) -> Vec<ResultRow> {
    let mut order: Vec<(String, Method, String)> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&RunRow>> = BTreeMap::new();
    for r in runs {
        let k = (r.case.clone(), r.method, r.budget.clone());
        let idx = order.iter().position(|o| *o == k).unwrap_or_else(|| {
            order.push(k);
            order.len() - 1
        });
        groups.entry(idx).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(idx, rows)| {
            let (case, method, budget) = order[idx].clone();
            let scores: Vec<usize> = rows.iter().filter_map(|r| r.score).collect();
            let summary = aggregate_stats(&scores.iter().map(|&s| s as f64).collect::<Vec<_>>(), kind).ok();
            ResultRow {
                case,
                method,
                budget,
                runs_ok: scores.len(),
                runs_failed: rows.len() - scores.len(),
                mean: summary.map(|s| s.mean),
                std: summary.map(|s| s.std),
                best: summary.map(|s| s.best),
                scores,
            }
        })
        .collect()
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("case,method,budget,runs_ok,runs_failed,mean,std,best,mean_std,scores\n");
    let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let scores: Vec<String> = r.scores.iter().map(usize::to_string).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.case),
            r.method,
            r.budget,
            r.runs_ok,
            r.runs_failed,
            num(r.mean),
            num(r.std),
            num(r.best),
            csv_field(&r.formatted()),
            scores.join(";")
        ));
    }
    out
}

pub fn runs_csv(rows: &[RunRow]) -> String {
    let mut out = String::from("case,method,budget,run,seed,status,score,unique_count,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.case),
            r.method,
            r.budget,
            r.run,
            r.seed,
            if r.error.is_some() { "failed" } else { "ok" },
            r.score.map(|s| s.to_string()).unwrap_or_default(),
            r.unique_count,
            csv_field(r.error.as_deref().unwrap_or(""))
        ));
    }
    out
}

/// Run every (case, method, run) cell and write all artifacts under
/// `spec.output_dir`. Cell failures are recorded, never fatal.
pub fn run_experiment(spec: &ExperimentSpec, provider: &ProviderFactory<'_>) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    let mut loaded = Vec::new();
    let mut case_entries = Vec::new();
    for path in &spec.cases {
        let bytes = fs::read(path).map_err(|e| ExperimentError::Io(path.clone(), e))?;
        let case = load_case(path).map_err(|e| ExperimentError::Case(path.clone(), e))?;
        let mut name = case_name(path);
        while loaded.iter().any(|l: &LoadedCase| l.name == name) {
            name.push('_');
        }
        case_entries.push(CaseEntry {
            name: name.clone(),
            path: path.clone(),
            sha256: sha256_hex(&bytes),
            nodes: case.node_count(),
            edges: case.edges().len(),
        });
        loaded.push(LoadedCase { name, case });
    }

    let methods = spec.expanded_methods();
    let cells: Vec<(usize, CellKey)> = loaded
        .iter()
        .enumerate()
        .flat_map(|(ci, lc)| {
            methods.iter().flat_map(move |&method| {
                (0..spec.runs_per_method).map(move |run| {
                    (ci, CellKey { case: lc.name.clone(), method, run, seed: spec.seed_for(run) })
                })
            })
        })
        .collect();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(p) = spec.parallelism {
        pool = pool.num_threads(p.max(1));
    }
    let pool = pool.build().map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells.into_par_iter().map(|(ci, key)| run_cell(spec, &loaded[ci], key, provider)).collect()
    });

    let out_dir = &spec.output_dir;
    let mut outputs = BTreeMap::new();
    let mut emit = |rel: String, body: &str| -> Result<(), ExperimentError> {
        write_atomic(&out_dir.join(&rel), body.as_bytes())?;
        outputs.insert(rel, sha256_hex(body.as_bytes()));
        Ok(())
    };

    let mut runs = Vec::new();
    let mut cell_entries = Vec::new();
    let mut curves: BTreeMap<(String, String), Vec<Vec<CurvePoint>>> = BTreeMap::new();
    for o in &outcomes {
        runs.extend(o.rows.iter().cloned());
        cell_entries.push(CellEntry {
            case: o.key.case.clone(),
            method: o.key.method,
            run: o.key.run,
            seed: o.key.seed,
            failed: o.failed,
        });
        for (rel, body) in &o.files {
            emit(rel.clone(), body)?;
        }
        if let Some(c) = &o.curve {
            curves.entry((o.key.case.clone(), o.key.method.to_string())).or_default().push(c.clone());
        }
    }
    for ((case, method), cs) in &curves {
        emit(format!("convergence/{case}__{method}__mean.csv"), &mean_curve_csv(&mean_curve(cs)))?;
    }
    let results = aggregate(&runs, spec.std_kind);
    emit("results.csv".into(), &results_csv(&results))?;
    emit("runs.csv".into(), &runs_csv(&runs))?;

    let manifest = Manifest { spec: spec.clone(), cases: case_entries, cells: cell_entries, outputs };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(ExperimentReport { results, runs, manifest })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayReport {
    pub matched: Vec<String>,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty()
    }
}

/// Re-run the manifest's spec into `output_dir` and compare output hashes.
pub fn replay(
    manifest: &Manifest,
    output_dir: impl Into<PathBuf>,
    provider: &ProviderFactory<'_>,
) -> Result<ReplayReport, ExperimentError> {
    let mut spec = manifest.spec.clone();
    spec.output_dir = output_dir.into();
    let fresh = run_experiment(&spec, provider)?;
    let mut report = ReplayReport { matched: Vec::new(), mismatched: Vec::new(), missing: Vec::new() };
    for (path, hash) in &manifest.outputs {
        match fresh.manifest.outputs.get(path) {
            Some(h) if h == hash => report.matched.push(path.clone()),
            Some(_) => report.mismatched.push(path.clone()),
            None => report.missing.push(path.clone()),
        }
    }
    Ok(report)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, ExperimentError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Spec(format!("{}: {e}", path.display())))
}

/// Sequence helper for callers holding raw id strings.
pub fn sequence_from_strs(ids: &[String]) -> Result<Sequence, ModelError> {
    ids.iter().map(|s| dsm_core::NodeId::new(s.clone())).collect::<Result<Vec<_>, _>>().map(Sequence)
}
