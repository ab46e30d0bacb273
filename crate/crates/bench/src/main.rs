use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dsm_bench::experiment::{load_manifest, replay, run_experiment, sequence_from_strs, write_atomic};
use dsm_bench::{CellKey, ExperimentSpec, Method};
use dsm_core::deterministic::{DeterministicMethod, Direction};
use dsm_core::ga::{run_ga, CrossoverKind, GaPreset};
use dsm_core::{anonymize_ids, brute_force_optimum, build_adjacency, load_case, network_metrics, score_sequence};
use dsm_llm::{
    run_optimization, scripted_stub, trace_to_jsonl, ChatProvider, ClientError, KnowledgeMode,
    OpenAiCompatibleProvider, OptimizerConfig, ProviderConfig,
};

#[derive(Parser)]
#[command(name = "dsm-seq", version, about = "Sequence design structure matrices to minimize feedback loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid from a spec file.
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// JSON array of canned LLM responses used instead of a live provider.
        #[arg(long)]
        stub_script: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Re-run a manifest into a new directory and compare output hashes.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        stub_script: Option<PathBuf>,
    },
    /// Count feedback loops of a given order.
    Score {
        #[arg(long)]
        case: PathBuf,
        /// Comma-separated node ids.
        #[arg(long)]
        order: String,
    },
    /// Deterministic ordering (outin, eig, exp, resolvent, visibility).
    Baseline {
        method: DeterministicMethod,
        #[arg(long)]
        case: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rank ascending instead of descending.
        #[arg(long)]
        ascending: bool,
    },
    /// Genetic algorithm with a preset.
    Ga {
        #[arg(long, default_value = "balanced")]
        preset: GaPreset,
        #[arg(long)]
        case: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        pmx: bool,
        /// Write the (unique_count, best_score) series here.
        #[arg(long)]
        convergence: Option<PathBuf>,
    },
    /// Iterative LLM optimization.
    Llm {
        #[arg(long, value_enum, default_value = "on")]
        knowledge: OnOff,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        case: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        stub_script: Option<PathBuf>,
        /// Keep the case's own ids in prompts.
        #[arg(long)]
        no_anonymize: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Dump every prompt and response into this directory.
        #[arg(long)]
        audit_dir: Option<PathBuf>,
    },
    /// Exact optimum by exhaustive search (n <= 10).
    Oracle {
        #[arg(long)]
        case: PathBuf,
    },
    /// Network statistics of a case.
    Metrics {
        #[arg(long)]
        case: PathBuf,
    },
}

fn read_script(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} must be a JSON array of strings", path.display()))
}

type Factory = Box<dyn Fn(&CellKey) -> Result<Box<dyn ChatProvider>, ClientError> + Sync>;

fn provider_factory(stub_script: Option<&Path>) -> Result<Factory> {
    match stub_script {
        Some(p) => {
            let script = read_script(p)?;
            Ok(Box::new(move |_: &CellKey| Ok(Box::new(scripted_stub(script.clone())) as Box<dyn ChatProvider>)))
        }
        None => {
            // one client for all cells so the rate limiter is shared
            let shared = ProviderConfig::from_env().and_then(OpenAiCompatibleProvider::new).map(Arc::new);
            Ok(Box::new(move |_: &CellKey| match &shared {
                Ok(p) => Ok(Box::new(Arc::clone(p)) as Box<dyn ChatProvider>),
                Err(e) => Err(e.clone()),
            }))
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { spec, stub_script, parallelism } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if parallelism.is_some() {
                spec.parallelism = parallelism;
            }
            let factory = provider_factory(stub_script.as_deref())?;
            let report = run_experiment(&spec, &*factory)?;
            println!("{:<16} {:<24} {:<14} {:>8} {:>6}", "case", "method", "budget", "score", "failed");
            for r in &report.results {
                println!(
                    "{:<16} {:<24} {:<14} {:>8} {:>6}",
                    r.case,
                    r.method.to_string(),
                    r.budget,
                    r.formatted(),
                    r.runs_failed
                );
            }
            println!("outputs written to {}", spec.output_dir.display());
        }
        Command::Replay { manifest, output_dir, stub_script } => {
            let manifest = load_manifest(&manifest)?;
            let factory = provider_factory(stub_script.as_deref())?;
            let report = replay(&manifest, output_dir, &*factory)?;
            println!("{} identical, {} differ, {} missing", report.matched.len(), report.mismatched.len(), report.missing.len());
            for p in report.mismatched.iter().chain(&report.missing) {
                println!("  {p}");
            }
            if !report.identical() {
                bail!("replay diverged from the manifest");
            }
        }
        Command::Score { case, order } => {
            let case = load_case(&case)?;
            let ids: Vec<String> = order.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            let validation = dsm_core::is_valid_sequence(&case, &ids);
            if !validation.valid {
                bail!("invalid order: {validation}");
            }
            let seq = sequence_from_strs(&ids)?;
            println!("{}", score_sequence(&build_adjacency(&case), &seq)?);
        }
        Command::Baseline { method, case, seed, ascending } => {
            let case = load_case(&case)?;
            let m = build_adjacency(&case);
            let dir = if ascending { Direction::Ascending } else { Direction::Descending };
            let r = method.run(&m, dir, seed)?;
            for w in &r.warnings {
                log::warn!("{w}");
            }
            println!("order: {}", r.order.joined());
            println!("score: {}", score_sequence(&m, &r.order)?);
            if !r.tie_groups.is_empty() {
                println!("random tie-breaks: {} group(s)", r.tie_groups.len());
            }
        }
        Command::Ga { preset, case, seed, generations, pmx, convergence } => {
            let case = load_case(&case)?;
            let m = build_adjacency(&case);
            let mut cfg = preset.config(seed);
            if let Some(g) = generations {
                cfg.generations = g;
            }
            if pmx {
                cfg.crossover = CrossoverKind::Pmx;
            }
            let out = run_ga(&m, &cfg)?;
            println!("order: {}", out.best.sequence.joined());
            println!("score: {}", out.best.score);
            println!("unique solutions: {}", out.unique_count);
            if let Some(path) = convergence {
                let curve = dsm_bench::convergence_curve(out.convergence.iter().map(|p| (p.unique_count, p.best_score)));
                write_atomic(&path, dsm_bench::convergence::curve_csv(&curve).as_bytes())?;
            }
        }
        Command::Llm { knowledge, trials, case, seed, stub_script, no_anonymize, trace, audit_dir } => {
            let original = load_case(&case)?;
            let (case, mapping) = if no_anonymize {
                (original.clone(), None)
            } else {
                let (c, m) = anonymize_ids(&original, seed);
                (c, Some(m))
            };
            let factory = provider_factory(stub_script.as_deref())?;
            let key = CellKey {
                case: "cli".into(),
                method: Method::Llm(match knowledge {
                    OnOff::On => KnowledgeMode::With,
                    OnOff::Off => KnowledgeMode::Without,
                }),
                run: 0,
                seed,
            };
            let client = factory(&key)?;
            let cfg = OptimizerConfig {
                termination: dsm_core::TerminationPolicy {
                    max_iterations: trials,
                    optimal_threshold: original.known_optimum().map(dsm_core::Score),
                },
                knowledge_mode: match key.method {
                    Method::Llm(k) => k,
                    _ => unreachable!(),
                },
                seed,
                audit_dir,
                ..Default::default()
            };
            let result = run_optimization(&case, &cfg, client.as_ref());
            let steps = match &result {
                Ok(o) => o.trace.clone(),
                Err(e) => e.partial_trace().to_vec(),
            };
            if let Some(path) = trace {
                write_atomic(&path, trace_to_jsonl(&steps).as_bytes())?;
            }
            let out = result?;
            let order = match &mapping {
                Some(m) => dsm_core::Sequence(m.inverse().apply(out.best.sequence.ids())),
                None => out.best.sequence.clone(),
            };
            println!("order: {}", order.joined());
            println!("score: {}", out.best.score);
            println!("iterations: {}", steps.len().saturating_sub(1));
        }
        Command::Oracle { case } => {
            let case = load_case(&case)?;
            let (score, seq) = brute_force_optimum(&build_adjacency(&case))?;
            println!("order: {}", seq.joined());
            println!("score: {score}");
        }
        Command::Metrics { case } => {
            let case = load_case(&case)?;
            println!("{}", serde_json::to_string_pretty(&network_metrics(&case))?);
        }
    }
    Ok(())
}
