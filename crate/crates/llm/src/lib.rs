//! LLM-driven sequencing: provider clients, prompt rendering, answer
//! parsing, and the iterative optimization loop.

pub mod client;
pub mod openai;
pub mod optimizer;
pub mod parse;
pub mod prompt;

pub use client::{scripted_stub, ChatMessage, ChatProvider, ChatRequest, ClientError, Completion, ScriptedProvider, Usage};
pub use openai::{OpenAiCompatibleProvider, ProviderConfig};
pub use optimizer::{
    best_within_budget, run_optimization, trace_to_jsonl, OptimizationOutcome, OptimizeError, OptimizerConfig,
    TraceEntry,
};
pub use parse::{parse_order_response, FailureKind, ParseFailure};
pub use prompt::{build_prompt, KnowledgeMode, PromptContext};
