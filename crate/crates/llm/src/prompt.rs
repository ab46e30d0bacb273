//! Prompt rendering for the iterative optimizer.
//!
//! Lists are rendered the way Python prints them (`str(list_of_dicts)`), so
//! ids and names appear in single-quoted form on one line.

use std::fmt::Write as _;

use dsm_core::{DsmCase, Edge, Node, NodeId, SolutionRecord};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnowledgeMode {
    #[default]
    With,
    Without,
}

impl KnowledgeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            KnowledgeMode::With => "with-knowledge",
            KnowledgeMode::Without => "without-knowledge",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoricalSolution {
    /// Comma-joined ids, e.g. `"a, b, c"`.
    pub solution: String,
    pub score: f64,
}

impl From<&SolutionRecord> for HistoricalSolution {
    fn from(r: &SolutionRecord) -> Self {
        HistoricalSolution { solution: r.sequence.joined(), score: r.score.0 as f64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub network_description: String,
    pub nodes_with_descriptions: Vec<Node>,
    pub node_ids: Vec<NodeId>,
    pub edge_list: Vec<Edge>,
    /// Worst first.
    pub historical: Vec<HistoricalSolution>,
    pub knowledge_mode: KnowledgeMode,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("no historical solutions to show")]
    NoHistory,
    #[error("knowledge mode needs {0}")]
    MissingKnowledge(&'static str),
}

impl PromptContext {
    /// Context for `case` with edges in the given order.
    pub fn new(case: &DsmCase, edge_list: Vec<Edge>, historical: &[SolutionRecord], mode: KnowledgeMode) -> Self {
        PromptContext {
            network_description: case.description().to_string(),
            nodes_with_descriptions: case.nodes().to_vec(),
            node_ids: case.node_ids().cloned().collect(),
            edge_list,
            historical: historical.iter().map(HistoricalSolution::from).collect(),
            knowledge_mode: mode,
        }
    }
}

/// The case's edges in a seeded random order.
pub fn shuffled_edges(case: &DsmCase, seed: u64) -> Vec<Edge> {
    let mut edges = case.edges().to_vec();
    edges.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    edges
}

/// Python `repr()` of a `str`.
pub fn py_str(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// Python `repr()` of a float holding an integral or fractional score.
pub fn py_float(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e16 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

fn py_list<T>(items: &[T], render: impl Fn(&T) -> String) -> String {
    let parts: Vec<String> = items.iter().map(render).collect();
    format!("[{}]", parts.join(", "))
}

pub fn render_nodes_with_descriptions(nodes: &[Node]) -> String {
    py_list(nodes, |n| format!("{{'id': {}, 'name': {}}}", py_str(n.id.as_str()), py_str(&n.name)))
}

pub fn render_node_list(ids: &[NodeId]) -> String {
    py_list(ids, |id| py_str(id.as_str()))
}

pub fn render_edge_list(edges: &[Edge]) -> String {
    py_list(edges, |e| {
        format!("{{'dependent': {}, 'predecessor': {}}}", py_str(e.dependent.as_str()), py_str(e.predecessor.as_str()))
    })
}

pub fn render_historical(history: &[HistoricalSolution]) -> String {
    py_list(history, |h| format!("{{'solution': {}, 'score': {}}}", py_str(&h.solution), py_float(h.score)))
}

const PREAMBLE: &str = "You are an expert in the domain of combinational optimization.\n\n\
Please assist me to find an optimal sequential order that minimizes feedback cycles in the dependency network \
described below. Your task is to propose a new order that differs from previous attempts and has fewer feedback \
cycles than any listed.\n\n";

const HISTORY_LEAD: &str =
    "Below are some previous sequential orders arranged in descending order of feedback cycles (lower is better): ";

const REQUIREMENTS: &str = "Please suggest a new order that:\n\
- Is different from all prior orders.\n\
- Has fewer feedback cycles than any previous order.\n\
- Covers all nodes exactly once.\n\
- Starts with <order> and ends with </order>.";

const KNOWLEDGE_HINT: &str = "\n- You can use the descriptions of nodes and networks to support your suggestion.";

const CLOSING: &str = "\n\nOutput Format:\n<order> ...... </order>\n\nPlease provide only the order and nothing else.";

pub fn build_prompt(ctx: &PromptContext) -> Result<String, PromptError> {
    if ctx.historical.is_empty() {
        return Err(PromptError::NoHistory);
    }
    let mut out = String::from(PREAMBLE);
    match ctx.knowledge_mode {
        KnowledgeMode::With => {
            let _ = write!(
                out,
                "<Description of the Entire Network> {} </Description of the Entire Network>\n\
                 <Nodes with Descriptions> {} </Nodes with Descriptions>\n",
                ctx.network_description,
                render_nodes_with_descriptions(&ctx.nodes_with_descriptions)
            );
        }
        KnowledgeMode::Without => {
            let _ = writeln!(out, "<Nodes> {} </Nodes>", render_node_list(&ctx.node_ids));
        }
    }
    let _ = write!(out, "<Edges> {} </Edges>\n\n", render_edge_list(&ctx.edge_list));
    out.push_str(HISTORY_LEAD);
    out.push_str(&render_historical(&ctx.historical));
    out.push_str("\n\n");
    out.push_str(REQUIREMENTS);
    if ctx.knowledge_mode == KnowledgeMode::With {
        out.push_str(KNOWLEDGE_HINT);
    }
    out.push_str(CLOSING);
    Ok(out)
}

/// Appended to the prompt when the previous answer failed the checker.
pub fn correction_note(diagnostic: &str) -> String {
    format!(
        "\n\nYour previous answer was rejected ({diagnostic}). Return every node id exactly once, \
         separated by commas, between <order> and </order>."
    )
}
