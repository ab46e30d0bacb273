//! Extraction of `<order>` answers.

use dsm_core::evaluator::is_valid_sequence;
use dsm_core::{DsmCase, NodeId, Sequence, Validation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const OPEN: &str = "<order>";
const CLOSE: &str = "</order>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    MissingTags,
    NotPermutation,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseFailure {
    #[error("no <order>...</order> span in the response")]
    MissingTags,
    #[error("not a permutation of the nodes: {0}")]
    NotPermutation(Validation),
}

impl ParseFailure {
    pub fn kind(&self) -> FailureKind {
        match self {
            ParseFailure::MissingTags => FailureKind::MissingTags,
            ParseFailure::NotPermutation(_) => FailureKind::NotPermutation,
        }
    }
}

/// Text between the first `<order>` and the next `</order>`.
pub fn extract_order_span(raw: &str) -> Option<&str> {
    let start = raw.find(OPEN)? + OPEN.len();
    let len = raw[start..].find(CLOSE)?;
    Some(&raw[start..start + len])
}

/// Comma-separated tokens with whitespace and wrapping quotes trimmed.
/// Empty tokens (e.g. from a trailing comma) are dropped.
pub fn split_tokens(span: &str) -> Vec<String> {
    span.split(',')
        .map(|t| t.trim().trim_matches(|c| c == '\'' || c == '"').trim())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn parse_order_response(raw: &str, case: &DsmCase) -> Result<Sequence, ParseFailure> {
    let span = extract_order_span(raw).ok_or(ParseFailure::MissingTags)?;
    let tokens = split_tokens(span);
    let validation = is_valid_sequence(case, &tokens);
    if !validation.valid {
        return Err(ParseFailure::NotPermutation(validation));
    }
    let ids = tokens.into_iter().map(|t| NodeId::new(t).expect("validated against case ids")).collect();
    Ok(Sequence(ids))
}
