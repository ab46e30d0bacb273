//! Reordered-matrix snapshots for plotting.

use std::fmt::Write as _;

use dsm_core::evaluator::sequence_to_indices;
use dsm_core::{AdjacencyMatrix, EvalError, NodeId, Sequence};
use dsm_llm::TraceEntry;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("iteration {0} is not in the trace")]
    UnknownIteration(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("trace id {0:?} is not a valid node id")]
    BadId(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub label: String,
    pub order: Sequence,
    pub feedback: usize,
    /// Row-major grid in the new order: 0 empty, 1 dependency below the
    /// diagonal, 2 feedback mark above it.
    pub grid: Vec<Vec<u8>>,
}

impl Snapshot {
    pub fn build(matrix: &AdjacencyMatrix, label: impl Into<String>, order: Sequence) -> Result<Self, EvalError> {
        let perm = sequence_to_indices(matrix, &order)?;
        let n = perm.len();
        let mut grid = vec![vec![0u8; n]; n];
        let mut feedback = 0;
        for (r, &i) in perm.iter().enumerate() {
            for (c, &j) in perm.iter().enumerate() {
                if matrix.get(i, j) {
                    grid[r][c] = if c > r { 2 } else { 1 };
                    feedback += usize::from(c > r);
                }
            }
        }
        Ok(Snapshot { label: label.into(), order, feedback, grid })
    }

    pub fn annotation(&self) -> String {
        format!("{} feedback={}", self.label, self.feedback)
    }

    pub fn to_csv(&self) -> String {
        let ids: Vec<&str> = self.order.ids().iter().map(NodeId::as_str).collect();
        let mut out = format!("# {}\n,{}\n", self.annotation(), ids.join(","));
        for (id, row) in ids.iter().zip(&self.grid) {
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            let _ = writeln!(out, "{id},{}", cells.join(","));
        }
        out
    }

    pub fn to_svg(&self) -> String {
        const CELL: usize = 16;
        const MARGIN: usize = 70;
        let n = self.grid.len();
        let side = MARGIN + n * CELL + 10;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side}\" height=\"{}\" font-family=\"monospace\" font-size=\"10\">\n",
            side + 20
        );
        let _ = writeln!(out, "<text x=\"4\" y=\"14\" font-size=\"12\">{}</text>", escape(&self.annotation()));
        let top = MARGIN - 30 + 20;
        for (k, id) in self.order.ids().iter().enumerate() {
            let pos = MARGIN + k * CELL + CELL / 2;
            let _ = writeln!(out, "<text x=\"4\" y=\"{}\">{}</text>", top + k * CELL + CELL - 4, escape(id.as_str()));
            let _ = writeln!(
                out,
                "<text x=\"{pos}\" y=\"{}\" transform=\"rotate(-90 {pos} {})\">{}</text>",
                top - 4,
                top - 4,
                escape(id.as_str())
            );
        }
        for (r, row) in self.grid.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let fill = match (v, r == c) {
                    (_, true) => "#bbbbbb",
                    (0, _) => "#ffffff",
                    (1, _) => "#333333",
                    _ => "#d62728",
                };
                let _ = writeln!(
                    out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\" stroke=\"#dddddd\"/>",
                    MARGIN + c * CELL,
                    top + r * CELL
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Snapshots of the best sequence at each requested iteration of an
/// optimizer trace.
pub fn render_trajectory(
    matrix: &AdjacencyMatrix,
    trace: &[TraceEntry],
    iterations: &[usize],
) -> Result<Vec<Snapshot>, TrajectoryError> {
    iterations
        .iter()
        .map(|&it| {
            let entry = trace.iter().find(|e| e.iteration == it).ok_or(TrajectoryError::UnknownIteration(it))?;
            let ids = entry
                .best_sequence
                .iter()
                .map(|s| NodeId::new(s.clone()).map_err(|_| TrajectoryError::BadId(s.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Snapshot::build(matrix, format!("iteration {it}"), Sequence(ids))?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use dsm_core::{build_adjacency, score_sequence, DsmCase};

    fn seq(ids: &[&str]) -> Sequence {
        Sequence(ids.iter().map(|s| NodeId::new(*s).unwrap()).collect())
    }

    #[test]
    fn feedback_matches_evaluator() {
        let case = dsm_core::model::random_case(9, 0.35, 4);
        let m = build_adjacency(&case);
        let mut ids: Vec<NodeId> = case.node_ids().cloned().collect();
        ids.reverse();
        let order = Sequence(ids);
        let snap = Snapshot::build(&m, "t", order.clone()).unwrap();
        assert_eq!(snap.feedback, score_sequence(&m, &order).unwrap().0);
        let marks: usize = snap.grid.iter().flatten().filter(|&&v| v == 2).count();
        assert_eq!(marks, snap.feedback);
    }

    #[test]
    fn topological_order_has_no_marks() {
        let case = DsmCase::from_ids(&["a", "b", "c"], &[("b", "a"), ("c", "b"), ("c", "a")]).unwrap();
        let snap = Snapshot::build(&build_adjacency(&case), "final", seq(&["a", "b", "c"])).unwrap();
        assert_eq!(snap.feedback, 0);
        assert!(snap.to_csv().starts_with("# final feedback=0\n,a,b,c\n"));
        assert!(snap.to_svg().contains("final feedback=0"));
        assert!(!snap.to_svg().contains("#d62728"));
    }

    #[test]
    fn csv_grid_layout() {
        let case = DsmCase::from_ids(&["a", "b"], &[("b", "a")]).unwrap();
        let snap = Snapshot::build(&build_adjacency(&case), "x", seq(&["b", "a"])).unwrap();
        assert_eq!(snap.to_csv(), "# x feedback=1\n,b,a\nb,0,2\na,0,0\n");
    }
}
