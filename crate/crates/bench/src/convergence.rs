//! Best-so-far curves on the unique-solutions axis.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub unique_count: usize,
    pub best_score: usize,
}

/// Collapse `(unique_count, best_so_far)` observations into a step curve.
///
/// Observations that do not advance the unique count (duplicates, invalid
/// answers) only tighten the current point. The result has strictly
/// increasing x and non-increasing y.
pub fn convergence_curve(observations: impl IntoIterator<Item = (usize, usize)>) -> Vec<CurvePoint> {
    let mut curve: Vec<CurvePoint> = Vec::new();
    for (x, y) in observations {
        match curve.last_mut() {
            Some(last) if x <= last.unique_count => last.best_score = last.best_score.min(y),
            Some(last) => {
                let best_score = y.min(last.best_score);
                curve.push(CurvePoint { unique_count: x, best_score });
            }
            None => curve.push(CurvePoint { unique_count: x, best_score: y }),
        }
    }
    curve
}

pub fn truncate(curve: &[CurvePoint], window: usize) -> Vec<CurvePoint> {
    curve.iter().copied().take_while(|p| p.unique_count <= window).collect()
}

/// Best-so-far at `x`: value of the last point with `unique_count <= x`.
pub fn value_at(curve: &[CurvePoint], x: usize) -> Option<usize> {
    let idx = curve.partition_point(|p| p.unique_count <= x);
    idx.checked_sub(1).map(|i| curve[i].best_score)
}

/// Per-x mean over runs, evaluated at every x present in any run.
/// A run that stopped early contributes its final value.
pub fn mean_curve(curves: &[Vec<CurvePoint>]) -> Vec<(usize, f64)> {
    let mut xs: Vec<usize> = curves.iter().flatten().map(|p| p.unique_count).collect();
    xs.sort_unstable();
    xs.dedup();
    xs.into_iter()
        .filter_map(|x| {
            let vals: Vec<usize> = curves.iter().filter_map(|c| value_at(c, x)).collect();
            (vals.len() == curves.len()).then(|| (x, vals.iter().sum::<usize>() as f64 / vals.len() as f64))
        })
        .collect()
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("unique_count,best_score\n");
    for p in curve {
        out.push_str(&format!("{},{}\n", p.unique_count, p.best_score));
    }
    out
}

pub fn mean_curve_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("unique_count,mean_best_score\n");
    for (x, y) in curve {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_do_not_advance() {
        let c = convergence_curve([(1, 9), (1, 9), (2, 7), (2, 7), (3, 8)]);
        assert_eq!(
            c,
            vec![
                CurvePoint { unique_count: 1, best_score: 9 },
                CurvePoint { unique_count: 2, best_score: 7 },
                CurvePoint { unique_count: 3, best_score: 7 },
            ]
        );
    }

    #[test]
    fn single_point() {
        assert_eq!(convergence_curve([(1, 4)]).len(), 1);
    }

    #[test]
    fn lookup_and_truncation() {
        let c = convergence_curve([(1, 9), (4, 5), (10, 2)]);
        assert_eq!(value_at(&c, 0), None);
        assert_eq!(value_at(&c, 3), Some(9));
        assert_eq!(value_at(&c, 4), Some(5));
        assert_eq!(value_at(&c, 99), Some(2));
        assert_eq!(truncate(&c, 9).len(), 2);
    }

    #[test]
    fn mean_curve_carries_short_runs() {
        let a = convergence_curve([(1, 4), (2, 2)]);
        let b = convergence_curve([(1, 6), (3, 0)]);
        assert_eq!(mean_curve(&[a, b]), vec![(1, 5.0), (2, 4.0), (3, 1.0)]);
    }
}
