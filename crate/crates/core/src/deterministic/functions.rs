//! Matrix functions behind the walk-based and spectral orderings.

use nalgebra::DMatrix;

use crate::error::BaselineError;
use crate::model::AdjacencyMatrix;

/// Attenuation factor for the resolvent ordering.
pub const DEFAULT_DELTA: f64 = 0.025;

const TERM_TOLERANCE: f64 = 1e-12;
const MAX_TERMS: usize = 200;
const POWER_TOLERANCE: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;
const MAX_CONDITION: f64 = 1e12;

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max)
}

/// `exp(A)` by scaling and squaring around a truncated Taylor series.
pub fn matrix_exponential(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = norm1(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a / 2f64.powi(squarings as i32);

    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=MAX_TERMS {
        term = &term * &scaled / k as f64;
        sum += &term;
        if norm1(&term) <= TERM_TOLERANCE * norm1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Largest eigenvalue modulus. Falls back to the Perron root when the Schur
/// iteration stalls (it is unbounded in nalgebra's default constructor).
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if let Some(schur) = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER) {
        return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    log::warn!("Schur iteration did not converge; using the power-iteration estimate");
    let v = nalgebra::DVector::from_vec(perron_vector(a).vector);
    let denom = v.abs().sum();
    if denom == 0.0 {
        0.0
    } else {
        (a * &v).abs().sum() / denom
    }
}

/// `(I − δA)⁻¹` by LU solve, refusing divergent or ill-conditioned systems.
pub fn resolvent(a: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>, BaselineError> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::identity(0, 0));
    }
    let rho = spectral_radius(a);
    if delta * rho >= 1.0 - 1e-12 {
        return Err(BaselineError::Divergent { product: delta * rho });
    }
    let system = DMatrix::<f64>::identity(n, n) - a * delta;
    let condition = match nalgebra::SVD::try_new(system.clone(), false, false, f64::EPSILON, SCHUR_MAX_ITER) {
        Some(svd) if svd.singular_values.min() > 0.0 => svd.singular_values.max() / svd.singular_values.min(),
        _ => f64::INFINITY,
    };
    if condition > MAX_CONDITION {
        return Err(BaselineError::IllConditioned { delta, condition });
    }
    system
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or(BaselineError::IllConditioned { delta, condition: f64::INFINITY })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerronResult {
    /// Non-negative, unit 1-norm (all zeros when the spectral radius is 0).
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub shifted: bool,
    pub warnings: Vec<String>,
}

fn power_iterate(m: &DMatrix<f64>) -> (Vec<f64>, usize, bool, bool) {
    let n = m.nrows();
    let mut x = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    for it in 1..=POWER_MAX_ITER {
        let y = m * &x;
        let norm = y.abs().sum();
        if norm == 0.0 {
            return (vec![0.0; n], it, false, true);
        }
        let y = y / norm;
        let change = (&y - &x).abs().sum();
        x = y;
        if change < POWER_TOLERANCE {
            return (x.iter().copied().collect(), it, true, false);
        }
    }
    (x.iter().copied().collect(), POWER_MAX_ITER, false, false)
}

/// Dominant eigenvector of a non-negative matrix by power iteration.
///
/// Periodic structure (e.g. bipartite graphs) makes plain iteration
/// oscillate; the iteration is then repeated on `A + I`, which has the same
/// eigenvectors and a strictly dominant Perron root.
pub fn perron_vector(a: &DMatrix<f64>) -> PerronResult {
    let n = a.nrows();
    let (vector, iterations, converged, vanished) = power_iterate(a);
    if vanished {
        return PerronResult {
            vector,
            iterations,
            converged: false,
            shifted: false,
            warnings: vec!["spectral radius is zero (nilpotent matrix); all nodes tie".into()],
        };
    }
    if converged {
        return PerronResult { vector, iterations, converged, shifted: false, warnings: Vec::new() };
    }
    let shifted = a + DMatrix::<f64>::identity(n, n);
    let (vector, more, converged, _) = power_iterate(&shifted);
    let mut warnings = vec!["power iteration oscillated; retried on A + I".to_string()];
    if !converged {
        warnings.push(format!("shifted power iteration did not converge in {POWER_MAX_ITER} steps"));
    }
    PerronResult { vector, iterations: iterations + more, converged, shifted: true, warnings }
}

/// Reflexive-transitive reachability: `f[i][j]` iff a directed path of
/// length ≥ 0 leads from `j` to `i` (equivalently `binarize(Σ_{k=0}^{n} A^k)`).
pub fn reachability_closure(matrix: &AdjacencyMatrix) -> Vec<Vec<bool>> {
    let n = matrix.n();
    let mut f: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || matrix.get(i, j)).collect()).collect();
    for k in 0..n {
        let row_k = f[k].clone();
        for row in f.iter_mut() {
            if row[k] {
                for (cell, &via) in row.iter_mut().zip(&row_k) {
                    *cell |= via;
                }
            }
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_of_nilpotent_block() {
        // [[0,1],[0,0]] → exp = [[1,1],[0,1]]
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matrix_exponential(&a);
        assert!((e - DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).abs().max() < 1e-14);
    }

    #[test]
    fn exponential_of_scalar_multiple() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -1.0]);
        let e = matrix_exponential(&a);
        assert!((e[(0, 0)] - 3f64.exp()).abs() < 1e-12 * 3f64.exp());
        assert!((e[(1, 1)] - (-1f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn resolvent_rejects_divergent_delta() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(resolvent(&a, 1.0), Err(BaselineError::Divergent { .. })));
        assert!(resolvent(&a, 0.5).is_ok());
    }

    #[test]
    fn spectral_radius_of_cycles_is_one() {
        for n in 2..9 {
            let mut a = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                a[((i + 1) % n, i)] = 1.0;
            }
            assert!((spectral_radius(&a) - 1.0).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn resolvent_two_cycle_closed_form() {
        // (I - dA)^-1 for A = [[0,1],[1,0]] is [[1,d],[d,1]] / (1 - d^2)
        let d = 0.025;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let f = resolvent(&a, d).unwrap();
        let s = 1.0 / (1.0 - d * d);
        assert!((f[(0, 0)] - s).abs() < 1e-15);
        assert!((f[(0, 1)] - d * s).abs() < 1e-15);
    }

    #[test]
    fn perron_of_irreducible_cycle_is_uniform() {
        // directed 3-cycle is periodic; the shifted iteration must converge
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let r = perron_vector(&a);
        assert!(r.vector.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-9));
    }
}
