//! Minimal polynomial extrapolation (MPE) for vector fixed-point sequences,
//! used in restarted form around the Petviashvili map.
//!
//! Given iterates `z_0, ..., z_{k+1}` and differences `u_i = z_{i+1} - z_i`,
//! MPE solves `min || sum_{i<k} c_i u_i + u_k ||`, sets `c_k = 1` and returns
//! `sum_i gamma_i z_i` with `gamma_i = c_i / sum_j c_j`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::petviashvili::{ProfileMap, SolveError, SolveReport, SolverConfig};
use crate::spectral::ComplexField;

/// Gram matrices with a condition number above this use full pivoting.
const CONDITION_LIMIT: f64 = 1e12;
/// `|sum c_i|` below this fraction of `max |c_i|` is treated as zero.
const DEGENERATE_SUM: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtrapolationError {
    #[error("window holds {have} iterates, needs {need}")]
    NotFull { have: usize, need: usize },
    #[error("coefficient sum {sum:e} is numerically zero")]
    DegenerateSum { sum: f64 },
    #[error("least-squares system is singular")]
    Singular,
    #[error("iterate has length {got}, window expects {expected}")]
    Length { expected: usize, got: usize },
}

/// Storage for `kappa + 2` consecutive iterates.
#[derive(Debug, Clone)]
pub struct ExtrapolationWindow {
    kappa: usize,
    iterates: Vec<Vec<f64>>,
}

/// Coefficients of the last extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub vector: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Full pivoting was used for the least-squares system.
    pub pivoted: bool,
}

impl ExtrapolationWindow {
    pub fn new(kappa: usize) -> Self {
        Self {
            kappa,
            iterates: Vec::with_capacity(kappa + 2),
        }
    }

    /// Window for extrapolation width `mw = kappa + 1`.
    pub fn for_width(mw: usize) -> Self {
        Self::new(mw.saturating_sub(1))
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn capacity(&self) -> usize {
        self.kappa + 2
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.iterates.len() >= self.capacity()
    }

    pub fn clear(&mut self) {
        self.iterates.clear();
    }

    /// Appends an iterate; the oldest one is dropped when full.
    pub fn push(&mut self, z: Vec<f64>) -> Result<(), ExtrapolationError> {
        if let Some(first) = self.iterates.first() {
            if first.len() != z.len() {
                return Err(ExtrapolationError::Length {
                    expected: first.len(),
                    got: z.len(),
                });
            }
        }
        if self.is_full() {
            self.iterates.remove(0);
        }
        self.iterates.push(z);
        Ok(())
    }

    pub fn extrapolate(&self) -> Result<Extrapolation, ExtrapolationError> {
        mpe_extrapolate(&self.iterates[..], self.kappa)
    }
}

/// MPE of order `kappa` from the first `kappa + 2` entries of `iterates`.
pub fn mpe_extrapolate(
    iterates: &[Vec<f64>],
    kappa: usize,
) -> Result<Extrapolation, ExtrapolationError> {
    let need = kappa + 2;
    if iterates.len() < need {
        return Err(ExtrapolationError::NotFull {
            have: iterates.len(),
            need,
        });
    }
    let dim = iterates[0].len();
    let mut c = vec![0.0; kappa + 1];
    c[kappa] = 1.0;
    let mut pivoted = false;
    if kappa > 0 {
        let diffs: Vec<Vec<f64>> = (0..=kappa)
            .map(|i| {
                iterates[i + 1]
                    .iter()
                    .zip(&iterates[i])
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        let gram = DMatrix::from_fn(kappa, kappa, |i, j| dot(&diffs[i], &diffs[j]));
        let rhs = DVector::from_fn(kappa, |i, _| -dot(&diffs[i], &diffs[kappa]));
        let (sol, full) = solve_normal(gram, rhs)?;
        pivoted = full;
        c[..kappa].copy_from_slice(sol.as_slice());
    }
    let sum: f64 = c.iter().sum();
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !sum.is_finite() || sum.abs() <= DEGENERATE_SUM * scale {
        return Err(ExtrapolationError::DegenerateSum { sum });
    }
    let gamma: Vec<f64> = c.iter().map(|ci| ci / sum).collect();
    let mut vector = vec![0.0; dim];
    for (g, z) in gamma.iter().zip(iterates) {
        for (o, x) in vector.iter_mut().zip(z) {
            *o += g * x;
        }
    }
    Ok(Extrapolation {
        vector,
        gamma,
        pivoted,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn solve_normal(
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
) -> Result<(DVector<f64>, bool), ExtrapolationError> {
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if max == 0.0 {
        return Err(ExtrapolationError::Singular);
    }
    if min > 0.0 && max / min <= CONDITION_LIMIT {
        if let Some(chol) = gram.clone().cholesky() {
            return Ok((chol.solve(&rhs), false));
        }
    }
    let lu = gram.full_piv_lu();
    match lu.solve(&rhs) {
        Some(sol) if sol.iter().all(|v| v.is_finite()) => Ok((sol, true)),
        _ => Err(ExtrapolationError::Singular),
    }
}

/// Bookkeeping for one restarted extrapolation cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    /// Base-iteration count at which the cycle ended.
    pub end_iteration: usize,
    /// Extrapolation was skipped and the last plain iterate kept.
    pub fallback: bool,
    pub pivoted: bool,
}

pub(crate) fn stack(z: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * z.len());
    out.extend(z.iter().map(|c| c.re));
    out.extend(z.iter().map(|c| c.im));
    out
}

pub(crate) fn unstack(v: &[f64]) -> Vec<Complex64> {
    let n = v.len() / 2;
    (0..n).map(|j| Complex64::new(v[j], v[n + j])).collect()
}

/// Runs the base map with restarted MPE of width `cfg.mw`.
///
/// Each cycle applies the base map `mw` times from the restart vector,
/// extrapolates from the `mw + 1` stored iterates and restarts from the
/// result. With `mw = 1` this is the plain iteration. The residual of every
/// iterate, extrapolated ones included, is recorded and checked against
/// `cfg.tol`.
pub fn accelerated_solve<P: ProfileMap>(
    problem: &P,
    seed: Vec<Complex64>,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    let mut z = seed;
    let mut residual_history = Vec::new();
    let mut m_history = Vec::new();
    let mut cycles = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;
    let accelerate = cfg.mw > 1;
    let mut window = ExtrapolationWindow::for_width(cfg.mw);
    if accelerate {
        window.push(stack(&z)).expect("first iterate");
    }
    loop {
        let step = problem.step(&z, cfg.alpha)?;
        if !step.residual.is_finite() || !step.m.is_finite() {
            return Err(SolveError::NonFinite {
                iteration: iterations,
                residual: step.residual,
            });
        }
        if step.m <= 0.0 {
            return Err(SolveError::NonPositiveFactor {
                iteration: iterations,
                m: step.m,
            });
        }
        residual_history.push(step.residual);
        m_history.push(step.m);
        if step.residual <= cfg.tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;
        z = step.next;
        if accelerate {
            window.push(stack(&z)).expect("fixed length");
            if window.is_full() {
                let record = match window.extrapolate() {
                    Ok(ex) => {
                        z = unstack(&ex.vector);
                        CycleRecord {
                            end_iteration: iterations,
                            fallback: false,
                            pivoted: ex.pivoted,
                        }
                    }
                    Err(_) => CycleRecord {
                        end_iteration: iterations,
                        fallback: true,
                        pivoted: false,
                    },
                };
                cycles.push(record);
                window.clear();
                window.push(stack(&z)).expect("restart");
            }
        }
    }
    let grid = problem.grid().clone();
    let profile = ComplexField::new(grid, z)
        .expect("iterates keep the grid length")
        .centered();
    Ok(SolveReport {
        profile,
        residual_history,
        m_history,
        iterations,
        converged,
        cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Iterates of `z -> D z + b` with diagonal `D`.
    fn linear_sequence(diag: &[f64], b: &[f64], z0: &[f64], count: usize) -> Vec<Vec<f64>> {
        let mut out = vec![z0.to_vec()];
        for _ in 1..count {
            let last = out.last().unwrap();
            out.push(
                last.iter()
                    .zip(diag)
                    .zip(b)
                    .map(|((z, d), bb)| d * z + bb)
                    .collect(),
            );
        }
        out
    }

    #[test]
    fn kappa_zero_returns_first_iterate() {
        let its = vec![vec![1.0, 2.0], vec![3.0, 5.0]];
        let ex = mpe_extrapolate(&its, 0).unwrap();
        assert_eq!(ex.gamma, vec![1.0]);
        assert_eq!(ex.vector, vec![1.0, 2.0]);
    }

    #[test]
    fn needs_full_window() {
        let its = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            mpe_extrapolate(&its, 1),
            Err(ExtrapolationError::NotFull { have: 2, need: 3 })
        ));
    }

    #[test]
    fn exact_on_low_degree_linear_sequences() {
        // 5x5 diagonal map whose eigenvalues repeat, so the minimal polynomial
        // has degree kappa
        let b = [1.0, -2.0, 0.5, 3.0, -1.0];
        let z0 = [0.3, 0.1, -0.7, 2.0, 1.5];
        for (kappa, diag) in [
            (1, vec![0.5; 5]),
            (2, vec![0.5, -0.3, 0.5, -0.3, 0.5]),
            (3, vec![0.9, -0.3, 0.1, 0.9, -0.3]),
        ] {
            // brute-force fixed point (I - D)^{-1} b
            let fixed: Vec<f64> = diag.iter().zip(&b).map(|(d, bb)| bb / (1.0 - d)).collect();
            let its = linear_sequence(&diag, &b, &z0, kappa + 2);
            let ex = mpe_extrapolate(&its, kappa).unwrap();
            for (x, y) in ex.vector.iter().zip(&fixed) {
                assert!((x - y).abs() < 1e-10, "kappa={kappa}: {x} vs {y}");
            }
            let s: f64 = ex.gamma.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stalled_sequence_is_degenerate() {
        let its = vec![vec![1.0, 1.0]; 4];
        assert!(mpe_extrapolate(&its, 2).is_err());
    }

    #[test]
    fn window_rolls_and_checks_length() {
        let mut w = ExtrapolationWindow::for_width(2);
        assert_eq!(w.capacity(), 3);
        for i in 0..5 {
            w.push(vec![f64::from(i)]).unwrap();
        }
        assert_eq!(w.len(), 3);
        assert!(w.is_full());
        assert!(w.push(vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn stacking_round_trips() {
        let z = vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 3.0)];
        assert_eq!(unstack(&stack(&z)), z);
    }
}
