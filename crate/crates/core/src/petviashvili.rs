//! Petviashvili iteration for the solitary-wave profile equations.
//!
//! Both equations have the shape `L z = N(z)` with `L` a positive Fourier
//! multiplier and `N` homogeneous of degree `2 sigma + 1`. One step reads
//!
//! ```text
//! m   = <L z, z> / <N(z), z>
//! z'  = m^alpha L^{-1} N(z)
//! ```
//!
//! with the Euclidean inner product of the grid samples (real and imaginary
//! parts both counted, which is the `(v, w)` pairing for `u = v + i w`).

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::accel::{self, CycleRecord};
use crate::params::{CheckedParams, LinearPhaseParams, ParamError, ProblemParams};
use crate::spectral::{split_pair_spectra, ComplexField, Grid, Hermitian2, MultiplierOp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("seed has <N(z), z> = 0; the stabilizing factor is undefined")]
    DegenerateSeed,
    #[error("stabilizing factor m = {m} is not positive at iteration {iteration}")]
    NonPositiveFactor { iteration: usize, m: f64 },
    #[error("iteration {iteration} produced a non-finite value (residual {residual})")]
    NonFinite { iteration: usize, residual: f64 },
    #[error("linear operator is not positive on mode {mode} (symbol {value})")]
    NotPositive { mode: i64, value: f64 },
    #[error("seed has {got} samples, grid has {expected}")]
    SeedLength { expected: usize, got: usize },
    #[error("invalid solver config: {0}")]
    Config(String),
}

/// Phase function of the seed `sech(x) (cos theta, sin theta)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    /// `theta = 0`.
    Zero,
    /// `theta = A x`.
    Linear(f64),
    /// `theta = x^2`.
    Quadratic,
    /// `theta` given at the grid points.
    Samples(Vec<f64>),
}

impl Phase {
    fn at(&self, j: usize, x: f64) -> f64 {
        match self {
            Phase::Zero => 0.0,
            Phase::Linear(a) => a * x,
            Phase::Quadratic => x * x,
            Phase::Samples(v) => v[j],
        }
    }
}

/// `v0 = sech(x) cos theta(x)`, `w0 = sech(x) sin theta(x)`, returned as
/// `u0 = v0 + i w0`.
pub fn initial_iterate(grid: &Arc<Grid>, theta: &Phase) -> Result<ComplexField, SolveError> {
    if let Phase::Samples(v) = theta {
        if v.len() != grid.len() {
            return Err(SolveError::SeedLength {
                expected: grid.len(),
                got: v.len(),
            });
        }
    }
    let samples = (0..grid.len())
        .map(|j| {
            let x = grid.point(j);
            Complex64::from_polar(1.0 / x.cosh(), theta.at(j, x))
        })
        .collect();
    Ok(ComplexField::new(grid.clone(), samples).expect("length checked"))
}

/// Seed for the scalar profile: `sech(x)`.
pub fn scalar_seed(grid: &Arc<Grid>) -> ComplexField {
    ComplexField::from_fn(grid.clone(), |x| Complex64::new(1.0 / x.cosh(), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Exponent of the stabilizing factor.
    pub alpha: f64,
    /// Tolerance on the Euclidean norm of the residual samples.
    pub tol: f64,
    pub max_iter: usize,
    /// Extrapolation width `kappa + 1`; 1 turns extrapolation off.
    pub mw: usize,
}

impl SolverConfig {
    /// `alpha = (2 sigma + 1) / (2 sigma)`, tolerance `1e-10`, 500 iterations,
    /// no extrapolation.
    pub fn for_sigma(sigma: f64) -> Self {
        Self {
            alpha: optimal_alpha(sigma),
            tol: 1e-10,
            max_iter: 500,
            mw: 1,
        }
    }

    pub fn with_mw(mut self, mw: usize) -> Self {
        self.mw = mw;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// `1 < alpha < (2 sigma + 2) / (2 sigma)`, `tol > 0`, `max_iter, mw >= 1`.
    pub fn validate(&self, sigma: f64) -> Result<(), SolveError> {
        let upper = (2.0 * sigma + 2.0) / (2.0 * sigma);
        if !(self.alpha > 1.0 && self.alpha < upper) {
            return Err(SolveError::Config(format!(
                "alpha = {} must lie in (1, {upper})",
                self.alpha
            )));
        }
        if !(self.tol > 0.0) {
            return Err(SolveError::Config(format!("tol = {} must be > 0", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(SolveError::Config("max_iter must be >= 1".into()));
        }
        if self.mw == 0 {
            return Err(SolveError::Config("mw must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn optimal_alpha(sigma: f64) -> f64 {
    (2.0 * sigma + 1.0) / (2.0 * sigma)
}

/// Result of a profile solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Profile translated so its modulus peak sits on `x = 0`.
    pub profile: ComplexField,
    /// Residual norm of every evaluated iterate, seed first.
    pub residual_history: Vec<f64>,
    /// Stabilizing factor of every evaluated iterate.
    pub m_history: Vec<f64>,
    /// Number of applications of the base map.
    pub iterations: usize,
    pub converged: bool,
    /// Extrapolation cycles, empty when `mw = 1`.
    pub cycles: Vec<CycleRecord>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::INFINITY)
    }

    pub fn final_m(&self) -> f64 {
        *self.m_history.last().unwrap_or(&f64::NAN)
    }

    pub fn amplitude(&self) -> f64 {
        self.profile.max_modulus()
    }

    /// Iterations until the residual first dropped to `tol` or below.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.residual_history.iter().position(|&r| r <= tol)
    }

    /// Number of extrapolation cycles that fell back to the plain iterate.
    pub fn fallbacks(&self) -> usize {
        self.cycles.iter().filter(|c| c.fallback).count()
    }
}

/// Output of one base step.
#[derive(Debug, Clone)]
pub struct Step {
    pub next: Vec<Complex64>,
    /// `||L z - N(z)||_2` at the input iterate.
    pub residual: f64,
    /// Stabilizing factor at the input iterate.
    pub m: f64,
}

/// A profile equation `L z = N(z)` on a periodic grid.
pub trait ProfileMap {
    fn grid(&self) -> &Arc<Grid>;

    fn sigma(&self) -> f64;

    /// `L z`.
    fn apply_linear(&self, z: &[Complex64]) -> Vec<Complex64>;

    /// `L^{-1} f`.
    fn solve_linear(&self, f: &[Complex64]) -> Vec<Complex64>;

    /// `N(z) = |z|^{2 sigma} z`.
    fn nonlinear(&self, z: &[Complex64]) -> Vec<Complex64> {
        let sigma = self.sigma();
        z.iter().map(|c| c * c.norm_sqr().powf(sigma)).collect()
    }

    fn residual(&self, z: &[Complex64]) -> f64 {
        let lz = self.apply_linear(z);
        let nz = self.nonlinear(z);
        lz.iter()
            .zip(&nz)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// One Petviashvili step with exponent `alpha` (`alpha = 0` is the plain
    /// fixed-point map `z' = L^{-1} N(z)`).
    fn step(&self, z: &[Complex64], alpha: f64) -> Result<Step, SolveError> {
        let lz = self.apply_linear(z);
        let nz = self.nonlinear(z);
        let num: f64 = lz.iter().zip(z).map(|(a, b)| (a * b.conj()).re).sum();
        let den: f64 = nz.iter().zip(z).map(|(a, b)| (a * b.conj()).re).sum();
        if den == 0.0 {
            return Err(SolveError::DegenerateSeed);
        }
        let m = num / den;
        let residual = lz
            .iter()
            .zip(&nz)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let factor = if alpha == 0.0 { 1.0 } else { m.powf(alpha) };
        let mut next = self.solve_linear(&nz);
        for c in next.iter_mut() {
            *c *= factor;
        }
        Ok(Step { next, residual, m })
    }
}

/// `(M + a) rho = |rho|^{2 sigma} rho` for the linear-phase subfamily.
#[derive(Debug, Clone)]
pub struct ScalarProblem {
    grid: Arc<Grid>,
    sigma: f64,
    symbol: Vec<f64>,
    inverse: Vec<f64>,
    params: LinearPhaseParams,
}

impl ScalarProblem {
    pub fn new(params: LinearPhaseParams, grid: Arc<Grid>) -> Result<Self, SolveError> {
        let op = MultiplierOp::shifted_m_symbol(&params);
        let symbol = op.sampled(&grid).expect("scalar symbol");
        let inverse = invert_symbol(&grid, &symbol)?;
        Ok(Self {
            grid,
            sigma: params.base.sigma,
            symbol,
            inverse,
            params,
        })
    }

    pub fn params(&self) -> &LinearPhaseParams {
        &self.params
    }
}

fn invert_symbol(grid: &Grid, symbol: &[f64]) -> Result<Vec<f64>, SolveError> {
    symbol
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            if v > 0.0 && v.is_finite() {
                Ok(1.0 / v)
            } else {
                Err(SolveError::NotPositive {
                    mode: grid.mode(k),
                    value: v,
                })
            }
        })
        .collect()
}

fn diagonal(grid: &Grid, symbol: &[f64], z: &[Complex64]) -> Vec<Complex64> {
    let mut buf = z.to_vec();
    grid.apply_sampled(symbol, &mut buf);
    buf
}

impl ProfileMap for ScalarProblem {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn apply_linear(&self, z: &[Complex64]) -> Vec<Complex64> {
        diagonal(&self.grid, &self.symbol, z)
    }

    fn solve_linear(&self, f: &[Complex64]) -> Vec<Complex64> {
        diagonal(&self.grid, &self.inverse, f)
    }
}

/// `Q (v, w)^T = (v^2 + w^2)^sigma (v, w)^T`, carried as `u = v + i w`;
/// the 2x2 symbol of `Q` is applied mode by mode to the spectra of `v` and `w`.
#[derive(Debug, Clone)]
pub struct CoupledProblem {
    grid: Arc<Grid>,
    sigma: f64,
    symbol: Vec<Hermitian2>,
    params: ProblemParams,
}

impl CoupledProblem {
    pub fn new(params: ProblemParams, grid: Arc<Grid>) -> Result<Self, SolveError> {
        let symbol = MultiplierOp::q_symbol(&params)
            .sampled_matrix(&grid)
            .expect("matrix symbol");
        for (k, m) in symbol.iter().enumerate() {
            let (lo, _) = m.eigenvalues();
            if !(lo > 0.0) {
                return Err(SolveError::NotPositive {
                    mode: grid.mode(k),
                    value: lo,
                });
            }
        }
        Ok(Self {
            grid,
            sigma: params.sigma,
            symbol,
            params,
        })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    fn per_mode(
        &self,
        z: &[Complex64],
        f: impl Fn(&Hermitian2, Complex64, Complex64) -> (Complex64, Complex64),
    ) -> Vec<Complex64> {
        let u = ComplexField::new(self.grid.clone(), z.to_vec()).expect("grid length");
        let (mut vh, mut wh) = split_pair_spectra(&self.grid, &u);
        let i = Complex64::new(0.0, 1.0);
        let mut out = vec![Complex64::new(0.0, 0.0); z.len()];
        for k in 0..z.len() {
            let (a, b) = f(&self.symbol[k], vh[k], wh[k]);
            vh[k] = a;
            wh[k] = b;
            out[k] = a + i * b;
        }
        // the spectrum of v + i w is v_hat + i w_hat
        self.grid.inverse(&mut out);
        out
    }
}

impl ProfileMap for CoupledProblem {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn apply_linear(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.per_mode(z, |m, a, b| m.apply(a, b))
    }

    fn solve_linear(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.per_mode(f, |m, a, b| m.solve(a, b).expect("positive definite symbol"))
    }
}

fn check_seed(grid: &Grid, seed: &ComplexField) -> Result<(), SolveError> {
    if seed.samples().len() != grid.len() || !seed.grid().same_as(grid) {
        return Err(SolveError::SeedLength {
            expected: grid.len(),
            got: seed.samples().len(),
        });
    }
    Ok(())
}

/// Solves `(M + a) rho = |rho|^{2 sigma} rho` from the `sech` seed.
pub fn solve_scalar(
    params: &LinearPhaseParams,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    solve_scalar_from(params, grid, cfg, &scalar_seed(grid))
}

pub fn solve_scalar_from(
    params: &LinearPhaseParams,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    seed: &ComplexField,
) -> Result<SolveReport, SolveError> {
    cfg.validate(params.base.sigma)?;
    check_seed(grid, seed)?;
    let problem = ScalarProblem::new(*params, grid.clone())?;
    accel::accelerated_solve(&problem, seed.samples().to_vec(), cfg)
}

/// Solves the coupled system for `(v, w)` from the given seed.
pub fn solve_coupled(
    params: &ProblemParams,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    seed: &ComplexField,
) -> Result<SolveReport, SolveError> {
    cfg.validate(params.sigma)?;
    check_seed(grid, seed)?;
    let problem = CoupledProblem::new(*params, grid.clone())?;
    accel::accelerated_solve(&problem, seed.samples().to_vec(), cfg)
}

/// Solves whichever equation `checked.params.kind` selects. Linear-phase runs
/// use the `sech` seed; coupled runs use `theta`.
pub fn solve(
    checked: &CheckedParams,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    theta: &Phase,
) -> Result<SolveReport, SolveError> {
    use crate::params::ProfileKind;
    match checked.params.kind {
        ProfileKind::LinearPhase => solve_scalar(&checked.linear_phase(), grid, cfg),
        ProfileKind::Coupled => {
            let seed = initial_iterate(grid, theta)?;
            solve_coupled(&checked.params, grid, cfg, &seed)
        }
    }
}

/// `rho(x) e^{iAx}` on the grid.
pub fn modulate(rho: &ComplexField, phase_slope: f64) -> ComplexField {
    let grid = rho.grid().clone();
    let samples = rho
        .samples()
        .iter()
        .enumerate()
        .map(|(j, z)| z * Complex64::from_polar(1.0, phase_slope * grid.point(j)))
        .collect();
    ComplexField::new(grid, samples).expect("same grid")
}

/// Power-iteration estimate of the dominant multiplier of the linearized
/// iteration map at a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeEstimate {
    /// `||J d|| / ||d||` for the converged direction.
    pub magnitude: f64,
    /// `<J d, d> / <d, d>`.
    pub rayleigh: f64,
    pub iterations: usize,
}

/// Estimates the dominant eigenvalue of the Jacobian of the step map with
/// exponent `alpha` at `profile`, by power iteration on central differences.
///
/// Phase rotation and translation map fixed points to fixed points and carry
/// multiplier one; their directions `i z` and `z_x` are projected out.
pub fn fixed_point_spectrum_probe<P: ProfileMap>(
    problem: &P,
    profile: &ComplexField,
    alpha: f64,
    iterations: usize,
) -> Result<ProbeEstimate, SolveError> {
    let z = profile.samples().to_vec();
    let grid = problem.grid().clone();
    let i = Complex64::new(0.0, 1.0);
    let tangent_phase: Vec<Complex64> = z.iter().map(|c| i * c).collect();
    let dz = MultiplierOp::derivative()
        .apply(profile)
        .expect("same grid")
        .into_samples();
    let neutral = orthonormalize(&[tangent_phase, dz]);

    // deterministic start: smooth even bump plus an odd component
    let mut d: Vec<Complex64> = (0..grid.len())
        .map(|j| {
            let x = grid.point(j);
            Complex64::new((-(x * x) / 8.0).exp() * (1.0 + 0.3 * x), 0.2 * (-(x * x) / 4.0).exp())
        })
        .collect();
    project_out(&mut d, &neutral);
    normalize(&mut d);

    let znorm = norm(&z);
    let eps = 1e-6 * znorm.max(1e-300);
    let mut estimate = ProbeEstimate {
        magnitude: 0.0,
        rayleigh: 0.0,
        iterations: 0,
    };
    for it in 1..=iterations {
        let plus: Vec<Complex64> = z.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<Complex64> = z.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
        let tp = problem.step(&plus, alpha)?.next;
        let tm = problem.step(&minus, alpha)?.next;
        let mut jd: Vec<Complex64> = tp
            .iter()
            .zip(&tm)
            .map(|(a, b)| (a - b) / (2.0 * eps))
            .collect();
        project_out(&mut jd, &neutral);
        let mag = norm(&jd);
        let ray: f64 = jd.iter().zip(&d).map(|(a, b)| (a * b.conj()).re).sum();
        let prev = estimate.magnitude;
        estimate = ProbeEstimate {
            magnitude: mag,
            rayleigh: ray,
            iterations: it,
        };
        if mag == 0.0 {
            break;
        }
        for (dst, src) in d.iter_mut().zip(&jd) {
            *dst = src / mag;
        }
        if it > 5 && (mag - prev).abs() <= 1e-8 * mag {
            break;
        }
    }
    Ok(estimate)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    if n > 0.0 {
        for c in v.iter_mut() {
            *c /= n;
        }
    }
}

fn real_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum()
}

fn orthonormalize(vs: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        project_out(&mut w, &basis);
        let n = norm(&w);
        if n > 1e-12 {
            for c in w.iter_mut() {
                *c /= n;
            }
            basis.push(w);
        }
    }
    basis
}

fn project_out(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for b in basis {
        let c = real_dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
}
