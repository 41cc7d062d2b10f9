//! Post-processing of converged profiles.
//!
//! Complex linear-phase profiles satisfy `rho(-x) = conj(rho(x))`, so the
//! shape statistics here act on the modulus unless the profile is real.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::params::{ParamError, ProblemParams};
use crate::petviashvili::{self, Phase, ProfileMap, ScalarProblem, SolveError, SolverConfig};
use crate::spectral::{ComplexField, Grid, RealField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("window [{0}, {1}] must satisfy 0 < x_min < x_max <= 0.9 l")]
    BadWindow(f64, f64),
    #[error("window holds {0} samples, at least 16 are needed")]
    TooFewSamples(usize),
    #[error("profile vanishes at x = {0} inside the window")]
    Vanishes(f64),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation from the line.
    pub rms: f64,
}

/// Least-squares line `y = slope x + intercept`; `None` for fewer than two
/// points or constant `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = x[..n].iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x[..n]
        .iter()
        .zip(&y[..n])
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Some(LineFit {
        slope,
        intercept,
        rms: (ss / nf).sqrt(),
    })
}

/// Shape assumed for the tail in [`decay_slope_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// `|rho| = C |x|^slope`.
    PowerLaw,
    /// `|rho| = C |sum_k e^{-i A P k} |x + P k|^slope|`, the power law summed
    /// over the periodic images of a tail `e^{-iAx} |x|^slope` with period `P`.
    Periodized { phase_slope: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    /// RMS misfit in `log |rho|`.
    pub residual: f64,
    /// Slopes fitted on four consecutive sub-windows.
    pub sub_slopes: Vec<f64>,
    /// Sub-window slope spread below 0.3 and misfit below 0.25.
    pub model_ok: bool,
}

/// Sub-window slope spread allowed for an algebraic tail.
pub const SLOPE_SPREAD_LIMIT: f64 = 0.3;
/// Largest RMS misfit in `log |rho|` accepted as algebraic.
pub const MISFIT_LIMIT: f64 = 0.25;

/// `[0.15 l, 0.8 l]`.
pub fn default_window(grid: &Grid) -> (f64, f64) {
    let l = grid.half_length();
    (0.15 * l, 0.8 * l)
}

fn tail_samples(
    profile: &ComplexField,
    window: (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let grid = profile.grid();
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi <= 0.9 * grid.half_length()) {
        return Err(AnalysisError::BadWindow(lo, hi));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in grid.origin_index()..grid.len() {
        let x = grid.point(j);
        if x >= lo && x <= hi {
            let v = profile.samples()[j].norm();
            if !(v > 0.0) {
                return Err(AnalysisError::Vanishes(x));
            }
            xs.push(x);
            ys.push(v.ln());
        }
    }
    if xs.len() < 16 {
        return Err(AnalysisError::TooFewSamples(xs.len()));
    }
    Ok((xs, ys))
}

fn log_periodized(x: f64, p: f64, period: f64, phase: f64) -> f64 {
    let mut sum = Complex64::new(x.abs().powf(-p), 0.0);
    for k in 1..=IMAGES {
        let kf = k as f64;
        sum += Complex64::from_polar((x + period * kf).abs().powf(-p), -phase * kf);
        sum += Complex64::from_polar((x - period * kf).abs().powf(-p), phase * kf);
    }
    sum.norm().ln()
}

const IMAGES: usize = 200;

fn fit_model(xs: &[f64], ys: &[f64], model: TailModel, period: f64) -> LineFit {
    match model {
        TailModel::PowerLaw => {
            let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            fit_line(&lx, ys).expect("distinct abscissae")
        }
        TailModel::Periodized { phase_slope } => {
            let phase = phase_slope * period;
            // misfit after removing the best constant, minimized over the exponent
            let misfit = |p: f64| -> (f64, f64) {
                let diffs: Vec<f64> = xs
                    .iter()
                    .zip(ys)
                    .map(|(&x, &y)| y - log_periodized(x, p, period, phase))
                    .collect();
                let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
                let ss = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>();
                (ss, mean)
            };
            let (mut lo, mut hi) = (0.05f64, 8.0f64);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut a = hi - g * (hi - lo);
            let mut b = lo + g * (hi - lo);
            let (mut fa, mut fb) = (misfit(a).0, misfit(b).0);
            while hi - lo > 1e-10 {
                if fa < fb {
                    hi = b;
                    b = a;
                    fb = fa;
                    a = hi - g * (hi - lo);
                    fa = misfit(a).0;
                } else {
                    lo = a;
                    a = b;
                    fa = fb;
                    b = lo + g * (hi - lo);
                    fb = misfit(b).0;
                }
            }
            let p = 0.5 * (lo + hi);
            let (ss, mean) = misfit(p);
            LineFit {
                slope: -p,
                intercept: mean,
                rms: (ss / xs.len() as f64).sqrt(),
            }
        }
    }
}

/// Log-log slope of `|rho|` on `window` in the positive tail.
pub fn decay_slope(profile: &ComplexField, window: (f64, f64)) -> Result<DecayFit, AnalysisError> {
    decay_slope_with(profile, window, TailModel::PowerLaw)
}

pub fn decay_slope_with(
    profile: &ComplexField,
    window: (f64, f64),
    model: TailModel,
) -> Result<DecayFit, AnalysisError> {
    let (xs, ys) = tail_samples(profile, window)?;
    let period = 2.0 * profile.grid().half_length();
    let fit = fit_model(&xs, &ys, model, period);

    let (l0, l1) = (window.0.ln(), window.1.ln());
    let mut sub_slopes = Vec::new();
    for q in 0..4 {
        let a = (l0 + (l1 - l0) * q as f64 / 4.0).exp();
        let b = (l0 + (l1 - l0) * (q + 1) as f64 / 4.0).exp();
        let (sx, sy): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(&ys)
            .filter(|(x, _)| **x >= a && **x <= b)
            .map(|(x, y)| (*x, *y))
            .unzip();
        if sx.len() >= 4 {
            sub_slopes.push(fit_model(&sx, &sy, model, period).slope);
        }
    }
    let spread = sub_slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - sub_slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let model_ok = sub_slopes.len() == 4 && spread < SLOPE_SPREAD_LIMIT && fit.rms < MISFIT_LIMIT;
    Ok(DecayFit {
        window,
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.rms,
        sub_slopes,
        model_ok,
    })
}

/// `|| |rho|(x) - |rho|(-x) ||_2 / ||rho||_2`, reflecting about the grid
/// origin.
pub fn evenness_defect(profile: &ComplexField) -> f64 {
    let m = profile.modulus();
    let r = m.reflected();
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let diff: f64 = m
        .samples()
        .iter()
        .zip(r.samples())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    diff.sqrt() / norm
}

/// Samples of `(rho, rho')` with a count of tail oscillations.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlane {
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub drho: Vec<f64>,
    /// The profile was real, so `rho` is the profile itself and not `|rho|`.
    pub real: bool,
    /// Half width at half maximum of `|rho|`.
    pub half_width: f64,
    /// Tails are `5 half_width <= |x| <= 0.8 l`.
    pub tail_start: f64,
    /// Sign changes in each tail, negative side first. A real profile counts
    /// sign changes of `rho`; otherwise sign changes of the slope of `|rho|`,
    /// so any break in monotone decay counts.
    pub tail_sign_changes: (usize, usize),
}

impl PhasePlane {
    pub fn total_sign_changes(&self) -> usize {
        self.tail_sign_changes.0 + self.tail_sign_changes.1
    }
}

const REAL_TOL: f64 = 1e-12;

fn half_width(grid: &Grid, m: &[f64]) -> f64 {
    let o = grid.origin_index();
    let peak = m[o];
    if peak == 0.0 {
        return 0.0;
    }
    for j in o..grid.len() {
        if m[j] < 0.5 * peak {
            return grid.point(j);
        }
    }
    grid.half_length()
}

fn strict_sign_changes(values: impl Iterator<Item = f64>) -> usize {
    let mut count = 0;
    let mut prev = 0.0f64;
    for v in values {
        if v != 0.0 {
            if prev != 0.0 && (v > 0.0) != (prev > 0.0) {
                count += 1;
            }
            prev = v;
        }
    }
    count
}

/// `(rho, rho')` with `rho'` taken spectrally, for a centered profile.
pub fn phase_plane(profile: &ComplexField) -> PhasePlane {
    let grid = profile.grid().clone();
    let scale = profile.max_modulus();
    let real = profile
        .samples()
        .iter()
        .all(|z| z.im.abs() <= REAL_TOL * scale.max(f64::MIN_POSITIVE));
    let rho: RealField = if real {
        profile.real_part()
    } else {
        profile.modulus()
    };
    let drho = rho.derivative();
    let m = profile.modulus();
    let hw = half_width(&grid, m.samples());
    let tail_start = 5.0 * hw;
    let tail_end = 0.8 * grid.half_length();
    let in_tail = |x: f64| x.abs() >= tail_start && x.abs() <= tail_end;

    let count_side = |positive: bool| -> usize {
        let idx: Vec<usize> = (0..grid.len())
            .filter(|&j| {
                let x = grid.point(j);
                in_tail(x) && (x > 0.0) == positive
            })
            .collect();
        if scale == 0.0 || idx.is_empty() {
            return 0;
        }
        if real {
            strict_sign_changes(idx.iter().map(|&j| rho.samples()[j]))
        } else {
            let v = rho.samples();
            strict_sign_changes(idx.windows(2).map(|w| v[w[1]] - v[w[0]]))
        }
    };
    let tail_sign_changes = (count_side(false), count_side(true));
    PhasePlane {
        x: grid.points(),
        rho: rho.into_samples(),
        drho: drho.into_samples(),
        real,
        half_width: hw,
        tail_start,
        tail_sign_changes,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub lambda2: f64,
    /// `c(lambda1) - lambda2`.
    pub gap: f64,
    pub amplitude: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub tail_sign_changes: usize,
    /// Solver error, if the row failed outright.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// Ordered by increasing `lambda2`.
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    /// Amplitude strictly increases with the gap `c - lambda2`.
    pub fn amplitude_increases_with_gap(&self) -> bool {
        let mut rows: Vec<&ScanRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.gap.total_cmp(&b.gap));
        rows.windows(2).all(|w| w[1].amplitude > w[0].amplitude)
    }

    /// Smallest scanned speed whose profile shows tail oscillations.
    pub fn oscillation_onset(&self) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.converged && r.tail_sign_changes > 0)
            .map(|r| r.lambda2)
    }
}

fn scan_row(base: &ProblemParams, lambda2: f64, grid: &Arc<Grid>, cfg: &SolverConfig, theta: &Phase) -> ScanRow {
    let mut p = *base;
    p.lambda2 = lambda2;
    let checked = p.validate().expect("speeds validated before the scan");
    let gap = checked.speed_gap();
    match petviashvili::solve(&checked, grid, cfg, theta) {
        Ok(rep) => ScanRow {
            lambda2,
            gap,
            amplitude: rep.amplitude(),
            iterations: rep.iterations,
            residual: rep.final_residual(),
            converged: rep.converged,
            tail_sign_changes: phase_plane(&rep.profile).total_sign_changes(),
            error: None,
        },
        Err(e) => ScanRow {
            lambda2,
            gap,
            amplitude: f64::NAN,
            iterations: 0,
            residual: f64::NAN,
            converged: false,
            tail_sign_changes: 0,
            error: Some(e.to_string()),
        },
    }
}

fn prepare(base: &ProblemParams, speeds: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    let mut sorted = speeds.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &c in &sorted {
        let mut p = *base;
        p.lambda2 = c;
        p.validate()?;
    }
    Ok(sorted)
}

/// Row-by-row scan on the calling thread.
pub fn speed_amplitude_scan_sequential(
    base: &ProblemParams,
    speeds: &[f64],
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    theta: &Phase,
) -> Result<ScanResult, AnalysisError> {
    let sorted = prepare(base, speeds)?;
    let rows = sorted
        .iter()
        .map(|&c| scan_row(base, c, grid, cfg, theta))
        .collect();
    Ok(ScanResult { rows })
}

/// Rows solved concurrently on the rayon pool.
#[cfg(feature = "parallel")]
pub fn speed_amplitude_scan_parallel(
    base: &ProblemParams,
    speeds: &[f64],
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    theta: &Phase,
) -> Result<ScanResult, AnalysisError> {
    use rayon::prelude::*;
    let sorted = prepare(base, speeds)?;
    let rows = sorted
        .par_iter()
        .map(|&c| scan_row(base, c, grid, cfg, theta))
        .collect();
    Ok(ScanResult { rows })
}

/// Solves one profile per speed (scalar or coupled per `base.kind`, coupled
/// rows seeded with `theta`). Parallel when the `parallel` feature is on.
pub fn speed_amplitude_scan(
    base: &ProblemParams,
    speeds: &[f64],
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    theta: &Phase,
) -> Result<ScanResult, AnalysisError> {
    #[cfg(feature = "parallel")]
    {
        speed_amplitude_scan_parallel(base, speeds, grid, cfg, theta)
    }
    #[cfg(not(feature = "parallel"))]
    {
        speed_amplitude_scan_sequential(base, speeds, grid, cfg, theta)
    }
}

/// Residual `||L z - N(z)||` of a linear-phase profile, for checking loaded
/// snapshots.
pub fn scalar_residual(params: &ProblemParams, profile: &ComplexField) -> Result<f64, AnalysisError> {
    let lp = params.validate()?.linear_phase();
    let problem = ScalarProblem::new(lp, profile.grid().clone())?;
    Ok(problem.residual(profile.samples()))
}
