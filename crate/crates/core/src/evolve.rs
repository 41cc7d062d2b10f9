//! Implicit-midpoint time stepping for the periodic equation
//!
//! ```text
//! u_t = F(u) = -i [ (-d_xx)^s u - |u|^{2 sigma} u ]
//! ```
//!
//! with Fourier collocation in space. Each step solves for the midpoint
//! value `w = (u^n + u^{n+1}) / 2` by the fixed-point iteration
//!
//! ```text
//! (1 + i dt/2 |xi|^{2s}) w_hat = u^n_hat + i dt/2 (|w|^{2 sigma} w)_hat
//! ```
//!
//! and sets `u^{n+1} = 2 w - u^n`.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::analysis::fit_line;
use crate::params::ProblemParams;
use crate::spectral::{invariants, ComplexField, Grid, Invariants};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("invalid evolution config: {0}")]
    Config(String),
    #[error(
        "midpoint iteration did not reach {tol:e} in {iterations} sweeps at t = {t} \
         (last update {update:e}); try a smaller dt"
    )]
    InnerIteration {
        t: f64,
        iterations: usize,
        update: f64,
        tol: f64,
    },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between stored snapshots; 0 stores none.
    pub snapshot_stride: usize,
    /// Max-norm tolerance on successive midpoint iterates.
    pub nl_tol: f64,
    pub nl_max: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_end: 10.0,
            snapshot_stride: 0,
            nl_tol: 1e-12,
            nl_max: 50,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(EvolveError::Config(format!("dt = {} must be finite and nonzero", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(EvolveError::Config(format!("t_end = {} must be >= 0", self.t_end)));
        }
        if !(self.nl_tol > 0.0) {
            return Err(EvolveError::Config(format!("nl_tol = {} must be > 0", self.nl_tol)));
        }
        if self.nl_max == 0 {
            return Err(EvolveError::Config("nl_max must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps covering `[0, t_end]`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt.abs()).round() as usize
    }
}

/// Precomputed symbol for repeated midpoint steps on one grid.
#[derive(Debug, Clone)]
pub struct MidpointStepper {
    grid: Arc<Grid>,
    s: f64,
    sigma: f64,
    dispersion: Vec<f64>,
}

impl MidpointStepper {
    pub fn new(grid: Arc<Grid>, s: f64, sigma: f64) -> Self {
        let dispersion = grid.sample_symbol(|xi| xi.abs().powf(2.0 * s), false);
        Self {
            grid,
            s,
            sigma,
            dispersion,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// One step of size `dt` (negative `dt` steps backward). Returns the new
    /// state and the number of inner sweeps used.
    pub fn step(
        &self,
        u: &ComplexField,
        dt: f64,
        cfg: &EvolveConfig,
        t: f64,
    ) -> Result<(ComplexField, usize), EvolveError> {
        let n = self.grid.len();
        let half = Complex64::new(0.0, 0.5 * dt);
        let mut un_hat = u.samples().to_vec();
        self.grid.forward(&mut un_hat);
        let denom: Vec<Complex64> = self.dispersion.iter().map(|&d| 1.0 + half * d).collect();

        let mut w = u.samples().to_vec();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut update = f64::INFINITY;
        for sweep in 1..=cfg.nl_max {
            for (b, z) in buf.iter_mut().zip(&w) {
                *b = z * z.norm_sqr().powf(self.sigma);
            }
            self.grid.forward(&mut buf);
            for k in 0..n {
                buf[k] = (un_hat[k] + half * buf[k]) / denom[k];
            }
            self.grid.inverse(&mut buf);
            update = buf
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            std::mem::swap(&mut w, &mut buf);
            if !update.is_finite() {
                return Err(EvolveError::NonFinite { t });
            }
            if update <= cfg.nl_tol {
                let next = w
                    .iter()
                    .zip(u.samples())
                    .map(|(m, a)| 2.0 * m - a)
                    .collect();
                let field = ComplexField::new(self.grid.clone(), next).expect("grid length");
                return Ok((field, sweep));
            }
        }
        Err(EvolveError::InnerIteration {
            t,
            iterations: cfg.nl_max,
            update,
            tol: cfg.nl_tol,
        })
    }

    pub fn invariants(&self, u: &ComplexField) -> Invariants {
        invariants(u, self.s, self.sigma)
    }
}

/// One implicit-midpoint step.
pub fn step_midpoint(
    u: &ComplexField,
    dt: f64,
    params: &ProblemParams,
    cfg: &EvolveConfig,
) -> Result<ComplexField, EvolveError> {
    let stepper = MidpointStepper::new(u.grid().clone(), params.s, params.sigma);
    stepper.step(u, dt, cfg, 0.0).map(|(v, _)| v)
}

/// Time series of one run.
#[derive(Debug, Clone, Default)]
pub struct EvolutionReport {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub momentum: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    /// Interpolated peak of `|u|`.
    pub amplitude: Vec<f64>,
    /// Interpolated, periodically unwrapped peak position.
    pub peak_x: Vec<f64>,
    pub snapshots: Vec<(f64, ComplexField)>,
    /// Largest inner sweep count of any step.
    pub max_sweeps: usize,
    /// Set when a step failed; the series stops at the last good state.
    pub failure: Option<EvolveError>,
}

impl EvolutionReport {
    fn drift(series: &[f64]) -> f64 {
        match series.first() {
            Some(&a) => series.iter().map(|v| (v - a).abs()).fold(0.0, f64::max),
            None => 0.0,
        }
    }

    pub fn mass_drift(&self) -> f64 {
        Self::drift(&self.mass)
    }

    pub fn momentum_drift(&self) -> f64 {
        Self::drift(&self.momentum)
    }

    pub fn hamiltonian_drift(&self) -> f64 {
        Self::drift(&self.hamiltonian)
    }

    /// `|amplitude(t) - amplitude(0)|`.
    pub fn amplitude_error(&self) -> Vec<f64> {
        let a0 = self.amplitude.first().copied().unwrap_or(0.0);
        self.amplitude.iter().map(|a| (a - a0).abs()).collect()
    }

    /// Slope of a least-squares line through the amplitude error.
    pub fn amplitude_error_trend(&self) -> f64 {
        fit_line(&self.t, &self.amplitude_error()).map_or(0.0, |f| f.slope)
    }

    /// Least-squares speed of the peak.
    pub fn speed(&self) -> Option<f64> {
        fit_line(&self.t, &self.peak_x).map(|f| f.slope)
    }
}

/// Peak position and value of `|u|` by a parabola through the grid maximum
/// and its two neighbours.
pub fn interpolated_peak(u: &ComplexField) -> (f64, f64) {
    let grid = u.grid();
    let n = grid.len();
    let j = u.peak_index();
    let a = u.samples()[(j + n - 1) % n].norm();
    let b = u.samples()[j].norm();
    let c = u.samples()[(j + 1) % n].norm();
    let curv = a - 2.0 * b + c;
    let offset = if curv < 0.0 { 0.5 * (a - c) / curv } else { 0.0 };
    let value = b - 0.25 * (a - c) * offset;
    (grid.point(j) + offset * grid.spacing(), value)
}

/// Marches `u0` to `cfg.t_end`, recording invariants and the peak every step.
pub fn run(
    u0: &ComplexField,
    params: &ProblemParams,
    cfg: &EvolveConfig,
) -> Result<EvolutionReport, EvolveError> {
    cfg.validate()?;
    let stepper = MidpointStepper::new(u0.grid().clone(), params.s, params.sigma);
    let period = 2.0 * u0.grid().half_length();
    let mut report = EvolutionReport::default();
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut last_raw = 0.0;
    let mut unwrap = 0.0;

    let mut record = |report: &mut EvolutionReport, u: &ComplexField, t: f64, first: bool| {
        let inv = stepper.invariants(u);
        let (x, amp) = interpolated_peak(u);
        if !first {
            let jump = x - last_raw;
            if jump > 0.5 * period {
                unwrap -= period;
            } else if jump < -0.5 * period {
                unwrap += period;
            }
        }
        last_raw = x;
        report.t.push(t);
        report.mass.push(inv.mass);
        report.momentum.push(inv.momentum);
        report.hamiltonian.push(inv.hamiltonian);
        report.amplitude.push(amp);
        report.peak_x.push(x + unwrap);
    };

    record(&mut report, &u, t, true);
    if cfg.snapshot_stride > 0 {
        report.snapshots.push((t, u.clone()));
    }
    let steps = cfg.steps();
    for k in 1..=steps {
        match stepper.step(&u, cfg.dt, cfg, t) {
            Ok((next, sweeps)) => {
                u = next;
                report.max_sweeps = report.max_sweeps.max(sweeps);
            }
            Err(e) => {
                report.failure = Some(e);
                break;
            }
        }
        t = k as f64 * cfg.dt;
        record(&mut report, &u, t, false);
        if cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0 {
            report.snapshots.push((t, u.clone()));
        }
    }
    Ok(report)
}
