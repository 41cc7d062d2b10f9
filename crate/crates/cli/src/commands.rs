use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fnls_core::analysis::{
    self, decay_slope_with, default_window, evenness_defect, phase_plane, AnalysisError,
};
use fnls_core::evolve::{self, EvolveError};
use fnls_core::io::{self, IoError, Table};
use fnls_core::params::{CheckedParams, ParamError, ProfileKind};
use fnls_core::petviashvili::{
    self, fixed_point_spectrum_probe, modulate, CoupledProblem, ScalarProblem, SolveError,
};
use fnls_core::spectral::SpectralError;
use fnls_core::{ComplexField, Grid, SolveReport};
use thiserror::Error;

use crate::config::{RunConfig, SeedPhase};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) | CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Params(_)
            | SolveError::NotPositive { .. }
            | SolveError::SeedLength { .. }
            | SolveError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<EvolveError> for CliError {
    fn from(e: EvolveError) -> Self {
        match e {
            EvolveError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Solve(s) => s.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

pub fn prepare_out(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

/// Parameters, derived quantities, grid and solver settings.
pub fn run_meta(command: &str, checked: &CheckedParams, rc: &RunConfig) -> Vec<(String, String)> {
    let mut m = vec![("command".to_string(), command.to_string())];
    m.extend(checked.metadata());
    m.push(("seed_phase".into(), rc.theta.as_str().into()));
    m.push(("grid_l".into(), format!("{:e}", rc.grid.l)));
    m.push(("grid_n".into(), rc.grid.n.to_string()));
    m.push(("alpha".into(), format!("{:e}", rc.solver.alpha)));
    m.push(("tol".into(), format!("{:e}", rc.solver.tol)));
    m.push(("max_iter".into(), rc.solver.max_iter.to_string()));
    m.push(("mw".into(), rc.solver.mw.to_string()));
    m
}

pub fn grid_of(rc: &RunConfig) -> Result<Arc<Grid>, CliError> {
    Ok(Grid::shared(rc.grid.l, rc.grid.n)?)
}

pub fn solve_checked(
    checked: &CheckedParams,
    grid: &Arc<Grid>,
    rc: &RunConfig,
    theta: SeedPhase,
) -> Result<SolveReport, CliError> {
    Ok(petviashvili::solve(
        checked,
        grid,
        &rc.solver,
        &theta.phase(checked.phase_slope),
    )?)
}

/// `u = rho e^{iAx}` for linear-phase profiles, `v + i w` otherwise; swapped
/// back for a negative requested speed.
pub fn full_profile(checked: &CheckedParams, unknown: &ComplexField) -> ComplexField {
    let u = match checked.params.kind {
        ProfileKind::LinearPhase => modulate(unknown, checked.phase_slope),
        ProfileKind::Coupled => unknown.clone(),
    };
    if checked.mirrored {
        u.swap_parts()
    } else {
        u
    }
}

fn profile_meta(checked: &CheckedParams, meta: &[(String, String)]) -> Vec<(String, String)> {
    let mut m = meta.to_vec();
    let what = match checked.params.kind {
        ProfileKind::LinearPhase => "rho",
        ProfileKind::Coupled => "v+iw",
    };
    m.push(("profile".into(), what.into()));
    m
}

fn not_converged(what: &str, rep: &SolveReport, max_iter: usize) -> CliError {
    CliError::NotConverged(format!(
        "{what} did not converge in {max_iter} iterations (residual {:e}); artifacts kept",
        rep.final_residual()
    ))
}

pub fn solve(rc: &RunConfig, out: &Path) -> Result<(), CliError> {
    let checked = rc.params.validate()?;
    let grid = grid_of(rc)?;
    let rep = solve_checked(&checked, &grid, rc, rc.theta)?;
    let meta = run_meta("solve", &checked, rc);
    io::write_snapshot(&out.join("profile.csv"), &rep.profile, &profile_meta(&checked, &meta))?;
    io::solve_report_table(&rep, &meta).write(&out.join("solve_report.csv"))?;
    if !rep.converged {
        return Err(not_converged("profile iteration", &rep, rc.solver.max_iter));
    }
    println!(
        "converged in {} iterations, residual {:e}, amplitude {:e}",
        rep.iterations,
        rep.final_residual(),
        rep.amplitude()
    );
    Ok(())
}

/// Profile from a snapshot file, or a fresh solve.
fn obtain_profile(
    checked: &CheckedParams,
    rc: &RunConfig,
    seed_profile: Option<&Path>,
) -> Result<(ComplexField, Option<SolveReport>), CliError> {
    match seed_profile {
        Some(path) => {
            let (field, _) = io::read_snapshot(path)?;
            Ok((field, None))
        }
        None => {
            let grid = grid_of(rc)?;
            let rep = solve_checked(checked, &grid, rc, rc.theta)?;
            if !rep.converged {
                return Err(not_converged("profile iteration", &rep, rc.solver.max_iter));
            }
            Ok((rep.profile.clone(), Some(rep)))
        }
    }
}

pub fn evolve(rc: &RunConfig, out: &Path, seed_profile: Option<&Path>) -> Result<(), CliError> {
    let checked = rc.params.validate()?;
    let (unknown, _) = obtain_profile(&checked, rc, seed_profile)?;
    let u0 = full_profile(&checked, &unknown);
    let report = evolve::run(&u0, &checked.params, &rc.evolve)?;
    let mut meta = run_meta("evolve", &checked, rc);
    let e = &rc.evolve;
    meta.push(("dt".into(), format!("{:e}", e.dt)));
    meta.push(("t_end".into(), format!("{:e}", e.t_end)));
    meta.push(("nl_tol".into(), format!("{:e}", e.nl_tol)));
    meta.push(("nl_max".into(), e.nl_max.to_string()));
    if let Some(p) = seed_profile {
        meta.push(("seed_profile".into(), p.display().to_string()));
    }
    io::evolution_table(&report, &meta).write(&out.join("evolution.csv"))?;
    for (i, (t, u)) in report.snapshots.iter().enumerate() {
        let mut m = meta.clone();
        m.push(("t".into(), format!("{t:e}")));
        io::write_snapshot(&out.join(format!("snapshot_{i:04}.csv")), u, &m)?;
    }
    if let Some(f) = &report.failure {
        return Err(CliError::Solver(format!("{f}; partial series written")));
    }
    println!(
        "mass drift {:e}, hamiltonian drift {:e}, speed {:e}",
        report.mass_drift(),
        report.hamiltonian_drift(),
        report.speed().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn scan(rc: &RunConfig, out: &Path) -> Result<(), CliError> {
    let checked = rc.params.validate()?;
    let grid = grid_of(rc)?;
    let result = analysis::speed_amplitude_scan(
        &checked.params,
        &rc.speeds,
        &grid,
        &rc.solver,
        &rc.theta.phase(checked.phase_slope),
    )?;
    let mut t = Table::new(&[
        "lambda2",
        "gap",
        "amplitude",
        "iterations",
        "residual",
        "converged",
        "tail_sign_changes",
    ])
    .with_meta(&io::provenance("scan"));
    t.meta.extend(run_meta("scan", &checked, rc));
    if let Some(onset) = result.oscillation_onset() {
        t.meta("oscillation_onset", format!("{onset:e}"));
    }
    for r in &result.rows {
        t.push(vec![
            r.lambda2,
            r.gap,
            r.amplitude,
            r.iterations as f64,
            r.residual,
            if r.converged { 1.0 } else { 0.0 },
            r.tail_sign_changes as f64,
        ]);
    }
    t.write(&out.join("scan.csv"))?;
    if !result.all_converged() {
        let bad: Vec<String> = result
            .rows
            .iter()
            .filter(|r| !r.converged)
            .map(|r| format!("{}", r.lambda2))
            .collect();
        return Err(CliError::NotConverged(format!(
            "scan rows did not converge for lambda2 = {}",
            bad.join(", ")
        )));
    }
    Ok(())
}

pub fn analyze(rc: &RunConfig, out: &Path, seed_profile: Option<&Path>) -> Result<(), CliError> {
    let checked = rc.params.validate()?;
    let (profile, _) = obtain_profile(&checked, rc, seed_profile)?;
    let profile = profile.centered();
    let window = rc.window.unwrap_or_else(|| default_window(profile.grid()));
    let model = rc.tail_model.model(match checked.params.kind {
        ProfileKind::LinearPhase => checked.phase_slope,
        ProfileKind::Coupled => 0.0,
    });
    let fit = decay_slope_with(&profile, window, model)?;
    let defect = evenness_defect(&profile);
    let pp = phase_plane(&profile);

    let mut meta = run_meta("analyze", &checked, rc);
    meta.push(("tail_model".into(), rc.tail_model.as_str().into()));
    meta.push(("window".into(), format!("{:e}..{:e}", window.0, window.1)));

    let mut summary = Table::new(&[
        "slope",
        "intercept",
        "fit_residual",
        "model_ok",
        "evenness_defect",
        "tail_sign_changes_neg",
        "tail_sign_changes_pos",
    ])
    .with_meta(&io::provenance("analysis"));
    summary.meta.extend_from_slice(&meta);
    summary.push(vec![
        fit.slope,
        fit.intercept,
        fit.residual,
        if fit.model_ok { 1.0 } else { 0.0 },
        defect,
        pp.tail_sign_changes.0 as f64,
        pp.tail_sign_changes.1 as f64,
    ]);
    summary.write(&out.join("analysis.csv"))?;

    let mut plane = Table::new(&["x", "rho", "drho"]).with_meta(&io::provenance("phase_plane"));
    plane.meta.extend_from_slice(&meta);
    for j in 0..pp.x.len() {
        plane.push(vec![pp.x[j], pp.rho[j], pp.drho[j]]);
    }
    plane.write(&out.join("phase_plane.csv"))?;

    let mut decay = Table::new(&["log_x", "log_rho"]).with_meta(&io::provenance("decay"));
    decay.meta.extend_from_slice(&meta);
    let grid = profile.grid();
    for j in grid.origin_index()..grid.len() {
        let x = grid.point(j);
        let v = profile.samples()[j].norm();
        if x >= window.0 && x <= window.1 && v > 0.0 {
            decay.push(vec![x.ln(), v.ln()]);
        }
    }
    decay.write(&out.join("decay.csv"))?;
    println!(
        "slope {:.4} (model_ok {}), evenness defect {:e}, tail sign changes {} + {}",
        fit.slope, fit.model_ok, defect, pp.tail_sign_changes.0, pp.tail_sign_changes.1
    );
    Ok(())
}

pub fn probe(rc: &RunConfig, out: &Path) -> Result<(), CliError> {
    let checked = rc.params.validate()?;
    let grid = grid_of(rc)?;
    let rep = solve_checked(&checked, &grid, rc, rc.theta)?;
    if !rep.converged {
        return Err(not_converged("profile iteration", &rep, rc.solver.max_iter));
    }
    let alphas = [0.0, rc.solver.alpha];
    let mut t = Table::new(&["alpha", "magnitude", "rayleigh", "iterations"])
        .with_meta(&io::provenance("probe"));
    t.meta.extend(run_meta("probe", &checked, rc));
    for &alpha in &alphas {
        let est = match checked.params.kind {
            ProfileKind::LinearPhase => {
                let problem = ScalarProblem::new(checked.linear_phase(), grid.clone())?;
                fixed_point_spectrum_probe(&problem, &rep.profile, alpha, 200)?
            }
            ProfileKind::Coupled => {
                let problem = CoupledProblem::new(checked.params, grid.clone())?;
                fixed_point_spectrum_probe(&problem, &rep.profile, alpha, 200)?
            }
        };
        println!("alpha {alpha}: dominant multiplier {:.4}", est.magnitude);
        t.push(vec![alpha, est.magnitude, est.rayleigh, est.iterations as f64]);
    }
    t.write(&out.join("probe.csv"))?;
    Ok(())
}
