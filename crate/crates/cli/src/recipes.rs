//! Canned parameter sweeps that regenerate the figure data sets.

use std::path::Path;
use std::sync::Arc;

use fnls_core::analysis::{self, decay_slope_with, default_window, phase_plane, TailModel};
use fnls_core::evolve;
use fnls_core::io::{self, Table};
use fnls_core::params::ProblemParams;
use fnls_core::petviashvili::{self, modulate, optimal_alpha};
use fnls_core::{ComplexField, EvolveConfig, Grid, Phase, SolveReport, SolverConfig};

use crate::commands::{grid_of, CliError};
use crate::config::RunConfig;

pub const RECIPES: [&str; 7] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

struct Ctx<'a> {
    rc: &'a RunConfig,
    grid: Arc<Grid>,
    out: &'a Path,
    failures: Vec<String>,
}

impl Ctx<'_> {
    fn solver(&self, sigma: f64) -> SolverConfig {
        SolverConfig {
            alpha: optimal_alpha(sigma),
            ..self.rc.solver
        }
    }

    fn meta(&self, recipe: &str) -> Vec<(String, String)> {
        let s = &self.rc.solver;
        vec![
            ("recipe".into(), recipe.into()),
            ("grid_l".into(), format!("{:e}", self.rc.grid.l)),
            ("grid_n".into(), self.rc.grid.n.to_string()),
            ("tol".into(), format!("{:e}", s.tol)),
            ("max_iter".into(), s.max_iter.to_string()),
            ("mw".into(), s.mw.to_string()),
        ]
    }

    fn table(&self, recipe: &str, columns: &[&str]) -> Table {
        Table::new(columns)
            .with_meta(&io::provenance(recipe))
            .with_meta(&self.meta(recipe))
    }

    fn write(&self, name: &str, t: &Table) -> Result<(), CliError> {
        t.write(&self.out.join(format!("{name}.csv")))?;
        println!("wrote {name}.csv ({} rows)", t.rows.len());
        Ok(())
    }

    /// Centered profile; records non-convergence and carries on.
    fn solve(&mut self, p: ProblemParams, theta: &Phase, label: &str) -> Result<SolveReport, CliError> {
        self.solve_with(p, theta, label, self.solver(p.sigma))
    }

    fn solve_with(
        &mut self,
        p: ProblemParams,
        theta: &Phase,
        label: &str,
        cfg: SolverConfig,
    ) -> Result<SolveReport, CliError> {
        let checked = p.validate()?;
        let mut rep = petviashvili::solve(&checked, &self.grid, &cfg, theta)?;
        if !rep.converged {
            self.failures.push(format!("{label} (residual {:e})", rep.final_residual()));
        }
        rep.profile = rep.profile.centered();
        Ok(rep)
    }
}

fn linear(s: f64, sigma: f64, lambda2: f64) -> ProblemParams {
    ProblemParams::linear_phase(s, sigma, 1.0, lambda2)
}

fn coupled(lambda2: f64) -> ProblemParams {
    ProblemParams::coupled(0.75, 1.0, 1.0, lambda2)
}

fn profile_columns(
    ctx: &Ctx,
    recipe: &str,
    prefix: &str,
    labels: &[String],
    fields: &[ComplexField],
) -> Table {
    let mut cols = vec!["x".to_string()];
    cols.extend(labels.iter().map(|l| format!("{prefix}_{l}")));
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = ctx.table(recipe, &refs);
    for j in 0..ctx.grid.len() {
        let mut row = vec![ctx.grid.point(j)];
        row.extend(fields.iter().map(|f| f.samples()[j].norm()));
        t.push(row);
    }
    t
}

fn fig1(ctx: &mut Ctx) -> Result<(), CliError> {
    let speeds = [0.5, 1.0, 1.5];
    let mut fields = Vec::new();
    for c in speeds {
        fields.push(ctx.solve(linear(0.75, 1.0, c), &Phase::Zero, &format!("lambda2 = {c}"))?.profile);
    }
    let labels: Vec<String> = speeds.iter().map(|c| c.to_string()).collect();
    let t = profile_columns(ctx, "fig1a", "rho", &labels, &fields);
    ctx.write("fig1a", &t)?;

    let mut t = ctx.table("fig1b", &["mw", "iter", "residual"]);
    for mw in [1, 3, 4, 6] {
        let cfg = SolverConfig { mw, ..ctx.solver(1.0) };
        let rep = ctx.solve_with(linear(0.75, 1.0, 1.0), &Phase::Zero, &format!("mw = {mw}"), cfg)?;
        t.meta(&format!("iterations_mw{mw}"), rep.iterations);
        for (i, r) in rep.residual_history.iter().enumerate() {
            t.push(vec![mw as f64, i as f64, *r]);
        }
    }
    ctx.write("fig1b", &t)
}

fn fig2(ctx: &mut Ctx) -> Result<(), CliError> {
    let p = linear(0.75, 1.0, 1.0);
    let checked = p.validate()?;
    let rep = ctx.solve(p, &Phase::Zero, "lambda2 = 1")?;
    let u0 = modulate(&rep.profile, checked.phase_slope);
    let mut t = ctx.table("fig2", &["dt", "t", "amplitude_error", "hamiltonian_error"]);
    for dt in [2e-2, 1e-2, 5e-3] {
        let cfg = EvolveConfig {
            dt,
            ..EvolveConfig::default()
        };
        let report = evolve::run(&u0, &p, &cfg)?;
        if let Some(f) = &report.failure {
            ctx.failures.push(format!("evolution dt = {dt}: {f}"));
        }
        let amp = report.amplitude_error();
        let h0 = report.hamiltonian[0];
        t.meta(&format!("max_sweeps_dt{dt:e}"), report.max_sweeps);
        for i in 0..report.t.len() {
            t.push(vec![dt, report.t[i], amp[i], report.hamiltonian[i] - h0]);
        }
    }
    ctx.write("fig2", &t)
}

fn fig3(ctx: &mut Ctx) -> Result<(), CliError> {
    let eps = [0.05, 0.1, 0.25];
    let mut fields = Vec::new();
    for e in eps {
        let label = format!("s = {}", 0.5 + e);
        fields.push(ctx.solve(linear(0.5 + e, 1.0, 0.75), &Phase::Zero, &label)?.profile);
    }
    let labels: Vec<String> = eps.iter().map(|e| format!("eps{e}")).collect();
    let t = profile_columns(ctx, "fig3a", "rho", &labels, &fields);
    ctx.write("fig3a", &t)?;

    let sigmas = [1.0, 2.0, 3.0];
    let mut fields = Vec::new();
    for sg in sigmas {
        let label = format!("sigma = {sg}");
        fields.push(ctx.solve(linear(0.75, sg, 0.75), &Phase::Zero, &label)?.profile);
    }
    let labels: Vec<String> = sigmas.iter().map(|s| format!("sigma{s}")).collect();
    let t = profile_columns(ctx, "fig3b", "rho", &labels, &fields);
    ctx.write("fig3b", &t)
}

fn fig4(ctx: &mut Ctx) -> Result<(), CliError> {
    let quad = ctx.solve(coupled(1.0), &Phase::Quadratic, "coupled, quadratic seed")?;
    let lin = ctx.solve(linear(0.75, 1.0, 1.0), &Phase::Zero, "linear phase")?;
    let labels = ["quadratic".to_string(), "linear".to_string()];
    let mut t = profile_columns(ctx, "fig4", "rho", &labels, &[quad.profile.clone(), lin.profile]);
    t.meta("evenness_defect_quadratic", format!("{:e}", analysis::evenness_defect(&quad.profile)));
    ctx.write("fig4", &t)
}

fn log_tail(
    ctx: &Ctx,
    t: &mut Table,
    c: f64,
    profile: &ComplexField,
    model: TailModel,
) -> Result<(), CliError> {
    let window = default_window(&ctx.grid);
    let fit = decay_slope_with(profile, window, model)?;
    t.meta(&format!("slope_{c}"), format!("{:.6}", fit.slope));
    let g = &ctx.grid;
    let x_max = 0.9 * g.half_length();
    for j in g.origin_index() + 1..g.len() {
        let x = g.point(j);
        let v = profile.samples()[j].norm();
        if x <= x_max && v > 0.0 {
            t.push(vec![c, x.ln(), v.ln()]);
        }
    }
    Ok(())
}

fn fig5(ctx: &mut Ctx) -> Result<(), CliError> {
    let speeds = [0.5, 1.0, 1.5];
    let mut t = ctx.table("fig5a", &["lambda2", "log_x", "log_rho"]);
    for c in speeds {
        let p = linear(0.75, 1.0, c);
        let a = p.validate()?.phase_slope;
        let rep = ctx.solve(p, &Phase::Zero, &format!("lambda2 = {c}"))?;
        log_tail(ctx, &mut t, c, &rep.profile, TailModel::Periodized { phase_slope: a })?;
    }
    ctx.write("fig5a", &t)?;

    let mut t = ctx.table("fig5b", &["lambda2", "log_x", "log_rho"]);
    for c in speeds {
        let rep = ctx.solve(coupled(c), &Phase::Quadratic, &format!("coupled lambda2 = {c}"))?;
        log_tail(ctx, &mut t, c, &rep.profile, TailModel::PowerLaw)?;
    }
    ctx.write("fig5b", &t)
}

fn fig6(ctx: &mut Ctx) -> Result<(), CliError> {
    let mut t = ctx.table("fig6", &["lambda2", "x", "rho", "drho"]);
    for c in [0.5, 1.0, 1.5, 1.75] {
        let rep = ctx.solve(linear(0.75, 1.0, c), &Phase::Zero, &format!("lambda2 = {c}"))?;
        let pp = phase_plane(&rep.profile);
        t.meta(&format!("tail_sign_changes_{c}"), pp.total_sign_changes());
        for j in 0..pp.x.len() {
            t.push(vec![c, pp.x[j], pp.rho[j], pp.drho[j]]);
        }
    }
    ctx.write("fig6", &t)
}

fn fig7(ctx: &mut Ctx) -> Result<(), CliError> {
    let speeds: Vec<f64> = (1..=7).map(|k| 0.25 * k as f64).collect();
    let cfg = ctx.solver(1.0);
    for (name, base, theta) in [
        ("fig7a", linear(0.75, 1.0, 0.0), Phase::Zero),
        ("fig7b", coupled(0.0), Phase::Quadratic),
    ] {
        let result = analysis::speed_amplitude_scan(&base, &speeds, &ctx.grid, &cfg, &theta)?;
        let mut t = ctx.table(name, &["gap", "amplitude"]);
        t.meta("kind", base.kind.as_str());
        t.meta("amplitude_increases_with_gap", result.amplitude_increases_with_gap());
        for r in &result.rows {
            if !r.converged {
                ctx.failures.push(format!("{name} lambda2 = {}", r.lambda2));
            }
            t.push(vec![r.gap, r.amplitude]);
        }
        ctx.write(name, &t)?;
    }
    Ok(())
}

/// Runs `recipe`, writing its tables into `out`. Every table is written even
/// when some solve fails to converge; that is reported afterwards.
pub fn reproduce(recipe: &str, rc: &RunConfig, out: &Path) -> Result<(), CliError> {
    let run: fn(&mut Ctx) -> Result<(), CliError> = match recipe {
        "fig1" => fig1,
        "fig2" => fig2,
        "fig3" => fig3,
        "fig4" => fig4,
        "fig5" => fig5,
        "fig6" => fig6,
        "fig7" => fig7,
        other => {
            return Err(CliError::Config(format!(
                "unknown recipe `{other}`; available: {}",
                RECIPES.join(", ")
            )))
        }
    };
    let mut ctx = Ctx {
        rc,
        grid: grid_of(rc)?,
        out,
        failures: Vec::new(),
    };
    run(&mut ctx)?;
    if ctx.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "{recipe}: not converged: {}",
            ctx.failures.join("; ")
        )))
    }
}
