//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//!
//! [problem]
//! s = 0.75
//! sigma = 1.0
//! lambda1 = 1.0
//! lambda2 = 1.0
//! kind = "linear_phase"      # or "coupled"
//! seed_phase = "linear"      # coupled seeds: "zero", "linear", "quadratic"
//!
//! [grid]
//! l = 64.0
//! n = 4096
//!
//! [solver]                   # optional
//! tol = 1e-10
//! max_iter = 500
//! mw = 1
//!
//! [evolve]                   # required by `evolve`
//! dt = 1e-2
//! t_end = 10.0
//!
//! [scan]                     # required by `scan`
//! speeds = [0.25, 0.5, 0.75]
//!
//! [analysis]                 # optional
//! window = [10.0, 50.0]
//! tail_model = "periodized"  # or "power_law"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use fnls_core::analysis::TailModel;
use fnls_core::evolve::EvolveConfig;
use fnls_core::params::{ProblemParams, ProfileKind};
use fnls_core::petviashvili::optimal_alpha;
use fnls_core::{Phase, SolverConfig};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Evolve,
    Scan,
    Analyze,
    Probe,
    Reproduce,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Evolve => "evolve",
            Command::Scan => "scan",
            Command::Analyze => "analyze",
            Command::Probe => "probe",
            Command::Reproduce => "reproduce",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema_version: Option<u32>,
    pub command: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub problem: Option<RawProblem>,
    pub grid: Option<RawGrid>,
    pub solver: Option<RawSolver>,
    pub evolve: Option<RawEvolve>,
    pub scan: Option<RawScan>,
    pub analysis: Option<RawAnalysis>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    pub s: Option<f64>,
    pub sigma: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub kind: Option<String>,
    pub seed_phase: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub l: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub alpha: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub mw: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEvolve {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub snapshot_stride: Option<usize>,
    pub nl_tol: Option<f64>,
    pub nl_max: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScan {
    pub speeds: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAnalysis {
    pub window: Option<[f64; 2]>,
    pub tail_model: Option<String>,
}

/// Every problem found in a config, reported together.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub l: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: ProblemParams,
    pub theta: SeedPhase,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub evolve: EvolveConfig,
    pub speeds: Vec<f64>,
    pub window: Option<(f64, f64)>,
    pub tail_model: TailChoice,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPhase {
    Zero,
    Linear,
    Quadratic,
}

impl SeedPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            SeedPhase::Zero => "zero",
            SeedPhase::Linear => "linear",
            SeedPhase::Quadratic => "quadratic",
        }
    }

    /// Phase descriptor for the seed, `A` taken from the validated speed.
    pub fn phase(self, phase_slope: f64) -> Phase {
        match self {
            SeedPhase::Zero => Phase::Zero,
            SeedPhase::Linear => Phase::Linear(phase_slope),
            SeedPhase::Quadratic => Phase::Quadratic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailChoice {
    PowerLaw,
    Periodized,
}

impl TailChoice {
    pub fn model(self, phase_slope: f64) -> TailModel {
        match self {
            TailChoice::PowerLaw => TailModel::PowerLaw,
            TailChoice::Periodized => TailModel::Periodized { phase_slope },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TailChoice::PowerLaw => "power_law",
            TailChoice::Periodized => "periodized",
        }
    }
}

pub fn parse(text: &str) -> Result<RawConfig, ConfigErrors> {
    toml::from_str(text).map_err(|e| ConfigErrors(vec![e.message().to_string()]))
}

pub fn load(path: &Path) -> Result<RawConfig, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| e.to_string())
}

fn need<T: Copy>(errs: &mut Vec<String>, v: Option<T>, name: &str) -> Option<T> {
    if v.is_none() {
        errs.push(format!("missing `{name}`"));
    }
    v
}

impl RawConfig {
    /// Checks presence and basic ranges of every field `command` needs.
    /// `reproduce` only reads the optional `grid` and `solver` overrides.
    pub fn resolve(&self, command: Command) -> Result<RunConfig, ConfigErrors> {
        let mut errs = Vec::new();
        let reproduce = command == Command::Reproduce;
        match self.schema_version {
            Some(SCHEMA_VERSION) => {}
            Some(v) => errs.push(format!(
                "schema_version = {v} is not supported (expected {SCHEMA_VERSION})"
            )),
            None if !reproduce => errs.push("missing `schema_version`".into()),
            None => {}
        }
        if let Some(c) = &self.command {
            if c != command.as_str() {
                errs.push(format!("config is for `{c}`, invoked as `{}`", command.as_str()));
            }
        }

        let empty_problem = RawProblem::default();
        let p = match (&self.problem, reproduce) {
            (Some(p), _) => p,
            (None, true) => &empty_problem,
            (None, false) => {
                errs.push("missing `[problem]` block".into());
                &empty_problem
            }
        };
        let (s, sigma, lambda1, lambda2) = if reproduce {
            (
                p.s.unwrap_or(0.75),
                p.sigma.unwrap_or(1.0),
                p.lambda1.unwrap_or(1.0),
                p.lambda2.unwrap_or(1.0),
            )
        } else {
            (
                need(&mut errs, p.s, "problem.s").unwrap_or(f64::NAN),
                need(&mut errs, p.sigma, "problem.sigma").unwrap_or(f64::NAN),
                need(&mut errs, p.lambda1, "problem.lambda1").unwrap_or(f64::NAN),
                need(&mut errs, p.lambda2, "problem.lambda2").unwrap_or(f64::NAN),
            )
        };
        let kind = match p.kind.as_deref() {
            None => ProfileKind::LinearPhase,
            Some(k) => ProfileKind::parse(k).unwrap_or_else(|| {
                errs.push(format!(
                    "problem.kind = \"{k}\" is not one of \"linear_phase\", \"coupled\""
                ));
                ProfileKind::LinearPhase
            }),
        };
        let theta = match p.seed_phase.as_deref() {
            None | Some("linear") => SeedPhase::Linear,
            Some("zero") => SeedPhase::Zero,
            Some("quadratic") => SeedPhase::Quadratic,
            Some(other) => {
                errs.push(format!(
                    "problem.seed_phase = \"{other}\" is not one of \"zero\", \"linear\", \"quadratic\""
                ));
                SeedPhase::Linear
            }
        };

        let empty_grid = RawGrid::default();
        let g = match (&self.grid, reproduce) {
            (Some(g), _) => g,
            (None, true) => &empty_grid,
            (None, false) => {
                errs.push("missing `[grid]` block".into());
                &empty_grid
            }
        };
        let grid = if reproduce {
            GridSpec {
                l: g.l.unwrap_or(64.0),
                n: g.n.unwrap_or(4096),
            }
        } else {
            GridSpec {
                l: need(&mut errs, g.l, "grid.l").unwrap_or(f64::NAN),
                n: need(&mut errs, g.n, "grid.n").unwrap_or(0),
            }
        };
        if grid.l.is_finite() && grid.l <= 0.0 {
            errs.push(format!("grid.l = {} must be > 0", grid.l));
        }
        if grid.n != 0 && (grid.n < 4 || grid.n % 2 != 0) {
            errs.push(format!("grid.n = {} must be even and >= 4", grid.n));
        }

        let sv = self.solver.as_ref();
        let sigma_for_alpha = if sigma.is_finite() && sigma > 0.0 { sigma } else { 1.0 };
        let defaults = SolverConfig::for_sigma(sigma_for_alpha);
        let solver = SolverConfig {
            alpha: sv.and_then(|v| v.alpha).unwrap_or(optimal_alpha(sigma_for_alpha)),
            tol: sv.and_then(|v| v.tol).unwrap_or(defaults.tol),
            max_iter: sv.and_then(|v| v.max_iter).unwrap_or(defaults.max_iter),
            mw: sv.and_then(|v| v.mw).unwrap_or(defaults.mw),
        };
        if sigma.is_finite() && sigma > 0.0 {
            if let Err(e) = solver.validate(sigma) {
                errs.push(format!("solver: {e}"));
            }
        }

        let evolve = match (&self.evolve, command) {
            (None, Command::Evolve) => {
                errs.push("missing `[evolve]` block".into());
                EvolveConfig::default()
            }
            (None, _) => EvolveConfig::default(),
            (Some(e), _) => {
                let d = EvolveConfig::default();
                let cfg = EvolveConfig {
                    dt: e.dt.unwrap_or(d.dt),
                    t_end: e.t_end.unwrap_or(d.t_end),
                    snapshot_stride: e.snapshot_stride.unwrap_or(d.snapshot_stride),
                    nl_tol: e.nl_tol.unwrap_or(d.nl_tol),
                    nl_max: e.nl_max.unwrap_or(d.nl_max),
                };
                if let Err(err) = cfg.validate() {
                    errs.push(format!("evolve: {err}"));
                }
                cfg
            }
        };

        let speeds = match (&self.scan, command) {
            (Some(RawScan { speeds: Some(v) }), _) => {
                if v.is_empty() {
                    errs.push("scan.speeds is empty".into());
                }
                v.clone()
            }
            (Some(_), Command::Scan) => {
                errs.push("missing `scan.speeds`".into());
                Vec::new()
            }
            (None, Command::Scan) => {
                errs.push("missing `[scan]` block".into());
                Vec::new()
            }
            _ => Vec::new(),
        };

        let a = self.analysis.as_ref();
        let window = a.and_then(|a| a.window).map(|w| (w[0], w[1]));
        let tail_model = match a.and_then(|a| a.tail_model.as_deref()) {
            None | Some("periodized") => TailChoice::Periodized,
            Some("power_law") => TailChoice::PowerLaw,
            Some(other) => {
                errs.push(format!(
                    "analysis.tail_model = \"{other}\" is not one of \"periodized\", \"power_law\""
                ));
                TailChoice::Periodized
            }
        };

        if !errs.is_empty() {
            return Err(ConfigErrors(errs));
        }
        Ok(RunConfig {
            command,
            params: ProblemParams::new(s, sigma, lambda1, lambda2, kind),
            theta,
            grid,
            solver,
            evolve,
            speeds,
            window,
            tail_model,
            output_dir: self.output_dir.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
schema_version = 1
[problem]
s = 0.75
sigma = 1.0
lambda1 = 1.0
lambda2 = 1.0
[grid]
l = 32.0
n = 512
"#;

    #[test]
    fn full_config_resolves() {
        let rc = parse(FULL).unwrap().resolve(Command::Solve).unwrap();
        assert_eq!(rc.params.kind, ProfileKind::LinearPhase);
        assert_eq!(rc.grid, GridSpec { l: 32.0, n: 512 });
        assert_eq!(rc.solver, SolverConfig::for_sigma(1.0));
        assert_eq!(rc.tail_model, TailChoice::Periodized);
    }

    #[test]
    fn empty_config_lists_every_field() {
        let errs = parse("").unwrap().resolve(Command::Solve).unwrap_err();
        let text = errs.to_string();
        for key in ["schema_version", "[problem]", "problem.s", "problem.lambda2", "[grid]", "grid.l", "grid.n"] {
            assert!(text.contains(key), "{key} not reported in\n{text}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{FULL}\nbogus = 3\n");
        assert!(parse(&text).is_err());
        let text = FULL.replace("n = 512", "n = 512\nm = 3");
        let err = parse(&text).unwrap_err();
        assert!(err.0[0].contains("unknown field"));
    }

    #[test]
    fn command_blocks_required() {
        let errs = parse(FULL).unwrap().resolve(Command::Evolve).unwrap_err();
        assert!(errs.0.iter().any(|e| e.contains("[evolve]")));
        let errs = parse(FULL).unwrap().resolve(Command::Scan).unwrap_err();
        assert!(errs.0.iter().any(|e| e.contains("[scan]")));
    }

    #[test]
    fn wrong_schema_version() {
        let text = FULL.replace("schema_version = 1", "schema_version = 7");
        let errs = parse(&text).unwrap().resolve(Command::Solve).unwrap_err();
        assert!(errs.0[0].contains("schema_version = 7"));
    }

    #[test]
    fn reproduce_needs_nothing() {
        let rc = RawConfig::default().resolve(Command::Reproduce).unwrap();
        assert_eq!(rc.grid, GridSpec { l: 64.0, n: 4096 });
    }
}
