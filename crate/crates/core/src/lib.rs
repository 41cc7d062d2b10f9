//! Solitary waves of the one-dimensional focusing fractional nonlinear
//! Schrödinger equation
//!
//! ```text
//! i u_t - (-d_xx)^s u + |u|^{2 sigma} u = 0,    1/2 < s <= 1,
//! ```
//!
//! computed as relative equilibria on a periodic Fourier collocation grid.
//!
//! * [`params`]: model parameters, limiting speed, phase slope and shift.
//! * [`spectral`]: grid, transforms, Fourier multipliers, invariants.
//! * [`petviashvili`]: profile solvers for the linear-phase and coupled equations.
//! * [`accel`]: minimal polynomial extrapolation around the profile iteration.
//! * [`evolve`]: implicit-midpoint time stepping used to validate profiles.
//! * [`analysis`]: decay fits, evenness, phase plane, speed-amplitude scans.
//! * [`io`]: snapshot and CSV formats.

pub mod accel;
pub mod analysis;
pub mod evolve;
pub mod io;
pub mod params;
pub mod petviashvili;
pub mod spectral;

pub use analysis::{DecayFit, PhasePlane, ScanResult, TailModel};
pub use evolve::{EvolutionReport, EvolveConfig};
pub use params::{CheckedParams, LinearPhaseParams, ParamError, ProblemParams, ProfileKind};
pub use petviashvili::{Phase, SolveError, SolveReport, SolverConfig};
pub use spectral::{ComplexField, Grid, MultiplierOp, RealField};
