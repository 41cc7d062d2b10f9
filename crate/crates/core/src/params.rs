//! Model parameters for the focusing 1D fractional NLS
//! `i u_t - (-d_xx)^s u + |u|^{2 sigma} u = 0` and the quantities derived
//! from the two Lagrange multipliers of the relative-equilibrium problem.

use std::fmt;

use thiserror::Error;

/// Which profile equation a run solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// `u = rho(x) e^{iAx}` with `rho` solving `(M + a) rho = |rho|^{2 sigma} rho`.
    LinearPhase,
    /// The full real system `Q (v, w)^T = G(v, w)`.
    Coupled,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::LinearPhase => "linear_phase",
            ProfileKind::Coupled => "coupled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear_phase" | "linear-phase" | "scalar" => Some(ProfileKind::LinearPhase),
            "coupled" => Some(ProfileKind::Coupled),
            _ => None,
        }
    }
}

/// One violated admissibility bound.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `s` must lie in `(1/2, 1]`.
    Order { s: f64 },
    /// `sigma` must be positive.
    Exponent { sigma: f64 },
    /// `lambda1` must be positive.
    PhaseMultiplier { lambda1: f64 },
    /// `|lambda2|` must stay strictly below the limiting speed.
    Speed { lambda2: f64, limit: f64 },
    /// A value that is not a finite number.
    NotFinite { name: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Order { s } => write!(f, "s = {s} is outside (0.5, 1]"),
            Violation::Exponent { sigma } => write!(f, "sigma = {sigma} must be > 0"),
            Violation::PhaseMultiplier { lambda1 } => {
                write!(f, "lambda1 = {lambda1} must be > 0")
            }
            Violation::Speed { lambda2, limit } => write!(
                f,
                "|lambda2| = {} must be below the limiting speed c(lambda1) = {:.4}",
                lambda2.abs(),
                limit
            ),
            Violation::NotFinite { name } => write!(f, "{name} is not a finite number"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("fractional order s = {0} is outside (0.5, 1]")]
    OrderOutOfRange(f64),
    #[error("lambda1 = {0} must be > 0")]
    NonPositivePhaseMultiplier(f64),
    #[error("parameters rejected: {}", join_violations(.0))]
    Rejected(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

fn check_order(s: f64) -> Result<(), ParamError> {
    if s.is_finite() && s > 0.5 && s <= 1.0 {
        Ok(())
    } else {
        Err(ParamError::OrderOutOfRange(s))
    }
}

/// Limiting speed `c(lambda1) = 2s (lambda1 / (2s - 1))^{(2s-1)/(2s)}`.
///
/// For `|lambda2| < c(lambda1)` both eigenvalues of the matrix symbol of `Q`
/// stay positive on the whole real line.
pub fn limiting_speed(s: f64, lambda1: f64) -> Result<f64, ParamError> {
    check_order(s)?;
    if !(lambda1.is_finite() && lambda1 > 0.0) {
        return Err(ParamError::NonPositivePhaseMultiplier(lambda1));
    }
    let q = 2.0 * s - 1.0;
    Ok(2.0 * s * (lambda1 / q).powf(q / (2.0 * s)))
}

/// Phase slope `A` solving `lambda2 = 2s |A|^{2s-2} A`.
pub fn phase_slope(s: f64, lambda2: f64) -> Result<f64, ParamError> {
    check_order(s)?;
    if lambda2 == 0.0 {
        return Ok(0.0);
    }
    let mag = (lambda2.abs() / (2.0 * s)).powf(1.0 / (2.0 * s - 1.0));
    Ok(mag.copysign(lambda2))
}

/// Spectral shift `a = lambda1 - (2s - 1) |A|^{2s}`.
pub fn spectral_shift(s: f64, lambda1: f64, phase_slope: f64) -> f64 {
    lambda1 - (2.0 * s - 1.0) * phase_slope.abs().powf(2.0 * s)
}

/// Raw model parameters as read from a config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub s: f64,
    pub sigma: f64,
    pub lambda1: f64,
    /// Second multiplier, equal to the wave speed `c_s`.
    pub lambda2: f64,
    pub kind: ProfileKind,
}

impl ProblemParams {
    pub fn new(s: f64, sigma: f64, lambda1: f64, lambda2: f64, kind: ProfileKind) -> Self {
        Self {
            s,
            sigma,
            lambda1,
            lambda2,
            kind,
        }
    }

    pub fn linear_phase(s: f64, sigma: f64, lambda1: f64, lambda2: f64) -> Self {
        Self::new(s, sigma, lambda1, lambda2, ProfileKind::LinearPhase)
    }

    pub fn coupled(s: f64, sigma: f64, lambda1: f64, lambda2: f64) -> Self {
        Self::new(s, sigma, lambda1, lambda2, ProfileKind::Coupled)
    }

    /// Checks every bound and reports all violations at once.
    ///
    /// A negative speed is mapped to the positive-speed problem: if
    /// `(lambda2, v, w)` solves the profile system then so does
    /// `(-lambda2, w, v)`. The returned parameters carry `|lambda2|` and the
    /// `mirrored` flag.
    pub fn validate(&self) -> Result<CheckedParams, ParamError> {
        let mut violations = Vec::new();
        for (name, value) in [
            ("s", self.s),
            ("sigma", self.sigma),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ] {
            if !value.is_finite() {
                violations.push(Violation::NotFinite { name });
            }
        }
        if !violations.is_empty() {
            return Err(ParamError::Rejected(violations));
        }
        let order_ok = self.s > 0.5 && self.s <= 1.0;
        if !order_ok {
            violations.push(Violation::Order { s: self.s });
        }
        if self.sigma <= 0.0 {
            violations.push(Violation::Exponent { sigma: self.sigma });
        }
        if self.lambda1 <= 0.0 {
            violations.push(Violation::PhaseMultiplier {
                lambda1: self.lambda1,
            });
        }
        let mut limit = f64::NAN;
        if order_ok && self.lambda1 > 0.0 {
            limit = limiting_speed(self.s, self.lambda1)?;
            if self.lambda2.abs() >= limit {
                violations.push(Violation::Speed {
                    lambda2: self.lambda2,
                    limit,
                });
            }
        }
        if !violations.is_empty() {
            return Err(ParamError::Rejected(violations));
        }
        let mirrored = self.lambda2 < 0.0;
        let canonical = ProblemParams {
            lambda2: self.lambda2.abs(),
            ..*self
        };
        let slope = phase_slope(self.s, canonical.lambda2)?;
        Ok(CheckedParams {
            params: canonical,
            original_lambda2: self.lambda2,
            mirrored,
            limit,
            phase_slope: slope,
            shift: spectral_shift(self.s, self.lambda1, slope),
        })
    }
}

/// Parameters that passed validation, with derived quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckedParams {
    /// Canonical parameters, `lambda2 >= 0`.
    pub params: ProblemParams,
    pub original_lambda2: f64,
    /// The caller asked for a negative speed; swap `(v, w)` of a canonical
    /// solution to recover it.
    pub mirrored: bool,
    /// `c(lambda1)`.
    pub limit: f64,
    /// `A` for the canonical speed.
    pub phase_slope: f64,
    /// `a` for the canonical speed.
    pub shift: f64,
}

impl CheckedParams {
    pub fn s(&self) -> f64 {
        self.params.s
    }

    pub fn sigma(&self) -> f64 {
        self.params.sigma
    }

    pub fn lambda1(&self) -> f64 {
        self.params.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.params.lambda2
    }

    pub fn linear_phase(&self) -> LinearPhaseParams {
        LinearPhaseParams {
            base: self.params,
            phase_slope: self.phase_slope,
            shift: self.shift,
        }
    }

    /// Distance to the limiting speed, `c(lambda1) - c_s`.
    pub fn speed_gap(&self) -> f64 {
        self.limit - self.params.lambda2
    }

    /// Key/value pairs echoed into output metadata headers.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let p = &self.params;
        vec![
            ("s".into(), format!("{:e}", p.s)),
            ("sigma".into(), format!("{:e}", p.sigma)),
            ("lambda1".into(), format!("{:e}", p.lambda1)),
            ("lambda2".into(), format!("{:e}", self.original_lambda2)),
            ("kind".into(), p.kind.as_str().to_string()),
            ("mirrored".into(), self.mirrored.to_string()),
            ("limiting_speed".into(), format!("{:e}", self.limit)),
            ("phase_slope".into(), format!("{:e}", self.phase_slope)),
            ("spectral_shift".into(), format!("{:e}", self.shift)),
        ]
    }
}

/// Linear-phase subfamily `u = rho(x) e^{iAx}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPhaseParams {
    pub base: ProblemParams,
    pub phase_slope: f64,
    pub shift: f64,
}

impl LinearPhaseParams {
    pub fn from_params(p: &ProblemParams) -> Result<Self, ParamError> {
        Ok(p.validate()?.linear_phase())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn limiting_speed_values() {
        assert_relative_eq!(limiting_speed(0.75, 1.0).unwrap(), 1.8899, epsilon = 5e-5);
        assert_relative_eq!(limiting_speed(1.0, 1.0).unwrap(), 2.0, epsilon = 1e-15);
        // 1.2 * 5^(1/6)
        assert_relative_eq!(
            limiting_speed(0.6, 1.0).unwrap(),
            1.2 * 5f64.powf(1.0 / 6.0),
            max_relative = 1e-14
        );
        assert_relative_eq!(limiting_speed(0.6, 1.0).unwrap(), 1.5692, epsilon = 5e-5);
    }

    #[test]
    fn limiting_speed_classical_is_two_sqrt() {
        for i in 1..50 {
            let lam = 0.1 * f64::from(i);
            assert_relative_eq!(
                limiting_speed(1.0, lam).unwrap(),
                2.0 * lam.sqrt(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn limiting_speed_increasing_in_lambda1() {
        for &s in &[0.55, 0.75, 0.9, 1.0] {
            let vals: Vec<f64> = (1..=100)
                .map(|i| limiting_speed(s, 0.05 * f64::from(i)).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn limiting_speed_domain_errors() {
        assert!(matches!(
            limiting_speed(0.5, 1.0),
            Err(ParamError::OrderOutOfRange(_))
        ));
        assert!(limiting_speed(1.2, 1.0).is_err());
        assert!(matches!(
            limiting_speed(0.75, 0.0),
            Err(ParamError::NonPositivePhaseMultiplier(_))
        ));
    }

    #[test]
    fn phase_slope_values() {
        assert_relative_eq!(phase_slope(1.0, 1.3).unwrap(), 0.65, max_relative = 1e-15);
        assert_eq!(phase_slope(0.75, 0.0).unwrap(), 0.0);
        assert_relative_eq!(phase_slope(0.75, 1.0).unwrap(), 4.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(phase_slope(0.75, -1.0).unwrap(), -4.0 / 9.0, max_relative = 1e-14);
        assert!(phase_slope(0.5, 1.0).is_err());
    }

    #[test]
    fn phase_slope_reproduces_speed() {
        for &s in &[0.55, 0.6, 0.75, 0.9, 1.0] {
            for &c in &[-1.7, -0.3, 0.01, 0.5, 1.0, 1.5] {
                let a = phase_slope(s, c).unwrap();
                let back = 2.0 * s * a.abs().powf(2.0 * s - 1.0) * a.signum();
                assert_relative_eq!(back, c, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn spectral_shift_values() {
        assert_relative_eq!(
            spectral_shift(0.75, 1.0, 4.0 / 9.0),
            1.0 - 4.0 / 27.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(spectral_shift(0.75, 1.0, 4.0 / 9.0), 0.85185, epsilon = 1e-5);
        assert_eq!(spectral_shift(0.75, 1.0, 0.0), 1.0);
        let a = phase_slope(1.0, 1.0).unwrap();
        assert_relative_eq!(spectral_shift(1.0, 1.0, a), 0.75, max_relative = 1e-15);
    }

    #[test]
    fn validate_accepts_and_rejects() {
        let ok = ProblemParams::linear_phase(0.75, 1.0, 1.0, 1.0).validate().unwrap();
        assert!(!ok.mirrored);
        assert_relative_eq!(ok.phase_slope, 4.0 / 9.0, max_relative = 1e-14);
        assert!(ok.shift > 0.0);

        let err = ProblemParams::linear_phase(0.75, 1.0, 1.0, 1.9)
            .validate()
            .unwrap_err();
        match &err {
            ParamError::Rejected(v) => {
                assert_eq!(v.len(), 1);
                assert!(matches!(v[0], Violation::Speed { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("1.8899"));

        assert!(ProblemParams::linear_phase(0.5, 1.0, 1.0, 0.1).validate().is_err());
    }

    #[test]
    fn validate_reports_every_violation() {
        let err = ProblemParams::coupled(0.4, -1.0, -2.0, 0.5).validate().unwrap_err();
        match err {
            ParamError::Rejected(v) => assert_eq!(v.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_speed_is_mirrored() {
        let c = ProblemParams::coupled(0.75, 1.0, 1.0, -1.2).validate().unwrap();
        assert!(c.mirrored);
        assert_eq!(c.lambda2(), 1.2);
        assert_eq!(c.original_lambda2, -1.2);
        assert!(c.phase_slope > 0.0);
    }

    #[test]
    fn shift_positive_inside_window() {
        for &s in &[0.55, 0.75, 1.0] {
            let lim = limiting_speed(s, 1.0).unwrap();
            for i in 0..100 {
                let c = lim * f64::from(i) / 100.0;
                let p = ProblemParams::linear_phase(s, 1.0, 1.0, c).validate().unwrap();
                assert!(p.shift > 0.0, "s={s} c={c} a={}", p.shift);
            }
        }
    }
}
