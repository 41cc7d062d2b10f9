//! Periodic collocation grid, discrete Fourier transforms and Fourier
//! multiplier operators.
//!
//! Samples live on `x_j = -l + j h`, `h = 2l/n`, `j = 0..n`. Spectra are
//! stored in FFT order: slot `k < n/2` holds wavenumber `pi k / l`, slot
//! `k >= n/2` holds `pi (k - n) / l`. Slot `n/2` is the single Nyquist mode.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::params::{LinearPhaseParams, ProblemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid needs an even number of points >= 8, got {0}")]
    BadPointCount(usize),
    #[error("grid half-length must be positive and finite, got {0}")]
    BadHalfLength(f64),
    #[error("fields live on different grids (n={left_n}, l={left_l} vs n={right_n}, l={right_l})")]
    GridMismatch {
        left_n: usize,
        left_l: f64,
        right_n: usize,
        right_l: f64,
    },
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operator '{0}' is a matrix symbol; apply it to a (v, w) pair")]
    NotScalar(String),
    #[error("operator '{0}' is a scalar symbol")]
    NotMatrix(String),
    #[error("operator '{0}' does not map real fields to real fields")]
    NotRealPreserving(String),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

pub struct Grid {
    l: f64,
    n: usize,
    h: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("l", &self.l)
            .field("n", &self.n)
            .field("h", &self.h)
            .finish()
    }
}

impl Grid {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(SpectralError::BadPointCount(n));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(SpectralError::BadHalfLength(l));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            l,
            n,
            h: 2.0 * l / n as f64,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn shared(l: f64, n: usize) -> Result<Arc<Self>> {
        Self::new(l, n).map(Arc::new)
    }

    pub fn half_length(&self) -> f64 {
        self.l
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn point(&self, j: usize) -> f64 {
        -self.l + j as f64 * self.h
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Index of the grid point `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Integer mode number of spectral slot `k`, in `[-n/2, n/2)`.
    pub fn mode(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    pub fn wavenumber(&self, k: usize) -> f64 {
        std::f64::consts::PI * self.mode(k) as f64 / self.l
    }

    /// Wavenumbers in FFT slot order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.wavenumber(k)).collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.l == other.l
    }

    fn check(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(SpectralError::GridMismatch {
                left_n: self.n,
                left_l: self.l,
                right_n: other.n,
                right_l: other.l,
            })
        }
    }

    /// Unnormalized forward DFT, in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse DFT including the `1/n` factor, in place.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    /// Samples a scalar symbol on every slot. With `odd_terms` set, the
    /// Nyquist slot keeps only the even part `(f(xi) + f(-xi)) / 2`, so odd
    /// terms contribute nothing there.
    pub fn sample_symbol(&self, f: impl Fn(f64) -> f64, odd_terms: bool) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n).map(|k| f(self.wavenumber(k))).collect();
        if odd_terms {
            let nq = self.nyquist_index();
            let xi = self.wavenumber(nq);
            out[nq] = 0.5 * (f(xi) + f(-xi));
        }
        out
    }

    /// Applies sampled symbol values to a sample buffer: `F^{-1} diag(sym) F`.
    pub fn apply_sampled(&self, symbol: &[f64], buf: &mut [Complex64]) {
        self.forward(buf);
        for (z, m) in buf.iter_mut().zip(symbol) {
            *z *= *m;
        }
        self.inverse(buf);
    }
}

#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    samples: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Arc<Grid>, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        let samples = (0..grid.len()).map(|j| f(grid.point(j))).collect();
        Self { grid, samples }
    }

    /// `v + i w` from two real fields.
    pub fn from_parts(v: &RealField, w: &RealField) -> Result<Self> {
        v.grid.check(&w.grid)?;
        let samples = v
            .samples
            .iter()
            .zip(&w.samples)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        Ok(Self {
            grid: v.grid.clone(),
            samples,
        })
    }

    pub fn from_spectrum(grid: Arc<Grid>, mut spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: spectrum.len(),
            });
        }
        grid.inverse(&mut spectrum);
        Ok(Self {
            grid,
            samples: spectrum,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.samples.clone();
        self.grid.forward(&mut buf);
        buf
    }

    /// Euclidean norm of the sample vector (no quadrature weight).
    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn real_part(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|z| z.re).collect(),
        }
    }

    pub fn imag_part(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|z| z.im).collect(),
        }
    }

    pub fn modulus(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|z| z.norm()).collect(),
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Index of the largest modulus (first one on ties).
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (j, z) in self.samples.iter().enumerate() {
            let v = z.norm_sqr();
            if v > best_val {
                best_val = v;
                best = j;
            }
        }
        best
    }

    /// `out[j] = self[j - shift]` with periodic wrap.
    pub fn circular_shift(&self, shift: isize) -> Self {
        let n = self.samples.len() as isize;
        let mut out = vec![Complex64::new(0.0, 0.0); self.samples.len()];
        for (j, z) in self.samples.iter().enumerate() {
            let dst = (j as isize + shift).rem_euclid(n) as usize;
            out[dst] = *z;
        }
        Self {
            grid: self.grid.clone(),
            samples: out,
        }
    }

    /// Circular shift placing the modulus peak on `x = 0`.
    pub fn centered(&self) -> Self {
        let shift = self.grid.origin_index() as isize - self.peak_index() as isize;
        self.circular_shift(shift)
    }

    /// `x -> -x` about the grid origin.
    pub fn reflected(&self) -> Self {
        let n = self.samples.len();
        let o = self.grid.origin_index();
        let samples = (0..n).map(|j| self.samples[(2 * o + n - j) % n]).collect();
        Self {
            grid: self.grid.clone(),
            samples,
        }
    }

    /// Swaps real and imaginary parts, `(v, w) -> (w, v)`; maps a profile for
    /// speed `c` to one for `-c`.
    pub fn swap_parts(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            samples: self
                .samples
                .iter()
                .map(|z| Complex64::new(z.im, z.re))
                .collect(),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|z| z * c).collect(),
        }
    }

    pub fn linear_combination(a: Complex64, f: &Self, b: Complex64, g: &Self) -> Result<Self> {
        f.grid.check(&g.grid)?;
        Ok(Self {
            grid: f.grid.clone(),
            samples: f
                .samples
                .iter()
                .zip(&g.samples)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.grid.check(&other.grid)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid>,
    samples: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Arc<Grid>, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let samples = (0..grid.len()).map(|j| f(grid.point(j))).collect();
        Self { grid, samples }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            samples: self
                .samples
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect(),
        }
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        self.to_complex().spectrum()
    }

    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn reflected(&self) -> Self {
        let n = self.samples.len();
        let o = self.grid.origin_index();
        let samples = (0..n).map(|j| self.samples[(2 * o + n - j) % n]).collect();
        Self {
            grid: self.grid.clone(),
            samples,
        }
    }

    /// Spectral first derivative (Nyquist mode dropped).
    pub fn derivative(&self) -> RealField {
        let op = MultiplierOp::derivative();
        let out = op
            .apply(&self.to_complex())
            .expect("derivative is a scalar symbol on the field's own grid");
        out.real_part()
    }
}

/// Value of a 2x2 Hermitian symbol `[[d1, off], [conj(off), d2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hermitian2 {
    pub d1: f64,
    pub d2: f64,
    pub off: Complex64,
}

impl Hermitian2 {
    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.d1 + self.d2);
        let half = 0.5 * (self.d1 - self.d2);
        let r = (half * half + self.off.norm_sqr()).sqrt();
        (mean - r, mean + r)
    }

    pub fn determinant(&self) -> f64 {
        self.d1 * self.d2 - self.off.norm_sqr()
    }

    pub fn apply(&self, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
        (
            self.d1 * a + self.off * b,
            self.off.conj() * a + self.d2 * b,
        )
    }

    /// Inverse applied to `(a, b)`; `None` when singular.
    pub fn solve(&self, a: Complex64, b: Complex64) -> Option<(Complex64, Complex64)> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some((
            (self.d2 * a - self.off * b) / det,
            (-self.off.conj() * a + self.d1 * b) / det,
        ))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(f64) -> Hermitian2 + Send + Sync>;

#[derive(Clone)]
pub enum Symbol {
    Scalar(ScalarFn),
    /// Purely imaginary symbol `i f(xi)` (odd derivatives).
    Imaginary(ScalarFn),
    Matrix(MatrixFn),
}

/// Fourier multiplier with a real scalar or 2x2 Hermitian symbol.
#[derive(Clone)]
pub struct MultiplierOp {
    symbol: Symbol,
    tag: String,
    odd_terms: bool,
}

impl fmt::Debug for MultiplierOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiplierOp")
            .field("tag", &self.tag)
            .field("odd_terms", &self.odd_terms)
            .finish()
    }
}

impl MultiplierOp {
    /// `odd_terms` marks symbols with a part odd in `xi`; those drop the
    /// Nyquist coefficient.
    pub fn scalar(
        tag: impl Into<String>,
        odd_terms: bool,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            symbol: Symbol::Scalar(Arc::new(f)),
            tag: tag.into(),
            odd_terms,
        }
    }

    pub fn matrix(
        tag: impl Into<String>,
        odd_terms: bool,
        f: impl Fn(f64) -> Hermitian2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            symbol: Symbol::Matrix(Arc::new(f)),
            tag: tag.into(),
            odd_terms,
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn has_odd_terms(&self) -> bool {
        self.odd_terms
    }

    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    /// Scalar symbol value at `xi`.
    pub fn eval(&self, xi: f64) -> Option<f64> {
        match &self.symbol {
            Symbol::Scalar(f) => Some(f(xi)),
            _ => None,
        }
    }

    pub fn eval_matrix(&self, xi: f64) -> Option<Hermitian2> {
        match &self.symbol {
            Symbol::Matrix(f) => Some(f(xi)),
            _ => None,
        }
    }

    /// Scalar symbol sampled in FFT slot order.
    pub fn sampled(&self, grid: &Grid) -> Result<Vec<f64>> {
        match &self.symbol {
            Symbol::Scalar(f) => Ok(grid.sample_symbol(|xi| f(xi), self.odd_terms)),
            _ => Err(SpectralError::NotScalar(self.tag.clone())),
        }
    }

    /// Matrix symbol sampled in FFT slot order; like [`Grid::sample_symbol`]
    /// the Nyquist slot keeps the even part only.
    pub fn sampled_matrix(&self, grid: &Grid) -> Result<Vec<Hermitian2>> {
        let Symbol::Matrix(f) = &self.symbol else {
            return Err(SpectralError::NotMatrix(self.tag.clone()));
        };
        let mut out: Vec<Hermitian2> = (0..grid.len()).map(|k| f(grid.wavenumber(k))).collect();
        if self.odd_terms {
            let nq = grid.nyquist_index();
            let xi = grid.wavenumber(nq);
            let (a, b) = (f(xi), f(-xi));
            out[nq] = Hermitian2 {
                d1: 0.5 * (a.d1 + b.d1),
                d2: 0.5 * (a.d2 + b.d2),
                off: 0.5 * (a.off + b.off),
            };
        }
        Ok(out)
    }

    /// Fractional Laplacian `(-d_xx)^s`, symbol `|xi|^{2s}`.
    pub fn fractional_laplacian(s: f64) -> Self {
        Self::scalar(format!("(-d_xx)^{s}"), false, move |xi: f64| {
            xi.abs().powf(2.0 * s)
        })
    }

    /// `|D|^p`, symbol `|xi|^p`.
    pub fn abs_derivative_power(p: f64) -> Self {
        Self::scalar(format!("|D|^{p}"), false, move |xi: f64| xi.abs().powf(p))
    }

    /// `d/dx`, symbol `i xi`.
    pub fn derivative() -> Self {
        Self {
            symbol: Symbol::Imaginary(Arc::new(|xi| xi)),
            tag: "d/dx".into(),
            odd_terms: true,
        }
    }

    /// `M` of the linear-phase profile equation,
    /// `m(xi) = |xi + A|^{2s} - lambda2 xi - |A|^{2s}`.
    pub fn m_symbol(p: &LinearPhaseParams) -> Self {
        let s = p.base.s;
        let c = p.base.lambda2;
        let a = p.phase_slope;
        Self::scalar("m", true, move |xi: f64| {
            (xi + a).abs().powf(2.0 * s) - c * xi - a.abs().powf(2.0 * s)
        })
    }

    /// `M + a` of the linear-phase profile equation.
    pub fn shifted_m_symbol(p: &LinearPhaseParams) -> Self {
        let s = p.base.s;
        let c = p.base.lambda2;
        let a = p.phase_slope;
        let shift = p.shift;
        Self::scalar("m+a", true, move |xi: f64| {
            (xi + a).abs().powf(2.0 * s) - c * xi - a.abs().powf(2.0 * s) + shift
        })
    }

    /// The 2x2 operator `Q` acting on `(v, w)`:
    /// `[[lambda1 + |xi|^{2s}, -i lambda2 xi], [i lambda2 xi, lambda1 + |xi|^{2s}]]`.
    pub fn q_symbol(p: &ProblemParams) -> Self {
        let s = p.s;
        let l1 = p.lambda1;
        let l2 = p.lambda2;
        Self::matrix("Q", true, move |xi: f64| {
            let d = l1 + xi.abs().powf(2.0 * s);
            Hermitian2 {
                d1: d,
                d2: d,
                off: Complex64::new(0.0, -l2 * xi),
            }
        })
    }

    /// `Q` written for `u = v + i w`: scalar symbol
    /// `lambda_-(xi) = |xi|^{2s} + lambda1 - lambda2 xi`.
    pub fn q_complex_symbol(p: &ProblemParams) -> Self {
        let s = p.s;
        let l1 = p.lambda1;
        let l2 = p.lambda2;
        Self::scalar("Q(u)", true, move |xi: f64| {
            xi.abs().powf(2.0 * s) + l1 - l2 * xi
        })
    }

    /// Applies a scalar symbol to a complex field.
    pub fn apply(&self, f: &ComplexField) -> Result<ComplexField> {
        let grid = f.grid();
        let mut buf = f.samples.clone();
        grid.forward(&mut buf);
        match &self.symbol {
            Symbol::Scalar(sym) => {
                let values = grid.sample_symbol(|xi| sym(xi), self.odd_terms);
                for (z, m) in buf.iter_mut().zip(values) {
                    *z *= m;
                }
            }
            Symbol::Imaginary(sym) => {
                for (k, z) in buf.iter_mut().enumerate() {
                    *z *= Complex64::new(0.0, sym(grid.wavenumber(k)));
                }
                if self.odd_terms {
                    buf[grid.nyquist_index()] = Complex64::new(0.0, 0.0);
                }
            }
            Symbol::Matrix(_) => return Err(SpectralError::NotScalar(self.tag.clone())),
        }
        grid.inverse(&mut buf);
        Ok(ComplexField {
            grid: grid.clone(),
            samples: buf,
        })
    }

    /// Applies a scalar symbol to a real field; the symbol must be even.
    pub fn apply_real(&self, f: &RealField) -> Result<RealField> {
        if self.odd_terms {
            return Err(SpectralError::NotRealPreserving(self.tag.clone()));
        }
        Ok(self.apply(&f.to_complex())?.real_part())
    }

    /// Applies a matrix symbol to the pair `(v, w)`.
    pub fn apply_pair(&self, v: &RealField, w: &RealField) -> Result<(RealField, RealField)> {
        let Symbol::Matrix(_) = &self.symbol else {
            return Err(SpectralError::NotMatrix(self.tag.clone()));
        };
        v.grid.check(&w.grid)?;
        let grid = v.grid();
        let (mut vh, mut wh) = split_pair_spectra(grid, &ComplexField::from_parts(v, w)?);
        let sampled = self.sampled_matrix(grid)?;
        for k in 0..grid.len() {
            let (a, b) = sampled[k].apply(vh[k], wh[k]);
            vh[k] = a;
            wh[k] = b;
        }
        grid.inverse(&mut vh);
        grid.inverse(&mut wh);
        Ok((
            RealField {
                grid: grid.clone(),
                samples: vh.iter().map(|z| z.re).collect(),
            },
            RealField {
                grid: grid.clone(),
                samples: wh.iter().map(|z| z.re).collect(),
            },
        ))
    }
}

/// Spectra of `v` and `w` from one complex transform of `u = v + i w`.
pub fn split_pair_spectra(grid: &Grid, u: &ComplexField) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = grid.len();
    let uh = u.spectrum();
    let mut vh = vec![Complex64::new(0.0, 0.0); n];
    let mut wh = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let mirror = uh[(n - k) % n].conj();
        vh[k] = 0.5 * (uh[k] + mirror);
        wh[k] = Complex64::new(0.0, -0.5) * (uh[k] - mirror);
    }
    (vh, wh)
}

/// Discrete mass, momentum and Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariants {
    /// `I1 = 1/2 int |u|^2`.
    pub mass: f64,
    /// `I2 = 1/2 int (v w_x - w v_x)`.
    pub momentum: f64,
    /// `H = int 1/2 ||D|^s u|^2 - |u|^{2 sigma + 2} / (2 sigma + 2)`.
    pub hamiltonian: f64,
}

/// Equal-weight quadrature of the three conserved quantities, derivatives
/// taken spectrally.
pub fn invariants(u: &ComplexField, s: f64, sigma: f64) -> Invariants {
    let grid = u.grid();
    let h = grid.spacing();
    let n = grid.len();
    let mut spec = u.spectrum();
    let mut dx = spec.clone();
    for (k, z) in dx.iter_mut().enumerate() {
        *z *= Complex64::new(0.0, grid.wavenumber(k));
    }
    dx[grid.nyquist_index()] = Complex64::new(0.0, 0.0);
    grid.inverse(&mut dx);
    for (k, z) in spec.iter_mut().enumerate() {
        *z *= grid.wavenumber(k).abs().powf(s);
    }
    grid.inverse(&mut spec);

    let mut mass = 0.0;
    let mut momentum = 0.0;
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for j in 0..n {
        let z = u.samples[j];
        let d = dx[j];
        let m2 = z.norm_sqr();
        mass += m2;
        // v w_x - w v_x = Im(conj(u) u_x)
        momentum += z.re * d.im - z.im * d.re;
        kinetic += spec[j].norm_sqr();
        potential += m2.powf(sigma + 1.0);
    }
    Invariants {
        mass: 0.5 * h * mass,
        momentum: 0.5 * h * momentum,
        hamiltonian: h * (0.5 * kinetic - potential / (2.0 * sigma + 2.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(l: f64, n: usize) -> Arc<Grid> {
        Grid::shared(l, n).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = grid(4.0, 16);
        assert_relative_eq!(g.spacing() * 16.0, 8.0);
        assert_eq!(g.point(0), -4.0);
        assert_eq!(g.point(g.origin_index()), 0.0);
        let ks = g.wavenumbers();
        assert_relative_eq!(ks[1], std::f64::consts::PI / 4.0);
        assert_relative_eq!(ks[g.nyquist_index()], -std::f64::consts::PI * 8.0 / 4.0);
        // symmetric except Nyquist
        for k in 1..8 {
            assert_relative_eq!(ks[k], -ks[16 - k]);
        }
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(1.0, 7).is_err());
        assert!(Grid::new(1.0, 6).is_err());
        assert!(Grid::new(0.0, 16).is_err());
        assert!(Grid::new(f64::NAN, 16).is_err());
    }

    #[test]
    fn constant_is_annihilated() {
        let g = grid(8.0, 32);
        let f = ComplexField::from_fn(g, |_| Complex64::new(2.5, -1.0));
        let out = MultiplierOp::fractional_laplacian(0.75).apply(&f).unwrap();
        assert!(out.norm() < 1e-13);
    }

    #[test]
    fn fourier_mode_is_eigenfunction() {
        let g = grid(5.0, 64);
        for m in [-7i64, -1, 3, 12] {
            let xi = std::f64::consts::PI * m as f64 / 5.0;
            let f = ComplexField::from_fn(g.clone(), |x| Complex64::new(0.0, xi * x).exp());
            let out = MultiplierOp::fractional_laplacian(0.75).apply(&f).unwrap();
            let expect = f.scaled(Complex64::new(xi.abs().powf(1.5), 0.0));
            assert!(out.max_abs_diff(&expect).unwrap() < 1e-11);
        }
    }

    #[test]
    fn round_trip_and_conjugate_symmetry() {
        let g = grid(10.0, 128);
        let f = RealField::from_fn(g.clone(), |x| (-(x - 1.0).powi(2)).exp() + 0.1 * x.sin());
        let spec = f.spectrum();
        for k in 1..128 {
            assert!((spec[k] - spec[128 - k].conj()).norm() < 1e-12);
        }
        let back = ComplexField::from_spectrum(g, spec).unwrap();
        let err = back.max_abs_diff(&f.to_complex()).unwrap();
        assert!(err / f.norm() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = RealField::from_fn(grid(4.0, 16), |x| x);
        let b = RealField::from_fn(grid(4.0, 32), |x| x);
        let op = MultiplierOp::q_symbol(&ProblemParams::coupled(0.75, 1.0, 1.0, 1.0));
        assert!(matches!(
            op.apply_pair(&a, &b),
            Err(SpectralError::GridMismatch { .. })
        ));
    }

    #[test]
    fn matrix_symbol_rejects_scalar_use() {
        let g = grid(4.0, 16);
        let op = MultiplierOp::q_symbol(&ProblemParams::coupled(0.75, 1.0, 1.0, 1.0));
        assert!(op.apply(&ComplexField::zeros(g)).is_err());
    }

    #[test]
    fn odd_symbol_cannot_act_on_real_fields() {
        let g = grid(4.0, 16);
        let f = RealField::from_fn(g, |x| x.cos());
        assert!(MultiplierOp::derivative().apply_real(&f).is_err());
        assert!(MultiplierOp::fractional_laplacian(0.6).apply_real(&f).is_ok());
    }

    #[test]
    fn derivative_of_sine() {
        let g = grid(std::f64::consts::PI, 32);
        let f = RealField::from_fn(g.clone(), |x| (3.0 * x).sin());
        let d = f.derivative();
        for (j, v) in d.samples().iter().enumerate() {
            assert!((v - 3.0 * (3.0 * g.point(j)).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn m_symbol_values() {
        let lp = ProblemParams::linear_phase(0.75, 1.0, 1.0, 1.0)
            .validate()
            .unwrap()
            .linear_phase();
        let m = MultiplierOp::m_symbol(&lp);
        assert!(m.eval(0.0).unwrap().abs() < 1e-15);
        let eps = 1e-5;
        let slope = (m.eval(eps).unwrap() - m.eval(-eps).unwrap()) / (2.0 * eps);
        assert!(slope.abs() < 1e-9);
        let expect = (13.0f64 / 9.0).powf(1.5) - 1.0 - (4.0f64 / 9.0).powf(1.5);
        assert_relative_eq!(m.eval(1.0).unwrap(), expect, max_relative = 1e-14);
        assert_relative_eq!(m.eval(1.0).unwrap(), 0.4397, epsilon = 5e-5);
    }

    #[test]
    fn m_symbol_classical_limit() {
        let lp = ProblemParams::linear_phase(1.0, 1.0, 1.0, 1.3)
            .validate()
            .unwrap()
            .linear_phase();
        let m = MultiplierOp::m_symbol(&lp);
        for &xi in &[-3.0, -0.4, 0.0, 0.7, 5.0] {
            assert_relative_eq!(m.eval(xi).unwrap(), xi * xi, epsilon = 1e-12);
        }
    }

    #[test]
    fn shifted_m_positive_on_grid() {
        let g = grid(64.0, 4096);
        for &c in &[0.5, 1.0, 1.5, 1.85] {
            let lp = ProblemParams::linear_phase(0.75, 1.0, 1.0, c)
                .validate()
                .unwrap()
                .linear_phase();
            let sym = MultiplierOp::shifted_m_symbol(&lp);
            for xi in g.wavenumbers() {
                assert!(sym.eval(xi).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn q_symbol_eigenvalues() {
        let p = ProblemParams::coupled(0.75, 1.0, 1.0, 1.0);
        let q = MultiplierOp::q_symbol(&p);
        let (lo, hi) = q.eval_matrix(0.0).unwrap().eigenvalues();
        assert_relative_eq!(lo, 1.0);
        assert_relative_eq!(hi, 1.0);
        let (lo, hi) = q.eval_matrix(1.0).unwrap().eigenvalues();
        assert_relative_eq!(lo, 1.0, epsilon = 1e-14);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-14);
        let q0 = MultiplierOp::q_symbol(&ProblemParams::coupled(0.75, 1.0, 1.0, 0.0));
        let m = q0.eval_matrix(2.0).unwrap();
        assert_eq!(m.off.norm(), 0.0);
        assert_relative_eq!(m.d1, 2f64.powf(1.5) + 1.0);
    }

    #[test]
    fn q_symbol_bounds_on_grid() {
        let g = grid(64.0, 4096);
        for &c in &[0.25, 1.0, 1.8] {
            let p = ProblemParams::coupled(0.75, 1.0, 1.0, c);
            let q = MultiplierOp::q_symbol(&p);
            for xi in g.wavenumbers() {
                let mat = q.eval_matrix(xi).unwrap();
                let (lo, hi) = mat.eigenvalues();
                let base = xi.abs().powf(1.5);
                assert!(lo > 0.0);
                assert_relative_eq!(lo, base + 1.0 - c * xi.abs(), epsilon = 1e-10);
                assert!(hi < 2.0 * 1.0 + 2.0 * base);
                // lower bound with alpha1 = 1/2 > 0 when strictly inside the window
                assert!(lo + hi > 0.0);
            }
        }
    }

    #[test]
    fn pair_and_complex_forms_agree() {
        let g = grid(16.0, 256);
        let p = ProblemParams::coupled(0.75, 1.0, 1.0, 1.2);
        let v = RealField::from_fn(g.clone(), |x| (1.0 / x.cosh()) * (0.3 * x).cos());
        let w = RealField::from_fn(g.clone(), |x| (1.0 / x.cosh()) * (x * x * 0.1).sin());
        let (qv, qw) = MultiplierOp::q_symbol(&p).apply_pair(&v, &w).unwrap();
        let u = ComplexField::from_parts(&v, &w).unwrap();
        let qu = MultiplierOp::q_complex_symbol(&p).apply(&u).unwrap();
        let pair = ComplexField::from_parts(&qv, &qw).unwrap();
        assert!(pair.max_abs_diff(&qu).unwrap() < 1e-12);
    }

    #[test]
    fn invariants_of_modulated_sech() {
        let g = grid(40.0, 2048);
        let a = 0.7;
        let u = ComplexField::from_fn(g.clone(), |x| {
            Complex64::new(0.0, a * x).exp() / x.cosh()
        });
        let inv = invariants(&u, 0.75, 1.0);
        assert_relative_eq!(inv.mass, 1.0, epsilon = 1e-10);
        // the modulation is not periodic on the box; the mismatch sits where sech ~ 1e-17
        assert_relative_eq!(inv.momentum, a, epsilon = 1e-8);

        let real = ComplexField::from_fn(g.clone(), |x| Complex64::new(1.0 / x.cosh(), 0.0));
        assert!(invariants(&real, 0.75, 1.0).momentum.abs() < 1e-15);

        let zero = invariants(&ComplexField::zeros(g), 0.75, 1.0);
        assert_eq!(zero.mass, 0.0);
        assert_eq!(zero.momentum, 0.0);
        assert_eq!(zero.hamiltonian, 0.0);
    }

    #[test]
    fn reflection_and_shift() {
        let g = grid(4.0, 16);
        let f = ComplexField::from_fn(g.clone(), |x| Complex64::new(x, 0.0));
        let r = f.reflected();
        assert_eq!(r.samples()[g.origin_index()].re, 0.0);
        assert_eq!(r.samples()[g.origin_index() + 1].re, -f.samples()[g.origin_index() + 1].re);
        let s = f.circular_shift(3).circular_shift(-3);
        assert_eq!(s.max_abs_diff(&f).unwrap(), 0.0);
    }
}
