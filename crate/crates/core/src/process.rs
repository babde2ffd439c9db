//! Drifted Brownian paths from the truncated Paley–Wiener series.
//!
//! The noise is rendered as
//!
//! ```text
//! X^u_t = sigma^2 sum_{n <= N} eta_n h_n(t)
//!       = sigma sqrt(2T) / pi * sum_{n <= N} eta_n sin((n - 1/2) pi t / T) / (n - 1/2)
//! ```
//!
//! On the grid `t_i = i T / M` the sine has phase `2 pi (2n - 1) i / (4M)`, so
//! the whole sum is the imaginary part of one inverse FFT of length `4M`
//! whose odd bins carry `eta_n / (n - 1/2)`. Frequencies beyond `4M` alias
//! exactly onto `(2n - 1) mod 4M`.

use std::fmt;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::basis::{BasisSpec, SpectralCoeffs};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::StreamKey;

type Rate = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Deterministic drift `u_t = int_0^t u'(s) ds`.
#[derive(Clone)]
pub enum DriftSpec {
    Zero,
    /// `u_t = alpha t`.
    Linear { alpha: f64 },
    /// Arbitrary square-integrable rate `u'`.
    Custom { label: String, rate: Rate },
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftSpec::Zero => write!(f, "Zero"),
            DriftSpec::Linear { alpha } => f.debug_struct("Linear").field("alpha", alpha).finish(),
            DriftSpec::Custom { label, .. } => f.debug_struct("Custom").field("label", label).finish(),
        }
    }
}

impl DriftSpec {
    pub fn linear(alpha: f64) -> Self {
        DriftSpec::Linear { alpha }
    }

    pub fn custom(label: impl Into<String>, rate: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DriftSpec::Custom {
            label: label.into(),
            rate: Arc::new(rate),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DriftSpec::Zero => "zero".into(),
            DriftSpec::Linear { alpha } => format!("linear({alpha})"),
            DriftSpec::Custom { label, .. } => label.clone(),
        }
    }

    /// `u'(t)`.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            DriftSpec::Zero => 0.0,
            DriftSpec::Linear { alpha } => *alpha,
            DriftSpec::Custom { rate, .. } => rate(t),
        }
    }

    /// `u(t_i)` on the grid; exact for zero and linear drifts, cumulative
    /// trapezoid of `u'` otherwise.
    pub fn values(&self, grid: &TimeGrid) -> Vec<f64> {
        match self {
            DriftSpec::Zero => vec![0.0; grid.len()],
            DriftSpec::Linear { alpha } => grid.sample(|t| alpha * t),
            DriftSpec::Custom { rate, .. } => grid.cumulative_trapezoid(&grid.sample(|t| rate(t))),
        }
    }

    /// Checks that `int u'^2 dt` is finite on the grid.
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let energy = grid.integrate(|t| self.rate(t).powi(2));
        if energy.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("drift", format!("{} is not square integrable on the grid", self.label())))
        }
    }

    /// `<u, h_k>` for `k = 1..=n`: closed form for linear drift, trapezoid
    /// quadrature otherwise.
    pub fn coefficients(&self, basis: &BasisSpec, n: usize, grid: &TimeGrid) -> Result<Vec<f64>> {
        (1..=n)
            .map(|k| match self {
                DriftSpec::Zero => Ok(0.0),
                DriftSpec::Linear { alpha } => basis.linear_drift_coeff(*alpha, k),
                DriftSpec::Custom { rate, .. } => basis.drift_coeff(|t| rate(t), k, grid),
            })
            .collect()
    }
}

/// Sampled path on a grid. Every path starts at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::invalid("path", format!("must start at 0, got {}", values[0])));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Standard Gaussian series coefficients with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub eta: Vec<f64>,
    pub seed: u64,
    pub replicate: u64,
}

pub fn simulate_noise(basis: &BasisSpec, key: StreamKey, replicate: u64) -> NoiseDraw {
    NoiseDraw {
        eta: key.normals(replicate, basis.terms()),
        seed: key.seed,
        replicate,
    }
}

/// Reusable FFT renderer for one `(basis, grid)` pair.
pub struct PathRenderer {
    basis: BasisSpec,
    grid: TimeGrid,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl PathRenderer {
    pub fn new(basis: BasisSpec, grid: TimeGrid) -> Result<Self> {
        if basis.horizon() != grid.horizon() {
            return Err(Error::GridMismatch(format!(
                "basis horizon {} differs from grid horizon {}",
                basis.horizon(),
                grid.horizon()
            )));
        }
        let len = 4 * grid.intervals();
        let fft = FftPlanner::new().plan_fft_inverse(len);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            basis,
            grid,
            fft,
            buffer: vec![Complex::default(); len],
            scratch,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Noise part `X^u(t_i)` for the coefficients `eta`.
    pub fn noise(&mut self, eta: &[f64]) -> Vec<f64> {
        let len = self.buffer.len();
        self.buffer.iter_mut().for_each(|c| *c = Complex::default());
        for (idx, e) in eta.iter().enumerate() {
            let half = idx as f64 + 0.5;
            let bin = (2 * idx + 1) % len;
            self.buffer[bin].re += e / half;
        }
        self.fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
        let scale = self.basis.sigma() * (2.0 * self.basis.horizon()).sqrt() / PI;
        let mut out: Vec<f64> = self.buffer[..self.grid.len()].iter().map(|c| scale * c.im).collect();
        out[0] = 0.0;
        out
    }

    pub fn render(&mut self, draw: &NoiseDraw, drift: &DriftSpec) -> Path {
        let mut values = self.noise(&draw.eta);
        for (x, u) in values.iter_mut().zip(drift.values(&self.grid)) {
            *x += u;
        }
        values[0] = 0.0;
        Path {
            grid: self.grid,
            values,
        }
    }
}

/// `u(t_i) + sigma^2 sum_{n <= N} eta_n h_n(t_i)`.
pub fn render_path(basis: &BasisSpec, draw: &NoiseDraw, drift: &DriftSpec, grid: &TimeGrid) -> Result<Path> {
    Ok(PathRenderer::new(*basis, *grid)?.render(draw, drift))
}

/// Precomputed cell averages of `h_k'` for fast coefficient extraction.
#[derive(Debug, Clone)]
pub struct CoeffExtractor {
    basis: BasisSpec,
    grid: TimeGrid,
    table: Vec<Vec<f64>>,
}

impl CoeffExtractor {
    pub fn new(basis: BasisSpec, grid: TimeGrid, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "extraction order must be >= 1"));
        }
        if n > basis.terms() {
            return Err(Error::OrderTooLarge {
                requested: n,
                available: basis.terms(),
            });
        }
        // cell averages of h_k' make the sum exact on the piecewise-linear
        // interpolant of the path
        let dt = grid.step();
        let table = (1..=n)
            .map(|k| {
                let h = grid.sample(|t| basis.h(k, t).expect("k >= 1"));
                h.windows(2).map(|w| (w[1] - w[0]) / dt).collect()
            })
            .collect();
        Ok(Self { basis, grid, table })
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    /// `c_k = sum_i (h_k(t_{i+1}) - h_k(t_i)) / dt * (X(t_{i+1}) - X(t_i))`.
    pub fn extract(&self, path: &Path) -> Result<SpectralCoeffs> {
        if path.grid != self.grid {
            return Err(Error::GridMismatch("path grid differs from extractor grid".into()));
        }
        let incr: Vec<f64> = path.values.windows(2).map(|w| w[1] - w[0]).collect();
        let raw = self
            .table
            .iter()
            .map(|row| row.iter().zip(&incr).map(|(h, d)| h * d).sum())
            .collect();
        SpectralCoeffs::from_raw(self.basis, raw)
    }
}

pub fn extract_coeffs(basis: &BasisSpec, path: &Path, n: usize) -> Result<SpectralCoeffs> {
    CoeffExtractor::new(*basis, path.grid, n)?.extract(path)
}

/// `log Lambda(u) = int (u'/sigma^2) dX - 1/2 int u'^2/sigma^2 dt` with a
/// left-endpoint sum for the stochastic integral.
pub fn log_girsanov(sigma: f64, drift: &DriftSpec, path: &Path) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be finite and > 0, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let rate = path.grid.sample(|t| drift.rate(t) / s2);
    let stochastic = path.grid.ito_sum(&rate, &path.values);
    let energy = path.grid.integrate(|t| drift.rate(t).powi(2) / s2);
    Ok(stochastic - 0.5 * energy)
}

/// Covariance of the series truncated at `basis.terms()`:
/// `sigma^4 sum_{n <= N} h_n(s) h_n(t)`.
pub fn truncated_covariance(basis: &BasisSpec, s: f64, t: f64) -> f64 {
    let s4 = basis.sigma().powi(4);
    let mut acc = 0.0;
    for n in 1..=basis.terms() {
        acc += basis.h(n, s).unwrap_or(0.0) * basis.h(n, t).unwrap_or(0.0);
    }
    s4 * acc
}
