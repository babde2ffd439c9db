//! Cylindrical functionals `F = f(z_1, ..., z_n)` of the standardized path
//! coordinates `z_i = lambda_i^{-1} X(h_i)`.
//!
//! Because `(Gamma h_i)` is orthogonal in `L^2([0, T], dt)` with norms
//! `lambda_i`, the Malliavin derivative and Laplacian of such a functional
//! reduce to Euclidean calculus in `z`:
//!
//! ```text
//! D_t F = sum_i lambda_i^{-1} (Gamma h_i)(t) d_i f(z)
//! Delta F = sum_i d_i^2 f(z)
//! ||D F||^2_{L^2(dt)} = |grad f(z)|^2
//! ```

use crate::basis::{BasisSpec, SpectralCoeffs};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Slack allowed on `Delta F <= 0`.
pub const SUPERHARMONIC_SLACK: f64 = 1e-12;

/// A positive function of finitely many coordinates.
pub trait CylindricalFunctional {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Analytic `d_i^2 f`, or `None` when only finite differences are
    /// available.
    fn hessian_diag(&self, x: &[f64]) -> Result<Option<Vec<f64>>>;

    /// Euclidean Laplacian; falls back to [`fd_laplacian`].
    fn laplacian(&self, x: &[f64]) -> Result<f64> {
        match self.hessian_diag(x)? {
            Some(d) => Ok(d.iter().sum()),
            None => fd_laplacian(self, x, DEFAULT_FD_STEP),
        }
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::invalid("x", format!("expected {expected} coordinates, got {}", x.len())))
    }
}

/// Central-difference Laplacian
/// `sum_i [f(x + h e_i) - 2 f(x) + f(x - h e_i)] / h^2`.
pub fn fd_laplacian<F: CylindricalFunctional + ?Sized>(f: &F, x: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::invalid("step", format!("must be > 0, got {step}")));
    }
    let centre = f.value(x)?;
    let mut probe = x.to_vec();
    let mut acc = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f.value(&probe)?;
        probe[i] = x[i] - step;
        let down = f.value(&probe)?;
        probe[i] = x[i];
        acc += (up - 2.0 * centre + down) / (step * step);
    }
    Ok(acc)
}

/// `f_{n,a,b}(x) = ||x + b||^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinFamily {
    a: f64,
    b: Vec<f64>,
}

impl SteinFamily {
    pub fn new(a: f64, b: Vec<f64>) -> Result<Self> {
        if b.len() < 3 {
            return Err(Error::invalid("n", format!("dimension must be >= 3, got {}", b.len())));
        }
        if !a.is_finite() {
            return Err(Error::invalid("a", "exponent must be finite"));
        }
        Ok(Self { a, b })
    }

    /// `b = 0`.
    pub fn centred(n: usize, a: f64) -> Result<Self> {
        Self::new(a, vec![0.0; n])
    }

    /// The harmonic member `a = 2 - n`, `b = 0`, which yields the
    /// James–Stein estimator.
    pub fn james_stein(n: usize) -> Result<Self> {
        Self::centred(n, 2.0 - n as f64)
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    fn shifted(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), x)?;
        Ok(x.iter().zip(&self.b).map(|(x, b)| x + b).collect())
    }

    /// `||x + b||^2`, rejecting zero.
    pub fn shifted_norm_sq(&self, x: &[f64]) -> Result<f64> {
        let r2: f64 = self.shifted(x)?.iter().map(|y| y * y).sum();
        if r2 > 0.0 {
            Ok(r2)
        } else {
            Err(Error::Singular)
        }
    }

    /// `Delta sqrt(f) / sqrt(f) = a (n - 2 + a/2) / 2 / ||x + b||^2`.
    pub fn laplacian_ratio_sqrt(&self, x: &[f64]) -> Result<f64> {
        let n = self.n() as f64;
        Ok(self.a * (n - 2.0 + self.a / 2.0) / 2.0 / self.shifted_norm_sq(x)?)
    }

    /// `Delta f / f = a (n + a - 2) / ||x + b||^2`.
    pub fn laplacian_ratio(&self, x: &[f64]) -> Result<f64> {
        let n = self.n() as f64;
        Ok(self.a * (n + self.a - 2.0) / self.shifted_norm_sq(x)?)
    }

    /// `|grad log f|^2 = a^2 / ||x + b||^2`.
    pub fn log_gradient_norm_sq(&self, x: &[f64]) -> Result<f64> {
        Ok(self.a * self.a / self.shifted_norm_sq(x)?)
    }

    /// `sqrt(f)` is superharmonic on `R^n` iff `a` lies in `[4 - 2n, 0]`.
    pub fn sqrt_is_superharmonic(&self) -> bool {
        let n = self.n() as f64;
        (4.0 - 2.0 * n..=0.0).contains(&self.a)
    }

    /// `f` itself is superharmonic iff `a` lies in `[2 - n, 0]`.
    pub fn is_superharmonic(&self) -> bool {
        let n = self.n() as f64;
        (2.0 - n..=0.0).contains(&self.a)
    }

    /// `D_t log F` from the first `n` coordinates of `coeffs`:
    /// `a sum_i lambda_i^{-1} (Gamma h_i)(t) (b_i + z_i) / ||z + b||^2`.
    pub fn dlog(&self, coeffs: &SpectralCoeffs, t: f64) -> Result<f64> {
        let (y, r2) = self.observed(coeffs)?;
        let basis = coeffs.basis();
        let mut acc = 0.0;
        for (i, yi) in y.iter().enumerate() {
            let k = i + 1;
            acc += basis.gamma_action(k, t)? / basis.lambda(k)? * yi;
        }
        Ok(self.a * acc / r2)
    }

    /// [`SteinFamily::dlog`] on every point of a precomputed table.
    pub fn dlog_on_grid(&self, coeffs: &SpectralCoeffs, table: &GradientTable) -> Result<Vec<f64>> {
        if table.order() < self.n() {
            return Err(Error::OrderTooLarge {
                requested: self.n(),
                available: table.order(),
            });
        }
        let (y, r2) = self.observed(coeffs)?;
        let weights: Vec<f64> = y.iter().map(|v| self.a * v / r2).collect();
        Ok(table.combine(&weights))
    }

    fn observed(&self, coeffs: &SpectralCoeffs) -> Result<(Vec<f64>, f64)> {
        if coeffs.len() < self.n() {
            return Err(Error::OrderTooLarge {
                requested: self.n(),
                available: coeffs.len(),
            });
        }
        let z = coeffs.standardized();
        let y = self.shifted(&z[..self.n()])?;
        let r2 = self.shifted_norm_sq(&z[..self.n()])?;
        Ok((y, r2))
    }
}

impl CylindricalFunctional for SteinFamily {
    fn dim(&self) -> usize {
        self.n()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        if self.a == 0.0 {
            check_dim(self.n(), x)?;
            return Ok(1.0);
        }
        let y = self.shifted(x)?;
        let r2: f64 = y.iter().map(|v| v * v).sum();
        if r2 == 0.0 && self.a < 0.0 {
            return Err(Error::Singular);
        }
        Ok(r2.powf(self.a / 2.0))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.a == 0.0 {
            check_dim(self.n(), x)?;
            return Ok(vec![0.0; self.n()]);
        }
        let y = self.shifted(x)?;
        let r2 = self.shifted_norm_sq(x)?;
        let scale = self.a * r2.powf(self.a / 2.0 - 1.0);
        Ok(y.iter().map(|v| scale * v).collect())
    }

    fn hessian_diag(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        if self.a == 0.0 {
            check_dim(self.n(), x)?;
            return Ok(Some(vec![0.0; self.n()]));
        }
        let y = self.shifted(x)?;
        let r2 = self.shifted_norm_sq(x)?;
        let first = self.a * r2.powf(self.a / 2.0 - 1.0);
        let second = self.a * (self.a - 2.0) * r2.powf(self.a / 2.0 - 2.0);
        Ok(Some(y.iter().map(|v| first + second * v * v).collect()))
    }
}

/// `sqrt(f)` with derivatives by the chain rule.
#[derive(Debug, Clone)]
pub struct SquareRoot<F>(pub F);

impl<F: CylindricalFunctional> CylindricalFunctional for SquareRoot<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.0.value(x)?.sqrt())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let root = self.value(x)?;
        Ok(self.0.gradient(x)?.iter().map(|g| g / (2.0 * root)).collect())
    }

    fn hessian_diag(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        let Some(h) = self.0.hessian_diag(x)? else {
            return Ok(None);
        };
        let f = self.0.value(x)?;
        let root = f.sqrt();
        let g = self.0.gradient(x)?;
        Ok(Some(
            h.iter()
                .zip(&g)
                .map(|(h, g)| h / (2.0 * root) - g * g / (4.0 * f * root))
                .collect(),
        ))
    }
}

/// `||x||^2`; subharmonic, used as a negative control.
#[derive(Debug, Clone, Copy)]
pub struct SquaredNorm(pub usize);

impl CylindricalFunctional for SquaredNorm {
    fn dim(&self) -> usize {
        self.0
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.0, x)?;
        Ok(x.iter().map(|v| v * v).sum())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.0, x)?;
        Ok(x.iter().map(|v| 2.0 * v).collect())
    }

    fn hessian_diag(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        check_dim(self.0, x)?;
        Ok(Some(vec![2.0; self.0]))
    }
}

/// A constant positive functional.
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl CylindricalFunctional for Constant {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok(self.value)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x)?;
        Ok(vec![0.0; self.dim])
    }

    fn hessian_diag(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        check_dim(self.dim, x)?;
        Ok(Some(vec![0.0; self.dim]))
    }
}

/// A closure with finite-difference derivatives only.
pub struct FnFunctional<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> CylindricalFunctional for FnFunctional<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok((self.f)(x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x)?;
        let h = DEFAULT_FD_STEP;
        let mut probe = x.to_vec();
        let mut g = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            probe[i] = x[i] + h;
            let up = (self.f)(&probe);
            probe[i] = x[i] - h;
            let down = (self.f)(&probe);
            probe[i] = x[i];
            g.push((up - down) / (2.0 * h));
        }
        Ok(g)
    }

    fn hessian_diag(&self, _x: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperharmonicReport {
    pub superharmonic: bool,
    /// Sample with the largest Laplacian.
    pub worst_point: Vec<f64>,
    pub worst_laplacian: f64,
}

/// Checks `Delta f <= SUPERHARMONIC_SLACK` at every sample.
pub fn is_superharmonic<F: CylindricalFunctional + ?Sized>(f: &F, samples: &[Vec<f64>]) -> Result<SuperharmonicReport> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "need at least one sample point"));
    }
    let mut worst: Option<(usize, f64)> = None;
    for (i, x) in samples.iter().enumerate() {
        let lap = f.laplacian(x)?;
        if worst.map_or(true, |(_, w)| lap > w) {
            worst = Some((i, lap));
        }
    }
    let (idx, lap) = worst.expect("nonempty");
    Ok(SuperharmonicReport {
        superharmonic: lap <= SUPERHARMONIC_SLACK,
        worst_point: samples[idx].clone(),
        worst_laplacian: lap,
    })
}

/// Both sides of `4 Delta sqrt(F) / sqrt(F) = 2 Delta F / F - |D log F|^2`,
/// the left from the chain-rule Hessian of `sqrt(f)`, the right from the
/// derivatives of `f`.
pub fn sqrt_laplacian_identity<F: CylindricalFunctional + Clone>(f: &F, x: &[f64]) -> Result<(f64, f64)> {
    let root = SquareRoot(f.clone());
    let lhs = 4.0 * root.laplacian(x)? / root.value(x)?;
    let value = f.value(x)?;
    let log_grad_sq: f64 = f.gradient(x)?.iter().map(|g| (g / value).powi(2)).sum();
    let rhs = 2.0 * f.laplacian(x)? / value - log_grad_sq;
    Ok((lhs, rhs))
}

/// Rows `lambda_i^{-1} (Gamma h_i)(t_j)` for `i = 1..=n` on a grid.
#[derive(Debug, Clone)]
pub struct GradientTable {
    rows: Vec<Vec<f64>>,
}

impl GradientTable {
    pub fn new(basis: &BasisSpec, grid: &TimeGrid, n: usize) -> Result<Self> {
        let rows = (1..=n)
            .map(|k| {
                let inv = 1.0 / basis.lambda(k)?;
                grid.points().map(|t| Ok(inv * basis.gamma_action(k, t)?)).collect()
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    /// `sum_i w_i row_i`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.first().map_or(0, Vec::len)];
        for (w, row) in weights.iter().zip(&self.rows) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += w * r;
            }
        }
        out
    }
}
