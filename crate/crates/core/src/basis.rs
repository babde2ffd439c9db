//! Closed-form eigenbasis of the Brownian covariance operator on `[0, T]`.
//!
//! With `Gamma h = sigma^2 h` and the Cameron–Martin inner product
//! `<h, g>_H = sigma^2 int h' g' dt`, the functions
//!
//! ```text
//! h_k(t)  = sqrt(2T) / (sigma pi (k - 1/2)) * sin((k - 1/2) pi t / T)
//! h_k'(t) = (1 / sigma) sqrt(2 / T) cos((k - 1/2) pi t / T)
//! ```
//!
//! are orthonormal in H, `(Gamma h_k)` is orthogonal in `L^2([0, T], dt)` and
//! `||Gamma h_k||_{L^2} = lambda_k = sigma T / (pi (k - 1/2))`. They solve
//! `Gamma h_k = -lambda_k^2 h_k''` with `h_k'(T) = 0`.
//!
//! Indices are 1-based throughout.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Default truncation order of the series representation.
pub const DEFAULT_TERMS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    sigma: f64,
    horizon: f64,
    terms: usize,
}

impl BasisSpec {
    pub fn new(sigma: f64, horizon: f64, terms: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid("sigma", format!("must be finite and > 0, got {sigma}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("T", format!("must be finite and > 0, got {horizon}")));
        }
        if terms == 0 {
            return Err(Error::invalid("N", "truncation order must be >= 1"));
        }
        Ok(Self {
            sigma,
            horizon,
            terms,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    /// Same basis with a different truncation order.
    pub fn with_terms(&self, terms: usize) -> Result<Self> {
        Self::new(self.sigma, self.horizon, terms)
    }

    fn check_index(k: usize) -> Result<()> {
        if k == 0 {
            Err(Error::invalid("k", "basis indices start at 1"))
        } else {
            Ok(())
        }
    }

    /// Angular frequency `(k - 1/2) pi / T`.
    pub(crate) fn frequency(&self, k: usize) -> f64 {
        (k as f64 - 0.5) * PI / self.horizon
    }

    /// `lambda_k = sigma T / (pi (k - 1/2))`.
    pub fn lambda(&self, k: usize) -> Result<f64> {
        Self::check_index(k)?;
        Ok(self.lambda_unchecked(k))
    }

    pub(crate) fn lambda_unchecked(&self, k: usize) -> f64 {
        self.sigma * self.horizon / (PI * (k as f64 - 0.5))
    }

    pub fn h(&self, k: usize, t: f64) -> Result<f64> {
        Self::check_index(k)?;
        let half = k as f64 - 0.5;
        Ok((2.0 * self.horizon).sqrt() / (self.sigma * PI * half) * (self.frequency(k) * t).sin())
    }

    pub fn hdot(&self, k: usize, t: f64) -> Result<f64> {
        Self::check_index(k)?;
        Ok(self.hdot_unchecked(k, t))
    }

    pub(crate) fn hdot_unchecked(&self, k: usize, t: f64) -> f64 {
        // cos((k - 1/2) pi) is not exactly zero in floating point.
        if t == self.horizon {
            return 0.0;
        }
        (2.0 / self.horizon).sqrt() / self.sigma * (self.frequency(k) * t).cos()
    }

    /// Analytic second derivative `h_k''`.
    pub fn hddot(&self, k: usize, t: f64) -> Result<f64> {
        let w = self.frequency(k);
        Ok(-w * w * self.h(k, t)?)
    }

    /// `(Gamma h_k)(t) = sigma^2 h_k(t)`.
    pub fn gamma_action(&self, k: usize, t: f64) -> Result<f64> {
        Ok(self.sigma * self.sigma * self.h(k, t)?)
    }

    /// Trapezoid approximation of `<u, h_k> = int_0^T u'(s) h_k'(s) ds`.
    pub fn drift_coeff(&self, udot: impl Fn(f64) -> f64, k: usize, grid: &TimeGrid) -> Result<f64> {
        Self::check_index(k)?;
        Ok(grid.integrate(|s| udot(s) * self.hdot_unchecked(k, s)))
    }

    /// Closed form of `<u, h_k>` for the linear drift `u_t = alpha t`.
    pub fn linear_drift_coeff(&self, alpha: f64, k: usize) -> Result<f64> {
        Self::check_index(k)?;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        Ok(sign * alpha * (2.0 * self.horizon).sqrt() / (self.sigma * PI * (k as f64 - 0.5)))
    }

    /// Evaluates `sum_{k <= n} z_k lambda_k^{-1} (Gamma h_k)(t)` for
    /// standardized coordinates `z`.
    pub fn project(&self, coeffs: &SpectralCoeffs, n: usize, t: f64) -> Result<f64> {
        if n > coeffs.len() {
            return Err(Error::OrderTooLarge {
                requested: n,
                available: coeffs.len(),
            });
        }
        let z = coeffs.standardized();
        let mut acc = 0.0;
        for k in 1..=n {
            acc += z[k - 1] / self.lambda_unchecked(k) * self.gamma_action(k, t)?;
        }
        Ok(acc)
    }

    /// [`BasisSpec::project`] at every grid point.
    pub fn project_on_grid(&self, coeffs: &SpectralCoeffs, n: usize, grid: &TimeGrid) -> Result<Vec<f64>> {
        grid.points().map(|t| self.project(coeffs, n, t)).collect()
    }

    /// Recovers the standardized coordinates of a function of the form
    /// `sum_k z_k lambda_k^{-1} Gamma h_k` by `L^2` inner products against
    /// `Gamma h_k`.
    pub fn recover(&self, values: &[f64], n: usize, grid: &TimeGrid) -> Result<SpectralCoeffs> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let mut z = Vec::with_capacity(n);
        for k in 1..=n {
            let g: Vec<f64> = grid.points().map(|t| self.gamma_action(k, t)).collect::<Result<_>>()?;
            let prod: Vec<f64> = g.iter().zip(values).map(|(a, b)| a * b).collect();
            z.push(grid.trapezoid(&prod) / self.lambda_unchecked(k));
        }
        SpectralCoeffs::from_standardized(*self, z)
    }

    /// `max_t |sigma^2 h_k(t) + lambda^2 h_k''(t)| / max_t |h_k(t)|` over the
    /// grid, for a candidate eigenvalue `lambda`.
    pub fn eigen_residual(&self, k: usize, lambda: f64, grid: &TimeGrid) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for t in grid.points() {
            let h = self.h(k, t)?;
            let r = self.gamma_action(k, t)? + lambda * lambda * self.hddot(k, t)?;
            worst = worst.max(r.abs());
            scale = scale.max(h.abs());
        }
        Ok(worst / scale)
    }
}

/// Path coordinates `X(h_k) = int_0^T h_k'(s) dX_s`, `k = 1..=n`.
///
/// The raw coordinates are stored; the standardized form used by the
/// functionals is `z_k = lambda_k^{-1} X(h_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    basis: BasisSpec,
    raw: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn from_raw(basis: BasisSpec, raw: Vec<f64>) -> Result<Self> {
        if raw.len() > basis.terms() {
            return Err(Error::OrderTooLarge {
                requested: raw.len(),
                available: basis.terms(),
            });
        }
        Ok(Self { basis, raw })
    }

    pub fn from_standardized(basis: BasisSpec, z: Vec<f64>) -> Result<Self> {
        let raw = z
            .iter()
            .enumerate()
            .map(|(i, z)| z * basis.lambda_unchecked(i + 1))
            .collect();
        Self::from_raw(basis, raw)
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn standardized(&self) -> Vec<f64> {
        self.raw
            .iter()
            .enumerate()
            .map(|(i, c)| c / self.basis.lambda_unchecked(i + 1))
            .collect()
    }

    /// First `n` coordinates.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::OrderTooLarge {
                requested: n,
                available: self.len(),
            });
        }
        Ok(Self {
            basis: self.basis,
            raw: self.raw[..n].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn unit() -> BasisSpec {
        BasisSpec::new(1.0, 1.0, 50).unwrap()
    }

    #[test]
    fn lambda_values() {
        let b = unit();
        assert!((b.lambda(1).unwrap() - 2.0 / PI).abs() < 1e-15);
        assert!((b.lambda(2).unwrap() - 2.0 / (3.0 * PI)).abs() < 1e-15);
        assert!((b.lambda(1).unwrap() - 0.636620).abs() < 1e-6);
        assert!((b.lambda(2).unwrap() - 0.212207).abs() < 1e-6);
        let b2 = BasisSpec::new(2.0, 1.0, 5).unwrap();
        assert!((b2.lambda(1).unwrap() - 4.0 / PI).abs() < 1e-15);
        assert!(b.lambda(0).is_err());
        for k in 1..50 {
            assert!(b.lambda(k + 1).unwrap() < b.lambda(k).unwrap());
        }
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(BasisSpec::new(0.0, 1.0, 5).is_err());
        assert!(BasisSpec::new(1.0, -1.0, 5).is_err());
        assert!(BasisSpec::new(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn basis_point_values() {
        let b = unit();
        assert!((b.h(1, 1.0).unwrap() - 2.0 * SQRT_2 / PI).abs() < 1e-15);
        assert!((b.h(1, 1.0).unwrap() - 0.900316).abs() < 1e-6);
        for k in 1..10 {
            assert_eq!(b.h(k, 0.0).unwrap(), 0.0);
            assert_eq!(b.hdot(k, 1.0).unwrap(), 0.0);
        }
        let b3 = BasisSpec::new(1.7, 2.5, 5).unwrap();
        assert_eq!(b3.hdot(3, 2.5).unwrap(), 0.0);
        assert!(b.h(0, 0.5).is_err());
    }

    #[test]
    fn hdot_is_derivative_of_h() {
        let b = BasisSpec::new(1.3, 2.0, 10).unwrap();
        let eps = 1e-6;
        for k in [1, 2, 5] {
            for t in [0.1, 0.7, 1.5] {
                let fd = (b.h(k, t + eps).unwrap() - b.h(k, t - eps).unwrap()) / (2.0 * eps);
                assert!((fd - b.hdot(k, t).unwrap()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn gamma_action_values() {
        let b = unit();
        assert!((b.gamma_action(1, 1.0).unwrap() - 2.0 * SQRT_2 / PI).abs() < 1e-15);
        let b2 = BasisSpec::new(2.0, 1.0, 5).unwrap();
        let g = b2.gamma_action(1, 1.0).unwrap();
        assert!((g - 4.0 * b2.h(1, 1.0).unwrap()).abs() < 1e-15);
        assert!((g - 2.0 * (2.0 * SQRT_2 / PI)).abs() < 1e-14);
        // ||Gamma h_k||_{L^2} = lambda_k
        let grid = TimeGrid::new(1.0, 4096).unwrap();
        for k in [1, 3] {
            let sq = grid.integrate(|t| b2.gamma_action(k, t).unwrap().powi(2));
            assert!((sq.sqrt() - b2.lambda(k).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn eigen_relation() {
        let grid = TimeGrid::new(1.0, 512).unwrap();
        for b in [unit(), BasisSpec::new(2.5, 3.0, 30).unwrap()] {
            for k in 1..=20 {
                let r = b.eigen_residual(k, b.lambda(k).unwrap(), &grid).unwrap();
                assert!(r <= 1e-8, "k = {k}: {r}");
            }
        }
    }

    #[test]
    fn orthonormality_at_default_grid() {
        let b = BasisSpec::new(1.5, 2.0, 20).unwrap();
        let grid = TimeGrid::new(2.0, 4096).unwrap();
        let s2 = b.sigma().powi(2);
        for i in 1..=20 {
            for j in i..=20 {
                let ip = s2 * grid.integrate(|t| b.hdot(i, t).unwrap() * b.hdot(j, t).unwrap());
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() <= 1e-6, "H <h_{i}, h_{j}> = {ip}");
                let l2 = grid.integrate(|t| b.gamma_action(i, t).unwrap() * b.gamma_action(j, t).unwrap());
                let expect = if i == j { b.lambda(i).unwrap().powi(2) } else { 0.0 };
                assert!((l2 - expect).abs() <= 1e-6, "L2 <Gh_{i}, Gh_{j}> = {l2}");
            }
        }
    }

    #[test]
    fn drift_coefficients() {
        let b = unit();
        let grid = TimeGrid::new(1.0, 4096).unwrap();
        for k in 1..5 {
            assert_eq!(b.drift_coeff(|_| 0.0, k, &grid).unwrap(), 0.0);
        }
        let alpha = 1.7;
        // oracle: trapezoid of alpha * h_1' against the closed form
        let c1 = b.drift_coeff(|_| alpha, 1, &grid).unwrap();
        assert!((c1 - 2.0 * SQRT_2 * alpha / PI).abs() < 1e-6);
        assert!((c1 - b.linear_drift_coeff(alpha, 1).unwrap()).abs() < 1e-6);
        let c2 = b.drift_coeff(|_| alpha, 2, &grid).unwrap();
        assert!((c2 + 2.0 * SQRT_2 * alpha / (3.0 * PI)).abs() < 1e-6);
        // sign alternation (-1)^{k+1}
        for k in 1..10 {
            let c = b.linear_drift_coeff(1.0, k).unwrap();
            assert_eq!(c > 0.0, k % 2 == 1);
        }
    }

    #[test]
    fn projection_values() {
        let b = unit();
        let zero = SpectralCoeffs::from_standardized(b, vec![0.0; 4]).unwrap();
        assert_eq!(b.project(&zero, 4, 0.3).unwrap(), 0.0);
        let e1 = SpectralCoeffs::from_standardized(b, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((b.project(&e1, 3, 1.0).unwrap() - SQRT_2).abs() < 1e-14);
        // brute-force sum from the definition
        let brute = (PI / 2.0) * (2.0 * SQRT_2 / PI);
        assert!((b.project(&e1, 1, 1.0).unwrap() - brute).abs() < 1e-14);
        assert!(matches!(b.project(&e1, 4, 0.5), Err(Error::OrderTooLarge { .. })));
    }

    #[test]
    fn projection_is_idempotent() {
        let b = BasisSpec::new(1.2, 1.5, 50).unwrap();
        let grid = TimeGrid::new(1.5, 2048).unwrap();
        let z = vec![0.4, -1.3, 2.2, 0.05, -0.7];
        let c = SpectralCoeffs::from_standardized(b, z.clone()).unwrap();
        let p = b.project_on_grid(&c, 5, &grid).unwrap();
        let back = b.recover(&p, 5, &grid).unwrap();
        for (a, e) in back.standardized().iter().zip(&z) {
            assert!((a - e).abs() < 1e-10);
        }
        let p2 = b.project_on_grid(&back, 5, &grid).unwrap();
        for (a, e) in p.iter().zip(&p2) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn standardization_roundtrip() {
        let b = unit();
        let c = SpectralCoeffs::from_raw(b, vec![1.0, 2.0, 3.0]).unwrap();
        let z = c.standardized();
        assert!((z[0] - PI / 2.0).abs() < 1e-15);
        let back = SpectralCoeffs::from_standardized(b, z).unwrap();
        for (a, e) in back.raw().iter().zip(c.raw()) {
            assert!((a - e).abs() < 1e-14);
        }
        assert!(SpectralCoeffs::from_raw(b, vec![0.0; 51]).is_err());
    }
}
