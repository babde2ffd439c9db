//! Drift estimators computed from one observed path.

use std::f64::consts::PI;

use crate::basis::{BasisSpec, SpectralCoeffs};
use crate::error::{Error, Result};
use crate::functionals::{GradientTable, SteinFamily};
use crate::grid::TimeGrid;
use crate::process::{CoeffExtractor, DriftSpec, Path};

#[derive(Debug, Clone)]
pub enum EstimatorKind {
    /// The observed path itself.
    Minimax,
    /// `X + D log F` for `F = f_{n,a,b}` of the observed coordinates.
    Stein(SteinFamily),
    /// `X - (n - 2) Pi_n X / ||Pi_n X||^2`, evaluated through the spectral
    /// projection and an `L^2` quadrature.
    JamesStein { n: usize },
    /// Posterior mean under a Brownian prior with scale `tau` around `prior_mean`.
    Bayes { tau: f64, prior_mean: DriftSpec },
    /// `theta_hat * int_0^t a(s) ds` with the parametric MLE `theta_hat`.
    MleLinear { label: String, shape: fn(f64) -> f64 },
}

impl EstimatorKind {
    pub fn label(&self) -> String {
        match self {
            EstimatorKind::Minimax => "minimax".into(),
            EstimatorKind::Stein(f) => format!("stein(n={},a={})", f.n(), f.a()),
            EstimatorKind::JamesStein { n } => format!("james_stein(n={n})"),
            EstimatorKind::Bayes { tau, prior_mean } => format!("bayes(tau={tau},v={})", prior_mean.label()),
            EstimatorKind::MleLinear { label, .. } => format!("mle_linear({label})"),
        }
    }

    pub fn order(&self) -> Option<usize> {
        match self {
            EstimatorKind::Stein(f) => Some(f.n()),
            EstimatorKind::JamesStein { n } => Some(*n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub basis: BasisSpec,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, basis: BasisSpec) -> Result<Self> {
        match &kind {
            EstimatorKind::JamesStein { n } if *n < 3 => {
                return Err(Error::invalid("n", format!("James–Stein needs n >= 3, got {n}")))
            }
            EstimatorKind::Bayes { tau, .. } if !(tau.is_finite() && *tau > 0.0) => {
                return Err(Error::invalid("tau", format!("must be finite and > 0, got {tau}")))
            }
            _ => {}
        }
        if let Some(n) = kind.order() {
            if n > basis.terms() {
                return Err(Error::OrderTooLarge {
                    requested: n,
                    available: basis.terms(),
                });
            }
        }
        Ok(Self { kind, basis })
    }

    pub fn minimax(basis: BasisSpec) -> Self {
        Self {
            kind: EstimatorKind::Minimax,
            basis,
        }
    }

    /// The harmonic Stein estimator `a = 2 - n`, `b = 0`.
    pub fn stein(basis: BasisSpec, n: usize) -> Result<Self> {
        Self::new(EstimatorKind::Stein(SteinFamily::james_stein(n)?), basis)
    }

    pub fn james_stein(basis: BasisSpec, n: usize) -> Result<Self> {
        Self::new(EstimatorKind::JamesStein { n }, basis)
    }

    pub fn bayes(basis: BasisSpec, tau: f64, prior_mean: DriftSpec) -> Result<Self> {
        Self::new(EstimatorKind::Bayes { tau, prior_mean }, basis)
    }

    /// Precomputes the tables needed to apply this estimator on `grid`.
    pub fn prepare(&self, grid: &TimeGrid) -> Result<PreparedEstimator> {
        PreparedEstimator::new(self.clone(), *grid)
    }

    pub fn estimate(&self, path: &Path) -> Result<DriftEstimate> {
        self.prepare(path.grid())?.apply(path)
    }
}

/// Estimate of `u(t_i)` on the grid of the observed path.
#[derive(Debug, Clone)]
pub struct DriftEstimate {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub kind: String,
    pub n: Option<usize>,
    pub coeffs: Option<SpectralCoeffs>,
}

/// An estimator bound to a grid, with its coefficient and gradient tables.
#[derive(Debug, Clone)]
pub struct PreparedEstimator {
    spec: EstimatorSpec,
    grid: TimeGrid,
    extractor: Option<CoeffExtractor>,
    table: Option<GradientTable>,
    prior_values: Option<Vec<f64>>,
}

impl PreparedEstimator {
    fn new(spec: EstimatorSpec, grid: TimeGrid) -> Result<Self> {
        let (extractor, table) = match spec.kind.order() {
            Some(n) => (
                Some(CoeffExtractor::new(spec.basis, grid, n)?),
                match &spec.kind {
                    EstimatorKind::Stein(_) => Some(GradientTable::new(&spec.basis, &grid, n)?),
                    _ => None,
                },
            ),
            None => (None, None),
        };
        let prior_values = match &spec.kind {
            EstimatorKind::Bayes { prior_mean, .. } => Some(prior_mean.values(&grid)),
            _ => None,
        };
        Ok(Self {
            spec,
            grid,
            extractor,
            table,
            prior_values,
        })
    }

    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    /// The extracted coefficients `X(h_k)`, `k <= n`, for spectral estimators.
    pub fn coefficients(&self, path: &Path) -> Result<Option<SpectralCoeffs>> {
        self.extractor.as_ref().map(|e| e.extract(path)).transpose()
    }

    pub fn apply(&self, path: &Path) -> Result<DriftEstimate> {
        if *path.grid() != self.grid {
            return Err(Error::GridMismatch("path grid differs from prepared grid".into()));
        }
        let x = path.values();
        let coeffs = self.coefficients(path)?;
        let values = match &self.spec.kind {
            EstimatorKind::Minimax => x.to_vec(),
            EstimatorKind::Stein(family) => {
                let table = self.table.as_ref().expect("prepared for stein");
                let corr = family.dlog_on_grid(coeffs.as_ref().expect("extracted"), table)?;
                x.iter().zip(&corr).map(|(x, c)| x + c).collect()
            }
            EstimatorKind::JamesStein { n } => {
                let corr = james_stein_correction(&self.spec.basis, coeffs.as_ref().expect("extracted"), *n, &self.grid)?;
                x.iter().zip(&corr).map(|(x, c)| x + c).collect()
            }
            EstimatorKind::Bayes { tau, .. } => {
                let v = self.prior_values.as_ref().expect("prepared for bayes");
                bayes_combine(self.spec.basis.sigma(), *tau, v, x)
            }
            EstimatorKind::MleLinear { shape, .. } => {
                let theta = mle_linear(path, shape)?;
                let cum = self.grid.cumulative_trapezoid(&self.grid.sample(shape));
                cum.iter().map(|a| theta * a).collect()
            }
        };
        Ok(DriftEstimate {
            grid: self.grid,
            values,
            kind: self.spec.kind.label(),
            n: self.spec.kind.order(),
            coeffs,
        })
    }
}

/// The observed path as its own estimate.
pub fn minimax(path: &Path) -> DriftEstimate {
    DriftEstimate {
        grid: *path.grid(),
        values: path.values().to_vec(),
        kind: EstimatorKind::Minimax.label(),
        n: None,
        coeffs: None,
    }
}

/// `X + D log F_{n,2-n,0}` from the first `n` extracted coefficients.
pub fn stein(path: &Path, basis: &BasisSpec, n: usize) -> Result<DriftEstimate> {
    EstimatorSpec::stein(*basis, n)?.estimate(path)
}

/// Stein correction in explicit sine form:
///
/// ```text
/// -(n - 2) sqrt(2/T) sum_k lambda_k^{-1} c_k sin((k - 1/2) pi t / T)
///   / sum_l lambda_l^{-2} c_l^2
/// ```
///
/// with raw coordinates `c_k = X(h_k)`.
pub fn stein_correction_sum(coeffs: &SpectralCoeffs, n: usize, t: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid("n", format!("need n >= 3, got {n}")));
    }
    if n > coeffs.len() {
        return Err(Error::OrderTooLarge {
            requested: n,
            available: coeffs.len(),
        });
    }
    let basis = coeffs.basis();
    let horizon = basis.horizon();
    let c = coeffs.raw();
    let mut denom = 0.0;
    let mut numer = 0.0;
    for k in 1..=n {
        let inv_lambda = PI * (k as f64 - 0.5) / (basis.sigma() * horizon);
        denom += (inv_lambda * c[k - 1]).powi(2);
        numer += inv_lambda * c[k - 1] * ((k as f64 - 0.5) * PI * t / horizon).sin();
    }
    if denom == 0.0 {
        return Err(Error::Singular);
    }
    Ok(-(n as f64 - 2.0) * (2.0 / horizon).sqrt() * numer / denom)
}

/// James–Stein correction `-(n - 2) [Pi_n X] / ||Pi_n X||^2_{L^2}` on the
/// grid, with the norm taken by trapezoid quadrature.
pub fn james_stein_correction(basis: &BasisSpec, coeffs: &SpectralCoeffs, n: usize, grid: &TimeGrid) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::invalid("n", format!("need n >= 3, got {n}")));
    }
    let proj = basis.project_on_grid(coeffs, n, grid)?;
    let norm_sq = grid.trapezoid(&proj.iter().map(|p| p * p).collect::<Vec<_>>());
    if norm_sq == 0.0 {
        return Err(Error::Singular);
    }
    let scale = -(n as f64 - 2.0) / norm_sq;
    Ok(proj.iter().map(|p| scale * p).collect())
}

pub fn james_stein(path: &Path, basis: &BasisSpec, n: usize) -> Result<DriftEstimate> {
    EstimatorSpec::james_stein(*basis, n)?.estimate(path)
}

fn bayes_combine(sigma: f64, tau: f64, prior: &[f64], x: &[f64]) -> Vec<f64> {
    let (s2, t2) = (sigma * sigma, tau * tau);
    let total = s2 + t2;
    prior.iter().zip(x).map(|(v, x)| (s2 * v + t2 * x) / total).collect()
}

/// `(sigma^2 v(t) + tau^2 X(t)) / (sigma^2 + tau^2)`: the posterior mean
/// for scalar prior and noise covariances.
pub fn bayes(path: &Path, sigma: f64, tau: f64, prior_mean: &DriftSpec) -> Result<DriftEstimate> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("tau", format!("must be finite and > 0, got {tau}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be finite and > 0, got {sigma}")));
    }
    let v = prior_mean.values(path.grid());
    Ok(DriftEstimate {
        grid: *path.grid(),
        values: bayes_combine(sigma, tau, &v, path.values()),
        kind: format!("bayes(tau={tau},v={})", prior_mean.label()),
        n: None,
        coeffs: None,
    })
}

/// `theta_hat = int a dX / int a^2 dt` for a deterministic shape `a`.
pub fn mle_linear(path: &Path, shape: impl Fn(f64) -> f64) -> Result<f64> {
    let grid = path.grid();
    let a = grid.sample(shape);
    let energy = grid.trapezoid(&a.iter().map(|v| v * v).collect::<Vec<_>>());
    if !(energy > 0.0) {
        return Err(Error::invalid("a", "int a^2 dt must be > 0"));
    }
    Ok(grid.ito_sum(&a, path.values()) / energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{render_path, simulate_noise};
    use crate::rng::{Domain, StreamKey};

    fn line(grid: TimeGrid, alpha: f64) -> Path {
        Path::new(grid, grid.sample(|t| alpha * t)).unwrap()
    }

    #[test]
    fn minimax_is_identity() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let p = line(grid, 1.5);
        assert_eq!(minimax(&p).values, p.values());
        let zero = Path::new(grid, vec![0.0; 33]).unwrap();
        assert!(minimax(&zero).values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stein_requires_three_coordinates() {
        let basis = BasisSpec::new(1.0, 1.0, 10).unwrap();
        assert!(EstimatorSpec::stein(basis, 2).is_err());
        assert!(EstimatorSpec::james_stein(basis, 2).is_err());
        assert!(EstimatorSpec::stein(basis, 11).is_err());
        assert!(EstimatorSpec::bayes(basis, 0.0, DriftSpec::Zero).is_err());
    }

    #[test]
    fn stein_rejects_zero_path() {
        let basis = BasisSpec::new(1.0, 1.0, 10).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let zero = Path::new(grid, vec![0.0; 65]).unwrap();
        assert!(matches!(stein(&zero, &basis, 4), Err(Error::Singular)));
        assert!(matches!(james_stein(&zero, &basis, 4), Err(Error::Singular)));
    }

    #[test]
    fn single_coefficient_correction_by_hand() {
        let basis = BasisSpec::new(1.0, 1.0, 10).unwrap();
        let c1 = 1.3;
        let c = SpectralCoeffs::from_raw(basis, vec![c1, 0.0, 0.0]).unwrap();
        let l1 = basis.lambda(1).unwrap();
        for t in [0.1, 0.5, 1.0] {
            let expect = -(2.0f64).sqrt() * (c1 / l1) * (PI * t / 2.0).sin() / (c1 * c1 / (l1 * l1));
            assert!((stein_correction_sum(&c, 3, t).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn estimates_start_at_zero() {
        let basis = BasisSpec::new(1.0, 1.0, 200).unwrap();
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let draw = simulate_noise(&basis, StreamKey::new(3, Domain::PathNoise), 0);
        let p = render_path(&basis, &draw, &DriftSpec::linear(1.0), &grid).unwrap();
        let specs = [
            EstimatorSpec::minimax(basis),
            EstimatorSpec::stein(basis, 5).unwrap(),
            EstimatorSpec::james_stein(basis, 5).unwrap(),
            EstimatorSpec::bayes(basis, 0.7, DriftSpec::linear(0.5)).unwrap(),
        ];
        for s in specs {
            assert_eq!(s.estimate(&p).unwrap().values[0], 0.0, "{}", s.kind.label());
        }
    }

    #[test]
    fn stein_and_james_stein_agree_on_a_path() {
        let basis = BasisSpec::new(1.0, 1.0, 1000).unwrap();
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let draw = simulate_noise(&basis, StreamKey::new(8, Domain::PathNoise), 1);
        let p = render_path(&basis, &draw, &DriftSpec::linear(1.0), &grid).unwrap();
        let a = stein(&p, &basis, 6).unwrap();
        let b = james_stein(&p, &basis, 6).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn bayes_limits() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let p = line(grid, 2.0);
        let v = DriftSpec::linear(-1.0);
        let half = bayes(&p, 1.0, 1.0, &v).unwrap();
        for (i, e) in half.values.iter().enumerate() {
            assert!((e - 0.5 * (2.0 - 1.0) * grid.t(i)).abs() < 1e-15);
        }
        let wide = bayes(&p, 1.0, 1e8, &v).unwrap();
        for (e, x) in wide.values.iter().zip(p.values()) {
            assert!((e - x).abs() < 1e-12);
        }
        assert!(bayes(&p, 1.0, -1.0, &v).is_err());
    }

    #[test]
    fn mle_on_noiseless_path() {
        let grid = TimeGrid::new(2.0, 400).unwrap();
        let p = line(grid, 0.75);
        assert!((mle_linear(&p, |_| 1.0).unwrap() - 0.75).abs() < 1e-12);
        assert!(mle_linear(&p, |_| 0.0).is_err());
        // non-constant shape a(t) = t: X_t = theta t^2 / 2
        let q = Path::new(grid, grid.sample(|t| 1.5 * t * t / 2.0)).unwrap();
        assert!((mle_linear(&q, |t| t).unwrap() - 1.5).abs() < 1e-2);
    }
}
