//! Monte Carlo risk engine.
//!
//! Risks are `L^2([0, T], dt)` losses `int (xi_t - u_t)^2 dt` averaged over
//! replicates. Replicate `r` always draws from its own stream, and summaries
//! reduce replicate values in index order, so every report is bit-identical
//! for any worker count.
//!
//! The gain of the harmonic Stein estimator over the minimax risk
//! `R = sigma^2 T^2 / 2` has two independent evaluators:
//!
//! - [`gain`] draws `eta_l` directly and averages
//!   `2 (n - 2)^2 / sum_l (pi (l - 1/2) (eta_l + <u, h_l>))^2`;
//! - [`gain_path_space`] renders paths, applies the estimator and compares
//!   losses.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::basis::BasisSpec;
use crate::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, EstimatorSpec};
use crate::functionals::{GradientTable, SteinFamily};
use crate::grid::TimeGrid;
use crate::process::{log_girsanov, CoeffExtractor, DriftSpec, Path, PathRenderer};
use crate::rng::{Domain, StreamKey};
use crate::stats::Summary;

/// Monte Carlo configuration shared by all path-space evaluators.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub samples: usize,
    pub base_seed: u64,
    pub grid: TimeGrid,
    pub basis: BasisSpec,
    pub drift: DriftSpec,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
}

impl McConfig {
    pub fn new(samples: usize, base_seed: u64, grid: TimeGrid, basis: BasisSpec, drift: DriftSpec) -> Result<Self> {
        if samples < 2 {
            return Err(Error::invalid("samples", format!("need at least 2 replicates, got {samples}")));
        }
        if grid.horizon() != basis.horizon() {
            return Err(Error::GridMismatch(format!(
                "grid horizon {} differs from basis horizon {}",
                grid.horizon(),
                basis.horizon()
            )));
        }
        drift.validate(&grid)?;
        Ok(Self {
            samples,
            base_seed,
            grid,
            basis,
            drift,
            workers: 1,
        })
    }

    /// `sigma = T = 1`, linear drift `alpha`, default grid and truncation.
    pub fn unit(samples: usize, base_seed: u64, alpha: f64) -> Result<Self> {
        Self::new(
            samples,
            base_seed,
            TimeGrid::default(),
            BasisSpec::new(1.0, 1.0, crate::basis::DEFAULT_TERMS)?,
            DriftSpec::linear(alpha),
        )
    }

    pub fn with_samples(&self, samples: usize) -> Result<Self> {
        let mut c = self.clone();
        if samples < 2 {
            return Err(Error::invalid("samples", format!("need at least 2 replicates, got {samples}")));
        }
        c.samples = samples;
        Ok(c)
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn sigma(&self) -> f64 {
        self.basis.sigma()
    }

    pub fn horizon(&self) -> f64 {
        self.basis.horizon()
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.drift {
            DriftSpec::Zero => Some(0.0),
            DriftSpec::Linear { alpha } => Some(alpha),
            DriftSpec::Custom { .. } => None,
        }
    }

    /// Minimax risk of this configuration.
    pub fn minimax_risk(&self) -> f64 {
        cramer_rao_bound(self.sigma(), self.horizon())
    }

    fn key(&self, domain: Domain) -> StreamKey {
        StreamKey::new(self.base_seed, domain)
    }
}

/// Runs `f` for every replicate index, returning results in index order.
fn replicates<S, T, I, F>(workers: usize, samples: usize, init: I, f: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    Ok(pool.install(|| {
        (0..samples as u64)
            .into_par_iter()
            .map_init(&init, |s, r| f(s, r))
            .collect()
    }))
}

/// One rendered replicate: the observed path and its noise part.
struct Replicate {
    path: Path,
    noise: Vec<f64>,
}

struct PathSource {
    renderer: PathRenderer,
    key: StreamKey,
    terms: usize,
    drift_values: Vec<f64>,
}

impl PathSource {
    fn new(config: &McConfig) -> Self {
        Self {
            renderer: PathRenderer::new(config.basis, config.grid).expect("validated config"),
            key: config.key(Domain::PathNoise),
            terms: config.basis.terms(),
            drift_values: config.drift.values(&config.grid),
        }
    }

    fn draw(&mut self, replicate: u64) -> Replicate {
        let eta = self.key.normals(replicate, self.terms);
        let noise = self.renderer.noise(&eta);
        let values: Vec<f64> = noise.iter().zip(&self.drift_values).map(|(x, u)| x + u).collect();
        Replicate {
            path: Path::new(*self.renderer.grid(), values).expect("starts at 0"),
            noise,
        }
    }
}

fn l2_sq(grid: &TimeGrid, values: impl Iterator<Item = f64>) -> f64 {
    let sq: Vec<f64> = values.map(|v| v * v).collect();
    grid.trapezoid(&sq)
}

/// Closed-form reference paired with an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub value: f64,
    pub tag: &'static str,
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub quantity: String,
    pub mean: f64,
    pub se: f64,
    /// Replicates that entered the mean.
    pub samples: usize,
    /// Replicates aborted on a singular functional.
    pub singular: usize,
    pub closed_form: Option<ClosedForm>,
}

impl RiskReport {
    fn from_summary(quantity: impl Into<String>, s: Summary, singular: usize, closed_form: Option<ClosedForm>) -> Self {
        Self {
            quantity: quantity.into(),
            mean: s.mean,
            se: s.se,
            samples: s.samples,
            singular,
            closed_form,
        }
    }

    fn from_outcomes(quantity: impl Into<String>, outcomes: &[Option<f64>], closed_form: Option<ClosedForm>) -> Result<Self> {
        let ok: Vec<f64> = outcomes.iter().flatten().copied().collect();
        if ok.len() < 2 {
            return Err(Error::Singular);
        }
        Ok(Self::from_summary(quantity, Summary::of(&ok), outcomes.len() - ok.len(), closed_form))
    }

    pub fn summary(&self) -> Summary {
        Summary {
            mean: self.mean,
            se: self.se,
            samples: self.samples,
        }
    }

    /// `(mean - closed form) / se`.
    pub fn z_score(&self) -> Option<f64> {
        self.closed_form.map(|c| (self.mean - c.value) / self.se)
    }

    /// Any singular replicate invalidates the report.
    pub fn is_clean(&self) -> bool {
        self.singular == 0
    }
}

/// `R = sigma^2 T^2 / 2`, the risk of the observed path under `mu = dt`.
pub fn cramer_rao_bound(sigma: f64, horizon: f64) -> f64 {
    sigma * sigma * horizon * horizon / 2.0
}

/// Mean `L^2` loss of an estimator over seeded replicates.
pub fn empirical_risk(spec: &EstimatorSpec, config: &McConfig) -> Result<RiskReport> {
    if spec.basis != config.basis {
        return Err(Error::invalid("basis", "estimator and configuration bases differ"));
    }
    let prepared = spec.prepare(&config.grid)?;
    let grid = config.grid;
    let u = config.drift.values(&grid);
    let outcomes = replicates(
        config.workers,
        config.samples,
        || PathSource::new(config),
        |src, r| {
            let rep = src.draw(r);
            match prepared.apply(&rep.path) {
                Ok(est) => Some(l2_sq(&grid, est.values.iter().zip(&u).map(|(e, u)| e - u))),
                Err(Error::Singular) => None,
                Err(e) => panic!("unexpected estimator failure: {e}"),
            }
        },
    )?;
    let closed = match spec.kind {
        EstimatorKind::Minimax => Some(ClosedForm {
            value: config.minimax_risk(),
            tag: "sigma^2 T^2 / 2",
        }),
        _ => None,
    };
    RiskReport::from_outcomes(format!("risk[{}]", spec.kind.label()), &outcomes, closed)
}

fn check_order(n: usize) -> Result<()> {
    if n < 3 {
        Err(Error::invalid("n", format!("need n >= 3, got {n}")))
    } else {
        Ok(())
    }
}

/// Squared norms `sum_l (lambda_l^{-1} (eta_l + <u, h_l>))^2` from direct
/// coefficient draws, for every prefix order `3..=n_max`.
fn coefficient_norms(config: &McConfig, n_max: usize, samples: usize) -> Result<Vec<Vec<f64>>> {
    let drift = config.drift.coefficients(&config.basis, n_max, &config.grid)?;
    let inv_lambda: Vec<f64> = (1..=n_max).map(|k| 1.0 / config.basis.lambda(k).expect("k >= 1")).collect();
    let key = config.key(Domain::Coefficients);
    replicates(
        config.workers,
        samples,
        || (),
        |_, r| {
            let eta = key.normals(r, n_max);
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(n_max);
            for l in 0..n_max {
                acc += (inv_lambda[l] * (eta[l] + drift[l])).powi(2);
                out.push(acc);
            }
            out
        },
    )
}

/// `R - (n - 2)^2 E[||Pi_n X||^{-2}]` with `||Pi_n X||^2 = sum_l lambda_l^{-2} X(h_l)^2`,
/// from direct coefficient draws.
pub fn stein_risk_closed_form(config: &McConfig, n: usize) -> Result<RiskReport> {
    check_order(n)?;
    let norms = coefficient_norms(config, n, config.samples)?;
    let r = config.minimax_risk();
    let k2 = (n as f64 - 2.0).powi(2);
    let vals: Vec<f64> = norms.iter().map(|v| r - k2 / v[n - 1]).collect();
    Ok(RiskReport::from_summary(format!("stein_risk_closed_form(n={n})"), Summary::of(&vals), 0, None))
}

/// Direct estimate of the relative gain `G(u, sigma, T, n)`.
pub fn gain(config: &McConfig, n: usize) -> Result<Summary> {
    check_order(n)?;
    let norms = coefficient_norms(config, n, config.samples)?;
    let r = config.minimax_risk();
    let k2 = (n as f64 - 2.0).powi(2);
    let vals: Vec<f64> = norms.iter().map(|v| k2 / v[n - 1] / r).collect();
    Ok(Summary::of(&vals))
}

/// Gain from paired path-space losses `(||X - u||^2 - ||xi - u||^2) / R`.
pub fn gain_path_space(config: &McConfig, n: usize) -> Result<RiskReport> {
    check_order(n)?;
    let spec = EstimatorSpec::stein(config.basis, n)?;
    let prepared = spec.prepare(&config.grid)?;
    let grid = config.grid;
    let u = config.drift.values(&grid);
    let r = config.minimax_risk();
    let outcomes = replicates(
        config.workers,
        config.samples,
        || PathSource::new(config),
        |src, rep_idx| {
            let rep = src.draw(rep_idx);
            let base = l2_sq(&grid, rep.noise.iter().copied());
            match prepared.apply(&rep.path) {
                Ok(est) => Some((base - l2_sq(&grid, est.values.iter().zip(&u).map(|(e, u)| e - u))) / r),
                Err(Error::Singular) => None,
                Err(e) => panic!("unexpected estimator failure: {e}"),
            }
        },
    )?;
    RiskReport::from_outcomes(format!("gain_path_space(n={n})"), &outcomes, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainRow {
    pub n: usize,
    pub gain: f64,
    pub se: f64,
    /// `6 / (n pi^2)`.
    pub asymptote: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub rows: Vec<GainRow>,
    pub n_opt: usize,
    pub samples: usize,
    /// The sample count was raised tenfold because the top two gains were
    /// within one standard error.
    pub escalated: bool,
    /// The top two gains are within one standard error at the final sample
    /// count.
    pub close_call: bool,
}

impl GainReport {
    pub fn row(&self, n: usize) -> Option<&GainRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Gap between the best and second-best gains, and the larger of their
    /// standard errors.
    pub fn top_gap(&self) -> (f64, f64) {
        let mut sorted: Vec<&GainRow> = self.rows.iter().collect();
        sorted.sort_by(|a, b| b.gain.total_cmp(&a.gain));
        match sorted.as_slice() {
            [a, b, ..] => (a.gain - b.gain, a.se.max(b.se)),
            _ => (f64::INFINITY, 0.0),
        }
    }
}

/// Gains for every order in `orders` from one set of shared coefficient
/// draws, without escalation.
pub fn gain_rows(config: &McConfig, orders: RangeInclusive<usize>) -> Result<Vec<GainRow>> {
    if orders.is_empty() {
        return Err(Error::invalid("n", "empty order range"));
    }
    check_order(*orders.start())?;
    gain_table(config, &orders, config.samples)
}

fn gain_table(config: &McConfig, orders: &RangeInclusive<usize>, samples: usize) -> Result<Vec<GainRow>> {
    let n_max = *orders.end();
    let norms = coefficient_norms(config, n_max, samples)?;
    let r = config.minimax_risk();
    orders
        .clone()
        .map(|n| {
            let k2 = (n as f64 - 2.0).powi(2);
            let vals: Vec<f64> = norms.iter().map(|v| k2 / v[n - 1] / r).collect();
            let s = Summary::of(&vals);
            Ok(GainRow {
                n,
                gain: s.mean,
                se: s.se,
                asymptote: asymptote(n)?,
            })
        })
        .collect()
}

/// Smallest `n` among the largest point estimates.
fn argmax(rows: &[GainRow]) -> usize {
    let mut best = rows[0];
    for r in &rows[1..] {
        if r.gain > best.gain {
            best = *r;
        }
    }
    best.n
}

/// Gain for every order in `orders` from shared coefficient draws, with the
/// optimal order. Escalates once to ten times the samples when the top two
/// gains are within one standard error.
pub fn gain_curve(config: &McConfig, orders: RangeInclusive<usize>) -> Result<GainReport> {
    if orders.is_empty() {
        return Err(Error::invalid("n", "empty order range"));
    }
    check_order(*orders.start())?;
    let mut samples = config.samples;
    let mut escalated = false;
    loop {
        let rows = gain_table(config, &orders, samples)?;
        let mut report = GainReport {
            n_opt: argmax(&rows),
            rows,
            samples,
            escalated,
            close_call: false,
        };
        let (gap, se) = report.top_gap();
        report.close_call = gap < se;
        if report.close_call && !escalated {
            samples *= 10;
            escalated = true;
            continue;
        }
        return Ok(report);
    }
}

/// `(n - 2)^2 (8 / pi^2) E[(sum_l (2l - 1)^2 eta_l^2)^{-1}]`.
pub fn gain_large_sigma_limit(n: usize, samples: usize, seed: u64) -> Result<Summary> {
    check_order(n)?;
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least 2"));
    }
    let weights: Vec<f64> = (1..=n).map(|l| ((2 * l - 1) as f64).powi(2)).collect();
    let inv = weighted_inverse_mean(&weights, samples, StreamKey::new(seed, Domain::Limit), 1)?;
    Ok(inv.affine((n as f64 - 2.0).powi(2) * 8.0 / (PI * PI), 0.0))
}

/// Monte Carlo `E[(sum_l w_l eta_l^2)^{-1}]` for standard Gaussian `eta`.
pub fn weighted_inverse_mean(weights: &[f64], samples: usize, key: StreamKey, workers: usize) -> Result<Summary> {
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least 2"));
    }
    let d = weights.len();
    let vals = replicates(
        workers,
        samples,
        || (),
        |_, r| {
            let eta = key.normals(r, d);
            1.0 / eta.iter().zip(weights).map(|(e, w)| w * e * e).sum::<f64>()
        },
    )?;
    Ok(Summary::of(&vals))
}

/// `(1 - 2/n)^2 sigma^2 / (alpha^2 T)`.
pub fn small_noise_equivalent(alpha: f64, sigma: f64, horizon: f64, n: usize) -> Result<f64> {
    if alpha == 0.0 {
        return Err(Error::invalid("alpha", "small-noise regime needs alpha != 0"));
    }
    check_order(n)?;
    let ratio = 1.0 - 2.0 / n as f64;
    Ok(ratio * ratio * sigma * sigma / (alpha * alpha * horizon))
}

/// Leading term of the gain as `sigma^2 / (alpha^2 T) -> 0` with `n` fixed:
/// `sum_l (pi (l - 1/2) <u, h_l>)^2 = 2 n alpha^2 T / sigma^2` dominates the
/// denominator, giving `(n - 2)^2 sigma^2 / (n alpha^2 T)`.
pub fn small_noise_leading_term(alpha: f64, sigma: f64, horizon: f64, n: usize) -> Result<f64> {
    Ok(n as f64 * small_noise_equivalent(alpha, sigma, horizon, n)?)
}

/// `6 / (n pi^2)`.
pub fn asymptote(n: usize) -> Result<f64> {
    check_order(n)?;
    Ok(6.0 / (n as f64 * PI * PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantMethod {
    MonteCarlo,
    Quadrature,
}

/// The four-dimensional Gaussian integral
/// `I = int exp(-|x|^2/2) dx / (x^2 + 9y^2 + 25z^2 + 49r^2)` and its
/// normalisations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantReport {
    pub method: ConstantMethod,
    /// `I` itself.
    pub integral: f64,
    /// `E[1 / Q] = I / (2 pi)^2`.
    pub expectation: f64,
    /// Absolute error estimate on `expectation` (standard error for Monte
    /// Carlo, halving difference for quadrature).
    pub error: f64,
    /// `16 / pi^4 * I`.
    pub prefactor_16: f64,
    /// `4 (8 / pi^2) E[1/Q] = 8 / pi^4 * I`, the large-sigma gain at `n = 4`.
    pub large_sigma_gain: f64,
}

const CONSTANT_WEIGHTS: [f64; 4] = [1.0, 9.0, 25.0, 49.0];

impl ConstantReport {
    fn from_expectation(method: ConstantMethod, expectation: f64, error: f64) -> Self {
        let integral = expectation * (2.0 * PI).powi(2);
        Self {
            method,
            integral,
            expectation,
            error,
            prefactor_16: 16.0 / PI.powi(4) * integral,
            large_sigma_gain: 8.0 / PI.powi(4) * integral,
        }
    }
}

/// Evaluates the constant by Monte Carlo (`resolution` = samples) or by
/// tensor Gauss–Hermite quadrature (`resolution` = nodes per axis, even).
pub fn universal_constant(method: ConstantMethod, resolution: usize, seed: u64) -> Result<ConstantReport> {
    match method {
        ConstantMethod::MonteCarlo => {
            let s = weighted_inverse_mean(&CONSTANT_WEIGHTS, resolution, StreamKey::new(seed, Domain::Constant), 1)?;
            Ok(ConstantReport::from_expectation(method, s.mean, s.se))
        }
        ConstantMethod::Quadrature => {
            if resolution < 4 || resolution % 2 != 0 {
                return Err(Error::invalid("nodes", format!("need an even count >= 4, got {resolution}")));
            }
            let fine = gauss_hermite_inverse_mean(&CONSTANT_WEIGHTS, resolution)?;
            let coarse = gauss_hermite_inverse_mean(&CONSTANT_WEIGHTS, resolution / 2)?;
            Ok(ConstantReport::from_expectation(method, fine, (fine - coarse).abs()))
        }
    }
}

/// Tensor Gauss–Hermite estimate of `E[1 / sum_l w_l eta_l^2]`, `d >= 3`.
///
/// The integrand is singular at the origin, so the radial part is integrated
/// exactly: for the degree-0 homogeneous `g(y) = |y|^2 / Q(y)`,
/// `E[1/Q] = E[1/|y|^2] E[g] = E[g] / (d - 2)`, and only the bounded `g`
/// goes through the quadrature. `g` is even in every coordinate, so only
/// positive nodes are visited.
pub fn gauss_hermite_inverse_mean(weights: &[f64], nodes: usize) -> Result<f64> {
    let d = weights.len();
    if d < 3 {
        return Err(Error::invalid("weights", "need at least 3 dimensions"));
    }
    if nodes < 2 || nodes % 2 != 0 {
        return Err(Error::invalid("nodes", format!("need an even count >= 2, got {nodes}")));
    }
    let rule = gauss_quad::GaussHermite::new(nodes).map_err(|e| Error::invalid("nodes", e.to_string()))?;
    // physicists' rule for exp(-x^2): E[g(eta)] = pi^{-1/2} sum w_i g(sqrt(2) x_i)
    let half: Vec<(f64, f64)> = rule
        .nodes()
        .zip(rule.weights())
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, w)| (2.0f64.sqrt() * x, 2.0 * w / PI.sqrt()))
        .collect();
    let m = half.len();
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        let mut norm = 0.0;
        let mut quad = 0.0;
        for (axis, &i) in idx.iter().enumerate() {
            let (x, w) = half[i];
            weight *= w;
            norm += x * x;
            quad += weights[axis] * x * x;
        }
        total += weight * norm / quad;
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < m {
                break;
            }
            idx[axis] = 0;
            axis += 1;
            if axis == d {
                return Ok(total / (d as f64 - 2.0));
            }
        }
    }
}

/// Pairwise comparison of two estimates of one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDifference {
    pub label: String,
    pub difference: f64,
    /// Standard error of the per-replicate difference.
    pub paired_se: f64,
    /// `hypot(se_a, se_b)`.
    pub combined_se: f64,
}

impl PairedDifference {
    pub fn within(&self, k: f64) -> bool {
        self.difference.abs() <= k * self.combined_se
    }
}

/// The three expressions of the Stein risk identity on shared draws:
/// direct loss of `X + D log F`, `R - ||D log F||^2 + 2 Delta F / F`, and
/// `R + 4 Delta sqrt(F) / sqrt(F)`, with `R` replaced per replicate by the
/// observed `||X - u||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub direct: RiskReport,
    pub gradient_form: RiskReport,
    pub sqrt_form: RiskReport,
    pub differences: Vec<PairedDifference>,
}

impl IdentityReport {
    pub fn all_within(&self, k: f64) -> bool {
        self.differences.iter().all(|d| d.within(k))
    }
}

pub fn risk_identity_check(config: &McConfig, family: &SteinFamily) -> Result<IdentityReport> {
    let n = family.n();
    let extractor = CoeffExtractor::new(config.basis, config.grid, n)?;
    let table = GradientTable::new(&config.basis, &config.grid, n)?;
    let grid = config.grid;
    let rows = replicates(
        config.workers,
        config.samples,
        || PathSource::new(config),
        |src, r| -> Result<[f64; 3]> {
            let rep = src.draw(r);
            let coeffs = extractor.extract(&rep.path)?;
            let z = coeffs.standardized();
            let xi = if family.a() == 0.0 {
                vec![0.0; grid.len()]
            } else {
                family.dlog_on_grid(&coeffs, &table)?
            };
            let base = l2_sq(&grid, rep.noise.iter().copied());
            let direct = l2_sq(&grid, rep.noise.iter().zip(&xi).map(|(x, c)| x + c));
            let (grad, lap, lap_sqrt) = if family.a() == 0.0 {
                (0.0, 0.0, 0.0)
            } else {
                (
                    family.log_gradient_norm_sq(&z)?,
                    family.laplacian_ratio(&z)?,
                    family.laplacian_ratio_sqrt(&z)?,
                )
            };
            Ok([direct, base - grad + 2.0 * lap, base + 4.0 * lap_sqrt])
        },
    )?;
    let mut ok = Vec::with_capacity(rows.len());
    for row in rows {
        match row {
            Ok(v) => ok.push(v),
            Err(Error::Singular) => {}
            Err(e) => return Err(e),
        }
    }
    let singular = config.samples - ok.len();
    if ok.len() < 2 {
        return Err(Error::Singular);
    }
    let column = |j: usize| Summary::of(&ok.iter().map(|v| v[j]).collect::<Vec<_>>());
    let names = ["direct", "gradient_form", "sqrt_form"];
    let summaries = [column(0), column(1), column(2)];
    let mut differences = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let d = Summary::of(&ok.iter().map(|v| v[i] - v[j]).collect::<Vec<_>>());
        differences.push(PairedDifference {
            label: format!("{}-{}", names[i], names[j]),
            difference: summaries[i].mean - summaries[j].mean,
            paired_se: d.se,
            combined_se: summaries[i].se.hypot(summaries[j].se),
        });
    }
    let label = |name: &str| format!("risk_identity[{name}](n={n},a={})", family.a());
    Ok(IdentityReport {
        direct: RiskReport::from_summary(label(names[0]), summaries[0], singular, None),
        gradient_form: RiskReport::from_summary(label(names[1]), summaries[1], singular, None),
        sqrt_form: RiskReport::from_summary(label(names[2]), summaries[2], singular, None),
        differences,
    })
}

/// Pointwise error statistics of the observed path as an estimate of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseError {
    pub t: f64,
    /// `X_t - u_t`.
    pub bias: Summary,
    /// `(X_t - u_t)^2`; equals `sigma^2 t` in expectation.
    pub second_moment: Summary,
}

/// Statistics at the grid points nearest to each requested time.
pub fn pointwise_errors(config: &McConfig, times: &[f64]) -> Result<Vec<PointwiseError>> {
    let grid = config.grid;
    let idx: Vec<usize> = times
        .iter()
        .map(|t| {
            if !(0.0..=grid.horizon()).contains(t) {
                Err(Error::invalid("t", format!("{t} outside [0, T]")))
            } else {
                Ok(((t / grid.step()).round() as usize).min(grid.intervals()))
            }
        })
        .collect::<Result<_>>()?;
    let rows = replicates(
        config.workers,
        config.samples,
        || PathSource::new(config),
        |src, r| {
            let rep = src.draw(r);
            idx.iter().map(|&i| rep.noise[i]).collect::<Vec<f64>>()
        },
    )?;
    Ok(idx
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let errs: Vec<f64> = rows.iter().map(|v| v[j]).collect();
            let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
            PointwiseError {
                t: grid.t(i),
                bias: Summary::of(&errs),
                second_moment: Summary::of(&sq),
            }
        })
        .collect())
}

/// Risk of the biased estimator `X + c`: `R + c^2 T` since `D_t c = 0`.
pub fn shifted_risk(config: &McConfig, shift: f64) -> Result<RiskReport> {
    let grid = config.grid;
    let vals = replicates(
        config.workers,
        config.samples,
        || PathSource::new(config),
        |src, r| l2_sq(&grid, src.draw(r).noise.iter().map(|x| x + shift)),
    )?;
    Ok(RiskReport::from_summary(
        format!("shifted_risk(c={shift})"),
        Summary::of(&vals),
        0,
        Some(ClosedForm {
            value: config.minimax_risk() + shift * shift * config.horizon(),
            tag: "R + c^2 T",
        }),
    ))
}

/// Bayes and minimax risks averaged over the prior `u = v + Z`, `Z` a
/// Brownian motion with variance `tau^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesReport {
    pub bayes: RiskReport,
    pub minimax: RiskReport,
}

/// `sigma^2 tau^2 / (sigma^2 + tau^2) * T^2 / 2`.
pub fn bayes_risk_closed_form(sigma: f64, tau: f64, horizon: f64) -> f64 {
    let (s2, t2) = (sigma * sigma, tau * tau);
    s2 * t2 / (s2 + t2) * horizon * horizon / 2.0
}

/// `config.drift` is ignored; the drift is drawn from the prior.
pub fn bayes_risk(config: &McConfig, tau: f64, prior_mean: &DriftSpec) -> Result<BayesReport> {
    let spec = EstimatorSpec::bayes(config.basis, tau, prior_mean.clone())?;
    let prepared = spec.prepare(&config.grid)?;
    let prior_basis = BasisSpec::new(tau, config.horizon(), config.basis.terms())?;
    let prior_key = config.key(Domain::Prior);
    let v = prior_mean.values(&config.grid);
    let grid = config.grid;
    let zero = McConfig {
        drift: DriftSpec::Zero,
        ..config.clone()
    };
    let rows = replicates(
        config.workers,
        config.samples,
        || {
            (
                PathSource::new(&zero),
                PathRenderer::new(prior_basis, grid).expect("same horizon"),
            )
        },
        |(src, prior), r| -> Result<[f64; 2]> {
            let z = prior.noise(&prior_key.normals(r, prior_basis.terms()));
            let u: Vec<f64> = v.iter().zip(&z).map(|(a, b)| a + b).collect();
            let noise = src.draw(r).noise;
            let x: Vec<f64> = u.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let path = Path::new(grid, x)?;
            let est = prepared.apply(&path)?;
            Ok([
                l2_sq(&grid, est.values.iter().zip(&u).map(|(e, u)| e - u)),
                l2_sq(&grid, noise.iter().copied()),
            ])
        },
    )?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let col = |j: usize| Summary::of(&rows.iter().map(|v| v[j]).collect::<Vec<_>>());
    Ok(BayesReport {
        bayes: RiskReport::from_summary(
            format!("bayes_risk(tau={tau})"),
            col(0),
            0,
            Some(ClosedForm {
                value: bayes_risk_closed_form(config.sigma(), tau, config.horizon()),
                tag: "sigma^2 tau^2 / (sigma^2 + tau^2) * T^2 / 2",
            }),
        ),
        minimax: RiskReport::from_summary(
            "bayes_prior_minimax_risk",
            col(1),
            0,
            Some(ClosedForm {
                value: config.minimax_risk(),
                tag: "sigma^2 T^2 / 2",
            }),
        ),
    })
}

/// `E[Lambda(density_drift)]` over paths drawn under `config.drift`; equals 1
/// when `config.drift` is zero.
pub fn girsanov_mean(config: &McConfig, density_drift: &DriftSpec) -> Result<Summary> {
    let sigma = config.sigma();
    let vals = replicates(
        config.workers,
        config.samples,
        || PathSource::new(config),
        |src, r| log_girsanov(sigma, density_drift, &src.draw(r).path).map(f64::exp),
    )?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Summary::of(&vals))
}

/// One row of the report table
/// `quantity,n,alpha,sigma,T,samples,estimate,se,closed_form`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub quantity: String,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub horizon: Option<f64>,
    pub samples: Option<usize>,
    pub estimate: f64,
    pub se: Option<f64>,
    pub closed_form: Option<f64>,
}

impl ReportRow {
    pub const CSV_HEADER: &'static str = "quantity,n,alpha,sigma,T,samples,estimate,se,closed_form";

    pub fn new(quantity: impl Into<String>, estimate: f64) -> Self {
        Self {
            quantity: quantity.into(),
            n: None,
            alpha: None,
            sigma: None,
            horizon: None,
            samples: None,
            estimate,
            se: None,
            closed_form: None,
        }
    }

    pub fn with_config(mut self, config: &McConfig) -> Self {
        self.alpha = config.alpha();
        self.sigma = Some(config.sigma());
        self.horizon = Some(config.horizon());
        self.samples = Some(config.samples);
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_summary(mut self, s: &Summary) -> Self {
        self.estimate = s.mean;
        self.se = Some(s.se);
        self.samples = Some(s.samples);
        self
    }

    pub fn with_closed_form(mut self, value: f64) -> Self {
        self.closed_form = Some(value);
        self
    }

    pub fn from_report(report: &RiskReport, config: &McConfig) -> Self {
        let mut row = Self::new(report.quantity.clone(), report.mean).with_config(config);
        row.se = Some(report.se);
        row.samples = Some(report.samples);
        row.closed_form = report.closed_form.map(|c| c.value);
        row
    }

    pub fn to_csv(&self) -> String {
        fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
            v.map(f).unwrap_or_default()
        }
        let quantity = if self.quantity.contains(',') || self.quantity.contains('"') {
            format!("\"{}\"", self.quantity.replace('"', "\"\""))
        } else {
            self.quantity.clone()
        };
        [
            quantity,
            opt(self.n, |n| n.to_string()),
            opt(self.alpha, fmt_f64),
            opt(self.sigma, fmt_f64),
            opt(self.horizon, fmt_f64),
            opt(self.samples, |n| n.to_string()),
            fmt_f64(self.estimate),
            opt(self.se, fmt_f64),
            opt(self.closed_form, fmt_f64),
        ]
        .join(",")
    }
}

pub fn write_report<W: Write>(out: &mut W, metadata: &[(String, String)], rows: &[ReportRow]) -> Result<()> {
    crate::csv::write_metadata(out, metadata)?;
    writeln!(out, "{}", ReportRow::CSV_HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(samples: usize, alpha: f64) -> McConfig {
        McConfig::new(
            samples,
            17,
            TimeGrid::new(1.0, 256).unwrap(),
            BasisSpec::new(1.0, 1.0, 200).unwrap(),
            DriftSpec::linear(alpha),
        )
        .unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(cramer_rao_bound(1.0, 1.0), 0.5);
        assert_eq!(cramer_rao_bound(2.0, 1.0), 2.0);
        assert_eq!(cramer_rao_bound(1.3, 0.0), 0.0);
        assert!((small_noise_equivalent(10.0, 1.0, 1.0, 4).unwrap() - 0.0025).abs() < 1e-15);
        assert!(small_noise_equivalent(0.0, 1.0, 1.0, 4).is_err());
        let big = small_noise_equivalent(2.0, 1.0, 1.0, 1_000_000).unwrap();
        assert!((big - 0.25).abs() < 1e-6);
        assert!((asymptote(100).unwrap() - 0.006079).abs() < 1e-6);
        assert!((asymptote(100).unwrap() / asymptote(200).unwrap() - 2.0).abs() < 1e-14);
        assert!(asymptote(2).is_err());
        assert!((bayes_risk_closed_form(1.0, 1.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let basis = BasisSpec::new(1.0, 1.0, 10).unwrap();
        assert!(McConfig::new(1, 0, grid, basis, DriftSpec::Zero).is_err());
        let other = BasisSpec::new(1.0, 2.0, 10).unwrap();
        assert!(McConfig::new(10, 0, grid, other, DriftSpec::Zero).is_err());
        assert!(BasisSpec::new(0.0, 1.0, 10).is_err());
    }

    #[test]
    fn stein_orders_rejected_below_three() {
        let c = small(10, 1.0);
        assert!(stein_risk_closed_form(&c, 2).is_err());
        assert!(gain(&c, 2).is_err());
        assert!(gain_curve(&c, 5..=4).is_err());
        assert!(gain_large_sigma_limit(2, 10, 0).is_err());
    }

    #[test]
    fn reports_independent_of_workers() {
        let c = small(64, 1.0);
        let spec = EstimatorSpec::stein(c.basis, 4).unwrap();
        let a = empirical_risk(&spec, &c).unwrap();
        let b = empirical_risk(&spec, &c.clone().with_workers(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(gain(&c, 5).unwrap(), gain(&c.clone().with_workers(4), 5).unwrap());
    }

    #[test]
    fn gain_curve_rows_match_single_orders() {
        let c = small(500, 1.0);
        let curve = gain_curve(&c, 3..=8).unwrap();
        for n in [3, 5, 8] {
            let g = gain(&c.with_samples(curve.samples).unwrap(), n).unwrap();
            let row = curve.row(n).unwrap();
            assert_eq!(row.gain, g.mean);
            assert_eq!(row.se, g.se);
        }
        for r in &curve.rows {
            assert!(r.gain > 0.0);
        }
    }

    #[test]
    fn constant_shift_risk() {
        let c = small(400, 0.5);
        let rep = shifted_risk(&c, 0.7).unwrap();
        assert!(rep.z_score().unwrap().abs() < 3.0, "{rep:?}");
    }

    #[test]
    fn zero_functional_adds_nothing() {
        let c = small(50, 1.0);
        let f = SteinFamily::centred(4, 0.0).unwrap();
        let rep = risk_identity_check(&c, &f).unwrap();
        assert_eq!(rep.direct.mean, rep.gradient_form.mean);
        assert_eq!(rep.direct.mean, rep.sqrt_form.mean);
    }

    #[test]
    fn gauss_hermite_spherical_case() {
        // E[1/|eta|^2] = 1/(d - 2); the radial reduction makes this exact.
        for d in [3usize, 4, 6] {
            let v = gauss_hermite_inverse_mean(&vec![1.0; d], 6).unwrap();
            assert!((v - 1.0 / (d as f64 - 2.0)).abs() < 1e-12);
        }
        assert!(gauss_hermite_inverse_mean(&[1.0, 1.0], 6).is_err());
        assert!(gauss_hermite_inverse_mean(&[1.0; 4], 5).is_err());
    }

    #[test]
    fn report_row_format() {
        let row = ReportRow::new("x", 0.5).with_n(4).with_closed_form(0.25);
        assert_eq!(row.to_csv(), "x,4,,,,,5.0000000000000000e-1,,2.5000000000000000e-1");
        let quoted = ReportRow::new("a,b", 1.0);
        assert!(quoted.to_csv().starts_with("\"a,b\","));
    }
}
