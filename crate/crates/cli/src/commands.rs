use std::io::Write;
use std::path::PathBuf;

use stein_drift::csv::fmt_f64;
use stein_drift::process::{simulate_noise, PathRenderer};
use stein_drift::risk::{
    self, bayes_risk, empirical_risk, gain_curve, gain_large_sigma_limit, gain_path_space, gain_rows,
    stein_risk_closed_form, universal_constant, write_report, ConstantMethod, ReportRow,
};
use stein_drift::rng::Domain;
use stein_drift::{BasisSpec, DriftSpec, EstimatorSpec, McConfig, StreamKey, TimeGrid};

use crate::checks::{self, Status, VerifyOptions};
use crate::output::{write_comment_header, write_file, Metadata};
use crate::{CliError, Settings};

/// Reference value of the Gaussian constant, as a fraction.
pub const CONSTANT_REFERENCE: f64 = 0.1138;

/// Resolved model parameters with their defaults.
struct Model {
    sigma: f64,
    horizon: f64,
    alpha: f64,
    grid: TimeGrid,
    basis: BasisSpec,
}

impl Model {
    fn from(s: &Settings, default_alpha: f64) -> Result<Self, CliError> {
        let sigma = s.sigma.unwrap_or(1.0);
        let horizon = s.horizon.unwrap_or(1.0);
        let grid = TimeGrid::new(horizon, s.grid.unwrap_or(stein_drift::grid::DEFAULT_INTERVALS))?;
        let basis = BasisSpec::new(sigma, horizon, s.terms.unwrap_or(stein_drift::basis::DEFAULT_TERMS))?;
        Ok(Self {
            sigma,
            horizon,
            alpha: s.alpha.unwrap_or(default_alpha),
            grid,
            basis,
        })
    }

    fn record(&self, meta: &mut Metadata) {
        meta.set("sigma", self.sigma)
            .set("T", self.horizon)
            .set("alpha", self.alpha)
            .set("grid", self.grid.intervals())
            .set("terms", self.basis.terms());
    }

    fn config(&self, samples: usize, seed: u64, workers: usize) -> Result<McConfig, CliError> {
        Ok(McConfig::new(samples, seed, self.grid, self.basis, DriftSpec::linear(self.alpha))?.with_workers(workers))
    }
}

fn estimator(s: &Settings, basis: BasisSpec, n: usize) -> Result<EstimatorSpec, CliError> {
    let name = s.estimator.as_deref().unwrap_or("stein");
    Ok(match name {
        "minimax" => EstimatorSpec::minimax(basis),
        "stein" => EstimatorSpec::stein(basis, n)?,
        "james-stein" => EstimatorSpec::james_stein(basis, n)?,
        "bayes" => EstimatorSpec::bayes(basis, s.tau.unwrap_or(1.0), DriftSpec::Zero)?,
        other => return Err(CliError::Usage(format!("unknown estimator {other:?}"))),
    })
}

fn order_range(s: &Settings, default_max: usize) -> Result<std::ops::RangeInclusive<usize>, CliError> {
    let n_max = s.n_max.unwrap_or(default_max);
    if n_max < 3 {
        return Err(CliError::Usage(format!("empty order range 3..={n_max}")));
    }
    Ok(3..=n_max)
}

fn ensure_clean(report: &risk::RiskReport) -> Result<(), CliError> {
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "{}: {} singular replicates",
            report.quantity, report.singular
        )))
    }
}

/// One seeded path and its drift estimate.
pub fn simulate(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let seed = s.seed.ok_or_else(|| CliError::Usage("simulate requires --seed".into()))?;
    let model = Model::from(s, 1.0)?;
    let n = s.n.unwrap_or(5);
    let spec = estimator(s, model.basis, n)?;
    let draw = simulate_noise(&model.basis, StreamKey::new(seed, Domain::PathNoise), 0);
    let path = PathRenderer::new(model.basis, model.grid)?.render(&draw, &DriftSpec::linear(model.alpha));
    let estimate = spec.estimate(&path)?;

    let mut meta = Metadata::new("simulate");
    model.record(&mut meta);
    meta.set("n", n).set("seed", seed).set("replicate", 0).set("estimator", spec.kind.label());
    let out = s.out_dir();
    let a = write_file(&out, "path.csv", |w| Ok(path.write_csv(w, meta.pairs())?))?;
    let b = write_file(&out, "estimate.csv", |w| Ok(estimate.write_csv(w, meta.pairs())?))?;
    Ok(vec![a, b])
}

/// Gain against `n` with the optimal order, plus a gnuplot script.
pub fn gain_curve_cmd(s: &Settings) -> Result<(usize, Vec<PathBuf>), CliError> {
    let model = Model::from(s, 1.0)?;
    let orders = order_range(s, 20)?;
    let samples = s.samples.unwrap_or(10_000);
    let seed = s.seed.unwrap_or(0);
    let report = gain_curve(&model.config(samples, seed, s.workers())?, orders.clone())?;
    if report.close_call {
        eprintln!(
            "warning: top two gains within one standard error at {} samples; n_opt is a tie on point estimates",
            report.samples
        );
    }

    let mut meta = Metadata::new("gain-curve");
    model.record(&mut meta);
    meta.set("n-min", orders.start())
        .set("n-max", orders.end())
        .set("samples", report.samples)
        .set("seed", seed)
        .set("escalated", report.escalated)
        .set("n_opt", report.n_opt);
    let out = s.out_dir();
    let csv = write_file(&out, "gain.csv", |w| {
        write_gain_table(w, &meta, &report.rows)?;
        Ok(())
    })?;
    let script = write_file(&out, "gain.gp", |w| {
        write_comment_header(w, &meta)?;
        writeln!(w, "set datafile separator ','")?;
        writeln!(w, "set key autotitle columnhead")?;
        writeln!(w, "set xlabel 'n'")?;
        writeln!(w, "set ylabel 'gain (%)'")?;
        writeln!(
            w,
            "plot 'gain.csv' using 1:($2*100):($3*100) with yerrorbars title 'gain', \\\n     '' using 1:($4*100) with lines title '6/(n pi^2)'"
        )?;
        Ok(())
    })?;
    Ok((report.n_opt, vec![csv, script]))
}

fn write_gain_table<W: Write>(w: &mut W, meta: &Metadata, rows: &[risk::GainRow]) -> Result<(), CliError> {
    stein_drift::csv::write_metadata(w, meta.pairs())?;
    writeln!(w, "n,gain,se,asymptote")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.n, fmt_f64(r.gain), fmt_f64(r.se), fmt_f64(r.asymptote))?;
    }
    Ok(())
}

/// Long-format gain table over `n` and a sweep of `T` or `sigma`.
pub fn surface(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let sweep = s.sweep.as_deref().unwrap_or("sigma");
    let defaults: &[f64] = match sweep {
        "T" => &[0.25, 0.5, 1.0, 2.0, 4.0],
        "sigma" => &[0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
        other => return Err(CliError::Usage(format!("sweep must be T or sigma, got {other:?}"))),
    };
    let values = s.value_list()?.unwrap_or_else(|| defaults.to_vec());
    if values.is_empty() {
        return Err(CliError::Usage("empty sweep".into()));
    }
    let orders = order_range(s, 10)?;
    let samples = s.samples.unwrap_or(10_000);
    let seed = s.seed.unwrap_or(0);
    let base = Model::from(s, 1.0)?;

    let mut meta = Metadata::new("surface");
    base.record(&mut meta);
    meta.set("sweep", sweep)
        .set("values", values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
        .set("n-min", orders.start())
        .set("n-max", orders.end())
        .set("samples", samples)
        .set("seed", seed);

    let mut rows = Vec::new();
    for &v in &values {
        let mut cell = s.clone();
        match sweep {
            "T" => cell.horizon = Some(v),
            _ => cell.sigma = Some(v),
        }
        let model = Model::from(&cell, 1.0)?;
        for r in gain_rows(&model.config(samples, seed, s.workers())?, orders.clone())? {
            rows.push((r.n, v, r.gain, r.se));
        }
    }
    let out = s.out_dir();
    let csv = write_file(&out, "surface.csv", |w| {
        stein_drift::csv::write_metadata(w, meta.pairs())?;
        writeln!(w, "n,{sweep},gain,se")?;
        for (n, v, g, se) in &rows {
            writeln!(w, "{n},{},{},{}", fmt_f64(*v), fmt_f64(*g), fmt_f64(*se))?;
        }
        Ok(())
    })?;
    let script = write_file(&out, "surface.gp", |w| {
        write_comment_header(w, &meta)?;
        writeln!(w, "set datafile separator ','")?;
        writeln!(w, "set key autotitle columnhead")?;
        writeln!(w, "set xlabel 'n'")?;
        writeln!(w, "set ylabel '{sweep}'")?;
        writeln!(w, "set zlabel 'gain (%)'")?;
        writeln!(w, "splot 'surface.csv' using 1:2:($3*100) with points title 'gain'")?;
        Ok(())
    })?;
    Ok(vec![csv, script])
}

/// Empirical risk of one estimator with its closed-form companions.
pub fn risk_cmd(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let model = Model::from(s, 1.0)?;
    let n = s.n.unwrap_or(4);
    let samples = s.samples.unwrap_or(10_000);
    let seed = s.seed.unwrap_or(0);
    let config = model.config(samples, seed, s.workers())?;
    let spec = estimator(s, model.basis, n)?;
    let report = empirical_risk(&spec, &config)?;
    ensure_clean(&report)?;

    let mut rows = vec![
        ReportRow::from_report(&report, &config).with_n(n),
        ReportRow::new("minimax_bound", config.minimax_risk()).with_config(&config),
    ];
    if matches!(s.estimator.as_deref().unwrap_or("stein"), "stein" | "james-stein") {
        let closed = stein_risk_closed_form(&config, n)?;
        rows.push(ReportRow::from_report(&closed, &config).with_n(n));
        let g = risk::gain(&config, n)?;
        rows.push(ReportRow::new("gain", g.mean).with_config(&config).with_n(n).with_summary(&g));
        let gp = gain_path_space(&config, n)?;
        ensure_clean(&gp)?;
        rows.push(ReportRow::from_report(&gp, &config).with_n(n));
    }
    for r in &rows {
        println!("{} = {} (se {})", r.quantity, r.estimate, r.se.map_or("-".into(), |v| v.to_string()));
    }
    let mut meta = Metadata::new("risk");
    model.record(&mut meta);
    meta.set("n", n).set("samples", samples).set("seed", seed).set("estimator", spec.kind.label());
    let path = write_file(&s.out_dir(), "risk.csv", |w| Ok(write_report(w, meta.pairs(), &rows)?))?;
    Ok(vec![path])
}

/// The four-dimensional Gaussian constant by quadrature and Monte Carlo.
pub fn constant_cmd(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let seed = s.seed.unwrap_or(0);
    let samples = s.samples.unwrap_or(100_000);
    let nodes = s.nodes.unwrap_or(128);
    let methods = match s.method.as_deref() {
        None => vec![ConstantMethod::Quadrature, ConstantMethod::MonteCarlo],
        Some("quadrature") => vec![ConstantMethod::Quadrature],
        Some("mc") => vec![ConstantMethod::MonteCarlo],
        Some(other) => return Err(CliError::Usage(format!("method must be mc or quadrature, got {other:?}"))),
    };
    let mut rows = Vec::new();
    for m in methods {
        let (tag, res) = match m {
            ConstantMethod::Quadrature => ("quadrature", nodes),
            ConstantMethod::MonteCarlo => ("mc", samples),
        };
        let c = universal_constant(m, res, seed)?;
        let row = |q: &str, v: f64, se: f64| {
            let mut r = ReportRow::new(format!("constant_{q}[{tag}]"), v);
            r.se = Some(se);
            r.samples = Some(res);
            r
        };
        let scale = c.integral / c.expectation;
        rows.push(row("integral", c.integral, c.error * scale));
        rows.push(row("expectation", c.expectation, c.error));
        rows.push(row("prefactor_16", c.prefactor_16, c.error * scale * 16.0 / std::f64::consts::PI.powi(4)).with_closed_form(CONSTANT_REFERENCE));
        rows.push(row("large_sigma_gain", c.large_sigma_gain, c.error * scale * 8.0 / std::f64::consts::PI.powi(4)).with_closed_form(CONSTANT_REFERENCE));
        println!(
            "{tag}: integral = {:.6}, 16/pi^4 * integral = {:.6}, 8/pi^4 * integral = {:.6}, reference = {CONSTANT_REFERENCE}",
            c.integral, c.prefactor_16, c.large_sigma_gain
        );
    }
    let limit = gain_large_sigma_limit(4, samples, seed)?;
    rows.push(
        ReportRow::new("gain_large_sigma_limit", limit.mean)
            .with_n(4)
            .with_summary(&limit)
            .with_closed_form(CONSTANT_REFERENCE),
    );
    println!("large-sigma limit of the gain at n = 4: {:.6} (se {:.6})", limit.mean, limit.se);

    let meta = Metadata::new("constant").with("samples", samples).with("nodes", nodes).with("seed", seed);
    let path = write_file(&s.out_dir(), "constant.csv", |w| Ok(write_report(w, meta.pairs(), &rows)?))?;
    Ok(vec![path])
}

/// Bayes and minimax risks under the Brownian prior around `alpha t`.
pub fn bayes_cmd(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let model = Model::from(s, 0.0)?;
    let tau = s.tau.unwrap_or(1.0);
    let samples = s.samples.unwrap_or(10_000);
    let seed = s.seed.unwrap_or(0);
    let config = model.config(samples, seed, s.workers())?;
    let rep = bayes_risk(&config, tau, &DriftSpec::linear(model.alpha))?;
    let rows = vec![
        ReportRow::from_report(&rep.bayes, &config),
        ReportRow::from_report(&rep.minimax, &config),
    ];
    for r in &rows {
        println!("{} = {} (se {})", r.quantity, r.estimate, r.se.unwrap_or(f64::NAN));
    }
    let mut meta = Metadata::new("bayes");
    model.record(&mut meta);
    meta.set("tau", tau).set("samples", samples).set("seed", seed);
    let path = write_file(&s.out_dir(), "bayes.csv", |w| Ok(write_report(w, meta.pairs(), &rows)?))?;
    Ok(vec![path])
}

/// Runs every acceptance check, prints one line each and writes
/// `verify.csv`. Fails if any check fails.
pub fn verify(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let opts = VerifyOptions::from_settings(s)?;
    let results = checks::run_all(&opts);
    let mut rows = Vec::new();
    for r in &results {
        println!("{}", r.line());
        rows.extend(r.rows.iter().cloned());
    }
    let failed: Vec<&str> = results.iter().filter(|r| r.status == Status::Fail).map(|r| r.id.as_str()).collect();
    let skipped = results.iter().filter(|r| r.status == Status::Skip).count();
    println!(
        "{} passed, {} failed, {} skipped",
        results.iter().filter(|r| r.status == Status::Pass).count(),
        failed.len(),
        skipped
    );

    let meta = opts.metadata();
    let path = write_file(&s.out_dir(), "verify.csv", |w| Ok(write_report(w, meta.pairs(), &rows)?))?;
    let status = write_file(&s.out_dir(), "verify_status.csv", |w| {
        stein_drift::csv::write_metadata(w, meta.pairs())?;
        writeln!(w, "check,status")?;
        for r in &results {
            writeln!(w, "{},{}", r.id, r.status.as_str())?;
        }
        Ok(())
    })?;
    if failed.is_empty() {
        Ok(vec![path, status])
    } else {
        Err(CliError::Failure(format!("failed checks: {}", failed.join(", "))))
    }
}
