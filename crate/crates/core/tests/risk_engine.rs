//! Monte Carlo properties of the estimators and the risk engine.

use std::f64::consts::PI;

use stein_drift::estimators::{bayes, james_stein, stein};
use stein_drift::process::render_path;
use stein_drift::risk::*;
use stein_drift::rng::Domain;
use stein_drift::stats::combined_se;
use stein_drift::{BasisSpec, DriftSpec, EstimatorSpec, McConfig, NoiseDraw, SteinFamily, StreamKey, TimeGrid};

const K: f64 = 3.0;

fn unit(samples: usize, seed: u64) -> McConfig {
    McConfig::unit(samples, seed, 1.0).unwrap()
}

fn coarse(samples: usize, seed: u64, sigma: f64, alpha: f64) -> McConfig {
    McConfig::new(
        samples,
        seed,
        TimeGrid::new(1.0, 1024).unwrap(),
        BasisSpec::new(sigma, 1.0, 1000).unwrap(),
        DriftSpec::linear(alpha),
    )
    .unwrap()
}

#[test]
fn stein_risk_two_ways() {
    let c = unit(10_000, 101);
    let direct = empirical_risk(&EstimatorSpec::stein(c.basis, 4).unwrap(), &c).unwrap();
    let closed = stein_risk_closed_form(&c, 4).unwrap();
    assert!(direct.is_clean());
    let se = combined_se(direct.se, closed.se);
    assert!((direct.mean - closed.mean).abs() <= K * se, "{direct:?} {closed:?}");
}

#[test]
fn james_stein_form_matches_stein_estimator() {
    let basis = BasisSpec::new(1.0, 1.0, 1000).unwrap();
    let grid = TimeGrid::new(1.0, 2048).unwrap();
    let key = StreamKey::new(4, Domain::PathNoise);
    for r in 0..5 {
        let draw = NoiseDraw {
            eta: key.normals(r, 1000),
            seed: 4,
            replicate: r,
        };
        let path = render_path(&basis, &draw, &DriftSpec::linear(1.0), &grid).unwrap();
        let a = stein(&path, &basis, 5).unwrap();
        let b = james_stein(&path, &basis, 5).unwrap();
        let scale = a.values.iter().zip(path.values()).map(|(a, x)| (a - x).abs()).fold(0.0, f64::max);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-8 * scale);
        }
    }
}

#[test]
fn stein_is_not_a_shrinkage_of_the_path() {
    let basis = BasisSpec::new(1.0, 1.0, 1000).unwrap();
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let key = StreamKey::new(8, Domain::PathNoise);
    let mut expanded = false;
    for r in 0..20 {
        let draw = NoiseDraw {
            eta: key.normals(r, 1000),
            seed: 8,
            replicate: r,
        };
        let path = render_path(&basis, &draw, &DriftSpec::linear(1.0), &grid).unwrap();
        let est = stein(&path, &basis, 4).unwrap();
        expanded |= est.values.iter().zip(path.values()).any(|(e, x)| e.abs() > x.abs() + 1e-9);
    }
    assert!(expanded);
}

#[test]
fn superefficiency_for_small_orders() {
    let c = coarse(10_000, 202, 1.0, 1.0);
    let r = c.minimax_risk();
    for n in 3..=10 {
        let rep = empirical_risk(&EstimatorSpec::stein(c.basis, n).unwrap(), &c).unwrap();
        // risk below R by at least K SE, with the paired gain as the tighter check
        let g = gain_path_space(&c, n).unwrap();
        assert!(rep.mean < r, "n={n}: {rep:?}");
        assert!(g.mean >= K * g.se, "n={n}: {g:?}");
        assert!(rep.is_clean() && g.is_clean());
    }
}

#[test]
fn two_gain_evaluators_agree() {
    let c = unit(10_000, 303);
    for n in [3, 4, 6] {
        let direct = gain(&c, n).unwrap();
        let path = gain_path_space(&c, n).unwrap();
        let se = combined_se(direct.se, path.se);
        assert!((direct.mean - path.mean).abs() <= K * se, "n={n}: {direct:?} {path:?}");
    }
}

#[test]
fn gain_is_positive_across_configurations() {
    for (alpha, sigma, horizon) in [(1.0, 1.0, 1.0), (5.0, 0.3, 2.0), (0.0, 2.0, 0.5), (-3.0, 1.0, 4.0)] {
        let c = McConfig::new(
            2_000,
            9,
            TimeGrid::new(horizon, 256).unwrap(),
            BasisSpec::new(sigma, horizon, 100).unwrap(),
            DriftSpec::linear(alpha),
        )
        .unwrap();
        for row in gain_curve(&c, 3..=12).unwrap().rows {
            assert!(row.gain > 0.0 && row.gain.is_finite(), "{row:?}");
        }
    }
}

#[test]
fn gain_approaches_large_sigma_limit_monotonically() {
    // shared coefficient draws; zero drift is the sigma -> infinity integrand
    for n in [3, 4, 8] {
        let limit = gain(&McConfig::unit(20_000, 404, 0.0).unwrap(), n).unwrap().mean;
        let gaps: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&s| (gain(&coarse(20_000, 404, s, 1.0), n).unwrap().mean - limit).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "n={n}: {gaps:?}");
    }
}

#[test]
fn large_sigma_correction_is_stable() {
    // in standardized coordinates the correction depends on sigma only
    // through <u, h_l> / sigma, which vanishes as sigma grows
    let n = 5;
    let gains: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&s| gain(&coarse(5_000, 505, s, 1.0), n).unwrap().mean)
        .collect();
    assert!((gains[1] - gains[2]).abs() < 1e-3 * gains[2], "{gains:?}");
    assert!((gains[0] - gains[2]).abs() < 0.1 * gains[2], "{gains:?}");
}

#[test]
fn large_sigma_limit_matches_independent_draws() {
    let big = coarse(10_000, 606, 1000.0, 1.0);
    for n in [3, 4, 8] {
        let g = gain(&big, n).unwrap();
        let l = gain_large_sigma_limit(n, 10_000, 607).unwrap();
        assert!((g.mean - l.mean).abs() <= K * combined_se(g.se, l.se), "n={n}: {g:?} {l:?}");
    }
}

#[test]
fn asymptotic_gain() {
    let g = gain(&unit(100_000, 708), 200).unwrap();
    let ratio = g.mean / asymptote(200).unwrap();
    assert!((0.9..=1.1).contains(&ratio), "{ratio}");
    assert!((asymptote(200).unwrap() - 6.0 / (200.0 * PI * PI)).abs() < 1e-17);
}

#[test]
fn small_noise_leading_term_matches() {
    let c = McConfig::unit(100_000, 809, 10.0).unwrap();
    let g = gain(&c, 4).unwrap();
    let ratio = g.mean / small_noise_leading_term(10.0, 1.0, 1.0, 4).unwrap();
    assert!((0.9..=1.1).contains(&ratio), "{ratio}");
}

#[test]
fn constant_shift_adds_its_energy() {
    let c = coarse(10_000, 910, 1.0, 1.0);
    for shift in [0.0, 0.3, -1.0] {
        let rep = shifted_risk(&c, shift).unwrap();
        let closed = 0.5 + shift * shift;
        assert!((rep.mean - closed).abs() <= K * rep.se, "{rep:?}");
    }
}

#[test]
fn minimax_is_unbiased_and_attains_the_bound() {
    let c = unit(10_000, 1011);
    let rep = empirical_risk(&EstimatorSpec::minimax(c.basis), &c).unwrap();
    assert!((rep.mean - 0.5).abs() <= K * rep.se, "{rep:?}");
    for row in pointwise_errors(&c, &[0.5, 1.0]).unwrap() {
        assert!(row.bias.mean.abs() <= K * row.bias.se, "{row:?}");
    }
}

#[test]
fn bayes_beats_minimax_under_its_prior() {
    let c = coarse(10_000, 1112, 1.0, 0.0);
    for tau in [0.5, 1.0, 3.0] {
        let rep = bayes_risk(&c, tau, &DriftSpec::linear(0.5)).unwrap();
        let closed = tau * tau / (1.0 + tau * tau) / 2.0;
        assert!((rep.bayes.mean - closed).abs() <= K * rep.bayes.se, "{rep:?}");
        assert!(rep.bayes.mean < rep.minimax.mean);
    }
}

#[test]
fn bayes_estimator_is_a_convex_combination() {
    let basis = BasisSpec::new(2.0, 1.0, 100).unwrap();
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let draw = NoiseDraw {
        eta: vec![0.5; 100],
        seed: 0,
        replicate: 0,
    };
    let path = render_path(&basis, &draw, &DriftSpec::Zero, &grid).unwrap();
    let v = DriftSpec::linear(1.0);
    let est = bayes(&path, 2.0, 1.0, &v).unwrap();
    for (i, t) in grid.points().enumerate() {
        let closed = (4.0 * t + path.values()[i]) / 5.0;
        assert!((est.values[i] - closed).abs() < 1e-15);
    }
}

#[test]
fn identity_expressions_agree() {
    let c = unit(10_000, 1213);
    for (n, a) in [(4, -2.0), (5, -1.0), (6, -5.0)] {
        let rep = risk_identity_check(&c, &SteinFamily::centred(n, a).unwrap()).unwrap();
        assert!(rep.all_within(K), "n={n} a={a}: {:?}", rep.differences);
        assert!(rep.direct.is_clean());
    }
}

#[test]
fn reports_are_bit_identical_across_workers() {
    let c = coarse(3_000, 1314, 1.0, 1.0);
    let spec = EstimatorSpec::stein(c.basis, 4).unwrap();
    let one = empirical_risk(&spec, &c).unwrap();
    let many = empirical_risk(&spec, &c.clone().with_workers(4)).unwrap();
    assert_eq!(one.mean.to_bits(), many.mean.to_bits());
    assert_eq!(one.se.to_bits(), many.se.to_bits());
    let a = gain_curve(&c, 3..=10).unwrap();
    let b = gain_curve(&c.clone().with_workers(3), 3..=10).unwrap();
    assert_eq!(a, b);
}

#[test]
fn spherical_inverse_chi_square() {
    let s = weighted_inverse_mean(&[1.0; 4], 100_000, StreamKey::new(15, Domain::Constant), 1).unwrap();
    assert!((s.mean - 0.5).abs() <= K * s.se, "{s:?}");
}

/// `E[1 / sum w_l eta_l^2] = int_0^inf prod_l (1 + 2 s w_l)^{-1/2} ds`,
/// by the trapezoid rule in `x = log s`, where the integrand decays
/// exponentially at both ends.
fn laplace_inverse_mean(weights: &[f64]) -> f64 {
    let h = 1e-3;
    let mut acc = 0.0;
    let mut x = -60.0;
    while x <= 60.0 {
        let s = f64::exp(x);
        acc += s * weights.iter().map(|w| (1.0 + 2.0 * s * w).powf(-0.5)).product::<f64>();
        x += h;
    }
    acc * h
}

#[test]
fn gauss_hermite_converges_to_laplace_oracle() {
    let w = [1.0, 9.0, 25.0, 49.0];
    let exact = laplace_inverse_mean(&w);
    // the large-sigma gain at n = 4 rounds to 11.38%
    assert!((32.0 / (PI * PI) * exact - 0.1138).abs() < 5e-5, "{exact}");
    assert!((laplace_inverse_mean(&[1.0; 4]) - 0.5).abs() < 1e-9);
    let errs: Vec<f64> = [32, 64, 128].iter().map(|&m| (gauss_hermite_inverse_mean(&w, m).unwrap() - exact).abs()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    let q = universal_constant(ConstantMethod::Quadrature, 128, 0).unwrap();
    assert!((q.expectation - exact).abs() <= q.error, "{q:?}");
}

#[test]
fn constant_quadrature_and_monte_carlo_agree() {
    let q = universal_constant(ConstantMethod::Quadrature, 128, 0).unwrap();
    let m = universal_constant(ConstantMethod::MonteCarlo, 200_000, 16).unwrap();
    assert!((q.expectation - m.expectation).abs() <= K * m.error + q.error, "{q:?} {m:?}");
    assert!((q.prefactor_16 / q.large_sigma_gain - 2.0).abs() < 1e-14);
    let l = gain_large_sigma_limit(4, 100_000, 17).unwrap();
    assert!((l.mean - q.large_sigma_gain).abs() <= K * l.se + q.error, "{l:?} {q:?}");
}

#[test]
fn singular_configuration_rejected_not_regularized() {
    let c = McConfig::unit(10, 1, 1.0).unwrap();
    assert!(stein_risk_closed_form(&c, 2).is_err());
    assert!(small_noise_equivalent(0.0, 1.0, 1.0, 4).is_err());
}
