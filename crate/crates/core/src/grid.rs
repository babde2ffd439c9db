//! Uniform time grids on `[0, T]` and the composite trapezoid rule.

use crate::error::{Error, Result};

/// Default number of intervals.
pub const DEFAULT_INTERVALS: usize = 4096;

/// The points `t_i = i T / M`, `i = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    intervals: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("T", format!("must be finite and > 0, got {horizon}")));
        }
        if intervals < 2 {
            return Err(Error::invalid("M", format!("need at least 2 intervals, got {intervals}")));
        }
        Ok(Self { horizon, intervals })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of grid points, `M + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    /// `t_i`; the last point is exactly `T`.
    pub fn t(&self, i: usize) -> f64 {
        debug_assert!(i <= self.intervals);
        if i == self.intervals {
            self.horizon
        } else {
            self.horizon * i as f64 / self.intervals as f64
        }
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.t(i))
    }

    /// Evaluates `f` at every grid point.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.points().map(f).collect()
    }

    /// Composite trapezoid rule for values sampled on this grid.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len(), "values must be sampled on the grid");
        let interior: f64 = values[1..self.intervals].iter().sum();
        self.step() * (0.5 * (values[0] + values[self.intervals]) + interior)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.trapezoid(&self.sample(f))
    }

    /// Running trapezoid integral `int_0^{t_i}`, starting at 0.
    pub fn cumulative_trapezoid(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len(), "values must be sampled on the grid");
        let half = 0.5 * self.step();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(values.len());
        out.push(0.0);
        for w in values.windows(2) {
            acc += half * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// Left-endpoint (Ito) sum `sum_i f(t_i) (x_{i+1} - x_i)`.
    pub fn ito_sum(&self, integrand: &[f64], path: &[f64]) -> f64 {
        assert_eq!(integrand.len(), self.len());
        assert_eq!(path.len(), self.len());
        integrand
            .iter()
            .zip(path.windows(2))
            .map(|(f, w)| f * (w[1] - w[0]))
            .sum()
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            intervals: DEFAULT_INTERVALS,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_spacing() {
        let g = TimeGrid::new(3.0, 7).unwrap();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(7), 3.0);
        let pts: Vec<f64> = g.points().collect();
        for w in pts.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - 3.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
        assert!(TimeGrid::new(f64::NAN, 10).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn trapezoid_exact_on_linear() {
        let g = TimeGrid::new(2.0, 5).unwrap();
        assert!((g.integrate(|t| 3.0 * t + 1.0) - 8.0).abs() < 1e-14);
        let cum = g.cumulative_trapezoid(&g.sample(|_| 2.0));
        for (i, c) in cum.iter().enumerate() {
            assert!((c - 2.0 * g.t(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn ito_sum_of_constant_is_increment() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let x = g.sample(|t| t * t);
        assert!((g.ito_sum(&vec![1.0; 9], &x) - 1.0).abs() < 1e-15);
    }
}
