//! Sample summaries with compensated summation.
//!
//! Replicate values are always reduced in replicate order, so a summary is
//! bit-identical however the replicates were scheduled.

/// Neumaier-compensated sum.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Mean, standard error and count of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
}

impl Summary {
    /// Two-pass mean and `stdev / sqrt(n)`. Needs at least two values.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 2, "standard error needs at least two samples");
        let mean = sum(values.iter().copied()) / n as f64;
        let ss = sum(values.iter().map(|v| (v - mean) * (v - mean)));
        let var = ss / (n - 1) as f64;
        Self {
            mean,
            se: (var / n as f64).sqrt(),
            samples: n,
        }
    }

    pub fn stdev(&self) -> f64 {
        self.se * (self.samples as f64).sqrt()
    }

    /// `self * factor + shift`.
    pub fn affine(&self, factor: f64, shift: f64) -> Self {
        Self {
            mean: self.mean * factor + shift,
            se: self.se * factor.abs(),
            samples: self.samples,
        }
    }
}

/// Standard error of the difference of two independent estimates.
pub fn combined_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// `|x - y| <= k * se`.
pub fn within(x: f64, y: f64, se: f64, k: f64) -> bool {
    (x - y).abs() <= k * se
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(v), 2.0);
    }

    #[test]
    fn summary_of_known_sample() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        let var = 5.0 / 3.0;
        assert!((s.se - (var / 4.0f64).sqrt()).abs() < 1e-15);
        assert!((s.stdev() - var.sqrt()).abs() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn summary_needs_two() {
        Summary::of(&[1.0]);
    }
}
