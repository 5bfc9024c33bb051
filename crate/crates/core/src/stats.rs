//! Running moments and the binomial consistency tests used by the checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

/// Welford accumulator that can be merged in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn push_bool(&mut self, b: bool) {
        self.push(if b { 1.0 } else { 0.0 });
    }

    /// Equivalent to `total` calls of `push_bool`, `hits` of them true.
    pub fn from_counts(hits: u64, total: u64) -> Self {
        if total == 0 {
            return Self::default();
        }
        let p = hits as f64 / total as f64;
        Self {
            n: total,
            mean: p,
            m2: total as f64 * p * (1.0 - p),
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        *self = Self { n, mean, m2 };
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn summary(&self) -> Metric {
        Metric {
            mean: self.mean,
            stderr: self.stderr(),
            n: self.n,
        }
    }
}

/// Reported estimate: mean, standard error and sample count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    /// Rejects only an excess of successes.
    Greater,
}

/// Exact binomial test p-value for `successes` out of `trials` at rate `p`.
/// The two-sided value doubles the smaller tail, capped at 1.
pub fn binomial_p_value(successes: u64, trials: u64, p: f64, side: Sidedness) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let dist = Binomial::new(p, trials).expect("valid binomial parameters");
    let lower = dist.cdf(successes);
    let upper = if successes == 0 {
        1.0
    } else {
        dist.sf(successes - 1)
    };
    match side {
        Sidedness::TwoSided => (2.0 * lower.min(upper)).min(1.0),
        Sidedness::Greater => upper,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_repeated_pushes() {
        let mut a = Accumulator::new();
        for i in 0..37 {
            a.push_bool(i % 3 == 0);
        }
        let b = Accumulator::from_counts(13, 37);
        assert_eq!(a.count(), b.count());
        assert!((a.mean() - b.mean()).abs() < 1e-15);
        assert!((a.variance() - b.variance()).abs() < 1e-12);
        assert_eq!(Accumulator::from_counts(0, 0).count(), 0);
    }

    #[test]
    fn welford_matches_direct_moments() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let mut acc = Accumulator::new();
        xs.iter().for_each(|&x| acc.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((acc.mean() - mean).abs() < 1e-12);
        assert!((acc.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_sequential() {
        let mut left = Accumulator::new();
        let mut right = Accumulator::new();
        let mut all = Accumulator::new();
        for i in 0..50 {
            let x = (i as f64 * 0.37).sin();
            if i < 20 {
                left.push(x)
            } else {
                right.push(x)
            }
            all.push(x);
        }
        left.merge(&right);
        assert_eq!(left.count(), all.count());
        assert!((left.mean() - all.mean()).abs() < 1e-12);
        assert!((left.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn binomial_p_values() {
        // Symmetric case: the centre is never rejected, far tails are.
        assert!((binomial_p_value(50, 100, 0.5, Sidedness::TwoSided) - 1.0).abs() < 1e-12);
        assert!(binomial_p_value(90, 100, 0.5, Sidedness::TwoSided) < 1e-10);
        assert!(binomial_p_value(10, 100, 0.5, Sidedness::Greater) > 0.999);
        // P(X >= 3) for Bin(3, 1/2) is 1/8.
        assert!((binomial_p_value(3, 3, 0.5, Sidedness::Greater) - 0.125).abs() < 1e-12);
        assert_eq!(binomial_p_value(0, 0, 0.3, Sidedness::TwoSided), 1.0);
    }
}
