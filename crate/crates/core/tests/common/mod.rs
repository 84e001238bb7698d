#![allow(dead_code)]

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided critical value of the standard normal at `alpha`.
pub fn z_critical(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Per-coordinate running sums for a z-test of `E[sample] = target`.
pub struct Moments {
    n: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    pub fn new(d: usize) -> Self {
        Moments {
            n: 0,
            sum: vec![0.0; d],
            sum_sq: vec![0.0; d],
        }
    }

    /// Adds `sample - target`, so sums stay small.
    pub fn push(&mut self, sample: &[f64], target: &[f64]) {
        self.n += 1;
        for ((s, q), (a, b)) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(sample.iter().zip(target)) {
            let e = a - b;
            *s += e;
            *q += e * e;
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.n as f64).collect()
    }

    /// Largest |z| over coordinates.
    pub fn max_abs_z(&self) -> f64 {
        self.abs_z().into_iter().fold(0.0, f64::max)
    }

    /// |z| per coordinate. Coordinates with zero spread count as zero if
    /// their mean error is zero and infinite otherwise.
    pub fn abs_z(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                let m = s / n;
                let var = (q / n - m * m).max(0.0) * n / (n - 1.0);
                if var == 0.0 {
                    if m == 0.0 { 0.0 } else { f64::INFINITY }
                } else {
                    m.abs() / (var / n).sqrt()
                }
            })
            .collect()
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
