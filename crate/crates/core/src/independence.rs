//! Ratio of conditional to unconditional capture probability when the size of file B is
//! random, computed by discrete convolution of a binomial overlap count with a Poisson
//! count of B-only records.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::write_csv;
use crate::scalar::{log_sum_exp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureScenario {
    pub n_a: usize,
    pub n_b: usize,
    /// Records of A captured so far.
    pub k: usize,
    /// Captured records that are also in B.
    pub c: usize,
    /// Probability that a not-yet-captured A record is in B.
    pub overlap_success: f64,
}

impl CaptureScenario {
    pub fn new(n_a: usize, n_b: usize, k: usize, c: usize) -> Self {
        CaptureScenario {
            n_a,
            n_b,
            k,
            c,
            overlap_success: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c > self.k || self.k > self.n_a {
            return Err(Error::Argument(format!(
                "need c <= k <= n_a, got c={} k={} n_a={}",
                self.c, self.k, self.n_a
            )));
        }
        if self.n_b < self.n_a {
            return Err(Error::Argument(format!("n_b={} is below n_a={}", self.n_b, self.n_a)));
        }
        if !(0.0..=1.0).contains(&self.overlap_success) {
            return Err(Error::Argument("overlap probability outside [0,1]".into()));
        }
        Ok(())
    }
}

struct LnFactorial<F>(Vec<F>);

impl<F: Scalar> LnFactorial<F> {
    fn upto(n: usize) -> Self {
        let mut v = Vec::with_capacity(n + 1);
        v.push(F::zero());
        for i in 1..=n {
            let prev = v[i - 1];
            v.push(prev + F::from_count(i).ln());
        }
        LnFactorial(v)
    }

    fn ln_binomial_pmf(&self, n: usize, p: F, x: usize) -> F {
        if x > n {
            return F::neg_infinity();
        }
        let term = |count: usize, q: F| {
            if count == 0 {
                F::zero()
            } else {
                F::from_count(count) * q.ln()
            }
        };
        self.0[n] - self.0[x] - self.0[n - x] + term(x, p) + term(n - x, F::one() - p)
    }

    fn ln_poisson_pmf(&self, lambda: F, x: usize) -> F {
        let t = if x == 0 { F::zero() } else { F::from_count(x) * lambda.ln() };
        t - lambda - self.0[x]
    }
}

/// `ln P(Bin(m, p) + Poisson(lambda) = total)`.
fn ln_convolution<F: Scalar>(lf: &LnFactorial<F>, m: usize, p: F, lambda: F, total: usize) -> F {
    let terms: Vec<F> = (0..=total.min(m))
        .map(|l| lf.ln_binomial_pmf(m, p, l) + lf.ln_poisson_pmf(lambda, total - l))
        .collect();
    log_sum_exp(&terms)
}

/// `P(N_B = n_b | c + 1 captured in B after k) / P(N_B = n_b | c captured in B after k - 1)`.
/// Zero when `n_b < c + 1`.
pub fn capture_ratio<F: Scalar>(s: &CaptureScenario) -> Result<F> {
    s.validate()?;
    if s.n_b < s.c + 1 {
        return Ok(F::zero());
    }
    let lf = LnFactorial::<F>::upto(s.n_b + s.n_a + 1);
    let p = F::lit(s.overlap_success);
    let lambda = F::from_count(s.n_b);
    let num = ln_convolution(&lf, s.n_a - s.k, p, lambda, s.n_b - (s.c + 1));
    let den = ln_convolution(&lf, s.n_a + 1 - s.k, p, lambda, s.n_b - s.c);
    Ok((num - den).exp())
}

/// Ratios for every `(c, n_b)` combination: `grid[ci][bi]`.
pub fn ratio_grid<F: Scalar>(n_a: usize, k: usize, c_values: &[usize], n_b_values: &[usize]) -> Result<Vec<Vec<F>>> {
    if c_values.is_empty() || n_b_values.is_empty() {
        return Err(Error::Argument("empty grid".into()));
    }
    c_values
        .par_iter()
        .map(|&c| {
            n_b_values
                .iter()
                .map(|&n_b| capture_ratio(&CaptureScenario::new(n_a, n_b, k, c)))
                .collect()
        })
        .collect()
}

pub fn write_grid<F: Scalar>(c_values: &[usize], n_b_values: &[usize], grid: &[Vec<F>], path: &Path) -> Result<()> {
    let rows = c_values.iter().zip(grid).flat_map(|(c, row)| {
        n_b_values
            .iter()
            .zip(row)
            .map(move |(n_b, r)| [c.to_string(), n_b.to_string(), r.to_string()])
    });
    write_csv(path, &["c", "n_b", "ratio"], rows)
}
