//! Small numeric helpers shared by the fitters.

use statrs::function::gamma::ln_gamma;

/// Table of `ln(n!)` for `n < len`, built by cumulative summation so that
/// equal arguments always produce bit-identical values.
#[derive(Debug, Clone)]
pub struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    pub fn new(max_n: usize) -> Self {
        let mut table = Vec::with_capacity(max_n + 1);
        let mut acc = 0.0f64;
        table.push(0.0);
        for n in 1..=max_n {
            acc += (n as f64).ln();
            table.push(acc);
        }
        Self { table }
    }

    #[inline]
    pub fn get(&self, n: usize) -> f64 {
        match self.table.get(n) {
            Some(v) => *v,
            None => ln_gamma(n as f64 + 1.0),
        }
    }
}

/// `ln(n!)` through the log-gamma function.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Numerically stable `ln(sum(exp(v)))`. Returns `-inf` for an empty slice or
/// when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log-weights in place into probabilities. Returns the
/// log-normalizer, or `None` if every weight is zero.
pub fn softmax_in_place(values: &mut [f64]) -> Option<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
    Some(max + sum.ln())
}
