#![allow(dead_code)]

use mixbasis::basis::{BasisSpec, PhiTensor};
use rand::Rng;

/// Adaptive Simpson quadrature on `[a, b]`, split into `pieces` panels first
/// so that narrow features are not missed by the initial samples.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|p| {
            let (lo, hi) = (a + p as f64 * h, a + (p + 1) as f64 * h);
            let (flo, fhi, fmid) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
            simpson(f, lo, hi, flo, fmid, fhi, whole, tol / pieces as f64, 48)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `phi` from uniform data pushed through Bernstein bases of the given degrees.
pub fn random_bernstein_phi<R: Rng>(rng: &mut R, n: usize, degrees: &[usize]) -> PhiTensor {
    let specs: Vec<BasisSpec> = degrees.iter().map(|&d| BasisSpec::bernstein(d)).collect();
    let xs: Vec<f64> = (0..n * degrees.len()).map(|_| rng.random_range(0.02..0.98)).collect();
    PhiTensor::evaluate(&xs, &specs).unwrap()
}

/// Strictly positive `phi` with arbitrary values.
pub fn random_phi<R: Rng>(rng: &mut R, n: usize, sizes: &[usize]) -> PhiTensor {
    let stride: usize = sizes.iter().sum();
    let values = (0..n * stride).map(|_| rng.random_range(0.05..2.0)).collect();
    PhiTensor::from_values(n, sizes.to_vec(), values).unwrap()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Whether the curve has an interior local minimum with `x` in `(lo, hi)`.
pub fn has_local_min(grid: &[f64], values: &[f64], lo: f64, hi: f64) -> bool {
    (1..values.len() - 1).any(|p| {
        grid[p] > lo && grid[p] < hi && values[p] < values[p - 1] && values[p] <= values[p + 1]
    })
}
