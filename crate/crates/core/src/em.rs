//! Expectation-maximization for a fixed number of components.
//!
//! The E-step computes, for every observation, the posterior probability of
//! each component and the conditional distribution over slots within each
//! (component, item) pair. The M-step re-estimates the component weights `pi`
//! and the slot weights `theta` in closed form. Everything touching products
//! over items runs in log space so that `M` in the thousands does not underflow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde_json::json;

use crate::basis::{offsets_of, PhiTensor};
use crate::error::{Error, Result};
use crate::par;
use crate::special::softmax_in_place;

/// Mixture parameters: component weights and per-(component, item) slot weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmParams {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    pi: Vec<f64>,
    /// `k` rows of `sum(T_j)` entries.
    theta: Vec<f64>,
}

impl EmParams {
    /// Validates and builds parameters from `pi[r]` and `theta[r][j][t]`.
    pub fn new(pi: Vec<f64>, theta: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let k = pi.len();
        if k == 0 || theta.len() != k {
            return Err(Error::Dimension(format!(
                "{} component weights for {} theta rows",
                k,
                theta.len()
            )));
        }
        let sizes: Vec<usize> = theta[0].iter().map(Vec::len).collect();
        for (r, row) in theta.iter().enumerate() {
            let s: Vec<usize> = row.iter().map(Vec::len).collect();
            if s != sizes {
                return Err(Error::Dimension(format!("theta row {r} has item sizes {s:?}, expected {sizes:?}")));
            }
        }
        let check = |v: &[f64], what: String| -> Result<()> {
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Config(format!("{what} has negative or non-finite entries")));
            }
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("{what} sums to {s}, not 1")));
            }
            Ok(())
        };
        check(&pi, "pi".into())?;
        for (r, row) in theta.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                check(v, format!("theta[{r}][{j}]"))?;
            }
        }
        let offsets = offsets_of(&sizes);
        Ok(Self {
            sizes,
            offsets,
            pi,
            theta: theta.into_iter().flatten().flatten().collect(),
        })
    }

    /// Uniform `pi` and uniform `theta`.
    pub fn uniform(k: usize, sizes: &[usize]) -> Self {
        let offsets = offsets_of(sizes);
        let stride = *offsets.last().unwrap();
        let mut theta = vec![0.0; k * stride];
        for r in 0..k {
            for (j, &t) in sizes.iter().enumerate() {
                let base = r * stride + offsets[j];
                theta[base..base + t].fill(1.0 / t as f64);
            }
        }
        Self {
            sizes: sizes.to_vec(),
            offsets,
            pi: vec![1.0 / k as f64; k],
            theta,
        }
    }

    /// Uniform `pi`; each `theta[r][j]` drawn from a flat Dirichlet.
    pub fn random<R: Rng + ?Sized>(k: usize, sizes: &[usize], rng: &mut R) -> Self {
        let mut params = Self::uniform(k, sizes);
        let stride = params.stride();
        for r in 0..k {
            for j in 0..sizes.len() {
                let (a, b) = (r * stride + params.offsets[j], r * stride + params.offsets[j + 1]);
                let block = &mut params.theta[a..b];
                for v in block.iter_mut() {
                    *v = rng.sample::<f64, _>(Exp1);
                }
                let s: f64 = block.iter().sum();
                block.iter_mut().for_each(|v| *v /= s);
            }
        }
        params
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn stride(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn theta(&self, r: usize, j: usize) -> &[f64] {
        let base = r * self.stride();
        &self.theta[base + self.offsets[j]..base + self.offsets[j + 1]]
    }

    /// `theta[r][j][t]` as nested vectors.
    pub fn theta_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.k())
            .map(|r| (0..self.sizes.len()).map(|j| self.theta(r, j).to_vec()).collect())
            .collect()
    }

    /// Largest absolute difference over all `pi` and `theta` entries.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.pi
            .iter()
            .zip(&other.pi)
            .chain(self.theta.iter().zip(&other.theta))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Parameters with components reordered: new component `r` is old `perm[r]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let stride = self.stride();
        let mut out = self.clone();
        for (r, &src) in perm.iter().enumerate() {
            out.pi[r] = self.pi[src];
            out.theta[r * stride..(r + 1) * stride]
                .copy_from_slice(&self.theta[src * stride..(src + 1) * stride]);
        }
        out
    }

    fn check_dims(&self, phi: &PhiTensor) -> Result<()> {
        if self.sizes != phi.sizes() {
            return Err(Error::Dimension(format!(
                "parameter item sizes {:?} do not match phi sizes {:?}",
                self.sizes,
                phi.sizes()
            )));
        }
        Ok(())
    }
}

/// E-step output: `q_comp[i][r]` and the per-(i, r, j) slot factors
/// `theta_rjt phi_ijt / sum_u theta_rju phi_iju`, so that
/// `q_slot[i][j][r][t] = factor * q_comp[i][r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    k: usize,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    q_comp: Vec<f64>,
    slot_factor: Vec<f64>,
}

impl Responsibilities {
    pub fn n_obs(&self) -> usize {
        self.q_comp.len() / self.k
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q_comp(&self, i: usize) -> &[f64] {
        &self.q_comp[i * self.k..(i + 1) * self.k]
    }

    fn stride(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Conditional slot distribution for item `j` given component `r`.
    pub fn slot_given_comp(&self, i: usize, r: usize, j: usize) -> &[f64] {
        let s = self.stride();
        let base = (i * self.k + r) * s;
        &self.slot_factor[base + self.offsets[j]..base + self.offsets[j + 1]]
    }

    /// Joint probability that observation `i` is in component `r` with item
    /// `j` drawn from slot `t`.
    pub fn q_slot(&self, i: usize, j: usize, r: usize, t: usize) -> f64 {
        self.slot_given_comp(i, r, j)[t] * self.q_comp(i)[r]
    }

    /// Builds responsibilities directly from one-hot or soft component weights
    /// and slot factors. Used for testing the M-step in isolation.
    pub fn from_parts(
        k: usize,
        sizes: Vec<usize>,
        q_comp: Vec<f64>,
        slot_factor: Vec<f64>,
    ) -> Result<Self> {
        let offsets = offsets_of(&sizes);
        let stride = *offsets.last().unwrap();
        if k == 0 || !q_comp.len().is_multiple_of(k) || slot_factor.len() != q_comp.len() * stride {
            return Err(Error::Dimension("inconsistent responsibility dimensions".into()));
        }
        Ok(Self {
            k,
            sizes,
            offsets,
            q_comp,
            slot_factor,
        })
    }
}

const OBS_BLOCK: usize = 256;

/// E-step for observations `lo..hi`, written into `q` (`k` per observation)
/// and `slots` (`k * stride` per observation). Returns the log-likelihood.
fn e_step_rows(phi: &PhiTensor, params: &EmParams, lo: usize, hi: usize, q: &mut [f64], slots: &mut [f64]) -> Result<f64> {
    let k = params.k();
    let stride = params.stride();
    let offsets = &params.offsets;
    let mut log_lik = 0.0;
    let mut log_part = vec![0.0; k];
    for i in lo..hi {
        let q = &mut q[(i - lo) * k..(i - lo + 1) * k];
        let slots = &mut slots[(i - lo) * k * stride..(i - lo + 1) * k * stride];
        // Linear-space products; the part folded into logs lives in `log_part`.
        let mut folded = false;
        let row = phi.row(i);
        for r in 0..k {
            log_part[r] = 0.0;
            let mut prod = params.pi[r];
            let theta = &params.theta[r * stride..(r + 1) * stride];
            let out = &mut slots[r * stride..(r + 1) * stride];
            for w in offsets.windows(2) {
                let (a, b) = (w[0], w[1]);
                let out = &mut out[a..b];
                let mut sum = 0.0;
                for ((o, th), ph) in out.iter_mut().zip(&theta[a..b]).zip(&row[a..b]) {
                    *o = th * ph;
                    sum += *o;
                }
                if sum > 0.0 {
                    let inv = 1.0 / sum;
                    out.iter_mut().for_each(|o| *o *= inv);
                }
                prod *= sum;
                if !(1e-150..=1e150).contains(&prod) {
                    log_part[r] += prod.ln();
                    prod = 1.0;
                    folded = true;
                }
            }
            q[r] = prod;
        }
        if folded {
            for (v, lp) in q.iter_mut().zip(&log_part) {
                *v = lp + v.ln();
            }
            log_lik += softmax_in_place(q).ok_or(Error::ZeroLikelihood { i })?;
        } else {
            let total: f64 = q.iter().sum();
            let inv = 1.0 / total;
            q.iter_mut().for_each(|v| *v *= inv);
            log_lik += total.ln();
        }
    }
    Ok(log_lik)
}

fn e_step_full(phi: &PhiTensor, params: &EmParams) -> Result<(Responsibilities, f64)> {
    params.check_dims(phi)?;
    let n = phi.n_obs();
    let k = params.k();
    let stride = params.stride();
    let mut q_comp = vec![0.0; n * k];
    let mut slot_factor = vec![0.0; n * k * stride];
    let per_block = par::try_map_chunk_pairs(
        &mut q_comp,
        OBS_BLOCK * k,
        &mut slot_factor,
        OBS_BLOCK * k * stride,
        |b, q, slots| {
            let lo = b * OBS_BLOCK;
            e_step_rows(phi, params, lo, (lo + OBS_BLOCK).min(n), q, slots)
        },
    )?;
    let log_post = per_block.iter().sum();
    let resp = Responsibilities {
        k,
        sizes: params.sizes.clone(),
        offsets: params.offsets.clone(),
        q_comp,
        slot_factor,
    };
    Ok((resp, log_post))
}

/// Computes the component and slot responsibilities for the given parameters.
pub fn e_step(phi: &PhiTensor, params: &EmParams) -> Result<Responsibilities> {
    e_step_full(phi, params).map(|(resp, _)| resp)
}

/// `sum_i ln sum_r pi_r prod_j sum_t theta_rjt phi_ijt`, the log posterior of
/// the parameters up to an additive constant.
pub fn log_marginal_posterior_em(phi: &PhiTensor, params: &EmParams) -> Result<f64> {
    params.check_dims(phi)?;
    e_step_full(phi, params).map(|(_, log_post)| log_post)
}

/// Closed-form re-estimation of `pi` and `theta` from responsibilities.
///
/// Components with zero total responsibility get uniform `theta`; their
/// indices are returned alongside the parameters.
pub fn m_step_checked(resp: &Responsibilities, phi: &PhiTensor) -> Result<(EmParams, Vec<usize>)> {
    if resp.sizes != phi.sizes() || resp.n_obs() != phi.n_obs() {
        return Err(Error::Dimension("responsibilities do not match phi".into()));
    }
    let n = resp.n_obs();
    let k = resp.k;
    let m = resp.sizes.len();
    let stride = resp.stride();

    // Per-block sums of q (first `k` entries) and q * slot factors, added in block order.
    let width = k * (stride + 1);
    let partial = par::map_range(n.div_ceil(OBS_BLOCK), |b| {
        let mut acc = vec![0.0; width];
        let (totals, weighted) = acc.split_at_mut(k);
        for i in b * OBS_BLOCK..((b + 1) * OBS_BLOCK).min(n) {
            let slots = &resp.slot_factor[i * k * stride..(i + 1) * k * stride];
            for (r, &q) in resp.q_comp(i).iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                totals[r] += q;
                let dst = &mut weighted[r * stride..(r + 1) * stride];
                for (d, f) in dst.iter_mut().zip(&slots[r * stride..(r + 1) * stride]) {
                    *d += q * f;
                }
            }
        }
        acc
    });
    let mut acc = vec![0.0; width];
    for block in partial {
        acc.iter_mut().zip(&block).for_each(|(a, b)| *a += b);
    }
    let (totals, weighted) = acc.split_at(k);
    let mut pi: Vec<f64> = totals.iter().map(|t| t / n as f64).collect();
    let pi_sum: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= pi_sum);

    let mut theta = weighted.to_vec();
    let mut starved = Vec::new();
    for r in 0..k {
        for j in 0..m {
            let block = &mut theta[r * stride + resp.offsets[j]..r * stride + resp.offsets[j + 1]];
            let s: f64 = block.iter().sum();
            if s > 0.0 && totals[r] > 0.0 {
                for a in block.iter_mut() {
                    *a /= s;
                    // Subnormal weights are flushed so they cannot slow later iterations.
                    if *a < f64::MIN_POSITIVE {
                        *a = 0.0;
                    }
                }
            } else {
                let u = 1.0 / block.len() as f64;
                block.iter_mut().for_each(|a| *a = u);
                if starved.last() != Some(&r) {
                    starved.push(r);
                }
            }
        }
    }
    let params = EmParams {
        sizes: resp.sizes.clone(),
        offsets: resp.offsets.clone(),
        pi,
        theta,
    };
    Ok((params, starved))
}

/// M-step without the starvation report.
pub fn m_step(resp: &Responsibilities, phi: &PhiTensor) -> Result<EmParams> {
    m_step_checked(resp, phi).map(|(p, _)| p)
}

/// Most probable component for each observation; ties go to the lowest index.
pub fn hard_assign(resp: &Responsibilities) -> Vec<usize> {
    (0..resp.n_obs())
        .map(|i| {
            let q = resp.q_comp(i);
            let mut best = 0;
            for (r, &v) in q.iter().enumerate() {
                if v > q[best] {
                    best = r;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute parameter change.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-10,
            restarts: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: EmParams,
    pub resp: Responsibilities,
    /// Log posterior of `params`, up to a constant.
    pub log_post: f64,
    pub iters: usize,
    pub converged: bool,
    /// Log posterior of every parameter iterate, starting with the initial one.
    pub trace: Vec<f64>,
    /// Components that received no responsibility during the winning run.
    pub starved: Vec<usize>,
    /// Which restart produced this fit.
    pub restart: usize,
}

impl EmFit {
    /// The serialized form: `k`, `pi`, `theta`, `log_post`, `iters`,
    /// `converged`, `q_comp`.
    pub fn to_json(&self) -> serde_json::Value {
        let q: Vec<&[f64]> = (0..self.resp.n_obs()).map(|i| self.resp.q_comp(i)).collect();
        json!({
            "k": self.params.k(),
            "pi": self.params.pi(),
            "theta": self.params.theta_nested(),
            "log_post": self.log_post,
            "iters": self.iters,
            "converged": self.converged,
            "q_comp": q,
        })
    }
}

/// Runs EM from the given starting parameters.
pub fn fit_em_from(phi: &PhiTensor, init: EmParams, max_iter: usize, tol: f64) -> Result<EmFit> {
    init.check_dims(phi)?;
    let mut params = init;
    let mut trace = Vec::new();
    let mut starved = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    while iters < max_iter {
        let (resp, log_post) = e_step_full(phi, &params)?;
        trace.push(log_post);
        let (next, empty) = m_step_checked(&resp, phi)?;
        for r in empty {
            if !starved.contains(&r) {
                starved.push(r);
            }
        }
        let delta = next.max_abs_diff(&params);
        params = next;
        iters += 1;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let (resp, log_post) = e_step_full(phi, &params)?;
    trace.push(log_post);
    Ok(EmFit {
        params,
        resp,
        log_post,
        iters,
        converged,
        trace,
        starved,
        restart: 0,
    })
}

/// Best-of-`restarts` EM fit with `k` components.
///
/// Restart `s` draws its starting point from a ChaCha8 stream `s` seeded by
/// `opts.seed`, so the result is reproducible regardless of thread count.
pub fn fit_em(phi: &PhiTensor, k: usize, opts: &EmOptions) -> Result<EmFit> {
    if k == 0 || k > phi.n_obs() {
        return Err(Error::Config(format!(
            "k = {k} must lie in 1..={} (the number of observations)",
            phi.n_obs()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let restarts = opts.restarts.max(1);
    let fits = par::map_range(restarts, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(s as u64);
        let init = EmParams::random(k, phi.sizes(), &mut rng);
        fit_em_from(phi, init, opts.max_iter, opts.tol).map(|mut f| {
            f.restart = s;
            f
        })
    });
    let mut best: Option<EmFit> = None;
    for fit in fits {
        let fit = fit?;
        if best.as_ref().is_none_or(|b| fit.log_post > b.log_post) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_phi() -> PhiTensor {
        PhiTensor::from_values(
            4,
            vec![2, 3],
            vec![
                2.0, 0.1, 1.0, 0.5, 0.2, //
                0.3, 1.7, 0.2, 0.9, 1.1, //
                1.2, 0.8, 0.4, 0.4, 1.3, //
                0.1, 1.9, 1.5, 0.5, 0.2,
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_component_takes_everything() {
        let phi = tiny_phi();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = EmParams::random(1, phi.sizes(), &mut rng);
        let resp = e_step(&phi, &params).unwrap();
        for i in 0..4 {
            assert_eq!(resp.q_comp(i), &[1.0]);
        }
    }

    #[test]
    fn uniform_params_give_uniform_q() {
        let phi = tiny_phi();
        let resp = e_step(&phi, &EmParams::uniform(3, phi.sizes())).unwrap();
        for i in 0..4 {
            for &q in resp.q_comp(i) {
                assert_abs_diff_eq!(q, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_two_component_q() {
        let phi = PhiTensor::from_values(1, vec![2], vec![2.0, 0.0]).unwrap();
        let params = EmParams::new(vec![0.5, 0.5], vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]]).unwrap();
        let resp = e_step(&phi, &params).unwrap();
        assert_eq!(resp.q_comp(0), &[1.0, 0.0]);
    }

    #[test]
    fn zero_likelihood_names_observation() {
        let phi = PhiTensor::from_values(2, vec![2], vec![1.0, 1.0, 0.0, 2.0]).unwrap();
        let params = EmParams::new(vec![1.0], vec![vec![vec![1.0, 0.0]]]).unwrap();
        match e_step(&phi, &params).unwrap_err() {
            Error::ZeroLikelihood { i } => assert_eq!(i, 1),
            e => panic!("unexpected {e}"),
        }
        assert!(log_marginal_posterior_em(&phi, &params).is_err());
    }

    #[test]
    fn slot_marginals_sum_to_component_weight() {
        let phi = tiny_phi();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = EmParams::random(3, phi.sizes(), &mut rng);
        let resp = e_step(&phi, &params).unwrap();
        for i in 0..4 {
            for r in 0..3 {
                for j in 0..2 {
                    let s: f64 = (0..phi.sizes()[j]).map(|t| resp.q_slot(i, j, r, t)).sum();
                    assert_abs_diff_eq!(s, resp.q_comp(i)[r], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn m_step_counts_one_hot() {
        let phi = PhiTensor::from_values(3, vec![2], vec![1.0; 6]).unwrap();
        let resp = Responsibilities::from_parts(
            2,
            vec![2],
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
            vec![0.5; 12],
        )
        .unwrap();
        let p = m_step(&resp, &phi).unwrap();
        assert_abs_diff_eq!(p.pi()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.pi()[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn m_step_degenerate_slots_give_one_hot_theta() {
        let phi = PhiTensor::from_values(2, vec![3], vec![1.0; 6]).unwrap();
        // Both observations put all slot mass on t* = 2.
        let factor = [0.0, 0.0, 1.0];
        let slots: Vec<f64> = std::iter::repeat_n(factor, 4).flatten().collect();
        let resp = Responsibilities::from_parts(2, vec![3], vec![1.0, 0.0, 0.0, 1.0], slots).unwrap();
        let (p, starved) = m_step_checked(&resp, &phi).unwrap();
        assert!(starved.is_empty());
        assert_eq!(p.theta(0, 0), &[0.0, 0.0, 1.0]);
        assert_eq!(p.theta(1, 0), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn m_step_single_component_averages_slots() {
        let phi = tiny_phi();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = EmParams::random(1, phi.sizes(), &mut rng);
        let resp = e_step(&phi, &params).unwrap();
        let next = m_step(&resp, &phi).unwrap();
        for j in 0..2 {
            for t in 0..phi.sizes()[j] {
                let want: f64 = (0..4).map(|i| resp.q_slot(i, j, 0, t)).sum::<f64>() / 4.0;
                assert_abs_diff_eq!(next.theta(0, j)[t], want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn m_step_flags_starved_component() {
        let phi = PhiTensor::from_values(2, vec![2], vec![1.0; 4]).unwrap();
        let resp = Responsibilities::from_parts(2, vec![2], vec![1.0, 0.0, 1.0, 0.0], vec![0.5; 8]).unwrap();
        let (p, starved) = m_step_checked(&resp, &phi).unwrap();
        assert_eq!(starved, vec![1]);
        assert_eq!(p.theta(1, 0), &[0.5, 0.5]);
        assert_eq!(p.pi(), &[1.0, 0.0]);
    }

    #[test]
    fn bernstein_uniform_log_post_is_zero() {
        let phi = PhiTensor::evaluate(&[0.3], &[crate::basis::BasisSpec::bernstein(4)]).unwrap();
        let v = log_marginal_posterior_em(&phi, &EmParams::uniform(1, phi.sizes())).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn log_post_invariant_under_relabeling() {
        let phi = tiny_phi();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = EmParams::random(3, phi.sizes(), &mut rng);
        let a = log_marginal_posterior_em(&phi, &params).unwrap();
        let b = log_marginal_posterior_em(&phi, &params.permuted(&[2, 0, 1])).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn hard_assign_ties_to_lowest() {
        let resp = Responsibilities::from_parts(
            3,
            vec![1],
            vec![0.2, 0.7, 0.1, 0.5, 0.5, 0.0],
            vec![1.0; 6],
        )
        .unwrap();
        assert_eq!(hard_assign(&resp), vec![1, 0]);
    }

    #[test]
    fn fit_rejects_bad_k() {
        let phi = tiny_phi();
        assert!(fit_em(&phi, 0, &EmOptions::default()).is_err());
        assert!(fit_em(&phi, 5, &EmOptions::default()).is_err());
    }

    #[test]
    fn params_new_validates() {
        assert!(EmParams::new(vec![0.5, 0.4], vec![vec![vec![1.0]], vec![vec![1.0]]]).is_err());
        assert!(EmParams::new(vec![1.0], vec![vec![vec![0.5, 0.6]]]).is_err());
        assert!(EmParams::new(vec![1.0], vec![vec![vec![1.0]], vec![vec![1.0]]]).is_err());
    }
}
