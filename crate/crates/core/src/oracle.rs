//! Exact posterior by exhaustive enumeration for very small problems, and a
//! brute-force simplex search. Both exist to check the fast code paths.

use crate::basis::PhiTensor;
use crate::error::{Error, Result};
use crate::par;
use crate::sampler::{log_joint, GibbsState, KPrior};
use crate::special::{ln_factorial, log_sum_exp};

pub const MAX_PARTITION_N: usize = 10;
pub const MAX_EXACT_N: usize = 7;
pub const MAX_EXACT_M: usize = 3;
pub const MAX_EXACT_T: usize = 4;

/// All set partitions of `0..n`, each a list of blocks in order of first
/// element.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Vec<Vec<usize>>>> {
    if n > MAX_PARTITION_N {
        return Err(Error::Guard(format!("partition enumeration limited to N <= {MAX_PARTITION_N}, got {n}")));
    }
    if n == 0 {
        return Ok(vec![Vec::new()]);
    }
    // Restricted growth strings: a[0] = 0, a[i] <= 1 + max(a[..i]).
    let mut out = Vec::new();
    let mut a = vec![0usize; n];
    let mut max = vec![0usize; n];
    loop {
        let k = max[n - 1] + 1;
        let mut blocks = vec![Vec::new(); k];
        for (i, &b) in a.iter().enumerate() {
            blocks[b].push(i);
        }
        out.push(blocks);
        let Some(i) = (1..n).rev().find(|&i| a[i] <= max[i - 1]) else {
            return Ok(out);
        };
        a[i] += 1;
        max[i] = max[i - 1].max(a[i]);
        for l in i + 1..n {
            a[l] = 0;
            max[l] = max[i];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    /// `k_marginal[k - 1] = P(k | x)`.
    pub k_marginal: Vec<f64>,
    /// Probability that observations `i` and `j` share a component.
    pub coassign: Vec<Vec<f64>>,
    /// Log of the unnormalized total.
    pub log_evidence: f64,
}

impl ExactPosterior {
    fn from_weights(n: usize, weights: &[(Vec<usize>, f64)]) -> Self {
        let logs: Vec<f64> = weights.iter().map(|(_, w)| *w).collect();
        let total = log_sum_exp(&logs);
        let mut k_marginal = vec![0.0; n];
        let mut coassign = vec![vec![0.0; n]; n];
        for (labels, w) in weights {
            let p = (w - total).exp();
            let k = labels.iter().max().map_or(0, |&g| g + 1);
            k_marginal[k - 1] += p;
            for i in 0..n {
                for j in 0..n {
                    if labels[i] == labels[j] {
                        coassign[i][j] += p;
                    }
                }
            }
        }
        Self {
            k_marginal,
            coassign,
            log_evidence: total,
        }
    }
}

fn check_guard(phi: &PhiTensor) -> Result<()> {
    let n = phi.n_obs();
    if n == 0 || n > MAX_EXACT_N || phi.n_items() > MAX_EXACT_M || phi.sizes().iter().any(|&t| t > MAX_EXACT_T) {
        return Err(Error::Guard(format!(
            "exact posterior needs 1 <= N <= {MAX_EXACT_N}, M <= {MAX_EXACT_M}, T <= {MAX_EXACT_T}"
        )));
    }
    Ok(())
}

/// `ln sum_h prod_t m_t! prod_i phi_{i j h_i}` over slot assignments of one
/// block for one item.
fn block_item_log_sum(phi: &PhiTensor, block: &[usize], j: usize) -> f64 {
    let t_j = phi.sizes()[j];
    let mut h = vec![0usize; block.len()];
    let mut terms = Vec::new();
    loop {
        let mut counts = vec![0u64; t_j];
        let mut lw = 0.0;
        for (&i, &t) in block.iter().zip(&h) {
            counts[t] += 1;
            lw += phi.cell(i, j)[t].ln();
        }
        if lw > f64::NEG_INFINITY {
            lw += counts.iter().map(|&c| ln_factorial(c)).sum::<f64>();
            terms.push(lw);
        }
        // Mixed-radix increment.
        let mut pos = 0;
        loop {
            if pos == h.len() {
                return log_sum_exp(&terms);
            }
            h[pos] += 1;
            if h[pos] < t_j {
                break;
            }
            h[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact posterior over `k` and co-assignment, summing the slots out block
/// by block. Each unlabeled partition with `k` blocks stands for `k!`
/// labeled states of equal weight.
pub fn exact_posterior(phi: &PhiTensor, prior: &KPrior) -> Result<ExactPosterior> {
    check_guard(phi)?;
    prior.check(phi.n_obs())?;
    let n = phi.n_obs();
    let m = phi.n_items();
    let sizes = phi.sizes();
    // Per-subset, per-item slot sums.
    let subsets = 1usize << n;
    let block_sums = par::map_range(subsets * m, |c| {
        let (mask, j) = (c / m, c % m);
        let block: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        block_item_log_sum(phi, &block, j)
    });
    let partitions = enumerate_partitions(n)?;
    let weights: Vec<(Vec<usize>, f64)> = par::map_range(partitions.len(), |p| {
        let blocks = &partitions[p];
        let k = blocks.len();
        let mut lw = prior.log_prob(k, n)
            + ln_factorial(k as u64)
            + ln_factorial(k as u64 - 1)
            + ln_factorial((n - k) as u64);
        let mut labels = vec![0; n];
        for (r, block) in blocks.iter().enumerate() {
            let n_r = block.len() as u64;
            let mask: usize = block.iter().map(|i| 1 << i).sum();
            lw += ln_factorial(n_r);
            for (j, &t_j) in sizes.iter().enumerate() {
                let t_j = t_j as u64;
                lw += ln_factorial(t_j - 1) - ln_factorial(n_r + t_j - 1) + block_sums[mask * m + j];
            }
            for &i in block {
                labels[i] = r;
            }
        }
        (labels, lw)
    });
    Ok(ExactPosterior::from_weights(n, &weights))
}

/// Unnormalized weight of one unlabeled state: a partition, in canonical
/// labeling (blocks numbered by first member), with slots `h[i * M + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateWeight {
    pub labels: Vec<usize>,
    pub slots: Vec<u32>,
    pub log_weight: f64,
}

fn check_state_count(phi: &PhiTensor) -> Result<Vec<Vec<u32>>> {
    check_guard(phi)?;
    let n = phi.n_obs() as u32;
    let cells = phi
        .sizes()
        .iter()
        .try_fold(1u64, |acc, &t| acc.checked_mul((t as u64).checked_pow(n)?));
    match cells {
        Some(c) if c <= 1 << 16 => Ok(all_slot_assignments(phi.sizes(), phi.n_obs())),
        _ => Err(Error::Guard("too many slot assignments to visit one by one".into())),
    }
}

/// Every (partition, h) scored with [`log_joint`] plus `ln k!` for the `k!`
/// labelings the partition stands for.
pub fn unlabeled_state_weights(phi: &PhiTensor, prior: &KPrior) -> Result<Vec<StateWeight>> {
    let slot_sets = check_state_count(phi)?;
    let n = phi.n_obs();
    let mut out = Vec::new();
    for blocks in enumerate_partitions(n)? {
        let mut labels = vec![0; n];
        for (r, block) in blocks.iter().enumerate() {
            for &i in block {
                labels[i] = r;
            }
        }
        let mult = ln_factorial(blocks.len() as u64);
        for h in &slot_sets {
            let state = GibbsState::from_assignment(phi.sizes(), &labels, h).expect("valid state");
            out.push(StateWeight {
                labels: labels.clone(),
                slots: h.clone(),
                log_weight: mult + log_joint(&state, phi, prior),
            });
        }
    }
    Ok(out)
}

/// Renumbers labels in order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.len()];
    let mut next = 0;
    labels
        .iter()
        .map(|&g| {
            *map[g].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Every labeled state (each surjection `g` onto `0..k`, every `h`),
/// summed into its unlabeled class. Only for `N <= 4`.
pub fn labeled_state_weights(phi: &PhiTensor, prior: &KPrior) -> Result<Vec<StateWeight>> {
    let slot_sets = check_state_count(phi)?;
    let n = phi.n_obs();
    if n > 4 {
        return Err(Error::Guard(format!("labeled enumeration limited to N <= 4, got {n}")));
    }
    let mut classes: std::collections::BTreeMap<(Vec<usize>, Vec<u32>), Vec<f64>> = Default::default();
    for k in 1..=n {
        let mut g = vec![0usize; n];
        loop {
            let mut used = vec![false; k];
            g.iter().for_each(|&r| used[r] = true);
            if used.iter().all(|&u| u) {
                let canon = canonical_labels(&g);
                for h in &slot_sets {
                    let state = GibbsState::from_assignment(phi.sizes(), &g, h).expect("valid state");
                    classes
                        .entry((canon.clone(), h.clone()))
                        .or_default()
                        .push(log_joint(&state, phi, prior));
                }
            }
            let Some(pos) = g.iter().position(|&r| r + 1 < k) else {
                break;
            };
            g[pos] += 1;
            g[..pos].iter_mut().for_each(|r| *r = 0);
        }
    }
    Ok(classes
        .into_iter()
        .map(|((labels, slots), terms)| StateWeight {
            labels,
            slots,
            log_weight: log_sum_exp(&terms),
        })
        .collect())
}

fn posterior_from_states(n: usize, states: &[StateWeight]) -> ExactPosterior {
    let weights: Vec<(Vec<usize>, f64)> = states.iter().map(|s| (s.labels.clone(), s.log_weight)).collect();
    ExactPosterior::from_weights(n, &weights)
}

/// [`exact_posterior`] computed state by state. Far slower; for
/// cross-checks only.
pub fn exact_posterior_by_states(phi: &PhiTensor, prior: &KPrior) -> Result<ExactPosterior> {
    Ok(posterior_from_states(phi.n_obs(), &unlabeled_state_weights(phi, prior)?))
}

/// [`exact_posterior`] from direct enumeration of labeled states.
pub fn labeled_posterior(phi: &PhiTensor, prior: &KPrior) -> Result<ExactPosterior> {
    Ok(posterior_from_states(phi.n_obs(), &labeled_state_weights(phi, prior)?))
}

fn all_slot_assignments(sizes: &[usize], n: usize) -> Vec<Vec<u32>> {
    let m = sizes.len();
    let mut out = Vec::new();
    let mut h = vec![0u32; n * m];
    loop {
        out.push(h.clone());
        let mut pos = 0;
        loop {
            if pos == h.len() {
                return out;
            }
            h[pos] += 1;
            if (h[pos] as usize) < sizes[pos % m] {
                break;
            }
            h[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub theta: Vec<f64>,
    /// `sum_i ln sum_t theta_t phi_ijt` at `theta`.
    pub log_objective: f64,
}

/// Maximizes `prod_{i in members} sum_t theta_t phi_ijt` over the simplex by
/// exhaustive grid search with `resolution` steps per axis, then repeatedly
/// searches a finer grid around the best point.
pub fn grid_simplex_optimum(phi: &PhiTensor, members: &[usize], j: usize, resolution: usize) -> Result<GridOptimum> {
    let t_j = phi.sizes()[j];
    if t_j > 3 {
        return Err(Error::Guard(format!("grid search limited to T <= 3, got {t_j}")));
    }
    let points = match t_j {
        1 => usize::MAX,
        2 => resolution + 1,
        _ => (resolution + 1) * (resolution + 2) / 2,
    };
    if points < 1000 {
        return Err(Error::Guard(format!("grid of {points} points is coarser than 1000")));
    }
    let objective = |theta: &[f64]| -> f64 {
        members
            .iter()
            .map(|&i| phi.cell(i, j).iter().zip(theta).map(|(p, w)| p * w).sum::<f64>().ln())
            .sum()
    };
    if t_j == 1 {
        return Ok(GridOptimum {
            theta: vec![1.0],
            log_objective: objective(&[1.0]),
        });
    }
    let free = t_j - 1;
    let mut best = (vec![0.0; t_j], f64::NEG_INFINITY);
    let consider = |coords: &[f64], best: &mut (Vec<f64>, f64)| {
        let rest = 1.0 - coords.iter().sum::<f64>();
        if coords.iter().any(|&c| !(0.0..=1.0).contains(&c)) || rest < -1e-12 {
            return;
        }
        let mut theta = coords.to_vec();
        theta.push(rest.max(0.0));
        let total: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|v| *v /= total);
        let v = objective(&theta);
        if v > best.1 {
            *best = (theta, v);
        }
    };
    let step = 1.0 / resolution as f64;
    let axis = |center: f64, width: usize, step: f64| -> Vec<f64> {
        (0..=2 * width)
            .map(|s| center + (s as f64 - width as f64) * step)
            .collect()
    };
    if free == 1 {
        for a in 0..=resolution {
            consider(&[a as f64 * step], &mut best);
        }
    } else {
        for a in 0..=resolution {
            for b in 0..=resolution - a {
                consider(&[a as f64 * step, b as f64 * step], &mut best);
            }
        }
    }
    let mut step = step;
    for _ in 0..14 {
        let fine = step / 8.0;
        let center = best.0.clone();
        if free == 1 {
            for a in axis(center[0], 8, fine) {
                consider(&[a], &mut best);
            }
        } else {
            for a in axis(center[0], 8, fine) {
                for b in axis(center[1], 8, fine) {
                    consider(&[a, b], &mut best);
                }
            }
        }
        step = fine;
    }
    Ok(GridOptimum {
        theta: best.0,
        log_objective: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=6).map(|n| enumerate_partitions(n).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52, 203]);
        assert!(enumerate_partitions(11).is_err());
    }

    #[test]
    fn partitions_cover_every_element_once() {
        for p in enumerate_partitions(5).unwrap() {
            let mut all: Vec<usize> = p.concat();
            all.sort();
            assert_eq!(all, vec![0, 1, 2, 3, 4]);
            assert!(p.iter().all(|b| !b.is_empty()));
        }
    }

    #[test]
    fn single_observation() {
        let phi = PhiTensor::from_values(1, vec![2], vec![1.5, 0.5]).unwrap();
        let post = exact_posterior(&phi, &KPrior::Uniform).unwrap();
        assert_eq!(post.k_marginal, vec![1.0]);
    }

    #[test]
    fn two_identical_rows_by_hand() {
        // phi = (a, b) for both observations, T = 2, uniform prior on k in {1, 2}.
        let (a, b) = (1.5f64, 0.5f64);
        let phi = PhiTensor::from_values(2, vec![2], vec![a, b, a, b]).unwrap();
        // k = 1: 1! * 0! * 1! * [2! * 1!/3! * (2a^2 + ab + ab + 2b^2)].
        let w1 = 2.0 / 6.0 * (2.0 * a * a + 2.0 * a * b + 2.0 * b * b);
        // k = 2: 2! * 1! * 0! * [1! * 1!/2! * (a + b)]^2.
        let w2 = 2.0 * (0.5 * (a + b)).powi(2);
        let post = exact_posterior(&phi, &KPrior::Uniform).unwrap();
        assert_abs_diff_eq!(post.coassign[0][1], w1 / (w1 + w2), epsilon = 1e-14);
        assert_abs_diff_eq!(post.k_marginal[1], w2 / (w1 + w2), epsilon = 1e-14);
    }

    #[test]
    fn factorized_matches_state_enumeration() {
        let phi = PhiTensor::from_values(
            4,
            vec![2, 3],
            vec![
                1.2, 0.8, 0.5, 1.0, 1.5, 0.3, 1.7, 2.0, 0.6, 0.4, 1.0, 1.0, 0.9, 0.9, 1.2, 1.9, 0.1, 0.2, 1.4, 1.4,
            ],
        )
        .unwrap();
        let fast = exact_posterior(&phi, &KPrior::Uniform).unwrap();
        let slow = exact_posterior_by_states(&phi, &KPrior::Uniform).unwrap();
        for (a, b) in fast.k_marginal.iter().zip(&slow.k_marginal) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(fast.log_evidence, slow.log_evidence, epsilon = 1e-10);
    }

    #[test]
    fn labeled_classes_match_multiplicity() {
        let phi = PhiTensor::from_values(3, vec![2], vec![1.2, 0.8, 0.4, 1.6, 1.0, 1.0]).unwrap();
        let a = unlabeled_state_weights(&phi, &KPrior::Uniform).unwrap();
        let b = labeled_state_weights(&phi, &KPrior::Uniform).unwrap();
        assert_eq!(a.len(), 5 * 8);
        assert_eq!(a.len(), b.len());
        for s in &a {
            let t = b.iter().find(|t| t.labels == s.labels && t.slots == s.slots).unwrap();
            assert!((s.log_weight - t.log_weight).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_relabeling() {
        assert_eq!(canonical_labels(&[2, 0, 2, 1]), vec![0, 1, 0, 2]);
    }

    #[test]
    fn grid_vertex_optimum() {
        let phi = PhiTensor::from_values(1, vec![2], vec![2.0, 0.0]).unwrap();
        let g = grid_simplex_optimum(&phi, &[0], 0, 1000).unwrap();
        assert_eq!(g.theta, vec![1.0, 0.0]);
        assert_abs_diff_eq!(g.log_objective.exp(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_symmetric_rows() {
        let phi = PhiTensor::from_values(2, vec![3], vec![1.0, 0.5, 1.5, 1.5, 0.5, 1.0]).unwrap();
        let g = grid_simplex_optimum(&phi, &[0, 1], 0, 60).unwrap();
        // Swapping slots 0 and 2 swaps the rows, so the optimum has theta_0 = theta_2.
        assert_abs_diff_eq!(g.theta[0], g.theta[2], epsilon = 1e-6);
        assert!(grid_simplex_optimum(&phi, &[0, 1], 0, 20).is_err());
    }
}
