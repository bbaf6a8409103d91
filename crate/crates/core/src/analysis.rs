//! Post-processing of sampler output.

use std::collections::BTreeMap;

use crate::basis::{BasisSpec, PhiTensor};
use crate::error::{Error, Result};
use crate::par;
use crate::sampler::{SampleSet, Snapshot};

/// Normalized frequency of each sampled `k`.
pub fn k_histogram(samples: &SampleSet) -> Result<BTreeMap<usize, f64>> {
    histogram_of(samples.samples.iter().map(|s| s.k))
}

pub fn histogram_of(ks: impl IntoIterator<Item = usize>) -> Result<BTreeMap<usize, f64>> {
    let mut hist = BTreeMap::new();
    let mut total = 0usize;
    for k in ks {
        *hist.entry(k).or_insert(0.0) += 1.0;
        total += 1;
    }
    if total == 0 {
        return Err(Error::Data("sample set is empty".into()));
    }
    hist.values_mut().for_each(|v| *v /= total as f64);
    Ok(hist)
}

/// Most frequent `k`; ties go to the smaller value.
pub fn map_k(samples: &SampleSet) -> Result<usize> {
    let hist = k_histogram(samples)?;
    Ok(mode_of(&hist))
}

/// Key with the largest value; ties go to the smaller key.
pub fn mode_of(hist: &BTreeMap<usize, f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (&k, &f) in hist {
        if f > best.1 {
            best = (k, f);
        }
    }
    best.0
}

/// Fraction of samples in which each pair of observations shares a component.
/// Stores the strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMatrix {
    n: usize,
    upper: Vec<f64>,
}

fn row_start(n: usize, i: usize) -> usize {
    // Entries (i, j) for j > i start after rows 0..i of lengths n-1, n-2, ...
    i * (2 * n - i - 1) / 2
}

impl ConsensusMatrix {
    pub fn n_obs(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => self.upper[row_start(self.n, i) + j - i - 1],
            std::cmp::Ordering::Greater => self.upper[row_start(self.n, j) + i - j - 1],
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Mean over pairs `i < j` of `([g_i = g_j] - C_ij)^2`.
    pub fn distance(&self, labels: &[u32]) -> f64 {
        let n = self.n;
        if n < 2 {
            return 0.0;
        }
        let rows = par::map_range(n - 1, |i| {
            let row = &self.upper[row_start(n, i)..row_start(n, i + 1)];
            let gi = labels[i];
            row.iter()
                .zip(&labels[i + 1..])
                .map(|(c, &gj)| {
                    let d = f64::from(u8::from(gi == gj)) - c;
                    d * d
                })
                .sum::<f64>()
        });
        rows.iter().sum::<f64>() / (n * (n - 1) / 2) as f64
    }

    /// Bytes used by a matrix for `n` observations.
    pub fn bytes_for(n: usize) -> usize {
        n.saturating_mul(n.saturating_sub(1)) / 2 * std::mem::size_of::<f64>()
    }
}

/// Builds a [`ConsensusMatrix`] one snapshot at a time.
#[derive(Debug, Clone)]
pub struct ConsensusAccumulator {
    n: usize,
    counts: Vec<u32>,
    samples: u64,
}

impl ConsensusAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n.saturating_sub(1) / 2],
            samples: 0,
        }
    }

    pub fn add(&mut self, labels: &[u32]) -> Result<()> {
        let n = self.n;
        if labels.len() != n {
            return Err(Error::Dimension(format!("{} labels for N = {n}", labels.len())));
        }
        let mut rows: Vec<&mut [u32]> = Vec::with_capacity(n);
        let mut rest = self.counts.as_mut_slice();
        for i in 0..n {
            let (row, tail) = rest.split_at_mut(n - i - 1);
            rows.push(row);
            rest = tail;
        }
        par::for_each_mut(&mut rows, |i, row| {
            let gi = labels[i];
            for (c, &gj) in row.iter_mut().zip(&labels[i + 1..]) {
                *c += u32::from(gi == gj);
            }
        });
        self.samples += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<ConsensusMatrix> {
        if self.samples == 0 {
            return Err(Error::Data("sample set is empty".into()));
        }
        let s = self.samples as f64;
        Ok(ConsensusMatrix {
            n: self.n,
            upper: self.counts.iter().map(|&c| f64::from(c) / s).collect(),
        })
    }
}

pub fn consensus_matrix(samples: &SampleSet) -> Result<ConsensusMatrix> {
    let mut acc = ConsensusAccumulator::new(samples.header.n_obs);
    for s in &samples.samples {
        acc.add(&s.labels)?;
    }
    acc.finish()
}

/// Index of the sample closest to the consensus; ties go to the earliest.
pub fn consensus_select(samples: &SampleSet, c: &ConsensusMatrix) -> Result<usize> {
    if samples.samples.is_empty() {
        return Err(Error::Data("sample set is empty".into()));
    }
    let mut best = (0, f64::INFINITY);
    for (idx, s) in samples.samples.iter().enumerate() {
        let d = c.distance(&s.labels);
        if d < best.1 {
            best = (idx, d);
        }
    }
    Ok(best.0)
}

/// `theta[r][j][t] = m_rjt / n_r` for one snapshot.
pub fn theta_map_from_gh(snap: &Snapshot, sizes: &[usize]) -> Vec<Vec<Vec<f64>>> {
    let mut counts: Vec<Vec<Vec<u32>>> = (0..snap.k).map(|_| sizes.iter().map(|&t| vec![0; t]).collect()).collect();
    for (i, &g) in snap.labels.iter().enumerate() {
        for (j, c) in counts[g as usize].iter_mut().enumerate() {
            c[snap.slot(i, j) as usize] += 1;
        }
    }
    counts
        .into_iter()
        .map(|items| {
            items
                .into_iter()
                .map(|c| {
                    let n: u32 = c.iter().sum();
                    c.iter().map(|&v| f64::from(v) / f64::from(n)).collect()
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaMapOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ThetaMapOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// Result of maximizing `sum_i ln sum_t theta_t phi_ijt` over one simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemTheta {
    pub theta: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// Objective at the start of every iteration, then at the final theta.
    pub objective: Vec<f64>,
}

/// `sum_{i in members} ln sum_t theta_t phi_ijt`.
pub fn theta_objective(phi: &PhiTensor, members: &[usize], j: usize, theta: &[f64]) -> f64 {
    members
        .iter()
        .map(|&i| phi.cell(i, j).iter().zip(theta).map(|(p, w)| p * w).sum::<f64>().ln())
        .sum()
}

/// Fixed-point iteration for the slot weights of one (component, item),
/// started from the uniform vector.
pub fn item_theta(phi: &PhiTensor, members: &[usize], j: usize, opts: &ThetaMapOptions) -> Result<ItemTheta> {
    if members.is_empty() {
        return Err(Error::Config("component has no members".into()));
    }
    let t_j = phi.sizes()[j];
    let mut theta = vec![1.0 / t_j as f64; t_j];
    let mut next = vec![0.0; t_j];
    let mut objective = Vec::new();
    let inv_n = 1.0 / members.len() as f64;
    for iter in 0..opts.max_iter {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut obj = 0.0;
        for &i in members {
            let cell = phi.cell(i, j);
            let z: f64 = cell.iter().zip(&theta).map(|(p, w)| p * w).sum();
            if !(z > 0.0) {
                return Err(Error::ZeroNormalizer { i, j });
            }
            obj += z.ln();
            for ((acc, p), w) in next.iter_mut().zip(cell).zip(&theta) {
                *acc += w * p / z;
            }
        }
        objective.push(obj);
        next.iter_mut().for_each(|v| *v *= inv_n);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let change = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut theta, &mut next);
        if change < opts.tol {
            objective.push(theta_objective(phi, members, j, &theta));
            return Ok(ItemTheta {
                theta,
                iters: iter + 1,
                converged: true,
                objective,
            });
        }
    }
    objective.push(theta_objective(phi, members, j, &theta));
    Ok(ItemTheta {
        theta,
        iters: opts.max_iter,
        converged: false,
        objective,
    })
}

/// MAP slot weights `theta[r][j]` given component labels only, with the
/// slots integrated out.
pub fn theta_map_from_g(labels: &[usize], phi: &PhiTensor, opts: &ThetaMapOptions) -> Result<Vec<Vec<Vec<f64>>>> {
    if labels.len() != phi.n_obs() {
        return Err(Error::Dimension(format!("{} labels for N = {}", labels.len(), phi.n_obs())));
    }
    let k = labels.iter().max().map_or(0, |&g| g + 1);
    let mut members = vec![Vec::new(); k];
    for (i, &g) in labels.iter().enumerate() {
        members[g].push(i);
    }
    if let Some(r) = members.iter().position(Vec::is_empty) {
        return Err(Error::Config(format!("component {r} has no members")));
    }
    let m = phi.n_items();
    let cells = par::map_range(k * m, |c| item_theta(phi, &members[c / m], c % m, opts).map(|f| f.theta));
    let mut out = vec![Vec::with_capacity(m); k];
    for (c, theta) in cells.into_iter().enumerate() {
        out[c / m].push(theta?);
    }
    Ok(out)
}

/// Mixture density `sum_t theta_t Phi_t(x)` tabulated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityCurve {
    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

pub fn density_curve(theta: &[f64], spec: &BasisSpec, grid: &[f64]) -> Result<DensityCurve> {
    if theta.len() != spec.size() {
        return Err(Error::Dimension(format!("{} weights for {} basis functions", theta.len(), spec.size())));
    }
    let mut buf = vec![0.0; spec.size()];
    let mut values = Vec::with_capacity(grid.len());
    for &x in grid {
        spec.eval_all(x, &mut buf)?;
        values.push(buf.iter().zip(theta).map(|(p, w)| p * w).sum());
    }
    Ok(DensityCurve {
        grid: grid.to_vec(),
        values,
    })
}

/// `points` evenly spaced values across the basis' plotting range.
pub fn default_grid(spec: &BasisSpec, points: usize) -> Vec<f64> {
    let (lo, hi) = spec.plot_range();
    let points = points.max(2);
    (0..points)
        .map(|p| lo + (hi - lo) * p as f64 / (points - 1) as f64)
        .collect()
}

/// Mutual information, in bits, between component and slot given the
/// contingency table `m[r][t]`.
pub fn mutual_information_counts(m: &[Vec<u32>]) -> f64 {
    let t_len = m.first().map_or(0, Vec::len);
    let n_r: Vec<f64> = m.iter().map(|row| row.iter().map(|&c| f64::from(c)).sum()).collect();
    let mut n_t = vec![0.0; t_len];
    for row in m {
        for (acc, &c) in n_t.iter_mut().zip(row) {
            *acc += f64::from(c);
        }
    }
    let n: f64 = n_r.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (row, nr) in m.iter().zip(&n_r) {
        for (&c, nt) in row.iter().zip(&n_t) {
            if c > 0 {
                let c = f64::from(c);
                total += c * (n * c / (nr * nt)).log2();
            }
        }
    }
    (total / n).max(0.0)
}

/// Mutual information for item `j` of one snapshot.
pub fn snapshot_mutual_information(snap: &Snapshot, j: usize, t_j: usize) -> f64 {
    let mut m = vec![vec![0u32; t_j]; snap.k];
    for (i, &g) in snap.labels.iter().enumerate() {
        m[g as usize][snap.slot(i, j) as usize] += 1;
    }
    mutual_information_counts(&m)
}

/// Average over all recorded samples of the item-`j` mutual information.
pub fn mutual_information(samples: &SampleSet, j: usize) -> Result<f64> {
    if samples.samples.is_empty() {
        return Err(Error::Data("sample set is empty".into()));
    }
    let t_j = *samples
        .header
        .sizes
        .get(j)
        .ok_or_else(|| Error::Dimension(format!("item {j} out of range")))?;
    let vals = par::map_range(samples.samples.len(), |s| {
        snapshot_mutual_information(&samples.samples[s], j, t_j)
    });
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiRanking {
    /// Average bits per item.
    pub bits: Vec<f64>,
    /// `per_sample[s][j]`.
    pub per_sample: Vec<Vec<f64>>,
}

impl MiRanking {
    /// `(item, bits)` ordered from most to least informative.
    pub fn ranked(&self) -> Vec<(usize, f64)> {
        let mut r: Vec<(usize, f64)> = self.bits.iter().copied().enumerate().collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        r
    }
}

pub fn mi_ranking(samples: &SampleSet) -> Result<MiRanking> {
    if samples.samples.is_empty() {
        return Err(Error::Data("sample set is empty".into()));
    }
    let sizes = &samples.header.sizes;
    let per_sample = par::map_range(samples.samples.len(), |s| {
        let snap = &samples.samples[s];
        sizes
            .iter()
            .enumerate()
            .map(|(j, &t)| snapshot_mutual_information(snap, j, t))
            .collect::<Vec<f64>>()
    });
    let mut bits = vec![0.0; sizes.len()];
    for row in &per_sample {
        for (acc, v) in bits.iter_mut().zip(row) {
            *acc += v;
        }
    }
    bits.iter_mut().for_each(|v| *v /= per_sample.len() as f64);
    Ok(MiRanking { bits, per_sample })
}

/// Best agreement fraction over relabelings of `predicted`.
pub fn permuted_accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len(), "label vectors differ in length");
    if predicted.is_empty() {
        return 1.0;
    }
    let compress = |v: &[usize]| {
        let mut ids = BTreeMap::new();
        let out: Vec<usize> = v
            .iter()
            .map(|x| {
                let next = ids.len();
                *ids.entry(*x).or_insert(next)
            })
            .collect();
        (out, ids.len())
    };
    let (p, kp) = compress(predicted);
    let (t, kt) = compress(truth);
    let size = kp.max(kt);
    let mut table = vec![vec![0usize; size]; size];
    for (&a, &b) in p.iter().zip(&t) {
        table[a][b] += 1;
    }
    let matched = if kp <= 10 {
        best_matching_exact(&table)
    } else {
        best_matching_greedy(&table)
    };
    matched as f64 / predicted.len() as f64
}

/// Maximum-weight perfect matching by dynamic programming over subsets.
fn best_matching_exact(table: &[Vec<usize>]) -> usize {
    let n = table.len();
    let mut best = vec![0usize; 1 << n];
    for mask in 0usize..(1 << n) {
        let row = mask.count_ones() as usize;
        if row >= n {
            continue;
        }
        for (col, &w) in table[row].iter().enumerate() {
            if mask & (1 << col) == 0 {
                let next = mask | (1 << col);
                best[next] = best[next].max(best[mask] + w);
            }
        }
    }
    best[(1 << n) - 1]
}

fn best_matching_greedy(table: &[Vec<usize>]) -> usize {
    let n = table.len();
    let mut cells: Vec<(usize, usize, usize)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (table[a][b], a, b)))
        .collect();
    cells.sort_by_key(|c| std::cmp::Reverse(c.0));
    let (mut used_a, mut used_b) = (vec![false; n], vec![false; n]);
    let mut total = 0;
    for (w, a, b) in cells {
        if !used_a[a] && !used_b[b] {
            used_a[a] = true;
            used_b[b] = true;
            total += w;
        }
    }
    total
}
