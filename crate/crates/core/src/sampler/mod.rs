//! Collapsed Gibbs sampler over `(k, g, h)`.
//!
//! `pi` and `theta` are integrated out analytically, leaving a posterior over
//! the number of components, the component labels, and the slot labels. Each
//! step picks a component uniformly, then a member of it uniformly, removes
//! the member (deleting the component if it empties), and reinserts it into
//! one of the `k` existing components or a fresh one, followed by fresh slots
//! for every item. Choosing the component first rather than the observation
//! makes the move rejection-free for small components.

mod balance;
pub mod io;
mod state;

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::PhiTensor;
use crate::error::{Error, Result};
use crate::special::LnFactorial;

pub use balance::{
    apply_move, classify_move, random_move, reverse_move, transition_log_prob, Move, MoveClass, Target,
};
pub use state::{GibbsState, Init};

pub(crate) use state::sample_weighted;

/// Prior on the number of components.
#[derive(Debug, Clone, PartialEq)]
pub enum KPrior {
    /// `P(k) = 1/N` for `1 <= k <= N`.
    Uniform,
    /// `P(k) = table[k - 1]`; must cover every `k` up to `N`.
    Table(Vec<f64>),
}

impl KPrior {
    pub fn check(&self, n_obs: usize) -> Result<()> {
        match self {
            KPrior::Uniform => Ok(()),
            KPrior::Table(p) => {
                if p.len() < n_obs {
                    return Err(Error::Config(format!(
                        "prior table has {} entries but k can reach N = {n_obs}",
                        p.len()
                    )));
                }
                if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Config("prior table has negative entries".into()));
                }
                if p[..n_obs].iter().all(|v| *v == 0.0) {
                    return Err(Error::Config("prior table puts no mass on 1..=N".into()));
                }
                Ok(())
            }
        }
    }

    /// `ln P(k)` for a data set of `n_obs` observations.
    pub fn log_prob(&self, k: usize, n_obs: usize) -> f64 {
        if k == 0 || k > n_obs {
            return f64::NEG_INFINITY;
        }
        match self {
            KPrior::Uniform => -(n_obs as f64).ln(),
            KPrior::Table(p) => p.get(k - 1).map_or(f64::NEG_INFINITY, |v| v.ln()),
        }
    }

    /// Reads one probability per line (for `k = 1, 2, ...`).
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::new();
        for (line, raw) in text.lines().enumerate() {
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            values.push(raw.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line + 1,
                col: 1,
                msg: format!("`{raw}` is not a probability"),
            })?);
        }
        Ok(KPrior::Table(values))
    }
}

impl fmt::Display for KPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KPrior::Uniform => f.write_str("uniform"),
            KPrior::Table(p) => write!(f, "table{p:?}"),
        }
    }
}

impl std::str::FromStr for KPrior {
    type Err = Error;

    /// `uniform` or `table:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(KPrior::Uniform);
        }
        match s.strip_prefix("table:") {
            Some(path) => KPrior::from_table_file(Path::new(path)),
            None => Err(Error::Config(format!("unknown prior `{s}`"))),
        }
    }
}

/// Log of the marginal posterior of `(k, g, h)`, up to a constant:
///
/// `ln P(k) + ln (k-1)! + ln (N-k)! + sum_r [ln n_r! + sum_j (ln (T_j-1)!
///  - ln (n_r+T_j-1)! + sum_t ln m_rjt!)] + sum_ij ln phi_{i j h_ij}`.
///
/// Returns `-inf` if some observation sits in a slot with zero density.
pub fn log_joint(state: &GibbsState, phi: &PhiTensor, prior: &KPrior) -> f64 {
    let n = state.n_obs();
    let max_t = state.sizes().iter().copied().max().unwrap_or(1);
    let lf = LnFactorial::new(n + max_t);
    log_joint_with(state, phi, prior, &lf)
}

pub(crate) fn log_joint_with(state: &GibbsState, phi: &PhiTensor, prior: &KPrior, lf: &LnFactorial) -> f64 {
    let n = state.n_obs();
    let k = state.k();
    let sizes = state.sizes();
    let mut total = prior.log_prob(k, n) + lf.get(k - 1) + lf.get(n - k);
    for r in 0..k {
        let n_r = state.size_of(r);
        total += lf.get(n_r);
        for (j, &t_j) in sizes.iter().enumerate() {
            total += lf.get(t_j - 1) - lf.get(n_r + t_j - 1);
            total += state.counts(r, j).iter().map(|&c| lf.get(c as usize)).sum::<f64>();
        }
    }
    for i in 0..n {
        for (j, &h) in state.slots_of(i).iter().enumerate() {
            let v = phi.cell(i, j)[h as usize];
            if v <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += v.ln();
        }
    }
    total
}

/// State with one observation removed, as seen between steps 4 and 5 of a move.
#[derive(Debug, Clone)]
pub struct Detached {
    pub(crate) state: GibbsState,
    pub(crate) obs: usize,
}

impl Detached {
    /// Removes observation `i` from its component, deleting the component if
    /// it empties (the last component then takes over its label).
    pub fn new(state: &GibbsState, i: usize) -> Self {
        let mut s = state.clone();
        let r = s.component_of(i);
        let idx = s.pos[i] as usize;
        s.detach(r, idx);
        if s.size_of(r) == 0 {
            s.delete_component(r);
        }
        Self { state: s, obs: i }
    }

    /// Number of components remaining after the removal.
    pub fn k(&self) -> usize {
        self.state.k()
    }

    pub fn size_of(&self, s: usize) -> usize {
        self.state.size_of(s)
    }

    pub fn counts(&self, s: usize, j: usize) -> &[u32] {
        self.state.counts(s, j)
    }

    pub fn observation(&self) -> usize {
        self.obs
    }
}

/// Precomputed tables for repeated steps on one data set.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    phi: &'a PhiTensor,
    n_obs: usize,
    ln_int: Vec<f64>,
    log_prior: Vec<f64>,
    /// `sum_j [ln sum_t phi_ijt - ln T_j]` per observation.
    new_comp_ll: Vec<f64>,
    weights: Vec<f64>,
    slot_weights: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(phi: &'a PhiTensor, prior: &KPrior) -> Result<Self> {
        let n = phi.n_obs();
        if n == 0 {
            return Err(Error::Data("cannot sample with zero observations".into()));
        }
        prior.check(n)?;
        let mut new_comp_ll = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, &t_j) in phi.sizes().iter().enumerate() {
                let s: f64 = phi.cell(i, j).iter().sum();
                if !(s > 0.0) {
                    return Err(Error::ZeroNormalizer { i, j });
                }
                acc += s.ln() - (t_j as f64).ln();
            }
            new_comp_ll.push(acc);
        }
        let max_t = phi.sizes().iter().copied().max().unwrap_or(1);
        let ln_int = (0..=n + max_t + 1).map(|v| (v as f64).ln()).collect();
        let log_prior = (0..=n + 1).map(|k| prior.log_prob(k, n)).collect();
        Ok(Self {
            phi,
            n_obs: n,
            ln_int,
            log_prior,
            new_comp_ll,
            weights: Vec::new(),
            slot_weights: Vec::new(),
        })
    }

    pub fn phi(&self) -> &PhiTensor {
        self.phi
    }

    /// Log-weights of the `k + 1` candidate homes of the detached observation
    /// `i`: every existing component, then a new one.
    pub(crate) fn fill_log_weights(&self, state: &GibbsState, i: usize, out: &mut Vec<f64>) {
        out.clear();
        let k = state.k();
        if k == 0 {
            // Only possible when N = 1: the observation must found a component.
            out.push(0.0);
            return;
        }
        let n = self.n_obs;
        let sizes = self.phi.sizes();
        let row = self.phi.row(i);
        let offsets = state.offsets();
        let base = self.ln_int[n - k] - self.ln_int[k] + self.log_prior[k];
        for s in 0..k {
            let n_s = state.size_of(s);
            let counts = &state.comps[s].counts;
            let mut acc = base;
            let mut prod = 1.0f64;
            for (j, &t_j) in sizes.iter().enumerate() {
                let (a, b) = (offsets[j], offsets[j + 1]);
                let mut sum = 0.0;
                for (c, p) in counts[a..b].iter().zip(&row[a..b]) {
                    sum += (*c as f64 + 1.0) * p;
                }
                acc -= self.ln_int[n_s + t_j];
                // Multiply in linear space, folding into the log often enough
                // that the running product can neither overflow nor underflow.
                if sum > 1e-150 && sum < 1e150 {
                    prod *= sum;
                    if !(1e-150..=1e150).contains(&prod) {
                        acc += prod.ln();
                        prod = 1.0;
                    }
                } else {
                    acc += sum.ln();
                }
            }
            out.push(acc + prod.ln());
        }
        out.push(self.ln_int[k] + self.log_prior[k + 1] + self.new_comp_ll[i]);
    }

    /// Performs one Monte Carlo step in place.
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut GibbsState, rng: &mut R) {
        let k = state.k();
        let r = rng.random_range(0..k);
        let idx = rng.random_range(0..state.size_of(r));
        let i = state.detach(r, idx);
        if state.size_of(r) == 0 {
            state.delete_component(r);
        }

        let mut weights = std::mem::take(&mut self.weights);
        self.fill_log_weights(state, i, &mut weights);
        let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        weights.iter_mut().for_each(|w| *w = (*w - max).exp());
        let choice = sample_weighted(&weights, rng).expect("candidate weights are positive");
        self.weights = weights;

        let s = if choice == state.k() {
            state.push_component()
        } else {
            choice
        };

        // A fresh component has zero counts, so (m + 1) phi reduces to phi.
        let offsets = state.offsets().to_vec();
        let row = self.phi.row(i);
        for j in 0..state.n_items() {
            let (a, b) = (offsets[j], offsets[j + 1]);
            self.slot_weights.clear();
            let counts = &state.comps[s].counts[a..b];
            self.slot_weights
                .extend(counts.iter().zip(&row[a..b]).map(|(c, p)| (*c as f64 + 1.0) * p));
            let t = sample_weighted(&self.slot_weights, rng).expect("slot weights are positive");
            state.set_slot(i, j, t as u32);
        }
        state.attach(s, i);
    }
}

/// Log-weights `ln w_s` (existing components, in label order) and
/// `ln w_{k+1}` (new component, last) for the detached observation.
pub fn candidate_log_weights(detached: &Detached, phi: &PhiTensor, prior: &KPrior) -> Result<Vec<f64>> {
    let sampler = Sampler::new(phi, prior)?;
    let mut out = Vec::new();
    sampler.fill_log_weights(&detached.state, detached.obs, &mut out);
    Ok(out)
}

/// Candidate weights rescaled so the largest is one.
pub fn candidate_weights(detached: &Detached, phi: &PhiTensor, prior: &KPrior) -> Result<Vec<f64>> {
    let mut w = candidate_log_weights(detached, phi, prior)?;
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Data(format!(
            "observation {} has zero weight for every candidate",
            detached.obs
        )));
    }
    w.iter_mut().for_each(|v| *v = (*v - max).exp());
    Ok(w)
}

/// Slot distribution for item `j` of the detached observation when placed in
/// component `target`; `target == k` means a newly created component.
pub fn slot_probs(detached: &Detached, target: usize, j: usize, phi: &PhiTensor) -> Result<Vec<f64>> {
    let i = detached.obs;
    let cell = phi.cell(i, j);
    let mut p: Vec<f64> = if target < detached.k() {
        detached
            .counts(target, j)
            .iter()
            .zip(cell)
            .map(|(c, v)| (*c as f64 + 1.0) * v)
            .collect()
    } else if target == detached.k() {
        cell.to_vec()
    } else {
        return Err(Error::Config(format!("target component {target} does not exist")));
    };
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroNormalizer { i, j });
    }
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

/// One step with freshly built tables. For long runs build a [`Sampler`].
pub fn gibbs_step<R: Rng + ?Sized>(
    state: &mut GibbsState,
    phi: &PhiTensor,
    prior: &KPrior,
    rng: &mut R,
) -> Result<()> {
    let mut sampler = Sampler::new(phi, prior)?;
    sampler.step(state, rng);
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerOptions {
    pub burn_in_sweeps: u64,
    pub sample_sweeps: u64,
    /// Sweeps between recorded samples.
    pub stride: u64,
    pub seed: u64,
    /// ChaCha stream; distinct streams give independent chains for one seed.
    pub stream: u64,
    pub init: Init,
    /// Upper bound, in bytes, on the labels and slots stored in a [`SampleSet`].
    pub memory_budget: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            burn_in_sweeps: 2500,
            sample_sweeps: 25_000,
            stride: 1,
            seed: 0,
            stream: 0,
            init: Init::AllInOne,
            memory_budget: 1 << 30,
        }
    }
}

impl SamplerOptions {
    fn validate(&self) -> Result<()> {
        if self.sample_sweeps == 0 {
            return Err(Error::Config("sample_sweeps is 0: nothing to sample".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least one sweep".into()));
        }
        Ok(())
    }

    pub fn n_records(&self) -> u64 {
        self.sample_sweeps / self.stride
    }

    /// Bytes a full [`SampleSet`] would occupy for this data shape.
    pub fn storage_bytes(&self, n_obs: usize, n_items: usize) -> usize {
        (self.n_records() as usize)
            .saturating_mul(n_obs)
            .saturating_mul(n_items + 1)
            .saturating_mul(std::mem::size_of::<u32>())
    }
}

/// Receives the chain state at every recorded sweep.
pub trait SampleSink {
    fn record(&mut self, sweep: u64, state: &GibbsState) -> Result<()>;
}

/// Keeps only the sampled number of components.
#[derive(Debug, Clone, Default)]
pub struct KTrace {
    pub ks: Vec<usize>,
}

impl SampleSink for KTrace {
    fn record(&mut self, _sweep: u64, state: &GibbsState) -> Result<()> {
        self.ks.push(state.k());
        Ok(())
    }
}

impl<F: FnMut(u64, &GibbsState) -> Result<()>> SampleSink for F {
    fn record(&mut self, sweep: u64, state: &GibbsState) -> Result<()> {
        self(sweep, state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub steps: u64,
    pub seconds: f64,
    pub steps_per_second: f64,
    pub final_k: usize,
}

/// A recorded `(k, g, h)` draw. Labels are 0-based; slots are `h[i * M + j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub sweep: u64,
    pub k: usize,
    pub labels: Vec<u32>,
    pub slots: Vec<u32>,
    pub n_items: usize,
}

impl Snapshot {
    pub fn from_state(sweep: u64, state: &GibbsState) -> Self {
        Self {
            sweep,
            k: state.k(),
            labels: state.labels().into_iter().map(|g| g as u32).collect(),
            slots: state.slots().to_vec(),
            n_items: state.n_items(),
        }
    }

    pub fn n_obs(&self) -> usize {
        self.labels.len()
    }

    pub fn slot(&self, i: usize, j: usize) -> u32 {
        self.slots[i * self.n_items + j]
    }

    /// Occupancies `n_r`.
    pub fn occupancy(&self) -> Vec<usize> {
        let mut n = vec![0; self.k];
        for &g in &self.labels {
            n[g as usize] += 1;
        }
        n
    }
}

/// Metadata describing how a sample set was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleHeader {
    pub n_obs: usize,
    pub n_items: usize,
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub burn_in: u64,
    pub stride: u64,
    pub prior: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub header: SampleHeader,
    pub samples: Vec<Snapshot>,
}

impl SampleSink for SampleSet {
    fn record(&mut self, sweep: u64, state: &GibbsState) -> Result<()> {
        self.samples.push(Snapshot::from_state(sweep, state));
        Ok(())
    }
}

impl SampleHeader {
    pub fn new(phi: &PhiTensor, prior: &KPrior, opts: &SamplerOptions) -> Self {
        Self {
            n_obs: phi.n_obs(),
            n_items: phi.n_items(),
            sizes: phi.sizes().to_vec(),
            seed: opts.seed,
            burn_in: opts.burn_in_sweeps,
            stride: opts.stride,
            prior: prior.to_string(),
        }
    }
}

/// Runs one chain, passing the state to `sink` every `stride` sweeps after
/// burn-in. A sweep is `N` steps.
pub fn run_sampler_with<S: SampleSink + ?Sized>(
    phi: &PhiTensor,
    prior: &KPrior,
    opts: &SamplerOptions,
    sink: &mut S,
) -> Result<RunStats> {
    opts.validate()?;
    let mut sampler = Sampler::new(phi, prior)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(opts.stream);
    let mut state = GibbsState::initial(phi, opts.init, &mut rng)?;
    let n = phi.n_obs() as u64;
    let start = Instant::now();
    for _ in 0..opts.burn_in_sweeps * n {
        sampler.step(&mut state, &mut rng);
    }
    let mut sweep = opts.burn_in_sweeps;
    for _ in 0..opts.n_records() {
        for _ in 0..opts.stride * n {
            sampler.step(&mut state, &mut rng);
        }
        sweep += opts.stride;
        sink.record(sweep, &state)?;
    }
    let seconds = start.elapsed().as_secs_f64();
    let steps = (opts.burn_in_sweeps + opts.n_records() * opts.stride) * n;
    Ok(RunStats {
        steps,
        seconds,
        steps_per_second: steps as f64 / seconds.max(1e-12),
        final_k: state.k(),
    })
}

/// Runs one chain and keeps every recorded snapshot in memory.
pub fn run_sampler(phi: &PhiTensor, prior: &KPrior, opts: &SamplerOptions) -> Result<SampleSet> {
    let bytes = opts.storage_bytes(phi.n_obs(), phi.n_items());
    if bytes > opts.memory_budget {
        return Err(Error::Guard(format!(
            "storing {} samples needs about {bytes} bytes, over the {} byte budget; \
             increase the stride or stream the samples (--stream-consensus)",
            opts.n_records(),
            opts.memory_budget
        )));
    }
    let mut set = SampleSet {
        header: SampleHeader::new(phi, prior, opts),
        samples: Vec::with_capacity(opts.n_records() as usize),
    };
    run_sampler_with(phi, prior, opts, &mut set)?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use approx::assert_abs_diff_eq;

    fn bern_phi(xs: &[f64], d: usize) -> PhiTensor {
        PhiTensor::evaluate(xs, &[BasisSpec::bernstein(d)]).unwrap()
    }

    #[test]
    fn log_joint_single_observation() {
        let phi = PhiTensor::from_values(1, vec![2], vec![1.3, 0.7]).unwrap();
        let state = GibbsState::from_assignment(&[2], &[0], &[0]).unwrap();
        let want = KPrior::Uniform.log_prob(1, 1) + (1.3f64 / 2.0).ln();
        assert_abs_diff_eq!(log_joint(&state, &phi, &KPrior::Uniform), want, epsilon = 1e-14);
    }

    #[test]
    fn log_joint_zero_phi_is_neg_infinity() {
        let phi = PhiTensor::from_values(1, vec![2], vec![1.0, 0.0]).unwrap();
        let state = GibbsState::from_assignment(&[2], &[0], &[1]).unwrap();
        assert_eq!(log_joint(&state, &phi, &KPrior::Uniform), f64::NEG_INFINITY);
    }

    #[test]
    fn log_joint_label_invariant() {
        let phi = bern_phi(&[0.1, 0.4, 0.8, 0.9, 0.3], 2);
        let a = GibbsState::from_assignment(&[3], &[0, 1, 1, 2, 0], &[0, 1, 2, 2, 1]).unwrap();
        let b = GibbsState::from_assignment(&[3], &[2, 0, 0, 1, 2], &[0, 1, 2, 2, 1]).unwrap();
        assert_abs_diff_eq!(
            log_joint(&a, &phi, &KPrior::Uniform),
            log_joint(&b, &phi, &KPrior::Uniform),
            epsilon = 1e-12
        );
    }

    #[test]
    fn bernstein_new_component_weight_is_k_times_prior() {
        let phi = bern_phi(&[0.1, 0.4, 0.8, 0.9, 0.3], 3);
        let state = GibbsState::from_assignment(&[4], &[0, 1, 1, 2, 0], &[0, 1, 2, 3, 1]).unwrap();
        let det = Detached::new(&state, 1);
        let lw = candidate_log_weights(&det, &phi, &KPrior::Uniform).unwrap();
        assert_eq!(lw.len(), 4);
        let want = (3.0f64 * (1.0 / 5.0)).ln();
        assert_abs_diff_eq!(lw[3], want, epsilon = 1e-13);
    }

    #[test]
    fn existing_weight_formula() {
        let phi = PhiTensor::from_values(3, vec![2], vec![1.5, 0.5, 0.2, 1.8, 1.0, 1.0]).unwrap();
        let state = GibbsState::from_assignment(&[2], &[0, 0, 1], &[0, 1, 1]).unwrap();
        let det = Detached::new(&state, 2);
        assert_eq!(det.k(), 1);
        let lw = candidate_log_weights(&det, &phi, &KPrior::Uniform).unwrap();
        // w_1 = (N-k)/k P(k) sum_t (m+1) phi / (n + T), with m = (1, 1), n = 2.
        let w1 = (3.0 - 1.0) / 1.0 * (1.0 / 3.0) * (2.0 * 1.0 + 2.0 * 1.0) / 4.0;
        let w2 = 1.0 * (1.0 / 3.0) * (2.0 / 2.0);
        assert_abs_diff_eq!(lw[0].exp(), w1, epsilon = 1e-14);
        assert_abs_diff_eq!(lw[1].exp(), w2, epsilon = 1e-14);
    }

    #[test]
    fn slot_probabilities() {
        let phi = PhiTensor::from_values(5, vec![2], vec![2.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let state = GibbsState::from_assignment(&[2], &[0, 1, 1, 1, 1], &[0, 0, 0, 0, 0]).unwrap();
        // Observation 0 alone: removing it leaves one component with m = (4, 0).
        let det = Detached::new(&state, 0);
        assert_eq!(slot_probs(&det, 1, 0, &phi).unwrap(), vec![1.0, 0.0]);
        let det = Detached::new(&state, 1);
        let p = slot_probs(&det, 1, 0, &phi).unwrap();
        assert_abs_diff_eq!(p[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.2, epsilon = 1e-15);
        let uniform = GibbsState::from_assignment(&[2], &[0, 0, 0, 0, 0], &[0, 1, 0, 1, 0]).unwrap();
        let det = Detached::new(&uniform, 4);
        assert_eq!(slot_probs(&det, 0, 0, &phi).unwrap(), vec![0.5, 0.5]);
        assert!(slot_probs(&det, 3, 0, &phi).is_err());
    }

    #[test]
    fn single_observation_chain() {
        let phi = bern_phi(&[0.3], 2);
        let mut state = GibbsState::from_assignment(&[3], &[0], &[1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut sampler = Sampler::new(&phi, &KPrior::Uniform).unwrap();
        for _ in 0..100 {
            sampler.step(&mut state, &mut rng);
            assert_eq!(state.k(), 1);
            assert_eq!(state.size_of(0), 1);
        }
        state.validate().unwrap();
    }

    #[test]
    fn prior_table_checks() {
        assert!(KPrior::Table(vec![0.5, 0.5]).check(3).is_err());
        assert!(KPrior::Table(vec![0.5, -0.5, 1.0]).check(3).is_err());
        KPrior::Table(vec![0.2, 0.3, 0.5]).check(3).unwrap();
        assert_eq!(KPrior::Uniform.log_prob(0, 3), f64::NEG_INFINITY);
        assert_eq!(KPrior::Uniform.log_prob(4, 3), f64::NEG_INFINITY);
        let phi = bern_phi(&[0.1, 0.2, 0.3], 1);
        assert!(Sampler::new(&phi, &KPrior::Table(vec![1.0])).is_err());
    }

    #[test]
    fn zero_sweeps_rejected() {
        let phi = bern_phi(&[0.1, 0.2], 1);
        let opts = SamplerOptions {
            sample_sweeps: 0,
            ..Default::default()
        };
        assert!(run_sampler(&phi, &KPrior::Uniform, &opts).is_err());
    }

    #[test]
    fn memory_guard() {
        let phi = bern_phi(&[0.1, 0.2, 0.5, 0.7], 1);
        let opts = SamplerOptions {
            burn_in_sweeps: 0,
            sample_sweeps: 100,
            memory_budget: 100,
            ..Default::default()
        };
        assert!(matches!(run_sampler(&phi, &KPrior::Uniform, &opts), Err(Error::Guard(_))));
    }

    #[test]
    fn records_every_stride() {
        let phi = bern_phi(&[0.1, 0.2, 0.5, 0.7], 1);
        let opts = SamplerOptions {
            burn_in_sweeps: 3,
            sample_sweeps: 10,
            stride: 2,
            ..Default::default()
        };
        let set = run_sampler(&phi, &KPrior::Uniform, &opts).unwrap();
        let sweeps: Vec<u64> = set.samples.iter().map(|s| s.sweep).collect();
        assert_eq!(sweeps, vec![5, 7, 9, 11, 13]);
    }
}
