//! Draws data sets from the mixture model with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::basis::{BasisFamily, BasisSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub component_sizes: Vec<usize>,
    /// `theta[r][j]`, one probability vector per component and item.
    pub theta: Vec<Vec<Vec<f64>>>,
    pub specs: Vec<BasisSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub data: Dataset,
    /// Component of each observation, 0-based.
    pub labels: Vec<usize>,
    /// `h[i * M + j]`.
    pub slots: Vec<u32>,
}

impl SynthSpec {
    pub fn n_obs(&self) -> usize {
        self.component_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.component_sizes.len();
        if k == 0 || self.component_sizes.contains(&0) {
            return Err(Error::Config("every component needs at least one observation".into()));
        }
        if self.theta.len() != k {
            return Err(Error::Dimension(format!("{} theta blocks for {k} components", self.theta.len())));
        }
        for (r, rows) in self.theta.iter().enumerate() {
            if rows.len() != self.specs.len() {
                return Err(Error::Dimension(format!("component {r} has {} items", rows.len())));
            }
            for (j, (row, spec)) in rows.iter().zip(&self.specs).enumerate() {
                if row.len() != spec.size() {
                    return Err(Error::Dimension(format!("theta[{r}][{j}] has length {}", row.len())));
                }
                let sum: f64 = row.iter().sum();
                if row.iter().any(|v| *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("theta[{r}][{j}] is not a probability vector")));
                }
            }
        }
        if let Some(spec) = self.specs.iter().find(|s| matches!(s.family(), BasisFamily::Tabulated(_))) {
            return Err(Error::Config(format!("cannot draw from tabulated basis {spec}")));
        }
        Ok(())
    }
}

/// One draw from basis function `t`.
pub fn sample_basis<R: Rng + ?Sized>(spec: &BasisSpec, t: usize, rng: &mut R) -> Result<f64> {
    let bad = |e: &dyn std::fmt::Display| Error::Config(format!("cannot sample {spec}: {e}"));
    match spec.family() {
        BasisFamily::Bernstein { degree } => {
            let beta = Beta::new(t as f64 + 1.0, (degree - t) as f64 + 1.0).map_err(|e| bad(&e))?;
            Ok(beta.sample(rng))
        }
        BasisFamily::Gamma { size } => {
            let g = Gamma::new(t as f64 + 1.0, 1.0 / *size as f64).map_err(|e| bad(&e))?;
            Ok(g.sample(rng))
        }
        BasisFamily::TopHat { .. } => Ok(t as f64 + rng.random::<f64>()),
        BasisFamily::Gaussian { .. } => {
            let c = spec.gaussian_center(t).expect("gaussian family") as f64;
            let n = Normal::new(c, (c.abs() + 1.0).sqrt()).map_err(|e| bad(&e))?;
            Ok(n.sample(rng))
        }
        BasisFamily::Trig { .. } => {
            // The peak of every trig function is its normalizing constant.
            let sup = spec.eval(t, t as f64 / spec.size() as f64)?;
            loop {
                let x: f64 = rng.random();
                if rng.random::<f64>() * sup < spec.eval(t, x)? {
                    return Ok(x);
                }
            }
        }
        BasisFamily::Tabulated(_) => Err(Error::Config(format!("cannot draw from tabulated basis {spec}"))),
    }
}

/// Draws every observation from its own ChaCha stream, so the result does
/// not depend on scheduling.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let m = spec.specs.len();
    let labels: Vec<usize> = spec
        .component_sizes
        .iter()
        .enumerate()
        .flat_map(|(r, &n)| std::iter::repeat_n(r, n))
        .collect();
    let rows = par::map_range(labels.len(), |i| -> Result<(Vec<f64>, Vec<u32>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let mut xs = Vec::with_capacity(m);
        let mut hs = Vec::with_capacity(m);
        for (j, basis) in spec.specs.iter().enumerate() {
            let theta = &spec.theta[labels[i]][j];
            let t = crate::sampler::sample_weighted(theta, &mut rng).expect("validated probability vector");
            xs.push(sample_basis(basis, t, &mut rng)?);
            hs.push(t as u32);
        }
        Ok((xs, hs))
    });
    let mut values = Vec::with_capacity(labels.len() * m);
    let mut slots = Vec::with_capacity(labels.len() * m);
    for row in rows {
        let (xs, hs) = row?;
        values.extend(xs);
        slots.extend(hs);
    }
    let names = (1..=m).map(|j| format!("item_{j}")).collect();
    Ok(SynthData {
        data: Dataset::new(values, names)?,
        labels,
        slots,
    })
}

/// Group `r` uses distribution `((j - r) mod 3)` of group 0 for item `j`.
fn cyclic(base: [[f64; 4]; 3]) -> Vec<Vec<Vec<f64>>> {
    (0..3)
        .map(|r| (0..3).map(|j| base[(j + 3 - r) % 3].to_vec()).collect())
        .collect()
}

fn cubic_spec(base: [[f64; 4]; 3], per_group: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        component_sizes: vec![per_group; 3],
        theta: cyclic(base),
        specs: vec![BasisSpec::bernstein(3); 3],
        seed,
    }
}

const SYNTH1: [[f64; 4]; 3] = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.5, 0.5, 0.0], [0.0, 0.0, 0.0, 1.0]];
const SYNTH2: [[f64; 4]; 3] = [[0.5, 0.0, 0.0, 0.5], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];

/// Three groups of 500 with three cubic item densities, cyclically permuted.
pub fn synth1_spec() -> SynthSpec {
    cubic_spec(SYNTH1, 500, 1)
}

/// As [`synth1_spec`], but one density per group is bimodal.
pub fn synth2_spec() -> SynthSpec {
    cubic_spec(SYNTH2, 500, 2)
}

/// [`synth1_spec`] with `n / 3` observations per group.
pub fn small_spec(n: usize) -> SynthSpec {
    cubic_spec(SYNTH1, n / 3, 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cyclic_shift_direction() {
        let s = synth1_spec();
        assert_eq!(s.theta[0][0], SYNTH1[0].to_vec());
        // Second group, first item uses the third distribution.
        assert_eq!(s.theta[1][0], SYNTH1[2].to_vec());
        assert_eq!(s.theta[2][0], SYNTH1[1].to_vec());
        assert_eq!(s.n_obs(), 1500);
        assert_eq!(small_spec(75).component_sizes, vec![25, 25, 25]);
        assert_eq!(small_spec(75).theta, s.theta);
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = generate(&small_spec(75)).unwrap();
        let b = generate(&small_spec(75)).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.slots, b.slots);
    }

    #[test]
    fn one_hot_bernstein_mean() {
        let spec = SynthSpec {
            component_sizes: vec![10_000],
            theta: vec![vec![vec![1.0, 0.0]]],
            specs: vec![BasisSpec::bernstein(1)],
            seed: 11,
        };
        let d = generate(&spec).unwrap();
        let mean = d.data.values().iter().sum::<f64>() / 10_000.0;
        assert_abs_diff_eq!(mean, 1.0 / 3.0, epsilon = 0.02);
    }

    #[test]
    fn every_family_draws_inside_its_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let specs = [
            BasisSpec::bernstein(3),
            BasisSpec::gamma(4).unwrap(),
            BasisSpec::tophat(4).unwrap(),
            BasisSpec::gaussian(5).unwrap(),
            BasisSpec::trig(5).unwrap(),
        ];
        for spec in &specs {
            for t in 0..spec.size() {
                for _ in 0..50 {
                    let x = sample_basis(spec, t, &mut rng).unwrap();
                    assert!(spec.domain().contains(x), "{spec} gave {x}");
                    assert!(spec.eval(t, x).unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn tophat_draws_stay_in_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = BasisSpec::tophat(3).unwrap();
        for _ in 0..100 {
            let x = sample_basis(&spec, 1, &mut rng).unwrap();
            assert!((1.0..2.0).contains(&x));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = small_spec(6);
        s.theta[0][0] = vec![0.5, 0.5, 0.5, 0.0];
        assert!(generate(&s).is_err());
        let mut s = small_spec(6);
        s.component_sizes[1] = 0;
        assert!(generate(&s).is_err());
    }
}
