use rand::Rng;

use crate::basis::{offsets_of, PhiTensor};
use crate::error::{Error, Result};

/// Members of one component and its slot counts `m[j][t]`, flattened over
/// items. Relabeling a component moves this struct, never the per-member data.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct Component {
    pub(crate) members: Vec<u32>,
    pub(crate) counts: Vec<u32>,
}

/// Sampler state `(k, g, h)` with the occupancy counts it implies.
///
/// Component labels are implicit in the order of the component list; the
/// per-observation label is recovered on demand by [`GibbsState::labels`].
#[derive(Debug, Clone)]
pub struct GibbsState {
    n_obs: usize,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    pub(crate) comps: Vec<Component>,
    /// `h[i * M + j]`.
    pub(crate) slots: Vec<u32>,
    /// Index of each observation within its component's member list.
    pub(crate) pos: Vec<u32>,
    spare: Vec<Component>,
}

impl PartialEq for GibbsState {
    fn eq(&self, other: &Self) -> bool {
        self.n_obs == other.n_obs
            && self.sizes == other.sizes
            && self.slots == other.slots
            && self.labels() == other.labels()
    }
}

/// Starting configuration for a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    AllInOne,
    Singletons,
    /// Uniformly random labels over `k0` components (each kept non-empty).
    Random(usize),
}

impl std::str::FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-in-one" | "one" => Ok(Init::AllInOne),
            "singletons" => Ok(Init::Singletons),
            _ => s
                .strip_prefix("random:")
                .and_then(|k| k.parse().ok())
                .map(Init::Random)
                .ok_or_else(|| Error::Config(format!("unknown init `{s}`"))),
        }
    }
}

impl GibbsState {
    /// Builds a state from explicit labels `g` (`0..k`, every label used) and
    /// flattened slots `h[i * M + j]`.
    pub fn from_assignment(sizes: &[usize], labels: &[usize], slots: &[u32]) -> Result<Self> {
        let n = labels.len();
        let m = sizes.len();
        if slots.len() != n * m {
            return Err(Error::Dimension(format!("{} slots for {n} x {m} cells", slots.len())));
        }
        for (c, &h) in slots.iter().enumerate() {
            if h as usize >= sizes[c % m] {
                return Err(Error::Config(format!(
                    "slot {h} of observation {}, item {} exceeds T = {}",
                    c / m,
                    c % m,
                    sizes[c % m]
                )));
            }
        }
        let k = labels.iter().max().map_or(0, |&g| g + 1);
        let offsets = offsets_of(sizes);
        let stride = *offsets.last().unwrap();
        let mut comps = vec![
            Component {
                members: Vec::new(),
                counts: vec![0; stride],
            };
            k
        ];
        let mut pos = vec![0u32; n];
        for (i, &g) in labels.iter().enumerate() {
            let comp = &mut comps[g];
            pos[i] = comp.members.len() as u32;
            comp.members.push(i as u32);
            for j in 0..m {
                comp.counts[offsets[j] + slots[i * m + j] as usize] += 1;
            }
        }
        if let Some(r) = comps.iter().position(|c| c.members.is_empty()) {
            return Err(Error::Config(format!("component {r} has no members")));
        }
        Ok(Self {
            n_obs: n,
            sizes: sizes.to_vec(),
            offsets,
            comps,
            slots: slots.to_vec(),
            pos,
            spare: Vec::new(),
        })
    }

    /// Initial state for a chain; slots are drawn in proportion to `phi`.
    pub fn initial<R: Rng + ?Sized>(phi: &PhiTensor, init: Init, rng: &mut R) -> Result<Self> {
        let n = phi.n_obs();
        if n == 0 {
            return Err(Error::Data("cannot sample with zero observations".into()));
        }
        let m = phi.n_items();
        let mut slots = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                slots.push(sample_weighted(phi.cell(i, j), rng).ok_or(Error::ZeroNormalizer { i, j })? as u32);
            }
        }
        let labels: Vec<usize> = match init {
            Init::AllInOne => vec![0; n],
            Init::Singletons => (0..n).collect(),
            Init::Random(k0) => {
                if k0 == 0 || k0 > n {
                    return Err(Error::Config(format!("random init needs 1 <= k0 <= {n}")));
                }
                // First k0 observations of a random order seed the components.
                let mut order: Vec<usize> = (0..n).collect();
                for a in (1..n).rev() {
                    order.swap(a, rng.random_range(0..=a));
                }
                let mut labels = vec![0; n];
                for (rank, &i) in order.iter().enumerate() {
                    labels[i] = if rank < k0 { rank } else { rng.random_range(0..k0) };
                }
                labels
            }
        };
        Self::from_assignment(phi.sizes(), &labels, &slots)
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_items(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Number of components `k`.
    pub fn k(&self) -> usize {
        self.comps.len()
    }

    /// Occupancy `n_r`.
    pub fn size_of(&self, r: usize) -> usize {
        self.comps[r].members.len()
    }

    pub fn members(&self, r: usize) -> &[u32] {
        &self.comps[r].members
    }

    /// Slot counts `m[r][j][t]` for one (component, item).
    pub fn counts(&self, r: usize, j: usize) -> &[u32] {
        &self.comps[r].counts[self.offsets[j]..self.offsets[j + 1]]
    }

    /// Slots `h[i][j]` of observation `i`.
    pub fn slots_of(&self, i: usize) -> &[u32] {
        let m = self.n_items();
        &self.slots[i * m..(i + 1) * m]
    }

    /// Flattened slots, `h[i * M + j]`.
    pub fn slots(&self) -> &[u32] {
        &self.slots
    }

    /// Component label of every observation.
    pub fn labels(&self) -> Vec<usize> {
        let mut g = vec![0; self.n_obs];
        for (r, c) in self.comps.iter().enumerate() {
            for &i in &c.members {
                g[i as usize] = r;
            }
        }
        g
    }

    /// Component currently holding observation `i`.
    pub fn component_of(&self, i: usize) -> usize {
        self.comps
            .iter()
            .position(|c| c.members.get(self.pos[i] as usize) == Some(&(i as u32)))
            .expect("observation belongs to a component")
    }

    /// Removes the member at `idx` of component `r`, returning the observation.
    /// Leaves the component in place even if it becomes empty.
    pub(crate) fn detach(&mut self, r: usize, idx: usize) -> usize {
        let m = self.sizes.len();
        let comp = &mut self.comps[r];
        let i = comp.members.swap_remove(idx) as usize;
        if let Some(&moved) = comp.members.get(idx) {
            self.pos[moved as usize] = idx as u32;
        }
        for j in 0..m {
            comp.counts[self.offsets[j] + self.slots[i * m + j] as usize] -= 1;
        }
        i
    }

    /// Deletes empty component `r`; the last component takes label `r`.
    pub(crate) fn delete_component(&mut self, r: usize) {
        debug_assert!(self.comps[r].members.is_empty());
        let comp = self.comps.swap_remove(r);
        self.spare.push(comp);
    }

    /// Appends an empty component and returns its label.
    pub(crate) fn push_component(&mut self) -> usize {
        let stride = *self.offsets.last().unwrap();
        let comp = self.spare.pop().unwrap_or_else(|| Component {
            members: Vec::new(),
            counts: vec![0; stride],
        });
        debug_assert!(comp.counts.iter().all(|&c| c == 0));
        self.comps.push(comp);
        self.comps.len() - 1
    }

    pub(crate) fn swap_components(&mut self, a: usize, b: usize) {
        self.comps.swap(a, b);
    }

    /// Adds observation `i` to component `s` with the slots already stored.
    pub(crate) fn attach(&mut self, s: usize, i: usize) {
        let m = self.sizes.len();
        let comp = &mut self.comps[s];
        self.pos[i] = comp.members.len() as u32;
        comp.members.push(i as u32);
        for j in 0..m {
            comp.counts[self.offsets[j] + self.slots[i * m + j] as usize] += 1;
        }
    }

    pub(crate) fn set_slot(&mut self, i: usize, j: usize, t: u32) {
        let m = self.sizes.len();
        self.slots[i * m + j] = t;
    }

    /// Rebuilds every count from `(g, h)` and compares with the incremental
    /// bookkeeping.
    pub fn validate(&self) -> Result<()> {
        if self.comps.is_empty() {
            return Err(Error::Config("state has no components".into()));
        }
        let rebuilt = Self::from_assignment(&self.sizes, &self.labels(), &self.slots)?;
        let mut seen = vec![false; self.n_obs];
        for (r, c) in self.comps.iter().enumerate() {
            if c.members.is_empty() {
                return Err(Error::Config(format!("component {r} is empty")));
            }
            if c.counts != rebuilt.comps[r].counts {
                return Err(Error::Config(format!("slot counts of component {r} are stale")));
            }
            for (idx, &i) in c.members.iter().enumerate() {
                if std::mem::replace(&mut seen[i as usize], true) {
                    return Err(Error::Config(format!("observation {i} appears twice")));
                }
                if self.pos[i as usize] as usize != idx {
                    return Err(Error::Config(format!("position index of observation {i} is stale")));
                }
            }
            for j in 0..self.n_items() {
                let total: u32 = self.counts(r, j).iter().sum();
                if total as usize != c.members.len() {
                    return Err(Error::Config(format!("counts of ({r}, {j}) do not sum to n_r")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("component lists do not cover every observation".into()));
        }
        Ok(())
    }
}

/// Draws an index with probability proportional to `weights`.
pub(crate) fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (t, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return Some(t);
            }
            u -= w;
            last = t;
        }
    }
    Some(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn from_assignment_counts() {
        let s = GibbsState::from_assignment(&[2, 3], &[0, 1, 0], &[0, 2, 1, 1, 1, 0]).unwrap();
        assert_eq!(s.k(), 2);
        assert_eq!(s.size_of(0), 2);
        assert_eq!(s.counts(0, 0), &[1, 1]);
        assert_eq!(s.counts(0, 1), &[1, 0, 1]);
        assert_eq!(s.counts(1, 1), &[0, 1, 0]);
        s.validate().unwrap();
    }

    #[test]
    fn from_assignment_rejects_gaps_and_bad_slots() {
        assert!(GibbsState::from_assignment(&[2], &[0, 2], &[0, 0]).is_err());
        assert!(GibbsState::from_assignment(&[2], &[0, 0], &[0, 2]).is_err());
    }

    #[test]
    fn detach_delete_relabels_last() {
        let mut s = GibbsState::from_assignment(&[2], &[0, 1, 2, 2], &[0, 1, 0, 1]).unwrap();
        let i = s.detach(0, 0);
        assert_eq!(i, 0);
        s.delete_component(0);
        // Old component 2 is now component 0.
        assert_eq!(s.k(), 2);
        let mut m = s.members(0).to_vec();
        m.sort();
        assert_eq!(m, vec![2, 3]);
        let r = s.push_component();
        s.attach(r, i);
        s.validate().unwrap();
        assert_eq!(s.labels(), vec![2, 1, 0, 0]);
    }

    #[test]
    fn random_init_keeps_components_non_empty() {
        let phi = PhiTensor::from_values(6, vec![2], vec![1.0; 12]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k0 in 1..=6 {
            let s = GibbsState::initial(&phi, Init::Random(k0), &mut rng).unwrap();
            assert_eq!(s.k(), k0);
            s.validate().unwrap();
        }
        assert!(GibbsState::initial(&phi, Init::Random(7), &mut rng).is_err());
        assert_eq!(GibbsState::initial(&phi, Init::Singletons, &mut rng).unwrap().k(), 6);
    }

    #[test]
    fn init_avoids_zero_phi_slots() {
        let phi = PhiTensor::from_values(3, vec![3], vec![0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = GibbsState::initial(&phi, Init::AllInOne, &mut rng).unwrap();
        assert_eq!(s.slots(), &[1, 2, 0]);
    }

    #[test]
    fn init_rejects_all_zero_cell() {
        let phi = PhiTensor::from_values(1, vec![2], vec![0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            GibbsState::initial(&phi, Init::AllInOne, &mut rng),
            Err(Error::ZeroNormalizer { i: 0, j: 0 })
        ));
    }

    #[test]
    fn init_parse() {
        assert_eq!("all-in-one".parse::<Init>().unwrap(), Init::AllInOne);
        assert_eq!("random:4".parse::<Init>().unwrap(), Init::Random(4));
        assert!("random:x".parse::<Init>().is_err());
    }
}
