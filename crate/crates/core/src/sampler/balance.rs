//! Explicit single-move transition probabilities.
//!
//! The sampler always opens a new component at the last label. For checking
//! detailed balance against the labeled posterior it is convenient to let
//! the new component take any label `p` in `0..=k'` with equal probability,
//! swapping with the component that held it. This changes nothing about the
//! unlabeled chain.

use rand::Rng;

use super::{Detached, GibbsState, KPrior, Sampler};
use crate::basis::PhiTensor;
use crate::error::{Error, Result};
use crate::special::log_sum_exp;

/// Where the removed observation goes, in the labeling after its removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Existing(usize),
    New { label: usize },
}

/// Remove observation `obs`, then reinsert it at `target` with `slots`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    pub obs: usize,
    pub target: Target,
    pub slots: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveClass {
    /// Non-singleton observation returns to its own component.
    Stay,
    /// Non-singleton observation moves to another existing component.
    Transfer,
    /// Non-singleton observation founds a new component.
    Create,
    /// Singleton observation joins an existing component.
    Delete,
    /// Singleton observation founds a new component again.
    Recreate,
}

pub fn classify_move(state: &GibbsState, mv: &Move) -> MoveClass {
    let a = state.component_of(mv.obs);
    let singleton = state.size_of(a) == 1;
    match (singleton, mv.target) {
        (false, Target::Existing(s)) if s == a => MoveClass::Stay,
        (false, Target::Existing(_)) => MoveClass::Transfer,
        (false, Target::New { .. }) => MoveClass::Create,
        (true, Target::Existing(_)) => MoveClass::Delete,
        (true, Target::New { .. }) => MoveClass::Recreate,
    }
}

fn check_move(det: &Detached, mv: &Move, sizes: &[usize]) -> Result<()> {
    let k = det.k();
    match mv.target {
        Target::Existing(s) if s >= k => {
            return Err(Error::Config(format!("target component {s} out of range 0..{k}")));
        }
        Target::New { label } if label > k => {
            return Err(Error::Config(format!("new label {label} out of range 0..={k}")));
        }
        _ => {}
    }
    if mv.slots.len() != sizes.len() || mv.slots.iter().zip(sizes).any(|(&h, &t)| h as usize >= t) {
        return Err(Error::Config("move slots do not fit the basis sizes".into()));
    }
    Ok(())
}

/// State reached by performing `mv`.
pub fn apply_move(state: &GibbsState, mv: &Move) -> Result<GibbsState> {
    let det = Detached::new(state, mv.obs);
    check_move(&det, mv, state.sizes())?;
    let mut s = det.state;
    let i = mv.obs;
    for (j, &h) in mv.slots.iter().enumerate() {
        s.set_slot(i, j, h);
    }
    match mv.target {
        Target::Existing(r) => s.attach(r, i),
        Target::New { label } => {
            let last = s.push_component();
            s.attach(last, i);
            s.swap_components(label, last);
        }
    }
    Ok(s)
}

/// The move that undoes `mv` from the state it produces.
pub fn reverse_move(state: &GibbsState, mv: &Move) -> Move {
    let a = state.component_of(mv.obs);
    let target = if state.size_of(a) == 1 {
        Target::New { label: a }
    } else {
        Target::Existing(a)
    };
    Move {
        obs: mv.obs,
        target,
        slots: state.slots_of(mv.obs).to_vec(),
    }
}

/// `ln` probability that one step from `state` performs `mv`.
pub fn transition_log_prob(state: &GibbsState, mv: &Move, phi: &PhiTensor, prior: &KPrior) -> Result<f64> {
    let sampler = Sampler::new(phi, prior)?;
    let k = state.k();
    let a = state.component_of(mv.obs);
    let n_a = state.size_of(a);
    let det = Detached::new(state, mv.obs);
    check_move(&det, mv, state.sizes())?;

    let mut lw = Vec::new();
    sampler.fill_log_weights(&det.state, mv.obs, &mut lw);
    let kp = det.k();
    let (choice, counts_from) = match mv.target {
        Target::Existing(s) => (lw[s] - log_sum_exp(&lw), Some(s)),
        Target::New { .. } if kp == 0 => (0.0, None),
        Target::New { .. } => (lw[kp] - ((kp + 1) as f64).ln() - log_sum_exp(&lw), None),
    };

    let mut slots = 0.0;
    for (j, &h) in mv.slots.iter().enumerate() {
        let cell = phi.cell(mv.obs, j);
        let w = |t: usize| match counts_from {
            Some(s) => (det.counts(s, j)[t] as f64 + 1.0) * cell[t],
            None => cell[t],
        };
        let total: f64 = (0..cell.len()).map(w).sum();
        slots += w(h as usize).ln() - total.ln();
    }
    Ok(-(k as f64).ln() - (n_a as f64).ln() + choice + slots)
}

/// A random move of the given class, or `None` if the state admits none.
pub fn random_move<R: Rng + ?Sized>(state: &GibbsState, class: MoveClass, rng: &mut R) -> Option<Move> {
    let k = state.k();
    let wants_singleton = matches!(class, MoveClass::Delete | MoveClass::Recreate);
    let eligible: Vec<usize> = (0..state.n_obs())
        .filter(|&i| (state.size_of(state.component_of(i)) == 1) == wants_singleton)
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let obs = eligible[rng.random_range(0..eligible.len())];
    let a = state.component_of(obs);
    let target = match class {
        MoveClass::Stay => Target::Existing(a),
        MoveClass::Transfer => {
            if k < 2 {
                return None;
            }
            let s = rng.random_range(0..k - 1);
            Target::Existing(if s >= a { s + 1 } else { s })
        }
        MoveClass::Create => Target::New {
            label: rng.random_range(0..=k),
        },
        MoveClass::Delete => {
            if k < 2 {
                return None;
            }
            Target::Existing(rng.random_range(0..k - 1))
        }
        MoveClass::Recreate => Target::New {
            label: rng.random_range(0..k),
        },
    };
    let slots = state.sizes().iter().map(|&t| rng.random_range(0..t) as u32).collect();
    Some(Move { obs, target, slots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::log_joint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (PhiTensor, GibbsState) {
        let phi = PhiTensor::from_values(
            4,
            vec![2, 3],
            vec![
                1.2, 0.8, 0.5, 1.0, 1.5, //
                0.3, 1.7, 2.0, 0.6, 0.4, //
                1.0, 1.0, 0.9, 0.9, 1.2, //
                1.9, 0.1, 0.2, 1.4, 1.4,
            ],
        )
        .unwrap();
        let state = GibbsState::from_assignment(&[2, 3], &[0, 1, 0, 2], &[0, 2, 1, 0, 1, 1, 0, 2]).unwrap();
        (phi, state)
    }

    #[test]
    fn reverse_restores_state() {
        let (_, state) = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for class in [
            MoveClass::Stay,
            MoveClass::Transfer,
            MoveClass::Create,
            MoveClass::Delete,
            MoveClass::Recreate,
        ] {
            for _ in 0..20 {
                let mv = random_move(&state, class, &mut rng).unwrap();
                assert_eq!(classify_move(&state, &mv), class);
                let next = apply_move(&state, &mv).unwrap();
                next.validate().unwrap();
                let back = apply_move(&next, &reverse_move(&state, &mv)).unwrap();
                assert_eq!(back, state);
            }
        }
    }

    #[test]
    fn detailed_balance() {
        let (phi, state) = fixture();
        let prior = KPrior::Uniform;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for class in [
            MoveClass::Stay,
            MoveClass::Transfer,
            MoveClass::Create,
            MoveClass::Delete,
            MoveClass::Recreate,
        ] {
            for _ in 0..20 {
                let mv = random_move(&state, class, &mut rng).unwrap();
                let next = apply_move(&state, &mv).unwrap();
                let fwd = transition_log_prob(&state, &mv, &phi, &prior).unwrap();
                let rev = transition_log_prob(&next, &reverse_move(&state, &mv), &phi, &prior).unwrap();
                let lhs = fwd - rev;
                let rhs = log_joint(&next, &phi, &prior) - log_joint(&state, &phi, &prior);
                assert!((lhs - rhs).abs() < 1e-9, "{class:?}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn outgoing_probabilities_sum_to_one() {
        let (phi, state) = fixture();
        let prior = KPrior::Uniform;
        let mut total = Vec::new();
        for obs in 0..state.n_obs() {
            let det = Detached::new(&state, obs);
            let kp = det.k();
            let mut targets: Vec<Target> = (0..kp).map(Target::Existing).collect();
            targets.extend((0..=kp).map(|label| Target::New { label }));
            for target in targets {
                for h0 in 0..2u32 {
                    for h1 in 0..3u32 {
                        let mv = Move {
                            obs,
                            target,
                            slots: vec![h0, h1],
                        };
                        total.push(transition_log_prob(&state, &mv, &phi, &prior).unwrap());
                    }
                }
            }
        }
        // Each observation is picked with probability 1/k * 1/n_r.
        let sum: f64 = total.iter().map(|v| v.exp()).sum();
        assert!((sum - 1.0).abs() < 1e-12, "{sum}");
    }

    #[test]
    fn rejects_out_of_range_targets() {
        let (phi, state) = fixture();
        let mv = Move {
            obs: 0,
            target: Target::Existing(3),
            slots: vec![0, 0],
        };
        assert!(apply_move(&state, &mv).is_err());
        assert!(transition_log_prob(&state, &mv, &phi, &KPrior::Uniform).is_err());
    }
}
