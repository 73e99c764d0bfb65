//! States and exact continuous-time dynamics.
//!
//! A state is a pair `(X, π)`: strictly increasing particle positions on the
//! lattice together with the word of species labels read along them. Each
//! particle waits an exponential time with rate 1, then jumps right with
//! probability `p` or left with probability `q = 1 - p`. Right jumps resolve
//! by repeated two-body steps: a particle landing on an occupied site leaves
//! the larger of the two species behind and the smaller continues one site to
//! the right, until an empty site is reached. Left jumps follow the
//! multi-species TASEP rule: onto an empty site, or swapping with a strictly
//! smaller species; otherwise the jump is given up.

use alloc::vec::Vec;
use core::fmt;

/// Species labels along the sorted particle positions (the word `π`).
///
/// Letters are positive integers; larger letters take priority over smaller
/// ones. An empty site behaves as species `0`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SpeciesWord(Vec<u32>);

impl SpeciesWord {
    pub fn new(letters: Vec<u32>) -> Result<Self, StateError> {
        if letters.is_empty() {
            return Err(StateError::Empty);
        }
        if let Some(index) = letters.iter().position(|&l| l == 0) {
            return Err(StateError::NonPositiveSpecies { index });
        }
        Ok(SpeciesWord(letters))
    }

    pub(crate) fn new_unchecked(letters: Vec<u32>) -> Self {
        debug_assert!(!letters.is_empty() && letters.iter().all(|&l| l > 0));
        SpeciesWord(letters)
    }

    pub fn letters(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest letter appearing in the word.
    pub fn max_letter(&self) -> u32 {
        *self.0.iter().max().expect("word is nonempty")
    }

    /// The letter multiset, as a sorted vector. Dynamics and algebra both
    /// preserve it.
    pub fn multiset(&self) -> Vec<u32> {
        let mut m = self.0.clone();
        m.sort_unstable();
        m
    }

    pub fn into_letters(self) -> Vec<u32> {
        self.0
    }
}

impl fmt::Display for SpeciesWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", l)?;
        }
        Ok(())
    }
}

/// Strictly increasing particle positions (the configuration `X`).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Configuration(Vec<i64>);

impl Configuration {
    pub fn new(positions: Vec<i64>) -> Result<Self, StateError> {
        if positions.is_empty() {
            return Err(StateError::Empty);
        }
        for i in 1..positions.len() {
            if positions[i - 1] >= positions[i] {
                return Err(StateError::NotStrictlyIncreasing { index: i });
            }
        }
        Ok(Configuration(positions))
    }

    pub fn positions(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A full state `(X, π)` of the process.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MarkovState {
    config: Configuration,
    species: SpeciesWord,
}

impl MarkovState {
    pub fn new(config: Configuration, species: SpeciesWord) -> Result<Self, StateError> {
        if config.len() != species.len() {
            return Err(StateError::LengthMismatch {
                positions: config.len(),
                species: species.len(),
            });
        }
        Ok(MarkovState { config, species })
    }

    /// Builds a state from raw parts, checking every invariant.
    pub fn from_parts(positions: Vec<i64>, species: Vec<u32>) -> Result<Self, StateError> {
        Self::new(Configuration::new(positions)?, SpeciesWord::new(species)?)
    }

    fn new_unchecked(positions: Vec<i64>, species: Vec<u32>) -> Self {
        debug_assert!(validate_state(&positions, &species).is_ok());
        MarkovState {
            config: Configuration(positions),
            species: SpeciesWord(species),
        }
    }

    pub fn positions(&self) -> &[i64] {
        self.config.positions()
    }

    pub fn species(&self) -> &SpeciesWord {
        &self.species
    }

    /// Particle count `N`.
    pub fn len(&self) -> usize {
        self.config.len()
    }

    pub fn is_empty(&self) -> bool {
        self.config.is_empty()
    }
}

impl fmt::Display for MarkovState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.positions().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", x)?;
        }
        write!(f, " | {})", self.species)
    }
}

/// One enabled move of the chain: a target state and the exponential rate at
/// which the move fires. For this model every rate is either `p` or `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub target: MarkovState,
    pub rate: f64,
}

/// Violations of the state invariants, reported at API boundaries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateError {
    Empty,
    NonPositiveSpecies { index: usize },
    NotStrictlyIncreasing { index: usize },
    LengthMismatch { positions: usize, species: usize },
}

impl fmt::Display for StateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateError::Empty => write!(f, "state must contain at least one particle"),
            StateError::NonPositiveSpecies { index } => {
                write!(f, "species at index {} is not a positive integer", index)
            }
            StateError::NotStrictlyIncreasing { index } => {
                write!(f, "positions not strictly increasing at index {}", index)
            }
            StateError::LengthMismatch { positions, species } => write!(
                f,
                "length mismatch: {} positions vs {} species",
                positions, species
            ),
        }
    }
}

impl core::error::Error for StateError {}

/// Checks the `MarkovState` invariants on raw parts, returning the first
/// violation.
pub fn validate_state(positions: &[i64], species: &[u32]) -> Result<(), StateError> {
    if positions.is_empty() {
        return Err(StateError::Empty);
    }
    for i in 1..positions.len() {
        if positions[i - 1] >= positions[i] {
            return Err(StateError::NotStrictlyIncreasing { index: i });
        }
    }
    if let Some(index) = species.iter().position(|&l| l == 0) {
        return Err(StateError::NonPositiveSpecies { index });
    }
    if positions.len() != species.len() {
        return Err(StateError::LengthMismatch {
            positions: positions.len(),
            species: species.len(),
        });
    }
    Ok(())
}

/// Right long-range jump of particle `k` (1-based), with the full push
/// cascade.
///
/// The jump is resolved by repeated two-body steps: the moving particle
/// enters the next site; if that site is occupied, the larger of the two
/// species stays there and the smaller continues one site to the right. The
/// cascade ends at the first empty site, so the right jump is always enabled.
///
/// Panics if `k` is out of `1..=N`.
pub fn apply_right_jump(state: &MarkovState, k: usize) -> MarkovState {
    let n = state.len();
    assert!(k >= 1 && k <= n, "particle index {} out of 1..={}", k, n);
    let mut pos = state.positions().to_vec();
    let mut sp = state.species().letters().to_vec();
    let mut carried = sp.remove(k - 1);
    let mut site = pos.remove(k - 1) + 1;
    let mut idx = k - 1; // first remaining particle at a position >= site
    loop {
        if idx < pos.len() && pos[idx] == site {
            let occupant = sp[idx];
            sp[idx] = carried.max(occupant);
            carried = carried.min(occupant);
            site += 1;
            idx += 1;
        } else {
            pos.insert(idx, site);
            sp.insert(idx, carried);
            break;
        }
    }
    MarkovState::new_unchecked(pos, sp)
}

/// Left jump of particle `k` (1-based), following the multi-species TASEP
/// rule. Returns `None` when the jump is blocked (the target site holds a
/// species at least as large); blocking is a normal outcome, not an error.
///
/// Panics if `k` is out of `1..=N`.
pub fn apply_left_jump(state: &MarkovState, k: usize) -> Option<MarkovState> {
    let n = state.len();
    assert!(k >= 1 && k <= n, "particle index {} out of 1..={}", k, n);
    let pos = state.positions();
    let sp = state.species().letters();
    let x = pos[k - 1];
    let l = sp[k - 1];
    if k >= 2 && pos[k - 2] == x - 1 {
        let occupant = sp[k - 2];
        if occupant < l {
            let mut sp2 = sp.to_vec();
            sp2.swap(k - 2, k - 1);
            Some(MarkovState::new_unchecked(pos.to_vec(), sp2))
        } else {
            None
        }
    } else {
        let mut pos2 = pos.to_vec();
        pos2[k - 1] = x - 1;
        Some(MarkovState::new_unchecked(pos2, sp.to_vec()))
    }
}

/// All enabled transitions out of `state`: one rate-`p` right jump per
/// particle plus one rate-`q` left jump per particle whose left jump is not
/// blocked. Zero-rate moves are omitted, and transitions to identical targets
/// are not merged (callers may merge).
pub fn enumerate_transitions(state: &MarkovState, p: f64) -> Vec<Transition> {
    assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
    let q = 1.0 - p;
    let n = state.len();
    let mut out = Vec::with_capacity(2 * n);
    if p > 0.0 {
        for k in 1..=n {
            out.push(Transition {
                target: apply_right_jump(state, k),
                rate: p,
            });
        }
    }
    if q > 0.0 {
        for k in 1..=n {
            if let Some(target) = apply_left_jump(state, k) {
                out.push(Transition { target, rate: q });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(pos: &[i64], sp: &[u32]) -> MarkovState {
        MarkovState::from_parts(pos.to_vec(), sp.to_vec()).unwrap()
    }

    #[test]
    fn right_jump_cascade_123() {
        // 1 lands on 2, 2 stays put as the larger, 1 pushes through 3 as well
        let s = st(&[0, 1, 2], &[1, 2, 3]);
        assert_eq!(apply_right_jump(&s, 1), st(&[1, 2, 3], &[2, 3, 1]));
    }

    #[test]
    fn right_jump_free_particle() {
        let s = st(&[5], &[1]);
        assert_eq!(apply_right_jump(&s, 1), st(&[6], &[1]));
    }

    #[test]
    fn right_jump_cascade_321() {
        // 3 lands on 2, 2 lands on 1, 1 lands on the empty site 3
        let s = st(&[0, 1, 2], &[3, 2, 1]);
        assert_eq!(apply_right_jump(&s, 1), st(&[1, 2, 3], &[3, 2, 1]));
    }

    #[test]
    fn left_jump_swap() {
        let s = st(&[0, 1], &[1, 2]);
        assert_eq!(apply_left_jump(&s, 2), Some(st(&[0, 1], &[2, 1])));
    }

    #[test]
    fn left_jump_blocked() {
        let s = st(&[0, 1], &[2, 1]);
        assert_eq!(apply_left_jump(&s, 2), None);
        // equal species block as well
        let s = st(&[0, 1], &[1, 1]);
        assert_eq!(apply_left_jump(&s, 2), None);
    }

    #[test]
    fn left_jump_empty_site() {
        let s = st(&[0, 2], &[1, 2]);
        assert_eq!(apply_left_jump(&s, 2), Some(st(&[0, 1], &[1, 2])));
    }

    #[test]
    fn transitions_two_species() {
        let s = st(&[0, 1], &[1, 2]);
        let trans = enumerate_transitions(&s, 0.7);
        assert_eq!(trans.len(), 4);
        let expect = [
            (st(&[1, 2], &[2, 1]), 0.7),
            (st(&[0, 2], &[1, 2]), 0.7),
            (st(&[-1, 1], &[1, 2]), 0.3),
            (st(&[0, 1], &[2, 1]), 0.3),
        ];
        for (target, rate) in expect {
            assert!(
                trans.iter().any(|t| t.target == target && (t.rate - rate).abs() < 1e-15),
                "missing transition to {}",
                target
            );
        }
    }

    #[test]
    fn transitions_single_right_only() {
        let s = st(&[0], &[1]);
        let trans = enumerate_transitions(&s, 1.0);
        assert_eq!(trans.len(), 1);
        assert_eq!(trans[0].target, st(&[1], &[1]));
        assert_eq!(trans[0].rate, 1.0);
    }

    #[test]
    fn transitions_equal_species() {
        // each particle hops over its equal neighbour; the left jump of the
        // trailing particle is blocked
        let s = st(&[0, 1], &[1, 1]);
        let trans = enumerate_transitions(&s, 0.5);
        assert_eq!(trans.len(), 3);
        let expect = [
            (st(&[1, 2], &[1, 1]), 0.5),
            (st(&[0, 2], &[1, 1]), 0.5),
            (st(&[-1, 1], &[1, 1]), 0.5),
        ];
        for (target, rate) in expect {
            assert!(trans.iter().any(|t| t.target == target && t.rate == rate));
        }
    }

    #[test]
    fn validation() {
        assert!(validate_state(&[0, 1, 2], &[1, 2, 3]).is_ok());
        assert_eq!(
            validate_state(&[0, 0], &[1, 2]),
            Err(StateError::NotStrictlyIncreasing { index: 1 })
        );
        assert_eq!(
            validate_state(&[0, 1], &[1]),
            Err(StateError::LengthMismatch {
                positions: 2,
                species: 1
            })
        );
        assert_eq!(
            validate_state(&[0], &[0]),
            Err(StateError::NonPositiveSpecies { index: 0 })
        );
    }
}
