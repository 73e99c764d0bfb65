//! Property tests for the exact dynamics: conservation laws, rate structure,
//! equivalence of the two-body cascade with the direct long-range rule, and
//! reduction to the single-species models.

use masep_core::state::{
    apply_left_jump, apply_right_jump, enumerate_transitions, MarkovState,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn state_from(start: i64, gaps: Vec<i64>, species: Vec<u32>) -> MarkovState {
    let mut positions = Vec::with_capacity(species.len());
    let mut x = start;
    positions.push(x);
    for g in gaps {
        x += g;
        positions.push(x);
    }
    MarkovState::from_parts(positions, species).unwrap()
}

prop_compose! {
    fn arb_state(max_n: usize)(n in 1..=max_n)(
        start in -20i64..=20,
        gaps in vec(1i64..=3, n - 1),
        species in vec(1u32..=4, n),
    ) -> MarkovState {
        state_from(start, gaps, species)
    }
}

/// Direct reading of the long-range rule: the jumper lands on the nearest
/// right site occupied by a strictly smaller species (empty counts as
/// species 0), and the displaced occupant recurses from the site it was
/// displaced from. Test-only oracle for the cascade implementation.
fn right_jump_direct(state: &MarkovState, k: usize) -> MarkovState {
    let mut pos: Vec<i64> = state.positions().to_vec();
    let mut sp: Vec<u32> = state.species().letters().to_vec();
    let mut carried = sp.remove(k - 1);
    let mut from = pos.remove(k - 1);
    loop {
        let mut site = from + 1;
        loop {
            match pos.iter().position(|&x| x == site) {
                None => break,
                Some(j) if sp[j] < carried => break,
                Some(_) => site += 1,
            }
        }
        match pos.iter().position(|&x| x == site) {
            None => {
                let idx = pos.iter().position(|&x| x > site).unwrap_or(pos.len());
                pos.insert(idx, site);
                sp.insert(idx, carried);
                break;
            }
            Some(j) => {
                let displaced = sp[j];
                sp[j] = carried;
                carried = displaced;
                from = site;
            }
        }
    }
    MarkovState::from_parts(pos, sp).unwrap()
}

/// Single-species drop-push: the jumper fills the first empty site to its
/// right (labels are interchangeable). Test-only oracle.
fn drop_push_right(positions: &[i64], k: usize) -> Vec<i64> {
    let mut pos = positions.to_vec();
    let from = pos.remove(k - 1);
    let mut site = from + 1;
    while pos.contains(&site) {
        site += 1;
    }
    let idx = pos.iter().position(|&x| x > site).unwrap_or(pos.len());
    pos.insert(idx, site);
    pos
}

/// Single-species TASEP left move. Test-only oracle.
fn tasep_left(positions: &[i64], k: usize) -> Option<Vec<i64>> {
    let target = positions[k - 1] - 1;
    if positions.contains(&target) {
        None
    } else {
        let mut pos = positions.to_vec();
        pos[k - 1] = target;
        Some(pos)
    }
}

proptest! {
    #[test]
    fn right_jump_conserves_species_and_advances(state in arb_state(6), kk in 0usize..6) {
        let k = kk % state.len() + 1;
        let next = apply_right_jump(&state, k);
        prop_assert_eq!(next.species().multiset(), state.species().multiset());
        let before: i64 = state.positions().iter().sum();
        let after: i64 = next.positions().iter().sum();
        prop_assert!(after >= before + 1, "sum {} -> {}", before, after);
    }

    #[test]
    fn left_jump_moves_one_site_or_swaps(state in arb_state(6), kk in 0usize..6) {
        let k = kk % state.len() + 1;
        if let Some(next) = apply_left_jump(&state, k) {
            prop_assert_eq!(next.species().multiset(), state.species().multiset());
            let before: i64 = state.positions().iter().sum();
            let after: i64 = next.positions().iter().sum();
            if next.positions() == state.positions() {
                // swap with a smaller species: configuration fixed, word
                // changes by one adjacent transposition
                prop_assert_ne!(next.species(), state.species());
                prop_assert!(state.species().letters()[k - 2] < state.species().letters()[k - 1]);
            } else {
                // move onto an empty site
                prop_assert_eq!(after, before - 1);
                prop_assert_eq!(next.species(), state.species());
            }
        }
    }

    #[test]
    fn exit_rate_bounds(state in arb_state(6), p01 in 0.0f64..=1.0) {
        let n = state.len() as f64;
        let transitions = enumerate_transitions(&state, p01);
        let total: f64 = transitions.iter().map(|t| t.rate).sum();
        prop_assert!(total <= n + 1e-12);
        prop_assert!(total >= n * p01 - 1e-12);
        let q = 1.0 - p01;
        for t in &transitions {
            prop_assert!((t.rate - p01).abs() < 1e-12 || (t.rate - q).abs() < 1e-12);
        }
    }

    #[test]
    fn cascade_matches_direct_long_range_rule(state in arb_state(6), kk in 0usize..6) {
        let k = kk % state.len() + 1;
        prop_assert_eq!(apply_right_jump(&state, k), right_jump_direct(&state, k));
    }

    #[test]
    fn single_species_sector_reduction(
        start in -20i64..=20,
        gaps in vec(1i64..=3, 5),
        kk in 0usize..6,
    ) {
        let n = gaps.len() + 1;
        let state = state_from(start, gaps, vec![1; n]);
        let k = kk % n + 1;

        let right = apply_right_jump(&state, k);
        prop_assert_eq!(right.positions().to_vec(), drop_push_right(state.positions(), k));

        let left = apply_left_jump(&state, k);
        let expect = tasep_left(state.positions(), k);
        prop_assert_eq!(left.map(|s| s.positions().to_vec()), expect);
    }
}
