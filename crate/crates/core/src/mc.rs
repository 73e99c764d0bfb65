//! Gillespie sampling of trajectories.
//!
//! Each path owns a counter-based RNG stream derived from
//! `(master_seed, path_index)`, so any subset of paths can be sampled in any
//! order (or on any number of workers) and the aggregate is reproducible
//! bit-for-bit. Holding times come from inverse-CDF exponentials on a fixed
//! bit-level uniform, which keeps paths identical across platforms.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
// resolves float math through libm under no_std; shadowed by inherent methods in tests
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::exec::{chunk_ranges, Executor, Sequential};
use crate::state::{enumerate_transitions, MarkovState};

/// A full sampling request: initial state, horizon, bias, path count, and the
/// master seed all streams derive from.
#[derive(Clone, Debug)]
pub struct SimulationPlan {
    pub initial: MarkovState,
    pub t_end: f64,
    pub p: f64,
    pub n_paths: u64,
    pub master_seed: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The per-path RNG stream: ChaCha8 keyed by a splitmix expansion of
/// `(master_seed, path_index)`.
fn path_rng(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut mix = path_index;
    let mut state = master_seed ^ splitmix64(&mut mix);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Uniform in `(0, 1]` from the top 53 bits; never zero, so `-ln(u)` stays
/// finite.
fn uniform_open_closed(rng: &mut ChaCha8Rng) -> f64 {
    (((rng.next_u64() >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
}

/// Samples one path by the direct Gillespie method and returns the state at
/// `t_end`. Deterministic in `(plan.master_seed, path_index)`.
pub fn sample_path(plan: &SimulationPlan, path_index: u64) -> MarkovState {
    assert!(plan.t_end >= 0.0, "t_end must be nonnegative");
    let mut rng = path_rng(plan.master_seed, path_index);
    let mut state = plan.initial.clone();
    let mut t = 0.0f64;
    loop {
        let transitions = enumerate_transitions(&state, plan.p);
        let total: f64 = transitions.iter().map(|tr| tr.rate).sum();
        if total <= 0.0 {
            // absorbing (p = 0 with every left jump blocked)
            return state;
        }
        t += -uniform_open_closed(&mut rng).ln() / total;
        if t > plan.t_end {
            return state;
        }
        let mut pick = uniform_open_closed(&mut rng) * total;
        let mut chosen = transitions.len() - 1;
        for (i, tr) in transitions.iter().enumerate() {
            pick -= tr.rate;
            if pick <= 0.0 {
                chosen = i;
                break;
            }
        }
        state = transitions.into_iter().nth(chosen).expect("index in range").target;
    }
}

/// Aggregated endpoint counts of a sampling run.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalTable {
    counts: BTreeMap<MarkovState, u64>,
    n_paths: u64,
}

impl EmpiricalTable {
    pub fn n_paths(&self) -> u64 {
        self.n_paths
    }

    pub fn counts(&self) -> &BTreeMap<MarkovState, u64> {
        &self.counts
    }

    pub fn count(&self, s: &MarkovState) -> u64 {
        self.counts.get(s).copied().unwrap_or(0)
    }

    pub fn frequency(&self, s: &MarkovState) -> f64 {
        self.count(s) as f64 / self.n_paths as f64
    }

    /// Binomial standard error `√(f (1-f) / n)` of the cell frequency.
    pub fn std_error(&self, s: &MarkovState) -> f64 {
        let f = self.frequency(s);
        (f * (1.0 - f) / self.n_paths as f64).sqrt()
    }

    /// Rows `(state, frequency, standard error)` in state order.
    pub fn rows(&self) -> impl Iterator<Item = (&MarkovState, f64, f64)> {
        self.counts.keys().map(move |s| (s, self.frequency(s), self.std_error(s)))
    }
}

/// Samples every path of the plan and aggregates endpoint frequencies.
pub fn empirical_distribution(plan: &SimulationPlan) -> EmpiricalTable {
    empirical_distribution_with(plan, &Sequential)
}

/// As [`empirical_distribution`], with paths split over fixed chunks run by
/// `exec`. Chunk boundaries and the merge order depend only on the plan, so
/// the table is identical for every executor.
pub fn empirical_distribution_with<E: Executor>(plan: &SimulationPlan, exec: &E) -> EmpiricalTable {
    assert!(plan.n_paths >= 1, "need at least one path");
    let ranges = chunk_ranges(plan.n_paths as usize);
    let partials: Vec<BTreeMap<MarkovState, u64>> = exec.map_chunks(ranges.len(), |ci| {
        let mut counts: BTreeMap<MarkovState, u64> = BTreeMap::new();
        for path_index in ranges[ci].clone() {
            let end = sample_path(plan, path_index as u64);
            *counts.entry(end).or_insert(0) += 1;
        }
        counts
    });
    let mut counts: BTreeMap<MarkovState, u64> = BTreeMap::new();
    for partial in partials {
        for (state, c) in partial {
            *counts.entry(state).or_insert(0) += c;
        }
    }
    EmpiricalTable {
        counts,
        n_paths: plan.n_paths,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(pos: &[i64], sp: &[u32]) -> MarkovState {
        MarkovState::from_parts(pos.to_vec(), sp.to_vec()).unwrap()
    }

    fn plan(t_end: f64, p: f64, n_paths: u64, seed: u64) -> SimulationPlan {
        SimulationPlan {
            initial: st(&[0, 1], &[2, 1]),
            t_end,
            p,
            n_paths,
            master_seed: seed,
        }
    }

    #[test]
    fn zero_horizon_returns_initial() {
        let pl = plan(0.0, 0.7, 1, 42);
        assert_eq!(sample_path(&pl, 0), pl.initial);
    }

    #[test]
    fn paths_are_deterministic() {
        let pl = plan(2.0, 0.6, 1, 7);
        assert_eq!(sample_path(&pl, 13), sample_path(&pl, 13));
    }

    #[test]
    fn counts_sum_to_path_count() {
        let pl = plan(1.0, 0.5, 500, 3);
        let table = empirical_distribution(&pl);
        assert_eq!(table.counts().values().sum::<u64>(), 500);
        assert_eq!(table.n_paths(), 500);
    }

    #[test]
    fn single_path_table() {
        let pl = plan(0.0, 0.5, 1, 9);
        let table = empirical_distribution(&pl);
        assert_eq!(table.frequency(&pl.initial), 1.0);
    }

    #[test]
    fn species_multiset_conserved_along_paths() {
        let pl = SimulationPlan {
            initial: st(&[0, 2, 3], &[3, 1, 2]),
            t_end: 1.5,
            p: 0.4,
            n_paths: 64,
            master_seed: 11,
        };
        let want = pl.initial.species().multiset();
        for i in 0..pl.n_paths {
            assert_eq!(sample_path(&pl, i).species().multiset(), want);
        }
    }

    #[test]
    fn directional_runs() {
        // p = 1: strictly right of the start; p = 0: never right
        let right = empirical_distribution(&plan(1.0, 1.0, 200, 5));
        for (s, _, _) in right.rows() {
            assert!(s.positions().iter().sum::<i64>() >= 1);
        }
        let left = empirical_distribution(&plan(1.0, 0.0, 200, 5));
        for (s, _, _) in left.rows() {
            assert!(s.positions().iter().sum::<i64>() <= 1);
        }
    }

    #[test]
    fn poisson_jump_count_single_particle() {
        // with p = 1 the jump count by t is Poisson(t): check the mean within 3 sigma
        let t = 1.0;
        let n = 20_000u64;
        let pl = SimulationPlan {
            initial: st(&[0], &[1]),
            t_end: t,
            p: 1.0,
            n_paths: n,
            master_seed: 123,
        };
        let table = empirical_distribution(&pl);
        let mean: f64 = table
            .rows()
            .map(|(s, f, _)| s.positions()[0] as f64 * f)
            .sum();
        let sigma = (t / n as f64).sqrt();
        assert!((mean - t).abs() < 3.0 * sigma, "mean {} vs {}", mean, t);
    }
}
