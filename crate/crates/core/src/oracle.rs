//! Brute-force ground truth by uniformization.
//!
//! The reachable part of the chain is explored breadth-first to a fixed jump
//! depth, arcs to equal targets are merged, and the transition law at time
//! `t` is summed as a Poisson-weighted series of powers of the uniformized
//! jump kernel. Exit rates are bounded by the particle count `N` (each
//! particle carries total rate at most 1), so `λ = N` uniformizes exactly and
//! the Poisson tail bounds the truncation error analytically.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
// resolves float math through libm under no_std; shadowed by inherent methods in tests
#[allow(unused_imports)]
use num_traits::Float;

use crate::state::{enumerate_transitions, MarkovState};

/// Default cap on explored states before exploration gives up.
pub const DEFAULT_STATE_BUDGET: usize = 4_000_000;

/// Errors from exploration and uniformization.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleError {
    /// The breadth-first closure outgrew the state budget; reports how many
    /// states were settled and the frontier size when the budget tripped.
    StateBudgetExceeded { explored: usize, frontier: usize },
    /// `λ` smaller than the largest exit rate in the explored graph.
    LambdaTooSmall { lambda: f64, max_exit: f64 },
    BadParameter(&'static str),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::StateBudgetExceeded { explored, frontier } => write!(
                f,
                "state budget exceeded: {} states explored, frontier size {}",
                explored, frontier
            ),
            OracleError::LambdaTooSmall { lambda, max_exit } => write!(
                f,
                "uniformization rate {} below max exit rate {}",
                lambda, max_exit
            ),
            OracleError::BadParameter(what) => write!(f, "bad parameter: {}", what),
        }
    }
}

impl core::error::Error for OracleError {}

/// The explored part of the generator: states indexed in discovery order,
/// merged outgoing arcs, and per-state exit rates.
#[derive(Clone, Debug)]
pub struct GeneratorGraph {
    states: Vec<MarkovState>,
    index: BTreeMap<MarkovState, usize>,
    arcs: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
    depth: Vec<u32>,
}

impl GeneratorGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[MarkovState] {
        &self.states
    }

    pub fn state_index(&self, s: &MarkovState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Merged outgoing arcs of state `i` as `(target index, rate)`.
    pub fn arcs(&self, i: usize) -> &[(usize, f64)] {
        &self.arcs[i]
    }

    /// Total exit rate of state `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    /// Jump depth at which state `i` was first reached.
    pub fn depth(&self, i: usize) -> u32 {
        self.depth[i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().cloned().fold(0.0, f64::max)
    }
}

/// Breadth-first closure of all states reachable from `initial` in at most
/// `depth` jumps. Arcs of states at the final depth are not expanded (their
/// targets are never needed by a `depth`-step kernel power). Arcs to equal
/// targets are merged by summing rates.
pub fn explore_reachable(
    initial: &MarkovState,
    p: f64,
    depth: u32,
    state_budget: usize,
) -> Result<GeneratorGraph, OracleError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(OracleError::BadParameter("p must lie in [0, 1]"));
    }
    let mut graph = GeneratorGraph {
        states: alloc::vec![initial.clone()],
        index: BTreeMap::from([(initial.clone(), 0usize)]),
        arcs: alloc::vec![Vec::new()],
        exit: alloc::vec![0.0],
        depth: alloc::vec![0],
    };
    let mut head = 0usize;
    while head < graph.states.len() {
        let i = head;
        head += 1;
        let d = graph.depth[i];
        if d >= depth {
            continue;
        }
        let transitions = enumerate_transitions(&graph.states[i], p);
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for t in transitions {
            let j = match graph.index.get(&t.target) {
                Some(&j) => j,
                None => {
                    if graph.states.len() >= state_budget {
                        let frontier = graph.states.len() - head;
                        return Err(OracleError::StateBudgetExceeded {
                            explored: head,
                            frontier,
                        });
                    }
                    let j = graph.states.len();
                    graph.states.push(t.target.clone());
                    graph.index.insert(t.target, j);
                    graph.arcs.push(Vec::new());
                    graph.exit.push(0.0);
                    graph.depth.push(d + 1);
                    j
                }
            };
            *merged.entry(j).or_insert(0.0) += t.rate;
        }
        graph.exit[i] = merged.values().sum();
        graph.arcs[i] = merged.into_iter().collect();
    }
    Ok(graph)
}

/// Uniformization constants: the rate bound `λ`, the Poisson tail tolerance,
/// and the jump-count cap `K` chosen so the tail mass beyond `K` stays below
/// the tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformizationParams {
    pub lambda: f64,
    pub tail_tol: f64,
    pub depth: u32,
}

impl UniformizationParams {
    /// Parameters for an `n`-particle query at time `t`: `λ = n` (exact, the
    /// per-particle rate is 1) and the smallest depth whose Poisson tail is
    /// below `tail_tol`.
    pub fn for_query(n_particles: usize, t: f64, tail_tol: f64) -> Self {
        let lambda = n_particles as f64;
        UniformizationParams {
            lambda,
            tail_tol,
            depth: poisson_depth(lambda * t, tail_tol),
        }
    }
}

/// Smallest `K` with `P(Poisson(λt) > K) < tail_tol`.
pub fn poisson_depth(lambda_t: f64, tail_tol: f64) -> u32 {
    assert!(lambda_t >= 0.0 && tail_tol > 0.0);
    let mut pmf = (-lambda_t).exp();
    let mut cdf = pmf;
    let mut k = 0u32;
    while 1.0 - cdf >= tail_tol && k < 1_000_000 {
        k += 1;
        pmf *= lambda_t / f64::from(k);
        cdf += pmf;
    }
    k
}

/// Transient distribution from uniformization.
#[derive(Clone, Debug)]
pub struct UniformizedTable {
    /// Probability per reachable state (states with zero mass retained).
    pub probs: BTreeMap<MarkovState, f64>,
    /// Analytic bound on the discarded Poisson tail.
    pub tail_bound: f64,
    /// `1 - Σ probs`: truncation plus rounding leakage actually observed.
    pub leaked: f64,
}

impl UniformizedTable {
    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn probability(&self, s: &MarkovState) -> f64 {
        self.probs.get(s).copied().unwrap_or(0.0)
    }
}

/// `P(t) ≈ Σ_{k≤K} e^{-λt} (λt)^k / k! · δ_initial (Qᵘ)^k` with
/// `Qᵘ = I + Q/λ`. The truncation error is below `tail_tol` plus any
/// frontier leakage (zero when exploration reaches the full depth).
pub fn uniformized_distribution(
    initial: &MarkovState,
    t: f64,
    p: f64,
    params: &UniformizationParams,
) -> Result<UniformizedTable, OracleError> {
    if t < 0.0 {
        return Err(OracleError::BadParameter("t must be nonnegative"));
    }
    let graph = explore_reachable(initial, p, params.depth, DEFAULT_STATE_BUDGET)?;
    let lambda = params.lambda;
    let max_exit = graph.max_exit_rate();
    if lambda < max_exit - 1e-12 {
        return Err(OracleError::LambdaTooSmall { lambda, max_exit });
    }
    let n_states = graph.len();
    let lt = lambda * t;
    let mut pmf = (-lt).exp();
    let mut v = alloc::vec![0.0f64; n_states];
    v[0] = 1.0;
    let mut acc = alloc::vec![0.0f64; n_states];
    acc[0] = pmf;
    let mut next = alloc::vec![0.0f64; n_states];
    for k in 1..=params.depth {
        next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n_states {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            next[i] += vi * (1.0 - graph.exit_rate(i) / lambda);
            for &(j, rate) in graph.arcs(i) {
                next[j] += vi * rate / lambda;
            }
        }
        core::mem::swap(&mut v, &mut next);
        pmf *= lt / f64::from(k);
        for (a, w) in acc.iter_mut().zip(v.iter()) {
            *a += pmf * w;
        }
    }
    let mut probs = BTreeMap::new();
    for (i, s) in graph.states().iter().enumerate() {
        probs.insert(s.clone(), acc[i]);
    }
    let total: f64 = acc.iter().sum();
    Ok(UniformizedTable {
        probs,
        tail_bound: params.tail_tol,
        leaked: 1.0 - total,
    })
}

/// Law of a single particle (a biased continuous-time walk): probability of
/// net displacement `offset` by time `t`, by direct summation over the jump
/// count. Truncated when the remaining Poisson mass is below `1e-14`.
pub fn single_particle_closed_form(offset: i64, t: f64, p: f64) -> f64 {
    assert!(t >= 0.0, "t must be nonnegative");
    assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
    let q = 1.0 - p;
    let d = offset;
    let mut total = 0.0f64;
    let mut pois = (-t).exp(); // e^{-t} t^k / k!, k = 0
    let mut pois_cdf = pois;
    let mut k = 0i64;
    loop {
        if k >= d.abs() && (k - d) % 2 == 0 {
            let rights = (k + d) / 2;
            let lefts = (k - d) / 2;
            if (rights == 0 || p > 0.0) && (lefts == 0 || q > 0.0) {
                // C(k, rights) p^rights q^lefts, guarded against 0^0
                let mut path = 1.0f64;
                for i in 0..rights {
                    path *= p * (k - i) as f64 / (i + 1) as f64;
                }
                for _ in 0..lefts {
                    path *= q;
                }
                total += pois * path;
            }
        }
        if 1.0 - pois_cdf < 1e-14 && k >= d.abs() {
            break;
        }
        k += 1;
        if k > 10_000 {
            break;
        }
        pois *= t / k as f64;
        pois_cdf += pois;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{build_b, build_b1, build_b2};
    use num_complex::Complex64;

    fn st(pos: &[i64], sp: &[u32]) -> MarkovState {
        MarkovState::from_parts(pos.to_vec(), sp.to_vec()).unwrap()
    }

    #[test]
    fn explore_single_particle_depths() {
        let g = explore_reachable(&st(&[0], &[1]), 0.5, 2, 1 << 20).unwrap();
        // offsets -2..=2
        assert_eq!(g.len(), 5);
        let g0 = explore_reachable(&st(&[0], &[1]), 0.5, 0, 1 << 20).unwrap();
        assert_eq!(g0.len(), 1);
        assert!(g0.arcs(0).is_empty());
    }

    #[test]
    fn explore_two_species_depth_one() {
        let g = explore_reachable(&st(&[0, 1], &[1, 2]), 0.7, 1, 1 << 20).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g.exit_rate(0) - (2.0 * 0.7 + 0.3 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn exit_rates_match_enumeration_formula() {
        // exit = N p + q #(left-enabled)
        let s = st(&[0, 1, 3], &[2, 1, 2]);
        let p = 0.4;
        let g = explore_reachable(&s, p, 1, 1 << 20).unwrap();
        // left jumps: particle 1 free (-1 empty), particle 2 blocked (2 >= 1
        // at site 0), particle 3 free (site 2 empty)
        let expect = 3.0 * p + (1.0 - p) * 2.0;
        assert!((g.exit_rate(0) - expect).abs() < 1e-12);
    }

    #[test]
    fn budget_error_reports_frontier() {
        let err = explore_reachable(&st(&[0, 1], &[1, 2]), 0.7, 3, 4).unwrap_err();
        assert!(matches!(err, OracleError::StateBudgetExceeded { .. }));
    }

    #[test]
    fn uniformized_delta_at_time_zero() {
        let s = st(&[0, 1], &[2, 1]);
        let params = UniformizationParams::for_query(2, 0.0, 1e-12);
        let table = uniformized_distribution(&s, 0.0, 0.5, &params).unwrap();
        assert_eq!(table.probability(&s), 1.0);
        assert!(table.leaked.abs() < 1e-15);
    }

    #[test]
    fn uniformized_matches_biased_walk_closed_form() {
        let t = 1.0;
        let p = 0.7;
        let params = UniformizationParams::for_query(1, t, 1e-13);
        let table = uniformized_distribution(&st(&[0], &[1]), t, p, &params).unwrap();
        for offset in -6i64..=6 {
            let expect = single_particle_closed_form(offset, t, p);
            let got = table.probability(&st(&[offset], &[1]));
            assert!(
                (got - expect).abs() < 1e-10,
                "offset {}: {} vs {}",
                offset,
                got,
                expect
            );
        }
    }

    #[test]
    fn uniformized_right_only_staying_probability() {
        let t = 0.8;
        let params = UniformizationParams::for_query(2, t, 1e-12);
        let s = st(&[0, 1], &[1, 2]);
        let table = uniformized_distribution(&s, t, 1.0, &params).unwrap();
        assert!((table.probability(&s) - (-2.0 * t).exp()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_edges() {
        assert_eq!(single_particle_closed_form(0, 0.0, 0.5), 1.0);
        // right-only Poisson
        for m in 0..6i64 {
            let t = 1.3;
            let mut expect = (-t).exp();
            for i in 0..m {
                expect *= t / (i + 1) as f64;
            }
            assert!((single_particle_closed_form(m, t, 1.0) - expect).abs() < 1e-13);
        }
        assert_eq!(single_particle_closed_form(-1, 2.0, 1.0), 0.0);
    }

    #[test]
    fn generator_rows_match_two_site_master_equation() {
        // For targets (x, x+1): incoming rates are p from (x-1, x+1), p B
        // from (x-1, x), q from (x, x+2), q B1 from (x, x+1); the exit rate
        // is 2p + q B2 on the diagonal.
        let p = 0.6;
        let q = 1.0 - p;
        let b = build_b::<Complex64>(2);
        let b1 = build_b1::<Complex64>(2);
        let b2 = build_b2::<Complex64>(2);
        let x = 0i64;
        let letters = [1u32, 2];
        for &pi1 in &letters {
            for &pi2 in &letters {
                let target = st(&[x, x + 1], &[pi1, pi2]);
                for &nu1 in &letters {
                    for &nu2 in &letters {
                        // rate of (x-1, x, nu) -> (x, x+1, pi) must equal p B(pi, nu)
                        let source = st(&[x - 1, x], &[nu1, nu2]);
                        let g = explore_reachable(&source, p, 1, 1 << 20).unwrap();
                        let rate: f64 = g
                            .arcs(0)
                            .iter()
                            .filter(|(j, _)| g.states()[*j] == target)
                            .map(|(_, r)| r)
                            .sum();
                        let expect = p * b.get((pi1, pi2), (nu1, nu2)).re;
                        assert!(
                            (rate - expect).abs() < 1e-12,
                            "B coupling ({}{} <- {}{})",
                            pi1,
                            pi2,
                            nu1,
                            nu2
                        );
                        // rate of (x, x+1, nu) -> (x, x+1, pi), pi != nu: q B1(pi, nu)
                        if (pi1, pi2) != (nu1, nu2) {
                            let source = st(&[x, x + 1], &[nu1, nu2]);
                            let g = explore_reachable(&source, p, 1, 1 << 20).unwrap();
                            let rate: f64 = g
                                .arcs(0)
                                .iter()
                                .filter(|(j, _)| g.states()[*j] == target)
                                .map(|(_, r)| r)
                                .sum();
                            let expect = q * b1.get((pi1, pi2), (nu1, nu2)).re;
                            assert!((rate - expect).abs() < 1e-12, "B1 coupling");
                        }
                    }
                }
                // exit rate: 2p + q B2(pi, pi)
                let g = explore_reachable(&target, p, 1, 1 << 20).unwrap();
                let expect = 2.0 * p + q * b2.get((pi1, pi2), (pi1, pi2)).re;
                assert!((g.exit_rate(0) - expect).abs() < 1e-12, "exit rate");
            }
        }
    }

    #[test]
    fn monotone_refinement_in_depth() {
        let s = st(&[0, 1], &[1, 2]);
        let t = 0.9;
        let p = 0.3;
        let shallow = uniformized_distribution(
            &s,
            t,
            p,
            &UniformizationParams {
                lambda: 2.0,
                tail_tol: 1e-6,
                depth: poisson_depth(2.0 * t, 1e-6),
            },
        )
        .unwrap();
        let deep = uniformized_distribution(&s, t, p, &UniformizationParams::for_query(2, t, 1e-13))
            .unwrap();
        for (state, prob) in &shallow.probs {
            assert!(deep.probability(state) >= prob - 1e-6);
        }
        assert!(deep.total() > shallow.total());
    }
}
