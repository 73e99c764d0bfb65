//! Transition probabilities as nested contour integrals.
//!
//! The exact transition probability is an `N`-fold integral over nested
//! counterclockwise circles `1 < R₁ < … < R_N` of the Bethe sum
//! `Σ_σ (A_σ)_{(π,ν)} Π_i ξ_{σ(i)}^{x_i - y_{σ(i)} - 1} e^{ε(ξ_i) t}`.
//! Each circle is integrated with the trapezoidal rule (exact substitution
//! `ξ = R e^{iθ}`), which converges geometrically for the integrand's
//! annulus of analyticity; node counts double until successive estimates
//! agree within the requested tolerance.
//!
//! The true probability is real, so the imaginary residue of the estimate is
//! kept as a free accuracy probe rather than discarded.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;
// resolves float math through libm under no_std; shadowed by inherent methods in tests
#[allow(unused_imports)]
use num_traits::Float;

use crate::algebra::{s_amp, t_amp, AlgebraError};
use crate::bethe::{amplitude_column, energy, reduced_word, EnergySpec, Permutation};
use crate::exec::{chunk_ranges, Executor, Sequential};
use crate::state::{MarkovState, SpeciesWord};

/// Quadrature contours and refinement policy: strictly nested radii, a
/// power-of-two node count per circle (so refinements can reuse nodes), the
/// convergence tolerance, and the refinement cap.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourSpec {
    pub radii: Vec<f64>,
    pub nodes_per_circle: usize,
    pub abs_tol: f64,
    pub max_refinements: u32,
}

impl ContourSpec {
    /// Defaults for an `N`-particle query: radii `1.05 + 0.05 (i-1)`, 64
    /// starting nodes, tolerance `1e-10`, at most 6 doublings.
    pub fn default_for(n: usize) -> Self {
        ContourSpec {
            radii: (0..n).map(|i| 1.05 + 0.05 * i as f64).collect(),
            nodes_per_circle: 64,
            abs_tol: 1e-10,
            max_refinements: 6,
        }
    }

    fn validate(&self, n: usize) -> Result<(), QuadratureError> {
        if self.radii.len() != n {
            return Err(QuadratureError::Contour("one radius per particle required"));
        }
        let mut prev = 1.0f64;
        for &r in &self.radii {
            if !(r > prev) {
                return Err(QuadratureError::Contour(
                    "radii must satisfy 1 < R1 < R2 < ... (strictly)",
                ));
            }
            prev = r;
        }
        if self.nodes_per_circle < 8 || !self.nodes_per_circle.is_power_of_two() {
            return Err(QuadratureError::Contour(
                "nodes per circle must be a power of two >= 8",
            ));
        }
        if !(self.abs_tol > 0.0) {
            return Err(QuadratureError::Contour("tolerance must be positive"));
        }
        if self.max_refinements < 1 {
            return Err(QuadratureError::Contour("at least one refinement required"));
        }
        Ok(())
    }
}

/// One transition-probability query `P_{(Y,ν)}(X,π;t)` at right bias `p`.
#[derive(Clone, Debug)]
pub struct TransitionQuery {
    pub initial: MarkovState,
    pub final_state: MarkovState,
    pub t: f64,
    pub p: f64,
}

/// Errors from quadrature setup and refinement.
#[derive(Clone, Debug, PartialEq)]
pub enum QuadratureError {
    Contour(&'static str),
    Query(&'static str),
    Algebra(AlgebraError),
    /// Refinement cap hit with the last delta still above tolerance; carries
    /// the best estimate so far.
    NotConverged {
        probability: f64,
        error: f64,
        delta: f64,
        nodes_per_circle: usize,
    },
}

impl fmt::Display for QuadratureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadratureError::Contour(msg) => write!(f, "bad contour: {}", msg),
            QuadratureError::Query(msg) => write!(f, "bad query: {}", msg),
            QuadratureError::Algebra(e) => write!(f, "algebra failure: {}", e),
            QuadratureError::NotConverged {
                probability,
                delta,
                nodes_per_circle,
                ..
            } => write!(
                f,
                "quadrature did not converge: delta {:.3e} at {} nodes per circle (estimate {:.6e})",
                delta, nodes_per_circle, probability
            ),
        }
    }
}

impl core::error::Error for QuadratureError {}

impl From<AlgebraError> for QuadratureError {
    fn from(e: AlgebraError) -> Self {
        QuadratureError::Algebra(e)
    }
}

/// A converged probability estimate.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub probability: f64,
    /// `|Im|` of the estimate plus the last refinement delta.
    pub error: f64,
    /// Number of node-count doublings performed.
    pub refinements: u32,
    pub nodes_per_circle: usize,
    /// Largest entry delta after each doubling, in order.
    pub deltas: Vec<f64>,
}

/// One row of a windowed distribution.
#[derive(Clone, Debug)]
pub struct DistributionEntry {
    pub state: MarkovState,
    pub probability: f64,
    pub error: f64,
    pub converged: bool,
}

/// All transition probabilities from one initial state into a position
/// window, with a normalization report.
#[derive(Clone, Debug)]
pub struct DistributionTable {
    pub entries: Vec<DistributionEntry>,
    pub refinements: u32,
    pub nodes_per_circle: usize,
    pub deltas: Vec<f64>,
    pub converged: bool,
    /// `Σ P` over the window.
    pub total: f64,
    /// Leaked mass estimate `1 - Σ P`.
    pub leaked: f64,
}

impl DistributionTable {
    pub fn probability(&self, s: &MarkovState) -> f64 {
        self.entries
            .iter()
            .find(|e| &e.state == s)
            .map(|e| e.probability)
            .unwrap_or(0.0)
    }
}

/// The Bethe integrand at one grid point: the sum over `S_N` of the
/// amplitude entry times the power and energy factors. Reference
/// implementation; the grid evaluator reproduces it with precompiled
/// amplitude programs.
pub fn integrand(xis: &[Complex64], query: &TransitionQuery) -> Result<Complex64, QuadratureError> {
    let n = query.initial.len();
    if xis.len() != n {
        return Err(QuadratureError::Query("one xi per particle required"));
    }
    let x = query.final_state.positions();
    let y = query.initial.positions();
    let nu = query.initial.species();
    let pi = query.final_state.species();
    let spec = EnergySpec::new(query.p);
    let mut sum = Complex64::new(0.0, 0.0);
    for sigma in Permutation::all(n) {
        let col = amplitude_column(&sigma, nu, xis)?;
        let a = col.get(pi);
        if a == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mut powers = Complex64::new(1.0, 0.0);
        for i in 1..=n {
            let j = sigma.image(i);
            let e = x[i - 1] - y[j - 1] - 1;
            powers *= xis[j - 1].powi(e as i32);
        }
        sum += a * powers;
    }
    let mut boltz = Complex64::new(1.0, 0.0);
    for &xi in xis {
        boltz *= (energy(xi, &spec) * query.t).exp();
    }
    Ok(sum * boltz)
}

// ---------------------------------------------------------------------------
// sector basis and amplitude programs
// ---------------------------------------------------------------------------

/// All distinct words sharing a letter multiset, in lexicographic order.
struct SectorBasis {
    words: Vec<SpeciesWord>,
    index: BTreeMap<SpeciesWord, usize>,
}

fn sector_basis(nu: &SpeciesWord) -> SectorBasis {
    let mut sorted = nu.multiset();
    let n = sorted.len();
    let mut words = Vec::new();
    loop {
        words.push(SpeciesWord::new(sorted.clone()).expect("valid word"));
        // next lexicographic multiset permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| sorted[i] < sorted[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| sorted[j] > sorted[i]).unwrap();
        sorted.swap(i, j);
        sorted[i + 1..].reverse();
    }
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    SectorBasis { words, index }
}

/// Action of one lifted R factor on a sector word: pairs `(a, b)` with
/// `a >= b` pick up the factor `S`; pairs with `a < b` keep `-1` on the word
/// and send `T` to the word with the pair swapped.
#[derive(Clone, Copy, Debug)]
enum StepAction {
    ScaleS,
    Split { swapped: usize },
}

struct ProgramStep {
    /// 1-based ξ indices of the factor's parameters `(β, α)`.
    beta: usize,
    alpha: usize,
    actions: Vec<StepAction>,
}

/// The reduced-word schedule of one `A_σ`, precompiled against a sector
/// basis so a column evaluation is a handful of dense passes.
struct SigmaProgram {
    /// 1-based preimages: `inv[j-1] = σ⁻¹(j)`.
    inv: Vec<usize>,
    steps: Vec<ProgramStep>,
}

fn build_programs(basis: &SectorBasis, n_particles: usize) -> Vec<SigmaProgram> {
    let mut programs = Vec::new();
    for sigma in Permutation::all(n_particles) {
        let word = reduced_word(&sigma);
        let mut cur: Vec<usize> = (1..=n_particles).collect();
        let mut steps = Vec::with_capacity(word.len());
        for &l in word.letters() {
            let beta = cur[l];
            let alpha = cur[l - 1];
            let actions = basis
                .words
                .iter()
                .map(|w| {
                    let letters = w.letters();
                    let (a, b) = (letters[l - 1], letters[l]);
                    if a < b {
                        let mut sw = letters.to_vec();
                        sw.swap(l - 1, l);
                        StepAction::Split {
                            swapped: basis.index[&SpeciesWord::new_unchecked(sw)],
                        }
                    } else {
                        StepAction::ScaleS
                    }
                })
                .collect();
            steps.push(ProgramStep { beta, alpha, actions });
            cur.swap(l - 1, l);
        }
        let inv = (1..=n_particles)
            .map(|j| sigma.preimage(j))
            .collect();
        programs.push(SigmaProgram { inv, steps });
    }
    programs
}

/// Per-grid-point cache of `(S, T)` for the ξ-index pairs the programs
/// reference, invalidated by a generation stamp instead of clearing.
struct PairCache {
    n: usize,
    gen: u64,
    stamp: Vec<u64>,
    vals: Vec<(Complex64, Complex64)>,
}

impl PairCache {
    fn new(n: usize) -> Self {
        PairCache {
            n,
            gen: 0,
            stamp: alloc::vec![0; n * n],
            vals: alloc::vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); n * n],
        }
    }

    fn next_point(&mut self) {
        self.gen += 1;
    }

    fn get(&mut self, beta: usize, alpha: usize, xis: &[Complex64]) -> (Complex64, Complex64) {
        let k = (beta - 1) * self.n + (alpha - 1);
        if self.stamp[k] != self.gen {
            let xb = xis[beta - 1];
            let xa = xis[alpha - 1];
            // contour nodes satisfy |ξ| > 1, so the pole ξ_β = 1 cannot occur
            let s = s_amp(&xb, &xa).expect("off-pole by contour choice");
            let t = t_amp(&xb, &xa).expect("off-pole by contour choice");
            self.vals[k] = (s, t);
            self.stamp[k] = self.gen;
        }
        self.vals[k]
    }
}

/// Runs every σ-program at one grid point `xis`, writing the dense amplitude
/// columns `A_σ e_ν` into `cols` (layout `[σ][word]`).
fn run_programs(
    programs: &[SigmaProgram],
    nu_idx: usize,
    basis_len: usize,
    xis: &[Complex64],
    cache: &mut PairCache,
    cols: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    cache.next_point();
    let zero = Complex64::new(0.0, 0.0);
    for (si, prog) in programs.iter().enumerate() {
        let col = &mut cols[si * basis_len..(si + 1) * basis_len];
        col.fill(zero);
        col[nu_idx] = Complex64::new(1.0, 0.0);
        for step in &prog.steps {
            let (s, t) = cache.get(step.beta, step.alpha, xis);
            let out = &mut scratch[..basis_len];
            out.fill(zero);
            for (wi, &c) in col.iter().enumerate() {
                if c == zero {
                    continue;
                }
                match step.actions[wi] {
                    StepAction::ScaleS => out[wi] += s * c,
                    StepAction::Split { swapped } => {
                        out[wi] -= c;
                        out[swapped] += t * c;
                    }
                }
            }
            col.copy_from_slice(out);
        }
    }
}

// ---------------------------------------------------------------------------
// grid evaluator
// ---------------------------------------------------------------------------

/// Per-axis quadrature data at one node count: the nodes `R e^{2πim/M}` and
/// the kernel table `ξ^u · ξ^{-y} e^{ε(ξ)t} / M` for every needed target
/// exponent `u` (weights folded in, so the product of one kernel value per
/// axis is the full integrand weight).
struct Axis {
    nodes: Vec<Complex64>,
    /// `[m][ui]`, row-contiguous per node.
    kern_mu: Vec<Complex64>,
    /// `[ui][m]`, row-contiguous per target exponent.
    kern_um: Vec<Complex64>,
}

struct Evaluator {
    n: usize,
    t: f64,
    p: f64,
    y: Vec<i64>,
    radii: Vec<f64>,
    basis_len: usize,
    nu_idx: usize,
    programs: Vec<SigmaProgram>,
    n_sigma: usize,
    /// Sorted distinct target positions; kernel rows are indexed by these.
    u_values: Vec<i64>,
    /// Finals as `(state, π index, per-particle u index of x_i)`.
    finals: Vec<(MarkovState, usize, Vec<usize>)>,
}

impl Evaluator {
    fn new(
        initial: &MarkovState,
        t: f64,
        p: f64,
        final_states: Vec<MarkovState>,
        radii: &[f64],
    ) -> Result<Self, QuadratureError> {
        let n = initial.len();
        if t < 0.0 {
            return Err(QuadratureError::Query("t must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(QuadratureError::Query("p must lie in [0, 1]"));
        }
        let basis = sector_basis(initial.species());
        let nu_idx = basis.index[initial.species()];
        let programs = build_programs(&basis, n);
        let mut u_set: Vec<i64> = final_states
            .iter()
            .flat_map(|s| s.positions().iter().copied())
            .collect();
        u_set.sort_unstable();
        u_set.dedup();
        let u_index: BTreeMap<i64, usize> =
            u_set.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut finals = Vec::with_capacity(final_states.len());
        for s in final_states {
            if s.len() != n {
                return Err(QuadratureError::Query("particle count mismatch"));
            }
            let pi_idx = *basis
                .index
                .get(s.species())
                .ok_or(QuadratureError::Query("final species outside sector"))?;
            let xu = s.positions().iter().map(|x| u_index[x]).collect();
            finals.push((s, pi_idx, xu));
        }
        Ok(Evaluator {
            n,
            t,
            p,
            y: initial.positions().to_vec(),
            radii: radii.to_vec(),
            basis_len: basis.words.len(),
            nu_idx,
            n_sigma: programs.len(),
            programs,
            u_values: u_set,
            finals,
        })
    }

    fn axis(&self, j: usize, m: usize) -> Axis {
        let spec = EnergySpec::new(self.p);
        let r = self.radii[j];
        let ulen = self.u_values.len();
        let mut nodes = Vec::with_capacity(m);
        let mut kern_mu = alloc::vec![Complex64::new(0.0, 0.0); m * ulen];
        let mut kern_um = alloc::vec![Complex64::new(0.0, 0.0); m * ulen];
        let inv_m = 1.0 / m as f64;
        for mi in 0..m {
            let theta = core::f64::consts::TAU * mi as f64 * inv_m;
            let xi = Complex64::new(r * theta.cos(), r * theta.sin());
            nodes.push(xi);
            let weight = xi.powi(-(self.y[j] as i32))
                * (energy(xi, &spec) * self.t).exp()
                * inv_m;
            for (ui, &u) in self.u_values.iter().enumerate() {
                let v = xi.powi(u as i32) * weight;
                kern_mu[mi * ulen + ui] = v;
                kern_um[ui * m + mi] = v;
            }
        }
        Axis {
            nodes,
            kern_mu,
            kern_um,
        }
    }

    /// Trapezoid estimates for every final at `m` nodes per circle. Routed to
    /// the windowed tensor contraction when the final list is large enough to
    /// amortize it, and to direct per-final accumulation otherwise.
    fn eval_level<E: Executor>(&self, m: usize, exec: &E) -> Vec<Complex64> {
        let axes: Vec<Axis> = (0..self.n).map(|j| self.axis(j, m)).collect();
        if (self.n == 2 || self.n == 3) && self.finals.len() >= 32 {
            self.eval_level_tensor(m, &axes, exec)
        } else {
            self.eval_level_direct(m, &axes, exec)
        }
    }

    /// Direct path: walk the grid, run the programs once per point, and
    /// accumulate each final's σ-sum straight away.
    fn eval_level_direct<E: Executor>(&self, m: usize, axes: &[Axis], exec: &E) -> Vec<Complex64> {
        let n = self.n;
        let ulen = self.u_values.len();
        // per final and σ: the kernel row offset of x_{σ^{-1}(j)} on axis j
        let fs_u: Vec<Vec<usize>> = self
            .finals
            .iter()
            .map(|(_, _, xu)| {
                let mut per = Vec::with_capacity(self.n_sigma * n);
                for prog in &self.programs {
                    for j in 0..n {
                        per.push(xu[prog.inv[j] - 1]);
                    }
                }
                per
            })
            .collect();
        let ranges = chunk_ranges(m);
        let partials = exec.map_chunks(ranges.len(), |ci| {
            let zero = Complex64::new(0.0, 0.0);
            let mut d = alloc::vec![zero; self.finals.len()];
            let mut cols = alloc::vec![zero; self.n_sigma * self.basis_len];
            let mut scratch = alloc::vec![zero; self.basis_len];
            let mut cache = PairCache::new(n);
            let mut xis = alloc::vec![zero; n];
            let mut idx = alloc::vec![0usize; n];
            // odometer over the grid with the last axis restricted to the chunk
            let range = ranges[ci].clone();
            if range.is_empty() {
                return d;
            }
            idx[n - 1] = range.start;
            loop {
                for j in 0..n {
                    xis[j] = axes[j].nodes[idx[j]];
                }
                run_programs(
                    &self.programs,
                    self.nu_idx,
                    self.basis_len,
                    &xis,
                    &mut cache,
                    &mut cols,
                    &mut scratch,
                );
                for (fi, (_, pi_idx, _)) in self.finals.iter().enumerate() {
                    let per = &fs_u[fi];
                    let mut acc = zero;
                    for si in 0..self.n_sigma {
                        let c = cols[si * self.basis_len + pi_idx];
                        if c == zero {
                            continue;
                        }
                        let mut w = c;
                        for j in 0..n {
                            w *= axes[j].kern_mu[idx[j] * ulen + per[si * n + j]];
                        }
                        acc += w;
                    }
                    d[fi] += acc;
                }
                // advance: axes 0..n-1 full, axis n-1 within the chunk
                let mut j = 0;
                loop {
                    if j == n - 1 {
                        idx[j] += 1;
                        if idx[j] < range.end {
                            break;
                        }
                        return d;
                    }
                    idx[j] += 1;
                    if idx[j] < m {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
            }
        });
        let mut total = alloc::vec![Complex64::new(0.0, 0.0); self.finals.len()];
        for part in partials {
            for (t, v) in total.iter_mut().zip(part) {
                *t += v;
            }
        }
        total
    }

    /// Windowed path for `N = 2, 3`: contract the grid against the kernel
    /// axes one axis at a time, producing the full tensor of estimates over
    /// `u`-tuples, then read each final off the tensor.
    fn eval_level_tensor<E: Executor>(&self, m: usize, axes: &[Axis], exec: &E) -> Vec<Complex64> {
        let n = self.n;
        let ulen = self.u_values.len();
        let np = self.basis_len;
        let ns = self.n_sigma;
        let zero = Complex64::new(0.0, 0.0);
        let ranges = chunk_ranges(m);
        // Each chunk owns a slice of the outermost axis and returns a partial
        // full-size tensor D[σ][π][u_1..u_n]; partials add in chunk order.
        let dsize = ns * np * ulen.pow(n as u32);
        let partials = exec.map_chunks(ranges.len(), |ci| {
            let mut d = alloc::vec![zero; dsize];
            let mut cols = alloc::vec![zero; ns * np];
            let mut scratch = alloc::vec![zero; np];
            let mut cache = PairCache::new(n);
            let mut acc = alloc::vec![zero; ns * np * ulen]; // [σπ][u1]
            let mut xis = alloc::vec![zero; n];
            match n {
                2 => {
                    for m2 in ranges[ci].clone() {
                        xis[1] = axes[1].nodes[m2];
                        acc.fill(zero);
                        for m1 in 0..m {
                            xis[0] = axes[0].nodes[m1];
                            run_programs(
                                &self.programs,
                                self.nu_idx,
                                np,
                                &xis,
                                &mut cache,
                                &mut cols,
                                &mut scratch,
                            );
                            let k1 = &axes[0].kern_mu[m1 * ulen..(m1 + 1) * ulen];
                            for sp in 0..ns * np {
                                let c = cols[sp];
                                if c == zero {
                                    continue;
                                }
                                let row = &mut acc[sp * ulen..(sp + 1) * ulen];
                                for (a, &k) in row.iter_mut().zip(k1) {
                                    *a += k * c;
                                }
                            }
                        }
                        let k2 = &axes[1].kern_mu[m2 * ulen..(m2 + 1) * ulen];
                        for sp in 0..ns * np {
                            for u1 in 0..ulen {
                                let a = acc[sp * ulen + u1];
                                if a == zero {
                                    continue;
                                }
                                let out = &mut d[(sp * ulen + u1) * ulen..(sp * ulen + u1 + 1) * ulen];
                                for (o, &k) in out.iter_mut().zip(k2) {
                                    *o += k * a;
                                }
                            }
                        }
                    }
                }
                3 => {
                    let mut t1 = alloc::vec![zero; ns * np * ulen * m]; // [σπ][u1][m2]
                    for m3 in ranges[ci].clone() {
                        xis[2] = axes[2].nodes[m3];
                        t1.fill(zero);
                        for m2 in 0..m {
                            xis[1] = axes[1].nodes[m2];
                            acc.fill(zero);
                            for m1 in 0..m {
                                xis[0] = axes[0].nodes[m1];
                                run_programs(
                                    &self.programs,
                                    self.nu_idx,
                                    np,
                                    &xis,
                                    &mut cache,
                                    &mut cols,
                                    &mut scratch,
                                );
                                let k1 = &axes[0].kern_mu[m1 * ulen..(m1 + 1) * ulen];
                                for sp in 0..ns * np {
                                    let c = cols[sp];
                                    if c == zero {
                                        continue;
                                    }
                                    let row = &mut acc[sp * ulen..(sp + 1) * ulen];
                                    for (a, &k) in row.iter_mut().zip(k1) {
                                        *a += k * c;
                                    }
                                }
                            }
                            for spu in 0..ns * np * ulen {
                                t1[spu * m + m2] = acc[spu];
                            }
                        }
                        // contract axis 2, then scatter along axis 3
                        let k3 = &axes[2].kern_mu[m3 * ulen..(m3 + 1) * ulen];
                        for spu1 in 0..ns * np * ulen {
                            let line = &t1[spu1 * m..(spu1 + 1) * m];
                            for u2 in 0..ulen {
                                let k2 = &axes[1].kern_um[u2 * m..(u2 + 1) * m];
                                let mut s2 = zero;
                                for (l, k) in line.iter().zip(k2) {
                                    s2 += *l * *k;
                                }
                                if s2 == zero {
                                    continue;
                                }
                                let out =
                                    &mut d[(spu1 * ulen + u2) * ulen..(spu1 * ulen + u2 + 1) * ulen];
                                for (o, &k) in out.iter_mut().zip(k3) {
                                    *o += k * s2;
                                }
                            }
                        }
                    }
                }
                _ => unreachable!("tensor path only built for N = 2, 3"),
            }
            d
        });
        let mut dtot = alloc::vec![zero; dsize];
        for part in partials {
            for (t, v) in dtot.iter_mut().zip(part) {
                *t += v;
            }
        }
        // read finals off the tensor
        let mut out = alloc::vec![zero; self.finals.len()];
        for (fi, (_, pi_idx, xu)) in self.finals.iter().enumerate() {
            let mut acc = zero;
            for (si, prog) in self.programs.iter().enumerate() {
                let flat = (si * np + pi_idx) * ulen.pow(n as u32);
                let mut pos = 0usize;
                for j in 0..n {
                    pos = pos * ulen + xu[prog.inv[j] - 1];
                }
                acc += dtot[flat + pos];
            }
            out[fi] = acc;
        }
        out
    }

    /// Runs the refinement ladder, returning per-final values, per-final last
    /// deltas, the max-delta history, the refinement count, and the final
    /// node count.
    fn refine<E: Executor>(
        &self,
        contour: &ContourSpec,
        exec: &E,
    ) -> (Vec<Complex64>, Vec<f64>, Vec<f64>, u32, usize) {
        let m0 = contour.nodes_per_circle;
        let mut prev = self.eval_level(m0, exec);
        let mut deltas_hist = Vec::new();
        let mut last_delta = alloc::vec![f64::INFINITY; self.finals.len()];
        let mut refinements = 0u32;
        let mut m = m0;
        for r in 1..=contour.max_refinements {
            m = m0 << r;
            let cur = self.eval_level(m, exec);
            let mut max_delta = 0.0f64;
            for (i, (c, p)) in cur.iter().zip(prev.iter()).enumerate() {
                let d = (c - p).norm();
                last_delta[i] = d;
                max_delta = max_delta.max(d);
            }
            deltas_hist.push(max_delta);
            prev = cur;
            refinements = r;
            if max_delta < contour.abs_tol {
                break;
            }
        }
        (prev, last_delta, deltas_hist, refinements, m)
    }
}

/// Exact `0` check: transition probabilities across different letter
/// multisets vanish identically.
fn sector_mismatch(query: &TransitionQuery) -> bool {
    query.initial.species().multiset() != query.final_state.species().multiset()
}

/// Evaluates one transition probability by refining the trapezoid estimate
/// until successive node doublings agree within `contour.abs_tol`.
pub fn evaluate_probability(
    query: &TransitionQuery,
    contour: &ContourSpec,
) -> Result<Quadrature, QuadratureError> {
    evaluate_probability_with(query, contour, &Sequential)
}

/// As [`evaluate_probability`], with grid chunks run by `exec`.
pub fn evaluate_probability_with<E: Executor>(
    query: &TransitionQuery,
    contour: &ContourSpec,
    exec: &E,
) -> Result<Quadrature, QuadratureError> {
    let n = query.initial.len();
    if query.final_state.len() != n {
        return Err(QuadratureError::Query("particle count mismatch"));
    }
    contour.validate(n)?;
    if sector_mismatch(query) {
        return Ok(Quadrature {
            probability: 0.0,
            error: 0.0,
            refinements: 0,
            nodes_per_circle: contour.nodes_per_circle,
            deltas: Vec::new(),
        });
    }
    let ev = Evaluator::new(
        &query.initial,
        query.t,
        query.p,
        alloc::vec![query.final_state.clone()],
        &contour.radii,
    )?;
    let (values, last_delta, deltas, refinements, m) = ev.refine(contour, exec);
    let value = values[0];
    let delta = last_delta[0];
    let error = value.im.abs() + delta;
    if delta >= contour.abs_tol {
        return Err(QuadratureError::NotConverged {
            probability: value.re,
            error,
            delta,
            nodes_per_circle: m,
        });
    }
    Ok(Quadrature {
        probability: value.re,
        error,
        refinements,
        nodes_per_circle: m,
        deltas,
    })
}

/// Evaluates the whole transition table from `initial` into the position
/// window `window = (lo, hi)`: every strictly increasing tuple inside the
/// window, crossed with every word in the initial sector. Entries that fail
/// to converge are flagged rather than dropped.
pub fn full_distribution(
    initial: &MarkovState,
    t: f64,
    p: f64,
    window: (i64, i64),
    contour: &ContourSpec,
) -> Result<DistributionTable, QuadratureError> {
    full_distribution_with(initial, t, p, window, contour, &Sequential)
}

/// As [`full_distribution`], with grid chunks run by `exec`.
pub fn full_distribution_with<E: Executor>(
    initial: &MarkovState,
    t: f64,
    p: f64,
    window: (i64, i64),
    contour: &ContourSpec,
    exec: &E,
) -> Result<DistributionTable, QuadratureError> {
    let n = initial.len();
    contour.validate(n)?;
    let (lo, hi) = window;
    if lo > hi {
        return Err(QuadratureError::Query("window must satisfy lo <= hi"));
    }
    if initial.positions().iter().any(|&y| y < lo || y > hi) {
        return Err(QuadratureError::Query("window must contain the initial configuration"));
    }
    let sites = (hi - lo + 1) as usize;
    if sites < n {
        return Err(QuadratureError::Query("window too small for the particle count"));
    }
    let basis = sector_basis(initial.species());
    let tuples = increasing_tuples(lo, hi, n);
    if tuples.len().saturating_mul(basis.words.len()) > 4_000_000 {
        return Err(QuadratureError::Query("window enumerates too many final states"));
    }
    let mut finals = Vec::with_capacity(tuples.len() * basis.words.len());
    for x in &tuples {
        for w in &basis.words {
            finals.push(
                MarkovState::from_parts(x.clone(), w.letters().to_vec())
                    .expect("window tuples are valid configurations"),
            );
        }
    }
    let ev = Evaluator::new(initial, t, p, finals, &contour.radii)?;
    let (values, last_delta, deltas, refinements, m) = ev.refine(contour, exec);
    let mut entries = Vec::with_capacity(values.len());
    let mut total = 0.0f64;
    let mut all_converged = true;
    for (i, v) in values.iter().enumerate() {
        let delta = last_delta[i];
        let converged = delta < contour.abs_tol;
        all_converged &= converged;
        total += v.re;
        entries.push(DistributionEntry {
            state: ev.finals[i].0.clone(),
            probability: v.re,
            error: v.im.abs() + delta,
            converged,
        });
    }
    Ok(DistributionTable {
        entries,
        refinements,
        nodes_per_circle: m,
        deltas,
        converged: all_converged,
        total,
        leaked: 1.0 - total,
    })
}

/// All strictly increasing `n`-tuples with entries in `lo..=hi`.
fn increasing_tuples(lo: i64, hi: i64, n: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(lo: i64, hi: i64, n: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let remaining = (n - cur.len()) as i64;
        let start = cur.last().map(|&x| x + 1).unwrap_or(lo);
        for x in start..=hi - remaining + 1 {
            cur.push(x);
            rec(lo, hi, n, cur, out);
            cur.pop();
        }
    }
    rec(lo, hi, n, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(pos: &[i64], sp: &[u32]) -> MarkovState {
        MarkovState::from_parts(pos.to_vec(), sp.to_vec()).unwrap()
    }

    fn contour(n: usize) -> ContourSpec {
        ContourSpec {
            radii: (0..n).map(|i| 1.4 + 0.1 * i as f64).collect(),
            nodes_per_circle: 64,
            abs_tol: 1e-10,
            max_refinements: 6,
        }
    }

    #[test]
    fn trapezoid_exactness_on_powers() {
        // (1/2πi) ∮ ξ^k dξ = δ_{k,-1}, exactly reproduced whenever M > |k| + 1
        for &m in &[8usize, 32, 64] {
            let r = 1.3f64;
            for k in -20i32..=20 {
                if m as i32 <= k.abs() + 1 {
                    continue;
                }
                let mut sum = Complex64::new(0.0, 0.0);
                for mi in 0..m {
                    let theta = core::f64::consts::TAU * mi as f64 / m as f64;
                    let xi = Complex64::new(r * theta.cos(), r * theta.sin());
                    sum += xi.powi(k + 1);
                }
                sum /= m as f64;
                let expect = if k == -1 { 1.0 } else { 0.0 };
                assert!(
                    (sum - expect).norm() < 1e-12,
                    "k={} m={} -> {}",
                    k,
                    m,
                    sum
                );
            }
        }
    }

    #[test]
    fn integrand_single_particle() {
        let q = TransitionQuery {
            initial: st(&[0], &[1]),
            final_state: st(&[3], &[1]),
            t: 0.7,
            p: 0.4,
        };
        let xi = Complex64::new(1.2, 0.3);
        let got = integrand(&[xi], &q).unwrap();
        let spec = EnergySpec::new(0.4);
        let expect = xi.powi(2) * (energy(xi, &spec) * 0.7).exp();
        assert!((got - expect).norm() < 1e-14);
    }

    #[test]
    fn integrand_two_particle_equal_species() {
        // for π = ν = 11 the sum collapses to
        // (ξ₁^{x₁-y₁-1} ξ₂^{x₂-y₂-1} + S₂₁ ξ₂^{x₁-y₂-1} ξ₁^{x₂-y₁-1}) e^{(ε₁+ε₂)t}
        use crate::algebra::s_amp;
        let q = TransitionQuery {
            initial: st(&[0, 2], &[1, 1]),
            final_state: st(&[1, 4], &[1, 1]),
            t: 0.6,
            p: 0.3,
        };
        let xis = [Complex64::new(1.4, 0.5), Complex64::new(-1.1, 1.2)];
        let spec = EnergySpec::new(0.3);
        let s21 = s_amp(&xis[1], &xis[0]).unwrap();
        let expect = (xis[0].powi(0) * xis[1].powi(1) + s21 * xis[1].powi(-2) * xis[0].powi(3))
            * ((energy(xis[0], &spec) + energy(xis[1], &spec)) * 0.6).exp();
        let got = integrand(&xis, &q).unwrap();
        assert!((got - expect).norm() < 1e-13, "{} vs {}", got, expect);
    }

    #[test]
    fn integrand_triangularity_zero() {
        // π = 12 cannot be reached from ν = 21
        let q = TransitionQuery {
            initial: st(&[0, 1], &[2, 1]),
            final_state: st(&[0, 1], &[1, 2]),
            t: 1.0,
            p: 0.5,
        };
        let xis = [Complex64::new(1.3, 0.4), Complex64::new(-1.2, 0.9)];
        assert!(integrand(&xis, &q).unwrap().norm() < 1e-14);
    }

    #[test]
    fn initial_condition_identity() {
        let s = st(&[0, 2], &[2, 1]);
        let q = TransitionQuery {
            initial: s.clone(),
            final_state: s,
            t: 0.0,
            p: 0.3,
        };
        let quad = evaluate_probability(&q, &contour(2)).unwrap();
        assert!((quad.probability - 1.0).abs() < 1e-10, "{}", quad.probability);
    }

    #[test]
    fn initial_condition_zero_offsite() {
        let q = TransitionQuery {
            initial: st(&[0, 2], &[2, 1]),
            final_state: st(&[1, 2], &[2, 1]),
            t: 0.0,
            p: 0.3,
        };
        let quad = evaluate_probability(&q, &contour(2)).unwrap();
        assert!(quad.probability.abs() < 1e-10);
    }

    #[test]
    fn sector_mismatch_short_circuits() {
        let q = TransitionQuery {
            initial: st(&[0, 1], &[1, 2]),
            final_state: st(&[0, 1], &[1, 1]),
            t: 1.0,
            p: 0.5,
        };
        let quad = evaluate_probability(&q, &contour(2)).unwrap();
        assert_eq!(quad.probability, 0.0);
        assert_eq!(quad.error, 0.0);
        assert_eq!(quad.refinements, 0);
    }

    #[test]
    fn right_only_staying_probability() {
        let s = st(&[0, 1], &[1, 2]);
        let q = TransitionQuery {
            initial: s.clone(),
            final_state: s,
            t: 1.0,
            p: 1.0,
        };
        let quad = evaluate_probability(&q, &contour(2)).unwrap();
        assert!(
            (quad.probability - (-2.0f64).exp()).abs() < 1e-9,
            "{} vs {}",
            quad.probability,
            (-2.0f64).exp()
        );
    }

    #[test]
    fn poisson_sector_n1() {
        let table = full_distribution(&st(&[0], &[1]), 1.0, 1.0, (-6, 8), &contour(1)).unwrap();
        let mut fact = 1.0f64;
        for x in 0..=6i64 {
            if x > 0 {
                fact *= x as f64;
            }
            let expect = (-1.0f64).exp() / fact;
            let got = table.probability(&st(&[x], &[1]));
            assert!((got - expect).abs() < 1e-10, "x={}: {} vs {}", x, got, expect);
        }
        assert!(table.probability(&st(&[-1], &[1])).abs() < 1e-12);
        assert!(table.converged);
    }

    #[test]
    fn tensor_and_direct_paths_agree() {
        let initial = st(&[0, 1], &[2, 1]);
        let c = contour(2);
        let table = full_distribution(&initial, 0.8, 0.6, (-4, 5), &c).unwrap();
        // windowed run uses the tensor path (90 finals); spot-check entries
        // against single-final direct evaluations
        for entry in table.entries.iter().step_by(7) {
            let q = TransitionQuery {
                initial: initial.clone(),
                final_state: entry.state.clone(),
                t: 0.8,
                p: 0.6,
            };
            let direct = evaluate_probability(&q, &c).unwrap();
            assert!(
                (direct.probability - entry.probability).abs() < 1e-11,
                "{}: {} vs {}",
                entry.state,
                direct.probability,
                entry.probability
            );
        }
    }

    #[test]
    fn grid_matches_reference_integrand_sum() {
        // the evaluator must reproduce the naive trapezoid over `integrand`
        let initial = st(&[0, 1], &[2, 1]);
        let final_state = st(&[1, 2], &[2, 1]);
        let (t, p) = (0.9, 0.35);
        let radii = [1.4, 1.5];
        let m = 16usize;
        let mut naive = Complex64::new(0.0, 0.0);
        let q = TransitionQuery {
            initial: initial.clone(),
            final_state: final_state.clone(),
            t,
            p,
        };
        for m1 in 0..m {
            for m2 in 0..m {
                let th1 = core::f64::consts::TAU * m1 as f64 / m as f64;
                let th2 = core::f64::consts::TAU * m2 as f64 / m as f64;
                let xi1 = Complex64::new(radii[0] * th1.cos(), radii[0] * th1.sin());
                let xi2 = Complex64::new(radii[1] * th2.cos(), radii[1] * th2.sin());
                naive += integrand(&[xi1, xi2], &q).unwrap() * xi1 * xi2
                    / (m as f64 * m as f64);
            }
        }
        let ev = Evaluator::new(&initial, t, p, alloc::vec![final_state], &radii).unwrap();
        let fast = ev.eval_level(m, &Sequential)[0];
        assert!(
            (naive - fast).norm() < 1e-12,
            "naive {} vs fast {}",
            naive,
            fast
        );
    }

    #[test]
    fn window_validation() {
        let initial = st(&[0, 1], &[1, 2]);
        let c = contour(2);
        assert!(matches!(
            full_distribution(&initial, 1.0, 0.5, (2, 5), &c),
            Err(QuadratureError::Query(_))
        ));
        let bad = ContourSpec {
            radii: alloc::vec![1.5, 1.2],
            ..contour(2)
        };
        assert!(matches!(
            full_distribution(&initial, 1.0, 0.5, (-2, 3), &bad),
            Err(QuadratureError::Contour(_))
        ));
    }

    #[test]
    fn spectral_convergence_of_deltas() {
        let q = TransitionQuery {
            initial: st(&[0, 1], &[1, 2]),
            final_state: st(&[1, 3], &[2, 1]),
            t: 1.0,
            p: 0.7,
        };
        let c = ContourSpec {
            radii: alloc::vec![1.4, 1.5],
            nodes_per_circle: 8,
            abs_tol: 1e-10,
            max_refinements: 6,
        };
        let quad = evaluate_probability(&q, &c).unwrap();
        for pair in quad.deltas.windows(2) {
            if pair[0] > 1e-13 && pair[1] > 1e-13 {
                assert!(
                    pair[1] <= pair[0] / 4.0,
                    "deltas did not shrink 4x: {:?}",
                    quad.deltas
                );
            }
        }
    }
}
