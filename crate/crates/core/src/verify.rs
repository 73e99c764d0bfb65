//! Executable identity suites.
//!
//! These are the algebraic facts the Bethe construction rests on, run as
//! numerical checks over random spectral parameters: the inverse relation
//! `R_{βα} R_{αβ} = I`, the Yang-Baxter equation checked block by block over
//! letter multisets, the exact two-site relation `B - B₁ + B₂ = 2I`, the
//! boundary residual `Σ_σ (I - ξ_{σ(l)}⁻¹ B^{(l)}) A_σ e_ν = 0`, and
//! independence of amplitude columns from the chosen transposition word.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;
// resolves float math through libm under no_std; shadowed by inherent methods in tests
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::algebra::{
    apply_local, build_b, build_b1, build_b2, build_r, AmplitudeVector, LocalMatrix,
};
use crate::bethe::{amplitude_column, amplitude_column_for_word, reduced_word, Permutation, ReducedWord};
use crate::state::SpeciesWord;

/// Outcome of one identity suite.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: &'static str,
    pub detail: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl SuiteReport {
    fn from_residual(name: &'static str, detail: String, max_residual: f64, tolerance: f64) -> Self {
        SuiteReport {
            name,
            detail,
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Random ξ with modulus in `[1.1, 3.0]`; stays off the unit circle and the
/// poles of `S`, `T`.
fn random_xi(rng: &mut ChaCha8Rng) -> Complex64 {
    let r = 1.1 + 1.9 * uniform(rng);
    let theta = core::f64::consts::TAU * uniform(rng);
    Complex64::new(r * theta.cos(), r * theta.sin())
}

/// `R_{βα} R_{αβ} = I` over random parameter pairs.
pub fn inverse_relation_suite(ns: &[u32], trials: usize, seed: u64, tol: f64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max = 0.0f64;
    for &n in ns {
        let id = LocalMatrix::<Complex64>::identity(n);
        for _ in 0..trials {
            let (xa, xb) = (random_xi(&mut rng), random_xi(&mut rng));
            let r_ba = build_r(n, &xb, &xa).expect("off-pole");
            let r_ab = build_r(n, &xa, &xb).expect("off-pole");
            max = max.max(r_ba.matmul(&r_ab).max_entry_distance(&id));
        }
    }
    SuiteReport::from_residual(
        "inverse relation",
        format!("R_ba R_ab = I, n in {:?}, {} trials", ns, trials),
        max,
        tol,
    )
}

/// Yang-Baxter equation on the three-letter word space, verified blockwise
/// on every letter multiset `[i,j,k]`.
pub fn yang_baxter_suite(ns: &[u32], trials: usize, seed: u64, tol: f64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max = 0.0f64;
    for &n in ns {
        for _ in 0..trials {
            let xa = random_xi(&mut rng);
            let xb = random_xi(&mut rng);
            let xg = random_xi(&mut rng);
            let r_ba = build_r(n, &xb, &xa).expect("off-pole");
            let r_ga = build_r(n, &xg, &xa).expect("off-pole");
            let r_gb = build_r(n, &xg, &xb).expect("off-pole");
            // one representative block per multiset shape
            for i in 1..=n {
                for j in i..=n {
                    for k in j..=n {
                        for word in block_words(&[i, j, k]) {
                            let v = AmplitudeVector::<Complex64>::basis(n, &word);
                            let lhs = apply_local(&r_gb, 1, &apply_local(&r_ga, 2, &apply_local(&r_ba, 1, &v).unwrap()).unwrap()).unwrap();
                            let rhs = apply_local(&r_ba, 2, &apply_local(&r_ga, 1, &apply_local(&r_gb, 2, &v).unwrap()).unwrap()).unwrap();
                            max = max.max(lhs.sub(&rhs).max_abs());
                        }
                    }
                }
            }
        }
    }
    SuiteReport::from_residual(
        "yang-baxter",
        format!("blockwise over letter multisets, n in {:?}, {} trials", ns, trials),
        max,
        tol,
    )
}

/// Distinct permutations of a three-letter multiset.
fn block_words(multiset: &[u32; 3]) -> Vec<SpeciesWord> {
    let mut sorted = multiset.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    loop {
        out.push(SpeciesWord::new(sorted.clone()).unwrap());
        let Some(i) = (0..2usize).rev().find(|&i| sorted[i] < sorted[i + 1]) else {
            break;
        };
        let j = (i + 1..3).rev().find(|&j| sorted[j] > sorted[i]).unwrap();
        sorted.swap(i, j);
        sorted[i + 1..].reverse();
    }
    out
}

/// The exact two-site relation `B - B₁ + B₂ = 2I` in integer arithmetic.
pub fn b_relation_suite(max_n: u32) -> SuiteReport {
    let mut max = 0.0f64;
    for n in 1..=max_n {
        let b = build_b::<Complex64>(n);
        let b1 = build_b1::<Complex64>(n);
        let b2 = build_b2::<Complex64>(n);
        let mut combo = b.clone();
        for (row, col, v) in b1.entries() {
            combo.insert(row, col, -*v);
        }
        for (row, col, v) in b2.entries() {
            combo.insert(row, col, *v);
        }
        let two_i = LocalMatrix::<Complex64>::identity(n).scale(Complex64::new(2.0, 0.0));
        max = max.max(combo.max_entry_distance(&two_i));
    }
    SuiteReport::from_residual(
        "two-site relation",
        format!("B - B1 + B2 = 2I exactly, n <= {}", max_n),
        max,
        0.0,
    )
}

/// Boundary residual for three particles over the full alphabet `{1,2,3}`:
/// `Σ_σ (I - ξ_{σ(l)}⁻¹ B^{(l)}) A_σ e_ν = 0` for every `ν` and every slot.
pub fn boundary_residual_suite(trials: usize, seed: u64, tol: f64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_particles = 3usize;
    let alphabet = 3u32;
    let b = build_b::<Complex64>(alphabet);
    let sigmas = Permutation::all(n_particles);
    let mut max = 0.0f64;
    for _ in 0..trials {
        let xis: Vec<Complex64> = (0..n_particles).map(|_| random_xi(&mut rng)).collect();
        for nu_letters in all_words(alphabet, n_particles) {
            let nu = SpeciesWord::new(nu_letters).unwrap();
            for l in 1..n_particles {
                let mut residual = AmplitudeVector::<Complex64>::zero(alphabet, n_particles);
                for sigma in &sigmas {
                    let col = amplitude_column(sigma, &nu, &xis).expect("off-pole");
                    let lifted = apply_local(&b, l, &col).expect("slot in range");
                    let scale = Complex64::new(1.0, 0.0) / xis[sigma.image(l) - 1];
                    // accumulate col - ξ_{σ(l)}^{-1} (B^{(l)} col)
                    for (w, v) in col.iter() {
                        residual.add(w.clone(), *v);
                    }
                    for (w, v) in lifted.iter() {
                        residual.add(w.clone(), -scale * *v);
                    }
                }
                max = max.max(residual.max_abs());
            }
        }
    }
    SuiteReport::from_residual(
        "boundary residual",
        format!("N=3, all 27 words, both slots, {} trials", trials),
        max,
        tol,
    )
}

/// Every word over the alphabet, lexicographic.
fn all_words(alphabet: u32, len: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = alloc::vec![1u32; len];
    loop {
        out.push(cur.clone());
        let mut i = len;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < alphabet {
                cur[i] += 1;
                for c in &mut cur[i + 1..] {
                    *c = 1;
                }
                break;
            }
        }
    }
}

/// Amplitude columns must not depend on the transposition word chosen for
/// `σ`: leftmost- and rightmost-descent reduced words, plus a padded
/// non-reduced word containing a `T_i T_i` pair, all agree.
pub fn word_independence_suite(seed: u64, tol: f64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_particles = 4usize;
    let alphabet = 4u32;
    let mut max = 0.0f64;
    for sigma in Permutation::all(n_particles) {
        let w_left = reduced_word(&sigma);
        let w_right = descent_word(&sigma, false);
        debug_assert_eq!(w_right.permutation(n_particles), sigma);
        let mut padded = Vec::with_capacity(w_left.len() + 2);
        let pad = 1 + (rng.next_u64() as usize) % (n_particles - 1);
        padded.push(pad);
        padded.push(pad);
        padded.extend_from_slice(w_left.letters());
        let w_padded = ReducedWord::new(padded, n_particles).unwrap();
        for _ in 0..3 {
            let xis: Vec<Complex64> = (0..n_particles).map(|_| random_xi(&mut rng)).collect();
            let nu_letters: Vec<u32> =
                (0..n_particles).map(|_| 1 + (rng.next_u64() % u64::from(alphabet)) as u32).collect();
            let nu = SpeciesWord::new(nu_letters).unwrap();
            let a = amplitude_column_for_word(&w_left, &nu, &xis).expect("off-pole");
            let b = amplitude_column_for_word(&w_right, &nu, &xis).expect("off-pole");
            let c = amplitude_column_for_word(&w_padded, &nu, &xis).expect("off-pole");
            max = max.max(a.sub(&b).max_abs());
            max = max.max(a.sub(&c).max_abs());
        }
    }
    SuiteReport::from_residual(
        "word independence",
        String::from("all 24 permutations of S4, two reduced words plus a padded word"),
        max,
        tol,
    )
}

/// Reduced word by clearing the leftmost (`true`) or rightmost (`false`)
/// descent first.
pub fn descent_word(sigma: &Permutation, leftmost: bool) -> ReducedWord {
    let n = sigma.n();
    let mut w: Vec<usize> = sigma.images().to_vec();
    let mut swaps = Vec::new();
    loop {
        let descents: Vec<usize> = (0..n.saturating_sub(1)).filter(|&i| w[i] > w[i + 1]).collect();
        let Some(&l) = (if leftmost { descents.first() } else { descents.last() }) else {
            break;
        };
        w.swap(l, l + 1);
        swaps.push(l + 1);
    }
    swaps.reverse();
    ReducedWord::new(swaps, n).expect("letters in range")
}

/// Runs every suite at the acceptance thresholds.
pub fn run_all(seed: u64, trials: usize) -> Vec<SuiteReport> {
    let ns = [2u32, 3, 4, 5];
    alloc::vec![
        inverse_relation_suite(&ns, trials, seed, 1e-12),
        yang_baxter_suite(&ns, trials.min(25), seed.wrapping_add(1), 1e-12),
        b_relation_suite(6),
        boundary_residual_suite(trials.min(20).max(1), seed.wrapping_add(2), 1e-10),
        word_independence_suite(seed.wrapping_add(3), 1e-12),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for report in run_all(7, 20) {
            assert!(
                report.pass,
                "{} failed: residual {:.3e} > {:.3e}",
                report.name, report.max_residual, report.tolerance
            );
        }
    }

    #[test]
    fn descent_words_reproduce_sigma() {
        for sigma in Permutation::all(5) {
            let w = descent_word(&sigma, false);
            assert_eq!(w.permutation(5), sigma);
            assert_eq!(w.len(), sigma.inversions());
        }
    }

    #[test]
    fn word_enumeration_covers_alphabet() {
        let words = all_words(3, 3);
        assert_eq!(words.len(), 27);
        assert_eq!(words[0], alloc::vec![1, 1, 1]);
        assert_eq!(words[26], alloc::vec![3, 3, 3]);
    }
}
