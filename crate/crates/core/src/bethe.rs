//! Bethe amplitude columns `A_σ · e_ν` and the single-particle energy.
//!
//! An amplitude `A_σ` is a product of tensor-lifted R-matrices along a word
//! of adjacent transpositions for `σ`. Words act on the identity by position
//! swaps: the first letter is applied first, and the R-parameters of each
//! factor are read off the intermediate permutation before its swap. The
//! consistency relations (inverse relation and Yang-Baxter equation) make the
//! result independent of the chosen word.

use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;

use crate::algebra::{apply_local, build_r, AlgebraError, AmplitudeVector, Scalar};
use crate::state::SpeciesWord;

/// A permutation of `{1, …, N}` in one-line notation: `images[i] = σ(i+1)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Permutation {
    images: Vec<usize>,
}

/// Errors from permutation and reduced-word handling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BetheError {
    NotABijection,
    LetterOutOfRange { letter: usize, n: usize },
    ArityMismatch { words: usize, xis: usize },
}

impl fmt::Display for BetheError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetheError::NotABijection => write!(f, "images are not a bijection of 1..=N"),
            BetheError::LetterOutOfRange { letter, n } => {
                write!(f, "transposition letter {} outside 1..={}", letter, n)
            }
            BetheError::ArityMismatch { words, xis } => {
                write!(f, "word length {} does not match {} spectral parameters", words, xis)
            }
        }
    }
}

impl core::error::Error for BetheError {}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (1..=n).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self, BetheError> {
        let n = images.len();
        let mut seen = alloc::vec![false; n];
        for &v in &images {
            if v < 1 || v > n || seen[v - 1] {
                return Err(BetheError::NotABijection);
            }
            seen[v - 1] = true;
        }
        Ok(Permutation { images })
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    /// `σ(i)` for 1-based `i`.
    pub fn image(&self, i: usize) -> usize {
        self.images[i - 1]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// `σ⁻¹(j)` for 1-based `j`: the position whose image is `j`.
    pub fn preimage(&self, j: usize) -> usize {
        self.images.iter().position(|&v| v == j).expect("bijection") + 1
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    /// Number of inversions; equals the minimal word length.
    pub fn inversions(&self) -> usize {
        let mut count = 0;
        for i in 0..self.images.len() {
            for j in i + 1..self.images.len() {
                if self.images[i] > self.images[j] {
                    count += 1;
                }
            }
        }
        count
    }

    /// All permutations of `{1, …, n}` in lexicographic order of their
    /// one-line words. The fixed order keeps sums over `S_N` deterministic.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (1..=n).collect();
        loop {
            out.push(Permutation { images: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.images.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", v)?;
        }
        Ok(())
    }
}

/// A permutation expressed as adjacent transpositions.
///
/// `letters[0]` acts first: starting from the identity word, each letter `l`
/// swaps positions `l` and `l+1` (1-based) of the current one-line word.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ReducedWord {
    letters: Vec<usize>,
}

impl ReducedWord {
    /// Wraps a letter sequence, checking the letters lie in `1..=n-1`. The
    /// word need not be reduced; any word is a valid amplitude schedule.
    pub fn new(letters: Vec<usize>, n: usize) -> Result<Self, BetheError> {
        for &l in &letters {
            if l < 1 || l + 1 > n {
                return Err(BetheError::LetterOutOfRange { letter: l, n: n - 1 });
            }
        }
        Ok(ReducedWord { letters })
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// The permutation this word represents: the letters applied in order to
    /// the identity.
    pub fn permutation(&self, n: usize) -> Permutation {
        let mut cur: Vec<usize> = (1..=n).collect();
        for &l in &self.letters {
            cur.swap(l - 1, l);
        }
        Permutation { images: cur }
    }
}

/// A word for `σ` of minimal length (the inversion number), found by
/// bubble-sorting the one-line word back to the identity.
pub fn reduced_word(sigma: &Permutation) -> ReducedWord {
    let n = sigma.n();
    let mut w = sigma.images.clone();
    let mut swaps = Vec::with_capacity(sigma.inversions());
    // repeatedly clear the leftmost descent
    loop {
        let Some(l) = (0..n.saturating_sub(1)).find(|&i| w[i] > w[i + 1]) else {
            break;
        };
        w.swap(l, l + 1);
        swaps.push(l + 1);
    }
    swaps.reverse();
    ReducedWord { letters: swaps }
}

/// The amplitude column `A_σ · e_ν` for an explicit word schedule.
///
/// Walking the word left to right from the identity, each letter `l`
/// contributes a lifted factor `R_{βα}` at slot `l` with `β = cur(l+1)`,
/// `α = cur(l)` read before the swap; the factor acts on the running vector
/// immediately (rightmost factor first).
pub fn amplitude_column_for_word<T: Scalar>(
    word: &ReducedWord,
    nu: &SpeciesWord,
    xis: &[T],
) -> Result<AmplitudeVector<T>, AlgebraError> {
    let n_particles = nu.len();
    assert_eq!(
        xis.len(),
        n_particles,
        "one spectral parameter per particle required"
    );
    let alphabet = nu.max_letter();
    let mut cur: Vec<usize> = (1..=n_particles).collect();
    let mut v = AmplitudeVector::basis(alphabet, nu);
    for &l in word.letters() {
        let beta = cur[l];
        let alpha = cur[l - 1];
        let r = build_r(alphabet, &xis[beta - 1], &xis[alpha - 1])?;
        v = apply_local(&r, l, &v)?;
        cur.swap(l - 1, l);
    }
    Ok(v)
}

/// The amplitude column `A_σ · e_ν`, using the bubble-sort word for `σ`.
/// `A_identity · e_ν = e_ν`.
pub fn amplitude_column<T: Scalar>(
    sigma: &Permutation,
    nu: &SpeciesWord,
    xis: &[T],
) -> Result<AmplitudeVector<T>, AlgebraError> {
    amplitude_column_for_word(&reduced_word(sigma), nu, xis)
}

/// Jump bias of the walk: right probability `p`, left probability `q = 1-p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySpec {
    p: f64,
}

impl EnergySpec {
    pub fn new(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
        EnergySpec { p }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }
}

/// Single-particle energy `ε(ξ) = p/ξ + qξ - 1`; the time dependence of each
/// Bethe mode is `e^{ε(ξ) t}`.
pub fn energy(xi: Complex64, spec: &EnergySpec) -> Complex64 {
    spec.p() / xi + spec.q() * xi - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{s_amp, t_amp};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn word(letters: &[u32]) -> SpeciesWord {
        SpeciesWord::new(letters.to_vec()).unwrap()
    }

    #[test]
    fn reduced_word_identity_is_empty() {
        let sigma = Permutation::identity(4);
        assert!(reduced_word(&sigma).is_empty());
    }

    #[test]
    fn reduced_word_single_swap() {
        let sigma = Permutation::from_images(alloc::vec![2, 1]).unwrap();
        assert_eq!(reduced_word(&sigma).letters(), &[1]);
    }

    #[test]
    fn reduced_words_reproduce_their_permutations() {
        for n in 1..=5 {
            for sigma in Permutation::all(n) {
                let w = reduced_word(&sigma);
                assert_eq!(w.len(), sigma.inversions());
                assert_eq!(w.permutation(n), sigma, "word round-trip for {}", sigma);
            }
        }
    }

    #[test]
    fn amplitude_identity_is_basis() {
        let nu = word(&[3, 1, 2]);
        let xis = [c(2.0), c(3.0), c(4.0)];
        let col = amplitude_column(&Permutation::identity(3), &nu, &xis).unwrap();
        assert_eq!(col, AmplitudeVector::basis(3, &nu));
    }

    #[test]
    fn amplitude_n2_matches_scattering_matrix_columns() {
        let xis = [c(2.0), c(3.0)];
        let sigma = Permutation::from_images(alloc::vec![2, 1]).unwrap();
        let s = s_amp(&xis[1], &xis[0]).unwrap();
        let t = t_amp(&xis[1], &xis[0]).unwrap();

        let col = amplitude_column(&sigma, &word(&[1, 2]), &xis).unwrap();
        assert_eq!(col.get(&word(&[1, 2])), c(-1.0));
        assert_eq!(col.get(&word(&[2, 1])), t);

        let col = amplitude_column(&sigma, &word(&[2, 1]), &xis).unwrap();
        assert_eq!(col.get(&word(&[2, 1])), s);
        assert_eq!(col.iter().count(), 1);

        let col = amplitude_column(&sigma, &word(&[1, 1]), &xis).unwrap();
        assert_eq!(col.get(&word(&[1, 1])), s);
        assert_eq!(col.iter().count(), 1);
    }

    #[test]
    fn amplitude_213_is_lifted_r() {
        // a single transposition at slot 1 with parameters (ξ₂, ξ₁)
        let xis = [c(2.0), c(3.0), c(4.0)];
        let sigma = Permutation::from_images(alloc::vec![2, 1, 3]).unwrap();
        let nu = word(&[2, 1, 3]);
        let col = amplitude_column(&sigma, &nu, &xis).unwrap();
        let r = build_r(3, &xis[1], &xis[0]).unwrap();
        let direct = apply_local(&r, 1, &AmplitudeVector::basis(3, &nu)).unwrap();
        assert_eq!(col, direct);
    }

    #[test]
    fn energy_values() {
        assert!(energy(c(1.0), &EnergySpec::new(0.3)).norm() < 1e-15);
        assert!((energy(c(2.0), &EnergySpec::new(1.0)) - c(-0.5)).norm() < 1e-15);
        assert!((energy(c(2.0), &EnergySpec::new(0.5)) - c(0.25)).norm() < 1e-15);
    }
}
