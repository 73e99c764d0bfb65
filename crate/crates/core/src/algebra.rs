//! Two-site matrices of the model and their tensor lifts.
//!
//! All four local matrices (`B`, `B₁`, `B₂`, `R`) act on the two-letter word
//! space with rows and columns labelled lexicographically `11, 12, …, nn` and
//! are block-diagonal over two-letter multisets. Tensor lifts act lazily on
//! sparse word-indexed vectors; the `n^N × n^N` lifted matrix is never
//! materialized.
//!
//! Everything is generic over the scalar so the same code runs on complex
//! floating point (quadrature) and on exact rationals (identity checks).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Neg;
use num_complex::Complex64;
use num_traits::Num;

use crate::state::SpeciesWord;

/// Scalar ring for the algebra: complex floats in production, exact
/// rationals in identity tests.
pub trait Scalar: Num + Neg<Output = Self> + Clone {}

impl<T: Num + Neg<Output = T> + Clone> Scalar for T {}

/// Errors from the scattering algebra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgebraError {
    /// ξ = 0 or the pole ξ_β = 1 was hit: `1 - 1/ξ_β` vanishes.
    Pole,
    /// A letter of the word exceeds the matrix alphabet.
    LetterOutOfRange { letter: u32, n: u32 },
    /// Tensor slot index outside `1..=N-1`.
    SlotOutOfRange { slot: usize, len: usize },
}

impl fmt::Display for AlgebraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraError::Pole => write!(f, "spectral parameter hits a pole (xi = 0 or 1)"),
            AlgebraError::LetterOutOfRange { letter, n } => {
                write!(f, "letter {} outside alphabet 1..={}", letter, n)
            }
            AlgebraError::SlotOutOfRange { slot, len } => {
                write!(f, "tensor slot {} outside 1..={}", slot, len.saturating_sub(1))
            }
        }
    }
}

impl core::error::Error for AlgebraError {}

/// A nonzero Bethe parameter ξ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint(Complex64);

impl SpectralPoint {
    pub fn new(xi: Complex64) -> Result<Self, AlgebraError> {
        if xi == Complex64::new(0.0, 0.0) {
            return Err(AlgebraError::Pole);
        }
        Ok(SpectralPoint(xi))
    }

    pub fn get(self) -> Complex64 {
        self.0
    }
}

/// Sparse `n² × n²` matrix on the two-letter word space.
///
/// Entries are stored column-major: `cols[(l, m)]` lists the nonzero rows of
/// column `lm`. Every stored entry is nonzero and couples only pairs with
/// equal letter multisets.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMatrix<T> {
    n: u32,
    cols: BTreeMap<(u32, u32), Vec<((u32, u32), T)>>,
}

impl<T: Scalar> LocalMatrix<T> {
    pub fn new(n: u32) -> Self {
        assert!(n >= 1, "alphabet size must be positive");
        LocalMatrix {
            n,
            cols: BTreeMap::new(),
        }
    }

    pub fn identity(n: u32) -> Self {
        let mut m = LocalMatrix::new(n);
        for i in 1..=n {
            for j in 1..=n {
                m.insert((i, j), (i, j), T::one());
            }
        }
        m
    }

    /// Alphabet size `n`.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Inserts (accumulates) an entry; vanished entries are dropped so the
    /// stored form stays canonical.
    pub fn insert(&mut self, row: (u32, u32), col: (u32, u32), value: T) {
        assert!(
            row.0 >= 1 && row.0 <= self.n && row.1 >= 1 && row.1 <= self.n,
            "row label out of range"
        );
        assert!(
            col.0 >= 1 && col.0 <= self.n && col.1 >= 1 && col.1 <= self.n,
            "column label out of range"
        );
        debug_assert!(
            {
                let (a, b) = (row.0.min(row.1), row.0.max(row.1));
                let (c, d) = (col.0.min(col.1), col.0.max(col.1));
                (a, b) == (c, d)
            },
            "entry couples different letter multisets"
        );
        if value.is_zero() {
            return;
        }
        let column = self.cols.entry(col).or_default();
        match column.iter_mut().find(|(r, _)| *r == row) {
            Some((_, v)) => {
                *v = v.clone() + value;
                if v.is_zero() {
                    column.retain(|(r, _)| *r != row);
                    if column.is_empty() {
                        self.cols.remove(&col);
                    }
                }
            }
            None => {
                column.push((row, value));
                column.sort_by_key(|(r, _)| *r);
            }
        }
    }

    /// Nonzero rows of column `(l, m)`.
    pub fn column(&self, col: (u32, u32)) -> &[((u32, u32), T)] {
        self.cols.get(&col).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Entry lookup; absent entries are zero.
    pub fn get(&self, row: (u32, u32), col: (u32, u32)) -> T {
        self.column(col)
            .iter()
            .find(|(r, _)| *r == row)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(T::zero)
    }

    /// Iterates nonzero entries as `(row, col, value)` in column-major
    /// lexicographic order.
    pub fn entries(&self) -> impl Iterator<Item = ((u32, u32), (u32, u32), &T)> {
        self.cols
            .iter()
            .flat_map(|(col, rows)| rows.iter().map(move |(row, v)| (*row, *col, v)))
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &LocalMatrix<T>) -> LocalMatrix<T> {
        assert_eq!(self.n, other.n, "alphabet mismatch");
        let mut out = LocalMatrix::new(self.n);
        for (col, rows) in &other.cols {
            for (mid, w) in rows {
                for (row, v) in self.column(*mid) {
                    out.insert(*row, *col, v.clone() * w.clone());
                }
            }
        }
        out
    }

    /// Entry-wise difference `self - other`.
    pub fn sub(&self, other: &LocalMatrix<T>) -> LocalMatrix<T> {
        assert_eq!(self.n, other.n, "alphabet mismatch");
        let mut out = self.clone();
        for (col, rows) in &other.cols {
            for (row, v) in rows {
                out.insert(*row, *col, v.clone().neg());
            }
        }
        out
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&self, factor: T) -> LocalMatrix<T> {
        let mut out = LocalMatrix::new(self.n);
        for (row, col, v) in self.entries() {
            out.insert(row, col, v.clone() * factor.clone());
        }
        out
    }
}

impl LocalMatrix<Complex64> {
    /// Largest entry magnitude of `self - other`; the residual measure used
    /// by the floating-point identity suites.
    pub fn max_entry_distance(&self, other: &LocalMatrix<Complex64>) -> f64 {
        let mut max = 0.0f64;
        let mut keys: Vec<((u32, u32), (u32, u32))> = Vec::new();
        for (row, col, _) in self.entries() {
            keys.push((row, col));
        }
        for (row, col, _) in other.entries() {
            keys.push((row, col));
        }
        keys.sort_unstable();
        keys.dedup();
        for (row, col) in keys {
            let d = (self.get(row, col) - other.get(row, col)).norm();
            if d > max {
                max = d;
            }
        }
        max
    }
}

/// The drop-push permissibility matrix `B`:
/// `B(ij,lm) = 1` if `ij = lm` and `i ≥ j`, `1` if `ij = ml` and `i > j`,
/// else `0`.
pub fn build_b<T: Scalar>(n: u32) -> LocalMatrix<T> {
    let mut m = LocalMatrix::new(n);
    for i in 1..=n {
        for j in 1..=n {
            if i >= j {
                m.insert((i, j), (i, j), T::one());
            }
            if i > j {
                m.insert((i, j), (j, i), T::one());
            }
        }
    }
    m
}

/// The left-swap permissibility matrix `B₁`:
/// `B₁(ij,lm) = 1` iff `ij = ml` and `i > j`.
pub fn build_b1<T: Scalar>(n: u32) -> LocalMatrix<T> {
    let mut m = LocalMatrix::new(n);
    for i in 1..=n {
        for j in 1..=n {
            if i > j {
                m.insert((i, j), (j, i), T::one());
            }
        }
    }
    m
}

/// The left-exit diagonal matrix `B₂`: value `1` where `i ≥ j`, `2` where
/// `i < j`. Together the three satisfy `B - B₁ + B₂ = 2I`.
pub fn build_b2<T: Scalar>(n: u32) -> LocalMatrix<T> {
    let two = T::one() + T::one();
    let mut m = LocalMatrix::new(n);
    for i in 1..=n {
        for j in 1..=n {
            let v = if i >= j { T::one() } else { two.clone() };
            m.insert((i, j), (i, j), v);
        }
    }
    m
}

/// Scattering amplitude `S_{βα} = -(1 - 1/ξ_α) / (1 - 1/ξ_β)`.
pub fn s_amp<T: Scalar>(xi_beta: &T, xi_alpha: &T) -> Result<T, AlgebraError> {
    let one = T::one;
    if xi_beta.is_zero() || xi_alpha.is_zero() {
        return Err(AlgebraError::Pole);
    }
    let den = one() - one() / xi_beta.clone();
    if den.is_zero() {
        return Err(AlgebraError::Pole);
    }
    Ok((one() - one() / xi_alpha.clone()).neg() / den)
}

/// Transmission amplitude `T_{βα} = (1/ξ_α - 1/ξ_β) / (1 - 1/ξ_β)`.
pub fn t_amp<T: Scalar>(xi_beta: &T, xi_alpha: &T) -> Result<T, AlgebraError> {
    let one = T::one;
    if xi_beta.is_zero() || xi_alpha.is_zero() {
        return Err(AlgebraError::Pole);
    }
    let den = one() - one() / xi_beta.clone();
    if den.is_zero() {
        return Err(AlgebraError::Pole);
    }
    Ok((one() / xi_alpha.clone() - one() / xi_beta.clone()) / den)
}

/// The two-site scattering matrix `R_{βα}`:
/// `S_{βα}` on the diagonal where `i ≥ j`, `-1` on the diagonal where
/// `i < j`, `T_{βα}` at `(ij, ji)` for `i > j`, zero elsewhere.
pub fn build_r<T: Scalar>(n: u32, xi_beta: &T, xi_alpha: &T) -> Result<LocalMatrix<T>, AlgebraError> {
    let s = s_amp(xi_beta, xi_alpha)?;
    let t = t_amp(xi_beta, xi_alpha)?;
    let mut m = LocalMatrix::new(n);
    for i in 1..=n {
        for j in 1..=n {
            if i >= j {
                m.insert((i, j), (i, j), s.clone());
            } else {
                m.insert((i, j), (i, j), T::one().neg());
            }
            if i > j {
                m.insert((i, j), (j, i), t.clone());
            }
        }
    }
    Ok(m)
}

/// Sparse vector indexed by length-`N` species words over the alphabet
/// `1..=n`. All stored words share one letter multiset (one sector);
/// represents one amplitude column `A_σ · e_ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeVector<T> {
    n: u32,
    len: usize,
    coeffs: BTreeMap<SpeciesWord, T>,
}

impl<T: Scalar> AmplitudeVector<T> {
    pub fn zero(n: u32, len: usize) -> Self {
        AmplitudeVector {
            n,
            len,
            coeffs: BTreeMap::new(),
        }
    }

    /// The basis vector `e_ν`.
    pub fn basis(n: u32, word: &SpeciesWord) -> Self {
        assert!(word.max_letter() <= n, "letter outside alphabet");
        let mut v = AmplitudeVector::zero(n, word.len());
        v.coeffs.insert(word.clone(), T::one());
        v
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Word length `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, word: &SpeciesWord) -> T {
        self.coeffs.get(word).cloned().unwrap_or_else(T::zero)
    }

    /// Accumulates `value` onto the coefficient of `word`, dropping the entry
    /// if it cancels.
    pub fn add(&mut self, word: SpeciesWord, value: T) {
        debug_assert_eq!(word.len(), self.len);
        if value.is_zero() {
            return;
        }
        match self.coeffs.entry(word) {
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                let v = e.get().clone() + value;
                if v.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(value);
            }
        }
    }

    /// Nonzero coefficients in lexicographic word order.
    pub fn iter(&self) -> impl Iterator<Item = (&SpeciesWord, &T)> {
        self.coeffs.iter()
    }

    pub fn scale(&self, factor: T) -> Self {
        let mut out = AmplitudeVector::zero(self.n, self.len);
        for (w, v) in self.iter() {
            out.add(w.clone(), v.clone() * factor.clone());
        }
        out
    }

    /// Entry-wise difference `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, v) in other.iter() {
            out.add(w.clone(), v.clone().neg());
        }
        out
    }
}

impl AmplitudeVector<Complex64> {
    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Applies the tensor lift of `op` (identity on every slot except `l`, `l+1`;
/// `op` on the letters there, `l` 1-based) to `v`. The lifted matrix is never
/// materialized: the columns of `op` scatter each stored word directly.
pub fn apply_local<T: Scalar>(
    op: &LocalMatrix<T>,
    l: usize,
    v: &AmplitudeVector<T>,
) -> Result<AmplitudeVector<T>, AlgebraError> {
    if l < 1 || l + 1 > v.len {
        return Err(AlgebraError::SlotOutOfRange { slot: l, len: v.len });
    }
    let mut out = AmplitudeVector::zero(v.n, v.len);
    for (word, c) in v.iter() {
        let letters = word.letters();
        let (a, b) = (letters[l - 1], letters[l]);
        if a > op.n() || b > op.n() {
            return Err(AlgebraError::LetterOutOfRange {
                letter: a.max(b),
                n: op.n(),
            });
        }
        for ((i, j), val) in op.column((a, b)) {
            let mut w = letters.to_vec();
            w[l - 1] = *i;
            w[l] = *j;
            out.add(SpeciesWord::new_unchecked(w), val.clone() * c.clone());
        }
    }
    Ok(out)
}
