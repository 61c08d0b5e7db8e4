//! Exact arithmetic in a prime field GF(p) and dense linear algebra over it.
//!
//! Everything downstream (code construction, the feasibility decoder, the
//! attack construction) reduces to Gaussian elimination over GF(p), so this
//! module carries the one elimination routine the crate trusts: reduced row
//! echelon form with the first nonzero pivot taken in column order.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mersenne prime 2^31 - 1, the default working modulus.
pub const DEFAULT_MODULUS: u64 = 2_147_483_647;

/// Smallest modulus accepted by [`Field::new`].
pub const MIN_MODULUS: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NonPrimeModulus(u64),
    #[error("modulus {0} is below the minimum of {MIN_MODULUS}")]
    ModulusTooSmall(u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("value {value} is not a canonical element of GF({modulus})")]
    OutOfRange { value: u64, modulus: u64 },
}

/// A canonical representative in `[0, p)`.
///
/// Elements do not carry their modulus; arithmetic goes through a [`Field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fe(u64);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// GF(p) for a prime `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Field {
    p: u64,
}

impl Default for Field {
    fn default() -> Self {
        Field { p: DEFAULT_MODULUS }
    }
}

impl Field {
    /// Production constructor: `p` must be prime and at least [`MIN_MODULUS`].
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if p < MIN_MODULUS {
            return Err(FieldError::ModulusTooSmall(p));
        }
        Self::new_unbounded(p)
    }

    /// Like [`Field::new`] without the size floor. Intended for unit tests
    /// that enumerate small fields exhaustively.
    pub fn new_unbounded(p: u64) -> Result<Self, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NonPrimeModulus(p));
        }
        Ok(Field { p })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.p
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn elem(&self, v: u64) -> Fe {
        Fe(v % self.p)
    }

    pub fn from_i64(&self, v: i64) -> Fe {
        Fe((v as i128).rem_euclid(self.p as i128) as u64)
    }

    /// Accepts `v` only if it is already canonical.
    pub fn checked_elem(&self, v: u64) -> Result<Fe, FieldError> {
        if v < self.p {
            Ok(Fe(v))
        } else {
            Err(FieldError::OutOfRange {
                value: v,
                modulus: self.p,
            })
        }
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        let s = a.0 + b.0;
        Fe(if s >= self.p { s - self.p } else { s })
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        Fe(if a.0 >= b.0 { a.0 - b.0 } else { a.0 + self.p - b.0 })
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        if a.0 == 0 {
            a
        } else {
            Fe(self.p - a.0)
        }
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        if self.p <= u32::MAX as u64 {
            Fe(a.0 * b.0 % self.p)
        } else {
            Fe(((a.0 as u128 * b.0 as u128) % self.p as u128) as u64)
        }
    }

    pub fn pow(&self, mut base: Fe, mut exp: u64) -> Fe {
        let mut acc = Fe::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inv(&self, a: Fe) -> Result<Fe, FieldError> {
        if a.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        // invariant: r0 = s0 * a (mod p), r1 = s1 * a (mod p); |s| <= p
        macro_rules! euclid {
            ($t:ty) => {{
                let (mut r0, mut r1) = (self.p as $t, a.0 as $t);
                let (mut s0, mut s1): ($t, $t) = (0, 1);
                while r1 != 0 {
                    let q = r0 / r1;
                    (r0, r1) = (r1, r0 - q * r1);
                    (s0, s1) = (s1, s0 - q * s1);
                }
                debug_assert_eq!(r0, 1);
                s0.rem_euclid(self.p as $t) as u64
            }};
        }
        Ok(Fe(if self.p <= i64::MAX as u64 { euclid!(i64) } else { euclid!(i128) }))
    }

    pub fn div(&self, a: Fe, b: Fe) -> Result<Fe, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Uniform element of GF(p).
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        Fe(rng.gen_range(0..self.p))
    }

    /// Uniform element of GF(p) \ {0}.
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        Fe(rng.gen_range(1..self.p))
    }

    pub fn dot(&self, a: &[Fe], b: &[Fe]) -> Fe {
        a.iter()
            .zip(b)
            .fold(Fe::ZERO, |acc, (&x, &y)| self.add(acc, self.mul(x, y)))
    }
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &q in &SMALL {
        if n.is_multiple_of(q) {
            return n == q;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &SMALL {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Dense row-major matrix over GF(p).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Fe>,
}

impl FieldMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FieldMatrix {
            rows,
            cols,
            data: vec![Fe::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Fe::ONE;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Fe>>) -> Result<Self, FieldError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(FieldError::DimensionMismatch(format!(
                "row {bad} has length {} but row 0 has length {cols}",
                rows[bad].len()
            )));
        }
        let n = rows.len();
        Ok(FieldMatrix {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Builds a matrix from raw integers, reducing each mod p.
    pub fn from_u64_rows(field: &Field, rows: &[&[u64]]) -> Result<Self, FieldError> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| field.elem(v)).collect())
                .collect(),
        )
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Fe] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Fe> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Fe>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Copies the submatrix on the given row and column indices, in order.
    pub fn select(&self, row_set: &[usize], col_set: &[usize]) -> Result<Self, FieldError> {
        if let Some(&r) = row_set.iter().find(|&&r| r >= self.rows) {
            return Err(FieldError::DimensionMismatch(format!(
                "row index {r} out of range for {} rows",
                self.rows
            )));
        }
        if let Some(&c) = col_set.iter().find(|&&c| c >= self.cols) {
            return Err(FieldError::DimensionMismatch(format!(
                "column index {c} out of range for {} columns",
                self.cols
            )));
        }
        let mut m = Self::zeros(row_set.len(), col_set.len());
        for (i, &r) in row_set.iter().enumerate() {
            for (j, &c) in col_set.iter().enumerate() {
                m[(i, j)] = self[(r, c)];
            }
        }
        Ok(m)
    }

    pub fn mul_vec(&self, field: &Field, v: &[Fe]) -> Result<Vec<Fe>, FieldError> {
        if v.len() != self.cols {
            return Err(FieldError::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| field.dot(self.row(i), v)).collect())
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.row(i).iter().all(|x| x.is_zero())
    }
}

impl std::ops::Index<(usize, usize)> for FieldMatrix {
    type Output = Fe;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Fe {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for FieldMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Fe {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Result of solving `A x = b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub consistent: bool,
    /// One solution with every free variable set to zero.
    pub particular: Option<Vec<Fe>>,
    /// Basis of `{x : A x = 0}`; always `cols - rank` vectors.
    pub nullspace_basis: Vec<Vec<Fe>>,
    /// Coordinates whose value is the same in every solution.
    pub pinned_coordinates: BTreeSet<usize>,
    pub rank: usize,
}

impl SolveOutcome {
    pub fn is_pinned(&self, j: usize) -> bool {
        self.pinned_coordinates.contains(&j)
    }
}

/// Reduced row echelon form of `m` (in place) restricted to the first
/// `pivot_cols` columns. Returns the pivot column of each pivot row.
fn rref_in_place(field: &Field, m: &mut FieldMatrix, pivot_cols: usize) -> Vec<usize> {
    let (rows, cols) = (m.rows, m.cols);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..pivot_cols {
        if r == rows {
            break;
        }
        let Some(pr) = (r..rows).find(|&i| !m[(i, c)].is_zero()) else {
            continue;
        };
        if pr != r {
            for j in 0..cols {
                m.data.swap(pr * cols + j, r * cols + j);
            }
        }
        let inv = field.inv(m[(r, c)]).expect("pivot is nonzero");
        for j in c..cols {
            m[(r, j)] = field.mul(m[(r, j)], inv);
        }
        for i in 0..rows {
            if i == r {
                continue;
            }
            let factor = m[(i, c)];
            if factor.is_zero() {
                continue;
            }
            for j in c..cols {
                let sub = field.mul(factor, m[(r, j)]);
                m[(i, j)] = field.sub(m[(i, j)], sub);
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Gaussian elimination on `[A | b]`.
pub fn solve(field: &Field, a: &FieldMatrix, b: &[Fe]) -> Result<SolveOutcome, FieldError> {
    if a.rows != b.len() {
        return Err(FieldError::DimensionMismatch(format!(
            "{} equations but right-hand side has {} entries",
            a.rows,
            b.len()
        )));
    }
    let n = a.cols;
    let mut aug = FieldMatrix::zeros(a.rows, n + 1);
    for i in 0..a.rows {
        aug.data[i * (n + 1)..i * (n + 1) + n].copy_from_slice(a.row(i));
        aug[(i, n)] = b[i];
    }
    let pivots = rref_in_place(field, &mut aug, n);
    let rank = pivots.len();
    let consistent = (rank..a.rows).all(|i| aug[(i, n)].is_zero());

    let mut is_pivot = vec![None; n];
    for (row, &c) in pivots.iter().enumerate() {
        is_pivot[c] = Some(row);
    }

    let particular = consistent.then(|| {
        let mut x = vec![Fe::ZERO; n];
        for (row, &c) in pivots.iter().enumerate() {
            x[c] = aug[(row, n)];
        }
        x
    });

    let mut nullspace_basis = Vec::with_capacity(n - rank);
    for free in (0..n).filter(|&c| is_pivot[c].is_none()) {
        let mut v = vec![Fe::ZERO; n];
        v[free] = Fe::ONE;
        for (row, &c) in pivots.iter().enumerate() {
            v[c] = field.neg(aug[(row, free)]);
        }
        nullspace_basis.push(v);
    }

    let pinned_coordinates = (0..n)
        .filter(|&j| nullspace_basis.iter().all(|v| v[j].is_zero()))
        .collect();

    Ok(SolveOutcome {
        consistent,
        particular,
        nullspace_basis,
        pinned_coordinates,
        rank,
    })
}

/// Basis of the right nullspace of `a`.
pub fn nullspace(field: &Field, a: &FieldMatrix) -> Vec<Vec<Fe>> {
    let zeros = vec![Fe::ZERO; a.rows];
    solve(field, a, &zeros)
        .expect("dimensions agree by construction")
        .nullspace_basis
}

pub fn rank(field: &Field, a: &FieldMatrix) -> usize {
    let mut m = a.clone();
    rref_in_place(field, &mut m, a.cols).len()
}

/// True iff the square submatrix on `row_set` x `col_set` has full rank.
pub fn submatrix_nonsingular(
    field: &Field,
    a: &FieldMatrix,
    row_set: &[usize],
    col_set: &[usize],
) -> Result<bool, FieldError> {
    if row_set.len() != col_set.len() {
        return Err(FieldError::DimensionMismatch(format!(
            "{} rows against {} columns",
            row_set.len(),
            col_set.len()
        )));
    }
    let sub = a.select(row_set, col_set)?;
    Ok(rank(field, &sub) == row_set.len())
}
