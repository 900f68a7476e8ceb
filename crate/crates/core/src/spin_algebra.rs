//! Dense complex linear algebra and spin-1/2 operator construction.
//!
//! The state space of a radical pair with `p` spin-1/2 protons is the tensor
//! product of `p + 2` two-level factors: electron 1, electron 2, then the
//! nuclei in order. Every operator is stored densely in row-major order; the
//! largest supported system (`p = 7`) has dimension 512.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default upper bound on the proton count accepted by [`build_spin_system`].
pub const DEFAULT_MAX_PROTONS: usize = 7;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if the length does not
    /// match `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<Complex64>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must equal rows * cols");
        Self { rows, cols, entries }
    }

    pub fn from_rows<const C: usize>(rows: &[[Complex64; C]]) -> Self {
        let entries = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_row_major(rows.len(), C, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `self += factor * other`, in place.
    pub fn add_scaled(&mut self, factor: Complex64, other: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            *a += factor * b;
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.entries[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.entries[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.entries[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Writes `self * x` into `out`.
    pub fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .row(i)
                .iter()
                .zip(x)
                .fold(ZERO, |acc, (&a, &b)| acc + a * b);
        }
    }

    pub fn apply(&self, x: &ComplexVector) -> ComplexVector {
        let mut out = vec![ZERO; self.rows];
        self.apply_into(x.as_slice(), &mut out);
        ComplexVector::from(out)
    }

    /// `⟨x| self |y⟩`, antilinear in `x`.
    pub fn expectation(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        (0..self.rows)
            .map(|i| {
                let row_dot = self
                    .row(i)
                    .iter()
                    .zip(y)
                    .fold(ZERO, |acc, (&a, &b)| acc + a * b);
                x[i].conj() * row_dot
            })
            .sum()
    }

    pub fn commutator(&self, other: &ComplexMatrix) -> ComplexMatrix {
        &self.matmul(other) - &other.matmul(self)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(ONE, rhs);
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(-ONE, rhs);
        out
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![ZERO; dim])
    }

    /// The standard basis vector `e_index` (zero-based).
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = ONE;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &ComplexVector) -> Complex64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(ZERO, |acc, (a, &b)| acc + a.conj() * b)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs_diff(&self, other: &ComplexVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl From<Vec<Complex64>> for ComplexVector {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// The Pauli matrices `(σx, σy, σz)`.
pub fn pauli() -> [ComplexMatrix; 3] {
    [
        ComplexMatrix::from_rows(&[[ZERO, ONE], [ONE, ZERO]]),
        ComplexMatrix::from_rows(&[[ZERO, -I], [I, ZERO]]),
        ComplexMatrix::from_rows(&[[ONE, ZERO], [ZERO, -ONE]]),
    ]
}

/// Cartesian components `(x, y, z)` of a vector operator.
pub type SpinTriple = [ComplexMatrix; 3];

/// Spin operators and singlet/triplet projectors for a radical pair coupled to
/// `p` protons.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    protons: usize,
    dim: usize,
    s1: SpinTriple,
    s2: SpinTriple,
    nuclei: Vec<SpinTriple>,
    projector_singlet: ComplexMatrix,
    projector_triplet: ComplexMatrix,
}

impl SpinSystem {
    pub fn protons(&self) -> usize {
        self.protons
    }

    /// State dimension `2^(p+2)`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of triplet initial states, `3 * 2^p`.
    pub fn triplet_count(&self) -> usize {
        3 << self.protons
    }

    pub fn s1(&self) -> &SpinTriple {
        &self.s1
    }

    pub fn s2(&self) -> &SpinTriple {
        &self.s2
    }

    pub fn nuclei(&self) -> &[SpinTriple] {
        &self.nuclei
    }

    pub fn projector_singlet(&self) -> &ComplexMatrix {
        &self.projector_singlet
    }

    pub fn projector_triplet(&self) -> &ComplexMatrix {
        &self.projector_triplet
    }

    /// `S₁ · S₂ = Σ_i S₁i S₂i`.
    pub fn electron_dot(&self) -> ComplexMatrix {
        let mut dot = ComplexMatrix::zeros(self.dim, self.dim);
        for (a, b) in self.s1.iter().zip(&self.s2) {
            dot.add_scaled(ONE, &a.matmul(b));
        }
        dot
    }
}

/// Places `(1/2) op` in tensor slot `slot` of an `slots`-factor chain, with
/// identities elsewhere.
fn embed_half(op: &ComplexMatrix, slot: usize, slots: usize) -> ComplexMatrix {
    let e2 = ComplexMatrix::identity(2);
    let half = op.scale_real(0.5);
    (0..slots).fold(ComplexMatrix::identity(1), |acc, s| {
        if s == slot {
            kron(&acc, &half)
        } else {
            kron(&acc, &e2)
        }
    })
}

fn embed_triple(slot: usize, slots: usize) -> SpinTriple {
    let [sx, sy, sz] = pauli();
    [
        embed_half(&sx, slot, slots),
        embed_half(&sy, slot, slots),
        embed_half(&sz, slot, slots),
    ]
}

/// Builds the spin operators for `protons` nuclei, capped at
/// [`DEFAULT_MAX_PROTONS`].
pub fn build_spin_system(protons: usize) -> Result<SpinSystem> {
    build_spin_system_capped(protons, DEFAULT_MAX_PROTONS)
}

pub fn build_spin_system_capped(protons: usize, max_protons: usize) -> Result<SpinSystem> {
    if protons < 1 || protons > max_protons {
        return Err(Error::InvalidProtonCount {
            protons,
            max: max_protons,
        });
    }
    let slots = protons + 2;
    let dim = 1usize << slots;
    let mut sys = SpinSystem {
        protons,
        dim,
        s1: embed_triple(0, slots),
        s2: embed_triple(1, slots),
        nuclei: (0..protons).map(|j| embed_triple(j + 2, slots)).collect(),
        projector_singlet: ComplexMatrix::zeros(dim, dim),
        projector_triplet: ComplexMatrix::zeros(dim, dim),
    };
    let (ps, pt) = build_projectors(&sys);
    sys.projector_singlet = ps;
    sys.projector_triplet = pt;
    Ok(sys)
}

/// Singlet and triplet projectors `P_S = I/4 − S₁·S₂` and `P_T = I − P_S`.
///
/// The coefficient of the identity is 1/4, the value for which `P_S` is an
/// idempotent projector of rank `2^p`.
pub fn build_projectors(sys: &SpinSystem) -> (ComplexMatrix, ComplexMatrix) {
    let identity = ComplexMatrix::identity(sys.dim);
    let ps = &identity.scale_real(0.25) - &sys.electron_dot();
    let pt = &identity - &ps;
    (ps, pt)
}
