//! Dense complex matrix primitives.
//!
//! Everything in the crate is carried by [`CMatrix`], a row-major dense
//! matrix of `Complex64`. Multipartite structure is described separately by
//! [`Dims`]; the helpers here ([`kron`], [`partial_trace`],
//! [`permute_subsystems`]) interpret a matrix through a `Dims` value.
//!
//! All spectral quantities (square roots, trace norms, PSD checks) go through
//! [`hermitian_eig`], a cyclic complex Jacobi solver, so they share one set of
//! [`Tolerances`].

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub use num_complex::Complex64;

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Numeric tolerances shared by validation and spectral routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max elementwise `|h - h†|` accepted as Hermitian.
    pub herm: f64,
    /// Most negative eigenvalue accepted as PSD (clamped to zero).
    pub psd: f64,
    /// Elementwise reconstruction bound for square roots and decompositions.
    pub reconstruction: f64,
    /// Max `|Tr ρ - 1|` for density matrices.
    pub trace: f64,
    /// Max elementwise `|U†U - I|` for unitaries.
    pub unitary: f64,
    /// Eigenvalues below `sqrt_floor * max(1, λ_max)` are treated as zero by
    /// [`psd_sqrt`]; keeps rounding noise out of square roots.
    pub sqrt_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-12,
            psd: 1e-10,
            reconstruction: 1e-9,
            trace: 1e-10,
            unitary: 1e-10,
            sqrt_floor: 1e-14,
        }
    }
}

/// Ordered register dimensions of a multipartite space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dims(Vec<usize>);

impl Dims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::BadRegisterDim(d));
        }
        Ok(Self(dims))
    }

    /// Product of all register dimensions (1 for no registers).
    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Row-major strides: stride of register `k` is the product of later dims.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.0[k + 1];
        }
        strides
    }

    /// Sub-dimensions for a set of register indices, in the given order.
    pub fn select(&self, regs: &[usize]) -> Dims {
        Dims(regs.iter().map(|&r| self.0[r]).collect())
    }

    /// Flat index from per-register digits.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.0)
            .fold(0, |acc, (&digit, &d)| acc * d + digit)
    }

    /// Per-register digits of a flat index.
    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.0.len()];
        for k in (0..self.0.len()).rev() {
            digits[k] = index % self.0[k];
            index /= self.0[k];
        }
        digits
    }
}

impl From<Dims> for Vec<usize> {
    fn from(d: Dims) -> Self {
        d.0
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from rows of equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch {
                expected: n_cols,
                got: bad.len(),
            });
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    /// Real-valued matrix from row slices; handy for literals.
    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn outer(psi: &[Complex64]) -> Self {
        Self::from_fn(psi.len(), psi.len(), |r, c| psi[r] * psi[c].conj())
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

    /// Side length of a square matrix (row count otherwise).
    pub fn side(&self) -> usize {
        self.rows
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max elementwise `|self - other|`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max elementwise `|m - m†|`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// `(m + m†) / 2`.
    pub fn hermitize(&self) -> Self {
        let n = self.rows;
        Self::from_fn(n, n, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    /// Max elementwise `|U†U - I|`.
    pub fn unitary_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.rows))
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols, "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Row-major vectorization: `vec(m)[r * cols + c] = m[r, c]`.
    pub fn vectorize(&self) -> Vec<Complex64> {
        self.data.clone()
    }

    pub fn from_vectorized(side: usize, v: &[Complex64]) -> Result<Self> {
        Self::new(side, side, v.to_vec())
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "matrix sum shape mismatch"
        );
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "matrix difference shape mismatch"
        );
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

fn require_square(m: &CMatrix) -> Result<usize> {
    if m.is_square() {
        Ok(m.rows)
    } else {
        Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        })
    }
}

/// Kronecker product `a ⊗ b`: `(a⊗b)[i·rb + k, j·cb + l] = a[i,j] · b[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (rb, cb) = (b.rows, b.cols);
    let mut out = CMatrix::zeros(a.rows * rb, a.cols * cb);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Left-to-right Kronecker product of a sequence; `[1]` for an empty one.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::identity(1), |acc, f| kron(&acc, f))
}

/// Reduced operator on the registers in `keep` (kept in ascending order).
///
/// An empty `keep` yields the 1×1 matrix `[Tr m]`.
pub fn partial_trace(m: &CMatrix, dims: &Dims, keep: &[usize]) -> Result<CMatrix> {
    let n = require_square(m)?;
    if n != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            got: n,
        });
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(format!(
            "register index {bad} out of range for {} registers",
            dims.len()
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|r| !kept.contains(r)).collect();

    let strides = dims.strides();
    let offsets = |regs: &[usize]| -> Vec<usize> {
        let sub = dims.select(regs);
        (0..sub.total())
            .map(|flat| {
                sub.digits_of(flat)
                    .iter()
                    .zip(regs)
                    .map(|(&digit, &reg)| digit * strides[reg])
                    .sum()
            })
            .collect()
    };
    let kept_off = offsets(&kept);
    let traced_off = offsets(&traced);

    let k = kept_off.len();
    let mut out = CMatrix::zeros(k, k);
    for (r, &ro) in kept_off.iter().enumerate() {
        for (c, &co) in kept_off.iter().enumerate() {
            out[(r, c)] = traced_off.iter().map(|&t| m[(ro + t, co + t)]).sum();
        }
    }
    Ok(out)
}

/// Reorders tensor factors: register `i` of the result is register `perm[i]`
/// of the input.
pub fn permute_subsystems(m: &CMatrix, dims: &Dims, perm: &[usize]) -> Result<CMatrix> {
    let n = require_square(m)?;
    if n != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            got: n,
        });
    }
    let mut seen = perm.to_vec();
    seen.sort_unstable();
    if seen != (0..dims.len()).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument(format!(
            "{perm:?} is not a permutation"
        )));
    }
    let new_dims = dims.select(perm);
    // map[new_flat] = old_flat
    let map: Vec<usize> = (0..n)
        .map(|flat| {
            let new_digits = new_dims.digits_of(flat);
            let mut old_digits = vec![0; dims.len()];
            for (i, &p) in perm.iter().enumerate() {
                old_digits[p] = new_digits[i];
            }
            dims.index_of(&old_digits)
        })
        .collect();
    Ok(CMatrix::from_fn(n, n, |r, c| m[(map[r], map[c])]))
}

/// Eigen-decomposition `h = V · diag(values) · V†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl HermitianEig {
    /// `V · diag(f(λ)) · V†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        CMatrix::from_fn(n, n, |r, c| {
            (0..n)
                .filter(|&k| mapped[k] != 0.0)
                .map(|k| v[(r, k)] * v[(c, k)].conj() * mapped[k])
                .sum()
        })
    }
}

pub fn hermitian_eig(h: &CMatrix) -> Result<HermitianEig> {
    hermitian_eig_with(h, &Tolerances::default())
}

/// Cyclic complex Jacobi eigensolver.
pub fn hermitian_eig_with(h: &CMatrix, tol: &Tolerances) -> Result<HermitianEig> {
    let n = require_square(h)?;
    let asymmetry = h.hermitian_asymmetry();
    if asymmetry.is_nan() || asymmetry > tol.herm {
        return Err(Error::NotHermitian { asymmetry });
    }
    let mut a = h.hermitize();
    let mut v = CMatrix::identity(n);

    let frob: f64 = a.data.iter().map(|z| z.norm_sqr()).sum();
    let threshold = (f64::EPSILON * f64::EPSILON) * frob;
    const MAX_SWEEPS: usize = 100;
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[(r, c)].norm_sqr())
            .sum();
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::Eigensolver(format!(
            "Jacobi iteration did not converge for a {n}x{n} matrix"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&x, &y| diag[x].total_cmp(&diag[y]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEig { values, vectors })
}

/// Annihilates `a[p,q]` with a unitary rotation on columns/rows `p, q`.
fn jacobi_rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let b = a[(p, q)];
    let b_abs = b.norm();
    if b_abs == 0.0 {
        return;
    }
    let phase = b / b_abs;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * b_abs);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
    let g00 = Complex64::new(c, 0.0);
    let g01 = Complex64::new(s, 0.0);
    let g10 = -phase.conj() * s;
    let g11 = phase.conj() * c;

    let n = a.rows;
    // A ← A·G
    for r in 0..n {
        let x = a[(r, p)];
        let y = a[(r, q)];
        a[(r, p)] = x * g00 + y * g10;
        a[(r, q)] = x * g01 + y * g11;
    }
    // A ← G†·A
    for c_ in 0..n {
        let x = a[(p, c_)];
        let y = a[(q, c_)];
        a[(p, c_)] = g00.conj() * x + g10.conj() * y;
        a[(q, c_)] = g01.conj() * x + g11.conj() * y;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
    for r in 0..n {
        let x = v[(r, p)];
        let y = v[(r, q)];
        v[(r, p)] = x * g00 + y * g10;
        v[(r, q)] = x * g01 + y * g11;
    }
}

pub fn psd_sqrt(h: &CMatrix) -> Result<CMatrix> {
    psd_sqrt_with(h, &Tolerances::default())
}

/// Unique positive square root of a PSD matrix.
pub fn psd_sqrt_with(h: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let eig = hermitian_eig_with(h, tol)?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < -tol.psd {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    let max = eig.values.last().copied().unwrap_or(0.0);
    let floor = tol.sqrt_floor * max.max(1.0);
    Ok(eig.map_values(|l| if l <= floor { 0.0 } else { l.sqrt() }))
}

/// Sum of the absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(h: &CMatrix) -> Result<f64> {
    Ok(hermitian_eig(h)?.values.iter().map(|l| l.abs()).sum())
}

/// `½ Σ |λ_i(a - b)|`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            got: b.rows,
        });
    }
    require_square(a)?;
    // Asymmetry of the difference can be twice that of each operand.
    let diff = (a - b).hermitize();
    Ok(0.5 * trace_norm(&diff)?)
}
