//! Register layouts, validated state and unitary wrappers, and the gate
//! families used by the cloning circuits.
//!
//! Tensor order is declaration order with the CTC register (if any) last; the
//! flat basis index is `Σ i_k · (product of later dims)`.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Complex64, Dims, Tolerances, ONE, ZERO};

/// Name given to the CTC register by the convenience constructors.
pub const CTC: &str = "CTC";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub dim: usize,
}

/// Ordered named registers; at most one is the CTC and it must be last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    registers: Vec<Register>,
    ctc: Option<usize>,
}

impl Layout {
    pub fn new(registers: Vec<Register>, ctc: Option<usize>) -> Result<Self> {
        for (i, r) in registers.iter().enumerate() {
            if r.dim < 2 {
                return Err(Error::BadRegisterDim(r.dim));
            }
            if registers[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::Layout(format!(
                    "duplicate register name `{}`",
                    r.name
                )));
            }
        }
        if let Some(c) = ctc {
            if c + 1 != registers.len() {
                return Err(Error::Layout(format!(
                    "CTC register must be last (index {c} of {})",
                    registers.len()
                )));
            }
        }
        Ok(Self { registers, ctc })
    }

    /// Layout of named CR registers followed by a CTC register named `CTC`.
    pub fn with_ctc(cr: &[(&str, usize)], ctc_dim: usize) -> Result<Self> {
        let mut regs: Vec<Register> = cr
            .iter()
            .map(|&(name, dim)| Register {
                name: name.to_string(),
                dim,
            })
            .collect();
        regs.push(Register {
            name: CTC.to_string(),
            dim: ctc_dim,
        });
        let idx = regs.len() - 1;
        Self::new(regs, Some(idx))
    }

    /// Layout without a CTC register.
    pub fn plain(regs: &[(&str, usize)]) -> Result<Self> {
        Self::new(
            regs.iter()
                .map(|&(name, dim)| Register {
                    name: name.to_string(),
                    dim,
                })
                .collect(),
            None,
        )
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn ctc_index(&self) -> Option<usize> {
        self.ctc
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.registers.iter().map(|r| r.dim).collect())
            .expect("validated at construction")
    }

    pub fn total_dim(&self) -> usize {
        self.registers.iter().map(|r| r.dim).product()
    }

    pub fn dim_of(&self, reg: usize) -> usize {
        self.registers[reg].dim
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    /// Indices of the chronology-respecting (non-CTC) registers.
    pub fn cr_indices(&self) -> Vec<usize> {
        (0..self.registers.len())
            .filter(|&i| Some(i) != self.ctc)
            .collect()
    }

    pub fn cr_dims(&self) -> Dims {
        self.dims().select(&self.cr_indices())
    }

    pub fn ctc_dim(&self) -> Option<usize> {
        self.ctc.map(|c| self.registers[c].dim)
    }

    /// Same layout with a register inserted at `position`.
    pub fn insert(&self, position: usize, name: &str, dim: usize) -> Result<Self> {
        let mut regs = self.registers.clone();
        if position > regs.len() {
            return Err(Error::Layout(format!(
                "insert position {position} out of range"
            )));
        }
        regs.insert(
            position,
            Register {
                name: name.to_string(),
                dim,
            },
        );
        let ctc = self.ctc.map(|c| if c >= position { c + 1 } else { c });
        Self::new(regs, ctc)
    }
}

/// Resolves a register reference against a layout.
pub trait RegisterRef {
    fn resolve(&self, layout: &Layout) -> Result<usize>;
}

impl RegisterRef for usize {
    fn resolve(&self, layout: &Layout) -> Result<usize> {
        if *self < layout.len() {
            Ok(*self)
        } else {
            Err(Error::UnknownRegister(format!("#{self}")))
        }
    }
}

impl RegisterRef for &str {
    fn resolve(&self, layout: &Layout) -> Result<usize> {
        layout.index_of(self)
    }
}

impl RegisterRef for String {
    fn resolve(&self, layout: &Layout) -> Result<usize> {
        layout.index_of(self)
    }
}

/// Hermitian, PSD, unit-trace operator over a register structure.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
    dims: Dims,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix, dims: Dims) -> Result<Self> {
        Self::new_with(mat, dims, &Tolerances::default())
    }

    pub fn new_with(mat: CMatrix, dims: Dims, tol: &Tolerances) -> Result<Self> {
        validate_density(&mat, &dims, tol)?;
        Ok(Self {
            mat: mat.hermitize(),
            dims,
        })
    }

    /// Single-register state on a space of dimension `mat.side()`.
    pub fn single(mat: CMatrix) -> Result<Self> {
        let dims = Dims::new(vec![mat.side()])?;
        Self::new(mat, dims)
    }

    /// `|ψ⟩⟨ψ|` on a single register.
    pub fn pure(psi: &PureState) -> Self {
        Self {
            mat: CMatrix::outer(psi.amplitudes()),
            dims: Dims::new(vec![psi.dim()]).expect("pure state dim >= 2"),
        }
    }

    pub fn basis(dim: usize, j: usize) -> Result<Self> {
        Ok(Self::pure(&PureState::basis(dim, j)?))
    }

    pub fn maximally_mixed(dims: Dims) -> Self {
        let n = dims.total();
        Self {
            mat: CMatrix::identity(n).scale_real(1.0 / n as f64),
            dims,
        }
    }

    /// Diagonal state `Σ p_k |k⟩⟨k|`.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::single(CMatrix::diag(probs))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.mat.side()
    }

    /// Same matrix viewed with a different register split.
    pub fn with_dims(self, dims: Dims) -> Result<Self> {
        if dims.total() != self.mat.side() {
            return Err(Error::DimensionMismatch {
                expected: self.mat.side(),
                got: dims.total(),
            });
        }
        Ok(Self {
            mat: self.mat,
            dims,
        })
    }

    /// Reduced state on the kept registers (ascending order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let mat = linalg::partial_trace(&self.mat, &self.dims, keep)?;
        let mut kept = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        Ok(Self {
            mat,
            dims: self.dims.select(&kept),
        })
    }

    /// Reduced state with the listed registers traced out.
    pub fn trace_out(&self, traced: &[usize]) -> Result<Self> {
        let keep: Vec<usize> = (0..self.dims.len())
            .filter(|r| !traced.contains(r))
            .collect();
        self.partial_trace(&keep)
    }

    pub fn kron(&self, other: &DensityMatrix) -> Self {
        let mut dims: Vec<usize> = self.dims.as_slice().to_vec();
        dims.extend_from_slice(other.dims.as_slice());
        Self {
            mat: linalg::kron(&self.mat, &other.mat),
            dims: Dims::new(dims).expect("concatenation of valid dims"),
        }
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &Unitary) -> Result<Self> {
        if u.side() != self.side() {
            return Err(Error::DimensionMismatch {
                expected: self.side(),
                got: u.side(),
            });
        }
        let m = &(u.matrix() * &self.mat) * &u.matrix().adjoint();
        Ok(Self {
            mat: m.hermitize(),
            dims: self.dims.clone(),
        })
    }

    /// Convex combination `w ρ + (1 - w) σ`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!(
                "mixing weight {w} outside [0, 1]"
            )));
        }
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.side(),
                got: other.side(),
            });
        }
        let mat = &self.mat.scale_real(w) + &other.mat.scale_real(1.0 - w);
        Ok(Self {
            mat,
            dims: self.dims.clone(),
        })
    }

    /// Permutes registers: register `i` of the result is register `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        Ok(Self {
            mat: linalg::permute_subsystems(&self.mat, &self.dims, perm)?,
            dims: self.dims.select(perm),
        })
    }

    /// Largest off-diagonal modulus in the computational basis.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.side();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    worst = worst.max(self.mat[(r, c)].norm());
                }
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(linalg::hermitian_eig(&self.mat)?.values)
    }
}

fn validate_density(mat: &CMatrix, dims: &Dims, tol: &Tolerances) -> Result<()> {
    if !mat.is_square() {
        return Err(Error::NotSquare {
            rows: mat.rows(),
            cols: mat.cols(),
        });
    }
    if mat.side() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            got: mat.side(),
        });
    }
    let eig = linalg::hermitian_eig_with(mat, tol)?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < -tol.psd {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    let tr = mat.trace();
    if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
        return Err(Error::BadTrace { trace: tr.re });
    }
    Ok(())
}

/// Unit-norm state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<Complex64>,
}

impl PureState {
    /// Accepts amplitudes whose norm is within 1e-10 of one.
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::BadRegisterDim(amps.len()));
        }
        let norm = vec_norm(&amps);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    /// Rescales any nonzero vector to unit norm.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self> {
        let norm = vec_norm(&amps);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Self::new(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn basis(dim: usize, j: usize) -> Result<Self> {
        if j >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {j} >= dimension {dim}"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[j] = ONE;
        Self::new(amps)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::pure(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Square matrix with `U†U = I` to 1e-10.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    mat: CMatrix,
}

impl Unitary {
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::new_with(mat, &Tolerances::default())
    }

    pub fn new_with(mat: CMatrix, tol: &Tolerances) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::NotSquare {
                rows: mat.rows(),
                cols: mat.cols(),
            });
        }
        let deviation = mat.unitary_deviation();
        if deviation.is_nan() || deviation > tol.unitary {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { mat })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: CMatrix::identity(n),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn side(&self) -> usize {
        self.mat.side()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    /// `next · self`: apply `self` first.
    pub fn then(&self, next: &Unitary) -> Result<Self> {
        if next.side() != self.side() {
            return Err(Error::DimensionMismatch {
                expected: self.side(),
                got: next.side(),
            });
        }
        Ok(Self {
            mat: next.matrix() * &self.mat,
        })
    }

    /// Ordered product of gates applied first to last.
    pub fn sequence<'a>(gates: impl IntoIterator<Item = &'a Unitary>, side: usize) -> Result<Self> {
        gates
            .into_iter()
            .try_fold(Self::identity(side), |acc, g| acc.then(g))
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        self.mat.mul_vec(psi)
    }
}

/// `N` distinct pure states in dimension `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    states: Vec<PureState>,
}

/// Minimum trace distance between projectors of distinct alphabet members.
pub const ALPHABET_MIN_DISTANCE: f64 = 1e-8;

impl Alphabet {
    pub fn new(states: Vec<PureState>) -> Result<Self> {
        let n = states.len();
        if n < 2 {
            return Err(Error::InvalidAlphabet(format!(
                "need at least 2 states, got {n}"
            )));
        }
        if let Some(s) = states.iter().find(|s| s.dim() != n) {
            return Err(Error::InvalidAlphabet(format!(
                "{n} states must live in dimension {n}, found dimension {}",
                s.dim()
            )));
        }
        let projectors: Vec<CMatrix> = states
            .iter()
            .map(|s| CMatrix::outer(s.amplitudes()))
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = linalg::trace_distance(&projectors[i], &projectors[j])?;
                if d <= ALPHABET_MIN_DISTANCE {
                    return Err(Error::InvalidAlphabet(format!(
                        "states {i} and {j} are not distinct (projector distance {d:e})"
                    )));
                }
            }
        }
        Ok(Self { states })
    }

    /// Fills up to `dim` states with computational basis vectors distinct
    /// from the given ones.
    pub fn padded(mut states: Vec<PureState>, dim: usize) -> Result<Self> {
        if states.len() > dim {
            return Err(Error::InvalidAlphabet(format!(
                "{} states do not fit dimension {dim}",
                states.len()
            )));
        }
        for k in 0..dim {
            if states.len() == dim {
                break;
            }
            let candidate = PureState::basis(dim, k)?;
            let cp = CMatrix::outer(candidate.amplitudes());
            let mut distinct = true;
            for s in &states {
                if linalg::trace_distance(&cp, &CMatrix::outer(s.amplitudes()))?
                    <= ALPHABET_MIN_DISTANCE
                {
                    distinct = false;
                    break;
                }
            }
            if distinct {
                states.push(candidate);
            }
        }
        Self::new(states)
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Builds a full-space operator from its action on basis states:
/// `action(digits)` lists `(image digits, amplitude)` pairs.
fn from_basis_action(
    dims: &Dims,
    action: impl Fn(&[usize]) -> Vec<(Vec<usize>, Complex64)>,
) -> CMatrix {
    let n = dims.total();
    let mut m = CMatrix::zeros(n, n);
    for col in 0..n {
        let digits = dims.digits_of(col);
        for (image, amp) in action(&digits) {
            m[(dims.index_of(&image), col)] += amp;
        }
    }
    m
}

/// Operator acting as `op` on the listed registers (in the listed order) and
/// as identity elsewhere.
pub fn embed_operator(layout: &Layout, regs: &[usize], op: &CMatrix) -> Result<CMatrix> {
    let dims = layout.dims();
    for (i, &r) in regs.iter().enumerate() {
        if r >= layout.len() {
            return Err(Error::UnknownRegister(format!("#{r}")));
        }
        if regs[..i].contains(&r) {
            return Err(Error::InvalidArgument(format!(
                "register #{r} listed twice"
            )));
        }
    }
    let sub = dims.select(regs);
    if !op.is_square() || op.side() != sub.total() {
        return Err(Error::DimensionMismatch {
            expected: sub.total(),
            got: op.rows(),
        });
    }
    Ok(from_basis_action(&dims, |digits| {
        let local: Vec<usize> = regs.iter().map(|&r| digits[r]).collect();
        let col = sub.index_of(&local);
        (0..sub.total())
            .filter_map(|row| {
                let amp = op[(row, col)];
                if amp == ZERO {
                    return None;
                }
                let mut image = digits.to_vec();
                for (&r, d) in regs.iter().zip(sub.digits_of(row)) {
                    image[r] = d;
                }
                Some((image, amp))
            })
            .collect()
    }))
}

/// `u` on one register, identity elsewhere.
pub fn embed_unitary(layout: &Layout, reg: impl RegisterRef, u: &Unitary) -> Result<Unitary> {
    let r = reg.resolve(layout)?;
    if u.side() != layout.dim_of(r) {
        return Err(Error::DimensionMismatch {
            expected: layout.dim_of(r),
            got: u.side(),
        });
    }
    Ok(Unitary {
        mat: embed_operator(layout, &[r], u.matrix())?,
    })
}

fn distinct_equal_dims(
    layout: &Layout,
    a: impl RegisterRef,
    b: impl RegisterRef,
) -> Result<(usize, usize, usize)> {
    let (a, b) = (a.resolve(layout)?, b.resolve(layout)?);
    if a == b {
        return Err(Error::InvalidArgument(format!(
            "gate needs two distinct registers, got #{a} twice"
        )));
    }
    let (da, db) = (layout.dim_of(a), layout.dim_of(b));
    if da != db {
        return Err(Error::DimensionMismatch {
            expected: da,
            got: db,
        });
    }
    Ok((a, b, da))
}

/// Exchanges the basis digits of two equal-dimension registers.
pub fn swap_gate(layout: &Layout, r1: impl RegisterRef, r2: impl RegisterRef) -> Result<Unitary> {
    let (a, b, _) = distinct_equal_dims(layout, r1, r2)?;
    Ok(Unitary {
        mat: from_basis_action(&layout.dims(), |digits| {
            let mut image = digits.to_vec();
            image.swap(a, b);
            vec![(image, ONE)]
        }),
    })
}

/// `|i⟩_ctrl |j⟩_tgt ↦ |i⟩_ctrl |j + i mod N⟩_tgt`.
pub fn csum_gate(
    layout: &Layout,
    ctrl: impl RegisterRef,
    tgt: impl RegisterRef,
) -> Result<Unitary> {
    let (c, t, n) = distinct_equal_dims(layout, ctrl, tgt)?;
    Ok(Unitary {
        mat: from_basis_action(&layout.dims(), |digits| {
            let mut image = digits.to_vec();
            image[t] = (digits[t] + digits[c]) % n;
            vec![(image, ONE)]
        }),
    })
}

/// `Σ_k |k⟩⟨k|_ctrl ⊗ (U_k or U_k†)_tgt`, identity on other registers.
pub fn select_gate(
    layout: &Layout,
    ctrl: impl RegisterRef,
    tgt: impl RegisterRef,
    family: &[Unitary],
    adjoint: bool,
) -> Result<Unitary> {
    let (c, t) = (ctrl.resolve(layout)?, tgt.resolve(layout)?);
    if c == t {
        return Err(Error::InvalidArgument(
            "select needs distinct control and target".into(),
        ));
    }
    let (dc, dt) = (layout.dim_of(c), layout.dim_of(t));
    if family.len() != dc {
        return Err(Error::DimensionMismatch {
            expected: dc,
            got: family.len(),
        });
    }
    if let Some(u) = family.iter().find(|u| u.side() != dt) {
        return Err(Error::DimensionMismatch {
            expected: dt,
            got: u.side(),
        });
    }
    let blocks: Vec<CMatrix> = family
        .iter()
        .map(|u| {
            if adjoint {
                u.matrix().adjoint()
            } else {
                u.matrix().clone()
            }
        })
        .collect();
    Ok(Unitary {
        mat: from_basis_action(&layout.dims(), |digits| {
            let block = &blocks[digits[c]];
            (0..dt)
                .filter(|&row| block[(row, digits[t])] != ZERO)
                .map(|row| {
                    let mut image = digits.to_vec();
                    image[t] = row;
                    (image, block[(row, digits[t])])
                })
                .collect()
        }),
    })
}

/// Unitary `U` with `U·ψ = e_j` exactly (no residual global phase).
///
/// Householder reflection through `v = ψ - e^{iθ} e_j`, `θ = arg ψ_j`, then a
/// diagonal phase fix on entry `j`. The `j` component of `v` is evaluated as
/// `-e^{iθ} r / (1 + |ψ_j|)` with `r = Σ_{k≠j} |ψ_k|²`, which avoids the
/// cancellation in `|ψ_j| - 1` when `ψ` is close to `e_j`.
pub fn basis_mapper(psi: &PureState, j: usize) -> Result<Unitary> {
    let n = psi.dim();
    if j >= n {
        return Err(Error::InvalidArgument(format!(
            "basis index {j} >= dimension {n}"
        )));
    }
    let norm = vec_norm(psi.amplitudes());
    let amps: Vec<Complex64> = psi.amplitudes().iter().map(|a| a / norm).collect();
    let a = amps[j].norm();
    let phase = if a > 0.0 { amps[j] / a } else { ONE };
    let r: f64 = amps
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, z)| z.norm_sqr())
        .sum();

    let mut u = if r == 0.0 {
        CMatrix::identity(n)
    } else {
        let mut v = amps.clone();
        v[j] = -phase * (r / (1.0 + a));
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        CMatrix::from_fn(n, n, |row, col| {
            let delta = if row == col { ONE } else { ZERO };
            delta - v[row] * v[col].conj() * (2.0 / vv)
        })
    };
    let fix = phase.conj();
    for col in 0..n {
        u[(j, col)] *= fix;
    }
    Unitary::new(u)
}
