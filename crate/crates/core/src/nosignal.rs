//! No-signalling checks for cloners fed half of an entangled state.
//!
//! The target register `A` is entangled with a reference `R` that the cloner
//! never touches. The layout becomes `A ⊗ B ⊗ R ⊗ CTC`. Because the fixed
//! point depends on the CR input only through `ρ_A = Tr_R ρ_AR`, the `A ⊗ B`
//! output should equal the plain clone of `ρ_A`. An operation on `R` should
//! leave that output unchanged.

use crate::cloning::{self, ClonerCircuit};
use crate::ctc_engine::{self, FixedPointResult, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Dims};
use crate::quantum::{embed_operator, DensityMatrix, Layout};

/// Trace-preservation tolerance for channels applied to `R`.
pub const CHANNEL_TP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NoSignalReport {
    /// Output on `A ⊗ B ⊗ R`.
    pub rho_tot: DensityMatrix,
    pub fixed_point: FixedPointResult,
    /// `Tr_R ρ_tot`.
    pub reduced_ab: DensityMatrix,
    /// Output of the cloner run on `Tr_R` of the joint input alone.
    pub expected_ab: DensityMatrix,
    /// Trace distance between `reduced_ab` and `expected_ab`.
    pub deviation: f64,
    /// `Tr_AB ρ_tot`; the reference marginal, which the circuit never touches.
    pub reduced_r: DensityMatrix,
    /// Trace distance between `reduced_r` and `Tr_A` of the joint input.
    pub reference_deviation: f64,
}

fn joint_dims(cloner: &ClonerCircuit, joint: &DensityMatrix) -> Result<(usize, usize)> {
    let n = cloner.dim();
    if !joint.side().is_multiple_of(n) || joint.side() / n < 2 {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: joint.side(),
        });
    }
    Ok((n, joint.side() / n))
}

/// Runs `cloner` with `A` taken from a joint state on `A ⊗ R`.
pub fn run_entangled_clone(
    cloner: &ClonerCircuit,
    joint_input: &DensityMatrix,
    opts: &SolverOptions,
) -> Result<NoSignalReport> {
    let (n, r_dim) = joint_dims(cloner, joint_input)?;
    let joint = joint_input.clone().with_dims(Dims::new(vec![n, r_dim])?)?;
    let rho_a = joint.partial_trace(&[0])?;
    let rho_r = joint.partial_trace(&[1])?;

    // A ⊗ R ⊗ B reordered to A ⊗ B ⊗ R
    let cr = joint
        .kron(&DensityMatrix::basis(n, 0)?)
        .permute(&[0, 2, 1])?;
    let base = cloner.problem(&rho_a)?;
    let problem = base.with_spectator(2, "R", r_dim, cr)?;
    let (rho_tot, fixed_point) = ctc_engine::evolve(&problem, opts)?;

    let expected_ab = cloning::run_clone(cloner, &rho_a, opts)?.output;
    let reduced_ab = rho_tot.partial_trace(&[0, 1])?;
    let reduced_r = rho_tot.partial_trace(&[2])?;
    Ok(NoSignalReport {
        deviation: linalg::trace_distance(reduced_ab.matrix(), expected_ab.matrix())?,
        reference_deviation: linalg::trace_distance(reduced_r.matrix(), rho_r.matrix())?,
        rho_tot,
        fixed_point,
        reduced_ab,
        expected_ab,
        reduced_r,
    })
}

fn check_trace_preserving(kraus: &[CMatrix], dim: usize) -> Result<()> {
    if kraus.is_empty() {
        return Err(Error::InvalidArgument(
            "channel has no Kraus operators".into(),
        ));
    }
    for k in kraus {
        if k.rows() != dim || k.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: k.rows().max(k.cols()),
            });
        }
    }
    let sum = kraus.iter().fold(CMatrix::zeros(dim, dim), |acc, k| {
        &acc + &(&k.adjoint() * k)
    });
    let deviation = sum.max_abs_diff(&CMatrix::identity(dim));
    if deviation > CHANNEL_TP_TOL {
        return Err(Error::NotTracePreserving { deviation });
    }
    Ok(())
}

/// Applies a channel given by Kraus operators to register `R` of a state on `A ⊗ R`.
pub fn apply_to_reference(
    joint: &DensityMatrix,
    a_dim: usize,
    kraus: &[CMatrix],
) -> Result<DensityMatrix> {
    let r_dim = joint.side() / a_dim;
    check_trace_preserving(kraus, r_dim)?;
    let layout = Layout::plain(&[("A", a_dim), ("R", r_dim)])?;
    let mut out = CMatrix::zeros(joint.side(), joint.side());
    for k in kraus {
        let big = embed_operator(&layout, &[1], k)?;
        out = &out + &(&(&big * joint.matrix()) * &big.adjoint());
    }
    DensityMatrix::new(out, layout.dims())
}

/// For each channel on `R`, the trace distance between the `A ⊗ B` output
/// with and without the channel applied before the cloner runs.
pub fn check_channel_invariance(
    cloner: &ClonerCircuit,
    joint: &DensityMatrix,
    channels: &[Vec<CMatrix>],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let (n, _) = joint_dims(cloner, joint)?;
    let reference = run_entangled_clone(cloner, joint, opts)?.reduced_ab;
    channels
        .iter()
        .map(|kraus| {
            let acted = apply_to_reference(joint, n, kraus)?;
            let ab = run_entangled_clone(cloner, &acted, opts)?.reduced_ab;
            linalg::trace_distance(ab.matrix(), reference.matrix())
        })
        .collect()
}

/// `Σ_k |kk⟩/√n` on `A ⊗ R`; the Bell state for `n = 2`.
pub fn maximally_entangled(n: usize) -> Result<DensityMatrix> {
    let dims = Dims::new(vec![n, n])?;
    let amp = 1.0 / (n as f64);
    let m = CMatrix::from_fn(n * n, n * n, |r, c| {
        let diag = |i: usize| i / n == i % n;
        if diag(r) && diag(c) {
            linalg::Complex64::new(amp, 0.0)
        } else {
            linalg::ZERO
        }
    });
    DensityMatrix::new(m, dims)
}
