//! Uhlmann fidelity `F(ρ, σ) = Tr √(ρ^{1/2} σ ρ^{1/2})` and checkers for its
//! product and partial-trace properties.
//!
//! The checkers return margins, not verdicts; callers pick thresholds.

use crate::error::{Error, Result};
use crate::linalg::{self, Dims, Tolerances};
use crate::quantum::DensityMatrix;

/// Slack allowed outside `[0, 1]` before a fidelity is considered broken.
const RANGE_SLACK: f64 = 1e-9;
/// Negative eigenvalues of the inner product above this are clamped.
const NEGATIVE_CLAMP: f64 = -1e-10;

pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.side() != sigma.side() {
        return Err(Error::DimensionMismatch {
            expected: rho.side(),
            got: sigma.side(),
        });
    }
    // ρ^{1/2} σ ρ^{1/2} is assembled as A·A† with A = ρ^{1/2} σ^{1/2}, so it
    // stays PSD to rounding and small products do not pick up O(ε) noise.
    let sqrt_rho = linalg::psd_sqrt(rho.matrix())?;
    let sqrt_sigma = linalg::psd_sqrt(sigma.matrix())?;
    let a = &sqrt_rho * &sqrt_sigma;
    let inner = (&a * &a.adjoint()).hermitize();
    let eig = linalg::hermitian_eig(&inner)?;
    if let Some(&min) = eig.values.first() {
        if min < NEGATIVE_CLAMP {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
            });
        }
    }
    // Eigenvalues at rounding level would otherwise add O(√ε) to the sum.
    let max = eig.values.last().copied().unwrap_or(0.0);
    let floor = Tolerances::default().sqrt_floor * max.max(1.0);
    let f: f64 = eig
        .values
        .iter()
        .filter(|&&l| l > floor)
        .map(|&l| l.sqrt())
        .sum();
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&f) {
        return Err(Error::InvalidArgument(format!(
            "fidelity {f} outside [0, 1]"
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// `|F(ρ_i ⊗ σ_i, ρ_j ⊗ σ_j) − F(ρ_i, ρ_j) · F(σ_i, σ_j)|`.
pub fn check_multiplicativity(
    rho_i: &DensityMatrix,
    sigma_i: &DensityMatrix,
    rho_j: &DensityMatrix,
    sigma_j: &DensityMatrix,
) -> Result<f64> {
    let joint = fidelity(&rho_i.kron(sigma_i), &rho_j.kron(sigma_j))?;
    let product = fidelity(rho_i, rho_j)? * fidelity(sigma_i, sigma_j)?;
    Ok((joint - product).abs())
}

/// `F(Tr_C σ̃, Tr_C τ̃) − F(σ̃, τ̃)`; non-negative up to rounding.
pub fn check_monotonicity(
    sigma_big: &DensityMatrix,
    tau_big: &DensityMatrix,
    dims: &Dims,
    traced: &[usize],
) -> Result<f64> {
    let sigma_big = sigma_big.clone().with_dims(dims.clone())?;
    let tau_big = tau_big.clone().with_dims(dims.clone())?;
    let full = fidelity(&sigma_big, &tau_big)?;
    let reduced = fidelity(&sigma_big.trace_out(traced)?, &tau_big.trace_out(traced)?)?;
    Ok(reduced - full)
}
