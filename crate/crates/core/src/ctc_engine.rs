//! The Deutsch model of a CTC interacting with a chronology-respecting system.
//!
//! For a fixed CR input `ρ_CR` and interaction `U`, the CTC register must be a
//! fixed point of `M(ρ) = Tr_CR(U (ρ_CR ⊗ ρ) U†)`; the visible output is then
//! `Tr_CTC(U (ρ_CR ⊗ ρ_CTC) U†)`.
//!
//! `M` is a CPTP map, so it always has a fixed point, but it can have many.
//! Both solvers return the same canonical one: the Cesàro limit
//! `lim (1/n) Σ_k M^k(I/d)`, i.e. the spectral projection of `I/d` onto the
//! eigenvalue-1 eigenspace of the superoperator along the remaining spectrum.
//!
//! - [`SolverMethod::Eig`] computes that projection directly from the
//!   superoperator (`ker(S − I) ⊕ range(S − I)` splitting).
//! - [`SolverMethod::Cesaro`] iterates the averaged map `ρ ↦ ½(ρ + M(ρ))`
//!   from `I/d` using a Kraus form of `M`. The averaged map has the same
//!   fixed points and spectral projector as `M`, but no other peripheral
//!   eigenvalues, so it converges geometrically to the Cesàro limit even when
//!   `M` itself cycles.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Complex64, Dims, ONE};
use crate::quantum::{self, DensityMatrix, Layout, Unitary};

/// Above this CTC dimension the default method is [`SolverMethod::Cesaro`].
pub const EIG_MAX_CTC_DIM: usize = 8;

/// A unitary interaction of CR registers with a CTC register.
#[derive(Debug, Clone)]
pub struct DeutschProblem {
    layout: Layout,
    interaction: Unitary,
    cr_input: DensityMatrix,
}

impl DeutschProblem {
    pub fn new(layout: Layout, interaction: Unitary, cr_input: DensityMatrix) -> Result<Self> {
        let ctc = layout
            .ctc_index()
            .ok_or_else(|| Error::Layout("problem layout needs a CTC register".into()))?;
        if ctc + 1 != layout.len() {
            return Err(Error::Layout("CTC register must be last".into()));
        }
        if interaction.side() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                got: interaction.side(),
            });
        }
        let cr_dims = layout.cr_dims();
        if cr_input.side() != cr_dims.total() {
            return Err(Error::DimensionMismatch {
                expected: cr_dims.total(),
                got: cr_input.side(),
            });
        }
        let cr_input = cr_input.with_dims(cr_dims)?;
        Ok(Self {
            layout,
            interaction,
            cr_input,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn interaction(&self) -> &Unitary {
        &self.interaction
    }

    pub fn cr_input(&self) -> &DensityMatrix {
        &self.cr_input
    }

    pub fn ctc_dim(&self) -> usize {
        self.layout.ctc_dim().expect("validated at construction")
    }

    pub fn cr_dim(&self) -> usize {
        self.cr_input.side()
    }

    /// Same interaction with a different CR input.
    pub fn with_input(&self, cr_input: DensityMatrix) -> Result<Self> {
        Self::new(self.layout.clone(), self.interaction.clone(), cr_input)
    }

    /// Extends the problem by a spectator register inserted at `position`
    /// (before the CTC) on which the interaction acts as identity.
    /// `joint_input` is the new CR input over the extended CR registers.
    pub fn with_spectator(
        &self,
        position: usize,
        name: &str,
        dim: usize,
        joint_input: DensityMatrix,
    ) -> Result<Self> {
        if position >= self.layout.len() {
            return Err(Error::Layout(
                "spectator must precede the CTC register".into(),
            ));
        }
        let layout = self.layout.insert(position, name, dim)?;
        let acted: Vec<usize> = (0..layout.len()).filter(|&r| r != position).collect();
        let u = quantum::embed_operator(&layout, &acted, self.interaction.matrix())?;
        Self::new(layout, Unitary::new(u)?, joint_input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverMethod {
    Eig,
    Cesaro,
}

impl SolverMethod {
    pub fn default_for(ctc_dim: usize) -> Self {
        if ctc_dim <= EIG_MAX_CTC_DIM {
            Self::Eig
        } else {
            Self::Cesaro
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Eig => "eig",
            Self::Cesaro => "cesaro",
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eig" => Ok(Self::Eig),
            "cesaro" => Ok(Self::Cesaro),
            other => Err(Error::InvalidArgument(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// `None` picks [`SolverMethod::default_for`] the CTC dimension.
    pub method: Option<SolverMethod>,
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Superoperator eigenvalues within this distance of 1 count towards the
    /// fixed-point multiplicity.
    pub eig_one_window: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: None,
            tol_residual: 1e-12,
            max_iter: 100_000,
            eig_one_window: 1e-8,
        }
    }
}

impl SolverOptions {
    pub fn with_method(method: SolverMethod) -> Self {
        Self {
            method: Some(method),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tol_residual.is_nan() || self.tol_residual <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tol_residual must be positive, got {}",
                self.tol_residual
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if self.eig_one_window.is_nan() || self.eig_one_window <= 0.0 {
            return Err(Error::InvalidArgument(
                "eig_one_window must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub rho_ctc: DensityMatrix,
    /// `trace_distance(M(ρ), ρ)`.
    pub residual: f64,
    /// Superoperator eigenvalues within `eig_one_window` of 1.
    pub multiplicity: usize,
    pub method_used: SolverMethod,
    /// Averaging steps taken (0 for a direct eigen solve without polishing).
    pub iterations: usize,
}

impl FixedPointResult {
    /// True when several fixed points exist and the canonical one was picked.
    pub fn is_canonical_selection(&self) -> bool {
        self.multiplicity > 1
    }
}

/// `Tr_CR(U (ρ_CR ⊗ x) U†)` for any operator `x` on the CTC register.
fn apply_map(problem: &DeutschProblem, x: &CMatrix) -> Result<CMatrix> {
    let full = linalg::kron(problem.cr_input.matrix(), x);
    let u = problem.interaction.matrix();
    let evolved = &(u * &full) * &u.adjoint();
    let ctc = problem.layout.len() - 1;
    linalg::partial_trace(&evolved, &problem.layout.dims(), &[ctc])
}

fn check_ctc_state(problem: &DeutschProblem, rho_ctc: &DensityMatrix) -> Result<()> {
    if rho_ctc.side() != problem.ctc_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.ctc_dim(),
            got: rho_ctc.side(),
        });
    }
    Ok(())
}

fn ctc_single_dims(problem: &DeutschProblem) -> Dims {
    Dims::new(vec![problem.ctc_dim()]).expect("CTC dim >= 2")
}

/// Right-hand side of the self-consistency condition.
pub fn deutsch_map(problem: &DeutschProblem, rho_ctc: &DensityMatrix) -> Result<DensityMatrix> {
    check_ctc_state(problem, rho_ctc)?;
    let out = apply_map(problem, rho_ctc.matrix())?;
    DensityMatrix::new(out.hermitize(), ctc_single_dims(problem))
}

/// Final CR state `Tr_CTC(U (ρ_CR ⊗ ρ_CTC) U†)`.
pub fn output_state(problem: &DeutschProblem, rho_ctc: &DensityMatrix) -> Result<DensityMatrix> {
    check_ctc_state(problem, rho_ctc)?;
    let full = linalg::kron(problem.cr_input.matrix(), rho_ctc.matrix());
    let u = problem.interaction.matrix();
    let evolved = &(u * &full) * &u.adjoint();
    let out = linalg::partial_trace(
        &evolved,
        &problem.layout.dims(),
        &problem.layout.cr_indices(),
    )?;
    DensityMatrix::new(out.hermitize(), problem.layout.cr_dims())
}

/// Matrix `S` (side `d²`) with `vec(M(ρ)) = S · vec(ρ)` under row-major
/// vectorization, assembled column by column from the matrix units.
pub fn build_superoperator(problem: &DeutschProblem) -> Result<CMatrix> {
    let d = problem.ctc_dim();
    let mut s = CMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let mut unit = CMatrix::zeros(d, d);
            unit[(a, b)] = ONE;
            let image = apply_map(problem, &unit)?;
            for (row, z) in image.vectorize().into_iter().enumerate() {
                s[(row, a * d + b)] = z;
            }
        }
    }
    Ok(s)
}

/// Eigenvalues of a general complex square matrix (complex Schur form).
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let schur = nalgebra::linalg::Schur::try_new(m.to_nalgebra(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigensolver("Schur decomposition did not converge".into()))?;
    let values = schur
        .eigenvalues()
        .ok_or_else(|| Error::Eigensolver("Schur form is not triangular".into()))?;
    Ok(values.iter().copied().collect())
}

/// Largest eigenvalue modulus of the superoperator.
pub fn spectral_radius(problem: &DeutschProblem) -> Result<f64> {
    let s = build_superoperator(problem)?;
    Ok(eigenvalues(&s)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

fn multiplicity(s: &CMatrix, window: f64) -> Result<usize> {
    Ok(eigenvalues(s)?
        .iter()
        .filter(|z| (*z - ONE).norm() <= window)
        .count())
}

/// Symmetrize, clamp negative eigenvalues to zero and renormalize.
fn finalize(candidate: &CMatrix, d: usize) -> Result<DensityMatrix> {
    let h = candidate.hermitize();
    let eig = linalg::hermitian_eig(&h)?;
    let clamped = eig.map_values(|l| l.max(0.0));
    let tr = clamped.trace().re;
    if tr.is_nan() || tr <= 0.0 {
        return Err(Error::Eigensolver(
            "fixed-point candidate has no positive part".into(),
        ));
    }
    DensityMatrix::new(clamped.scale_real(1.0 / tr), Dims::new(vec![d])?)
}

fn residual_of(problem: &DeutschProblem, rho: &DensityMatrix) -> Result<f64> {
    let image = apply_map(problem, rho.matrix())?;
    linalg::trace_distance(&image, rho.matrix())
}

/// Kraus form of the CTC map for a fixed CR input:
/// `K_{b,a}[x, y] = √p_a Σ_c U[(b, x), (c, y)] v_a[c]` with `ρ_CR = Σ p_a v_a v_a†`.
#[derive(Debug, Clone)]
pub struct CtcChannel {
    kraus: Vec<CMatrix>,
    d: usize,
}

impl CtcChannel {
    pub fn new(problem: &DeutschProblem) -> Result<Self> {
        let d = problem.ctc_dim();
        let n_cr = problem.cr_dim();
        let eig = linalg::hermitian_eig(problem.cr_input.matrix())?;
        let u = problem.interaction.matrix();
        let mut kraus = Vec::new();
        for (a, &p) in eig.values.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let w = p.sqrt();
            let v = eig.vectors.column(a);
            for b in 0..n_cr {
                let k = CMatrix::from_fn(d, d, |x, y| {
                    (0..n_cr)
                        .map(|c| u[(b * d + x, c * d + y)] * v[c])
                        .sum::<Complex64>()
                        * w
                });
                if k.max_abs() > 0.0 {
                    kraus.push(k);
                }
            }
        }
        Ok(Self { kraus, d })
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        self.kraus
            .iter()
            .fold(CMatrix::zeros(self.d, self.d), |acc, k| {
                &acc + &(&(k * rho) * &k.adjoint())
            })
    }
}

/// Averaged iteration `ρ ← ½(ρ + M(ρ))` until the residual bound drops
/// below `tol`. Returns the final iterate and the step count.
fn averaged_iteration(
    channel: &CtcChannel,
    start: CMatrix,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<(CMatrix, usize), (CMatrix, usize, f64)> {
    let d = channel.d;
    let bound_scale = 0.5 * (d as f64).sqrt();
    let mut rho = start;
    let mut best = f64::INFINITY;
    for it in 0..max_iter {
        let image = channel.apply(&rho);
        let diff = &image - &rho;
        let frob = diff.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // ½‖X‖₁ ≤ ½√d ‖X‖_F
        let bound = bound_scale * frob;
        best = best.min(bound);
        if bound <= tol {
            return Ok((rho, it));
        }
        rho = (&rho + &image).scale_real(0.5).hermitize();
    }
    Err((rho, max_iter, best))
}

fn solve_eig(problem: &DeutschProblem, s: &CMatrix, mult: usize) -> Result<CMatrix> {
    let d = problem.ctc_dim();
    let n = d * d;
    let a = s - &CMatrix::identity(n);
    let svd = a.to_nalgebra().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => {
            return Err(Error::Eigensolver(
                "SVD did not produce singular vectors".into(),
            ))
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let k = mult.clamp(1, n);
    // basis: kernel = right singular vectors of the k smallest singular
    // values, complement = left singular vectors of the rest
    let mut basis = DMatrix::<Complex64>::zeros(n, n);
    for (col, &idx) in order[n - k..].iter().enumerate() {
        for row in 0..n {
            basis[(row, col)] = v_t[(idx, row)].conj();
        }
    }
    for (col, &idx) in order[..n - k].iter().enumerate() {
        for row in 0..n {
            basis[(row, k + col)] = u[(row, idx)];
        }
    }
    let start = CMatrix::identity(d).scale_real(1.0 / d as f64).vectorize();
    let rhs = nalgebra::DVector::from_vec(start);
    let coeffs = basis
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Eigensolver("kernel/range splitting is singular".into()))?;
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for col in 0..k {
        for (row, xr) in x.iter_mut().enumerate() {
            *xr += basis[(row, col)] * coeffs[col];
        }
    }
    CMatrix::from_vectorized(d, &x)
}

/// Finds the canonical fixed point of the CTC map.
pub fn solve_fixed_point(
    problem: &DeutschProblem,
    opts: &SolverOptions,
) -> Result<FixedPointResult> {
    opts.validate()?;
    let d = problem.ctc_dim();
    let method = opts.method.unwrap_or_else(|| SolverMethod::default_for(d));
    let s = build_superoperator(problem)?;
    let mult = multiplicity(&s, opts.eig_one_window)?;
    let channel = CtcChannel::new(problem)?;

    let (candidate, iterations) = match method {
        SolverMethod::Eig => (solve_eig(problem, &s, mult)?, 0),
        SolverMethod::Cesaro => {
            let start = CMatrix::identity(d).scale_real(1.0 / d as f64);
            match averaged_iteration(&channel, start, opts.tol_residual, opts.max_iter) {
                Ok(found) => found,
                Err((last, iterations, _)) => {
                    let residual = finalize(&last, d)
                        .and_then(|r| residual_of(problem, &r))
                        .unwrap_or(f64::INFINITY);
                    return Err(Error::NonConvergence {
                        iterations,
                        residual,
                    });
                }
            }
        }
    };

    let mut rho = finalize(&candidate, d)?;
    let mut residual = residual_of(problem, &rho)?;
    let mut iterations = iterations;
    if residual > opts.tol_residual {
        // polish with averaged steps from the current candidate
        match averaged_iteration(
            &channel,
            rho.matrix().clone(),
            opts.tol_residual * 0.5,
            opts.max_iter,
        ) {
            Ok((polished, extra)) => {
                rho = finalize(&polished, d)?;
                residual = residual_of(problem, &rho)?;
                iterations += extra;
            }
            Err((_, extra, _)) => {
                return Err(Error::NonConvergence {
                    iterations: iterations + extra,
                    residual,
                })
            }
        }
        if residual > opts.tol_residual {
            return Err(Error::NonConvergence {
                iterations,
                residual,
            });
        }
    }

    Ok(FixedPointResult {
        rho_ctc: rho,
        residual,
        multiplicity: mult,
        method_used: method,
        iterations,
    })
}

/// Solves the fixed point and returns the CR output with it.
pub fn evolve(
    problem: &DeutschProblem,
    opts: &SolverOptions,
) -> Result<(DensityMatrix, FixedPointResult)> {
    let fp = solve_fixed_point(problem, opts)?;
    let out = output_state(problem, &fp.rho_ctc)?;
    Ok((out, fp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{swap_gate, Layout};
    use crate::random;

    fn swap_problem(rho_cr: &CMatrix) -> DeutschProblem {
        let d = rho_cr.side();
        let layout = Layout::with_ctc(&[("A", d)], d).unwrap();
        let u = swap_gate(&layout, "A", "CTC").unwrap();
        DeutschProblem::new(layout, u, DensityMatrix::single(rho_cr.clone()).unwrap()).unwrap()
    }

    fn identity_problem(d_cr: usize, d: usize) -> DeutschProblem {
        let layout = Layout::with_ctc(&[("A", d_cr)], d).unwrap();
        let rho = DensityMatrix::diagonal(&vec![1.0 / d_cr as f64; d_cr]).unwrap();
        DeutschProblem::new(layout, Unitary::identity(d_cr * d), rho).unwrap()
    }

    #[test]
    fn identity_map_is_trivial() {
        let p = identity_problem(2, 3);
        let sigma = DensityMatrix::single(random::random_density(&mut random::rng(1), 3)).unwrap();
        let out = deutsch_map(&p, &sigma).unwrap();
        assert!(out.matrix().max_abs_diff(sigma.matrix()) < 1e-15);
        assert!(
            build_superoperator(&p)
                .unwrap()
                .max_abs_diff(&CMatrix::identity(9))
                < 1e-15
        );

        let (output, fp) = evolve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(fp.multiplicity, 9);
        assert!(fp.is_canonical_selection());
        assert!(
            fp.rho_ctc
                .matrix()
                .max_abs_diff(&CMatrix::identity(3).scale_real(1.0 / 3.0))
                < 1e-14
        );
        assert!(output.matrix().max_abs_diff(p.cr_input().matrix()) < 1e-14);

        let fp = solve_fixed_point(&p, &SolverOptions::with_method(SolverMethod::Cesaro)).unwrap();
        assert_eq!(fp.iterations, 0);
        assert!(
            fp.rho_ctc
                .matrix()
                .max_abs_diff(&CMatrix::identity(3).scale_real(1.0 / 3.0))
                < 1e-14
        );
    }

    #[test]
    fn swap_map_is_constant() {
        let mut r = random::rng(3);
        let rho_cr = random::random_density(&mut r, 3);
        let p = swap_problem(&rho_cr);
        for _ in 0..3 {
            let sigma = DensityMatrix::single(random::random_density(&mut r, 3)).unwrap();
            assert!(
                deutsch_map(&p, &sigma)
                    .unwrap()
                    .matrix()
                    .max_abs_diff(&rho_cr)
                    < 1e-14
            );
        }
        for method in [SolverMethod::Eig, SolverMethod::Cesaro] {
            let fp = solve_fixed_point(&p, &SolverOptions::with_method(method)).unwrap();
            assert_eq!(fp.multiplicity, 1);
            assert!(fp.residual <= 1e-12);
            assert!(linalg::trace_distance(fp.rho_ctc.matrix(), &rho_cr).unwrap() < 1e-12);
        }
    }

    #[test]
    fn dimension_errors() {
        let p = identity_problem(2, 2);
        let bad = DensityMatrix::diagonal(&[0.5, 0.25, 0.25]).unwrap();
        assert!(deutsch_map(&p, &bad).is_err());
        assert!(output_state(&p, &bad).is_err());
        let layout = Layout::with_ctc(&[("A", 2)], 2).unwrap();
        assert!(
            DeutschProblem::new(layout.clone(), Unitary::identity(8), p.cr_input().clone())
                .is_err()
        );
        let no_ctc = Layout::plain(&[("A", 2), ("B", 2)]).unwrap();
        assert!(DeutschProblem::new(no_ctc, Unitary::identity(4), p.cr_input().clone()).is_err());
    }

    #[test]
    fn options_validation() {
        let p = identity_problem(2, 2);
        for o in [
            SolverOptions {
                tol_residual: 0.0,
                ..SolverOptions::default()
            },
            SolverOptions {
                tol_residual: f64::NAN,
                ..SolverOptions::default()
            },
            SolverOptions {
                max_iter: 0,
                ..SolverOptions::default()
            },
        ] {
            assert!(solve_fixed_point(&p, &o).is_err());
        }
        assert_eq!(SolverMethod::default_for(8), SolverMethod::Eig);
        assert_eq!(SolverMethod::default_for(9), SolverMethod::Cesaro);
        assert_eq!(
            "cesaro".parse::<SolverMethod>().unwrap(),
            SolverMethod::Cesaro
        );
    }

    #[test]
    fn cesaro_reports_non_convergence() {
        let mut r = random::rng(5);
        let layout = Layout::with_ctc(&[("A", 2)], 2).unwrap();
        let u = random::random_unitary(&mut r, 4);
        let rho = DensityMatrix::single(random::random_density(&mut r, 2)).unwrap();
        let p = DeutschProblem::new(layout, u, rho).unwrap();
        let opts = SolverOptions {
            method: Some(SolverMethod::Cesaro),
            max_iter: 1,
            ..SolverOptions::default()
        };
        match solve_fixed_point(&p, &opts) {
            Err(Error::NonConvergence {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 1);
                assert!(residual.is_finite() && residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn kraus_channel_matches_literal_map() {
        let mut r = random::rng(9);
        let layout = Layout::with_ctc(&[("A", 2), ("B", 3)], 2).unwrap();
        let u = random::random_unitary(&mut r, 12);
        let rho = DensityMatrix::new(random::random_density(&mut r, 6), layout.cr_dims()).unwrap();
        let p = DeutschProblem::new(layout, u, rho).unwrap();
        let ch = CtcChannel::new(&p).unwrap();
        let sigma = random::random_density(&mut r, 2);
        let literal = apply_map(&p, &sigma).unwrap();
        assert!(ch.apply(&sigma).max_abs_diff(&literal) < 1e-14);
    }
}
