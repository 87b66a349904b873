//! CTC-assisted cloning circuits and the checks around them.
//!
//! Two circuits on registers `A ⊗ B ⊗ CTC`, each of dimension `N`, with the
//! blank register `B` prepared in `|0⟩⟨0|`:
//!
//! - pure-alphabet cloner, gates applied in the order `W, V, S, T1, T2`:
//!   `W = SWAP(A↔CTC)`, `V = CSUM(A→B)`, `S = Σ_k |k⟩⟨k|_B ⊗ U_k` on CTC,
//!   `T1 = Σ_l |l⟩⟨l|_A ⊗ U_l†` on B, `T2 = Σ_m U_m†` on A `⊗ |m⟩⟨m|_CTC`,
//!   where `U_k |ψ_k⟩ = |k⟩` ([`basis_mapper`]);
//! - mixed-diagonal cloner, gates applied in the order `W1, W2, V`:
//!   `W1 = SWAP(A↔CTC)`, `W2 = SWAP(B↔CTC)`, `V = CSUM(B→CTC)`.
//!
//! The mixed cloner is usually written as the product `V W1 W2`; read
//! right-to-left that would apply `W2` first, which does not clone. Here
//! `W1` runs first, and [`ClonerCircuit::gate_order_note`] records this.

use crate::ctc_engine::{self, DeutschProblem, FixedPointResult, SolverOptions};
use crate::error::{Error, Result};
use crate::fidelity::fidelity;
use crate::linalg;
use crate::quantum::{
    basis_mapper, csum_gate, select_gate, swap_gate, Alphabet, DensityMatrix, Layout, PureState,
    Unitary,
};

/// Slack for the cloning-condition inequalities.
pub const CONDITION_SLACK: f64 = 1e-9;
/// Max off-diagonal entry accepted for mixed-cloner targets.
pub const DIAGONAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClonerKind {
    PureAlphabet,
    MixedDiagonal,
}

impl ClonerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PureAlphabet => "pure_alphabet",
            Self::MixedDiagonal => "mixed_diagonal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledGate {
    pub label: String,
    pub gate: Unitary,
}

#[derive(Debug, Clone)]
pub struct ClonerCircuit {
    pub layout: Layout,
    /// In application order.
    pub gates: Vec<LabeledGate>,
    pub total: Unitary,
    pub kind: ClonerKind,
    pub alphabet: Option<Alphabet>,
}

impl ClonerCircuit {
    fn assemble(
        layout: Layout,
        gates: Vec<LabeledGate>,
        kind: ClonerKind,
        alphabet: Option<Alphabet>,
    ) -> Result<Self> {
        let total = Unitary::sequence(gates.iter().map(|g| &g.gate), layout.total_dim())?;
        Ok(Self {
            layout,
            gates,
            total,
            kind,
            alphabet,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim_of(0)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.gates.iter().map(|g| g.label.as_str()).collect()
    }

    pub fn gate_order_note(&self) -> &'static str {
        match self.kind {
            ClonerKind::PureAlphabet => "gates applied W, V, S, T1, T2 (rightmost factor of T2 T1 S V W first)",
            ClonerKind::MixedDiagonal => {
                "gates applied W1, W2, V (subscript order; the written product V W1 W2 read right-to-left would apply W2 first)"
            }
        }
    }

    /// The CTC problem for a target on register `A` with `B` blank.
    pub fn problem(&self, target: &DensityMatrix) -> Result<DeutschProblem> {
        let n = self.dim();
        if target.side() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: target.side(),
            });
        }
        let target = target.clone().with_dims(linalg::Dims::new(vec![n])?)?;
        let cr = target.kron(&DensityMatrix::basis(n, 0)?);
        DeutschProblem::new(self.layout.clone(), self.total.clone(), cr)
    }
}

fn layout_abc(n: usize) -> Result<Layout> {
    if n < 2 {
        return Err(Error::BadRegisterDim(n));
    }
    Layout::with_ctc(&[("A", n), ("B", n)], n)
}

fn labeled(label: &str, gate: Unitary) -> LabeledGate {
    LabeledGate {
        label: label.to_string(),
        gate,
    }
}

/// Cloner for the `N` states of an alphabet in dimension `N`.
pub fn build_pure_cloner(alphabet: &Alphabet) -> Result<ClonerCircuit> {
    let n = alphabet.dim();
    let layout = layout_abc(n)?;
    let family = alphabet
        .states()
        .iter()
        .enumerate()
        .map(|(k, psi)| basis_mapper(psi, k))
        .collect::<Result<Vec<_>>>()?;
    let gates = vec![
        labeled("W", swap_gate(&layout, "A", "CTC")?),
        labeled("V", csum_gate(&layout, "A", "B")?),
        labeled("S", select_gate(&layout, "B", "CTC", &family, false)?),
        labeled("T1", select_gate(&layout, "A", "B", &family, true)?),
        labeled("T2", select_gate(&layout, "CTC", "A", &family, true)?),
    ];
    ClonerCircuit::assemble(
        layout,
        gates,
        ClonerKind::PureAlphabet,
        Some(alphabet.clone()),
    )
}

/// Cloner for states diagonal in the computational basis of dimension `n`.
pub fn build_mixed_cloner(n: usize) -> Result<ClonerCircuit> {
    let layout = layout_abc(n)?;
    let gates = vec![
        labeled("W1", swap_gate(&layout, "A", "CTC")?),
        labeled("W2", swap_gate(&layout, "B", "CTC")?),
        labeled("V", csum_gate(&layout, "B", "CTC")?),
    ];
    ClonerCircuit::assemble(layout, gates, ClonerKind::MixedDiagonal, None)
}

#[derive(Debug, Clone)]
pub struct CloneReport {
    pub input_state: DensityMatrix,
    pub fixed_point: FixedPointResult,
    /// Joint output on `A ⊗ B`.
    pub output: DensityMatrix,
    pub clone_a: DensityMatrix,
    pub clone_b: DensityMatrix,
    pub fid_a: f64,
    pub fid_b: f64,
    /// Fidelity of the joint output to `target ⊗ target`.
    pub joint_fid: f64,
    /// Trace distance of the joint output from `target ⊗ target`.
    pub joint_distance: f64,
}

/// Runs a cloner on `target ⊗ |0⟩⟨0|` and scores the clones.
///
/// Pure cloners accept any target; the circuit only guarantees cloning for
/// alphabet members. Mixed cloners reject targets with off-diagonal entries.
pub fn run_clone(
    cloner: &ClonerCircuit,
    target: &DensityMatrix,
    opts: &SolverOptions,
) -> Result<CloneReport> {
    if cloner.kind == ClonerKind::MixedDiagonal {
        let offdiag = target.max_off_diagonal();
        if offdiag > DIAGONAL_TOL {
            return Err(Error::NotDiagonal { offdiag });
        }
    }
    let problem = cloner.problem(target)?;
    let (output, fixed_point) = ctc_engine::evolve(&problem, opts)?;
    let input_state = problem.cr_input().partial_trace(&[0])?;
    let clone_a = output.partial_trace(&[0])?;
    let clone_b = output.partial_trace(&[1])?;
    let ideal = input_state.kron(&input_state);
    Ok(CloneReport {
        fid_a: fidelity(&clone_a, &input_state)?,
        fid_b: fidelity(&clone_b, &input_state)?,
        joint_fid: fidelity(&output, &ideal)?,
        joint_distance: linalg::trace_distance(output.matrix(), ideal.matrix())?,
        input_state,
        fixed_point,
        output,
        clone_a,
        clone_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloningCondition {
    /// `F_cr · F_ctc ≤ F_cr²` within slack.
    pub ineq10_ok: bool,
    /// `F_cr · F_ctc ≤ F_ctc` within slack.
    pub ineq11_ok: bool,
    /// `F_cr² − F_cr·F_ctc`.
    pub margin10: f64,
    /// `F_ctc − F_cr·F_ctc`.
    pub margin11: f64,
}

/// Evaluates the two partial-trace inequalities for a pair of clone runs,
/// given `F_cr = F(ρ_i, ρ_j)` and `F_ctc = F(ρ_CTC^i, ρ_CTC^j)`.
pub fn check_cloning_condition(fids_cr: f64, fids_ctc: f64) -> Result<CloningCondition> {
    for (name, f) in [("F_cr", fids_cr), ("F_ctc", fids_ctc)] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "{name} = {f} is not a fidelity"
            )));
        }
    }
    let product = fids_cr * fids_ctc;
    let margin10 = fids_cr * fids_cr - product;
    let margin11 = fids_ctc - product;
    Ok(CloningCondition {
        ineq10_ok: margin10 >= -CONDITION_SLACK,
        ineq11_ok: margin11 >= -CONDITION_SLACK,
        margin10,
        margin11,
    })
}

/// Fidelity relations between two clone runs of the same circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCheck {
    /// `F(ρ_i, ρ_j)` of the targets.
    pub f_cr: f64,
    /// `F(ρ_CTC^i, ρ_CTC^j)` of the fixed points.
    pub f_ctc: f64,
    /// Fidelity of the two evolved joint states before any partial trace.
    pub f_pre_trace: f64,
    /// `|f_pre_trace − f_cr · f_ctc|`.
    pub product_law_violation: f64,
    pub condition: CloningCondition,
}

pub fn check_pair(
    cloner: &ClonerCircuit,
    run_i: &CloneReport,
    run_j: &CloneReport,
) -> Result<PairCheck> {
    let f_cr = fidelity(&run_i.input_state, &run_j.input_state)?;
    let f_ctc = fidelity(&run_i.fixed_point.rho_ctc, &run_j.fixed_point.rho_ctc)?;
    let pre_trace = |run: &CloneReport| -> Result<DensityMatrix> {
        let problem = cloner.problem(&run.input_state)?;
        problem
            .cr_input()
            .kron(&run.fixed_point.rho_ctc)
            .conjugate(&cloner.total)
    };
    let f_pre_trace = fidelity(&pre_trace(run_i)?, &pre_trace(run_j)?)?;
    Ok(PairCheck {
        f_cr,
        f_ctc,
        f_pre_trace,
        product_law_violation: (f_pre_trace - f_cr * f_ctc).abs(),
        condition: check_cloning_condition(f_cr, f_ctc)?,
    })
}

/// `CSUM(A→B) ⊗ I_C` on `A ⊗ B ⊗ C`: copies computational basis states.
pub fn classical_copy_circuit(n: usize, ancilla_dim: usize) -> Result<Unitary> {
    let layout = Layout::plain(&[("A", n), ("B", n), ("C", ancilla_dim)])?;
    csum_gate(&layout, "A", "B")
}

/// Best achievable worst-case cloning without a CTC for one interaction:
/// `1 − min_s F(Tr_C(U ρ_s⊗|0⟩⟨0|⊗Y U†), ρ_s⊗ρ_s)`.
pub fn no_ctc_baseline(
    states: &[PureState],
    interaction: &Unitary,
    ancilla: &DensityMatrix,
) -> Result<f64> {
    let n = states
        .first()
        .ok_or_else(|| Error::InvalidAlphabet("no states".into()))?
        .dim();
    if states.iter().any(|s| s.dim() != n) {
        return Err(Error::InvalidAlphabet("states differ in dimension".into()));
    }
    let dc = ancilla.side();
    let layout = Layout::plain(&[("A", n), ("B", n), ("C", dc)])?;
    if interaction.side() != layout.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.total_dim(),
            got: interaction.side(),
        });
    }
    let blank = DensityMatrix::basis(n, 0)?;
    let ancilla = ancilla.clone().with_dims(linalg::Dims::new(vec![dc])?)?;
    let mut worst_fid = f64::INFINITY;
    for psi in states {
        let rho = psi.projector();
        let input = rho.kron(&blank).kron(&ancilla);
        let out = input.conjugate(interaction)?.partial_trace(&[0, 1])?;
        let f = fidelity(&out, &rho.kron(&rho))?;
        worst_fid = worst_fid.min(f);
    }
    Ok(1.0 - worst_fid)
}
