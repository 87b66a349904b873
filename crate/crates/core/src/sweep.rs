//! Seeded property sweeps over random instances.
//!
//! Trial `i` draws everything from [`random::trial_rng`]`(seed, i)`, so any
//! trial can be rerun on its own from the echoed seed.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::cloning::no_ctc_baseline;
use crate::ctc_engine::{self, DeutschProblem, SolverMethod, SolverOptions};
use crate::error::{Error, Result};
use crate::fidelity::{check_monotonicity, check_multiplicativity, fidelity};
use crate::linalg::{self, Dims};
use crate::quantum::{DensityMatrix, Layout, PureState};
use crate::random::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    FidelityProps,
    FixedPoints,
    NoCloningBaseline,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FidelityProps => "fidelity-props",
            Self::FixedPoints => "fixed-points",
            Self::NoCloningBaseline => "no-cloning-baseline",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fidelity-props" => Ok(Self::FidelityProps),
            "fixed-points" => Ok(Self::FixedPoints),
            "no-cloning-baseline" => Ok(Self::NoCloningBaseline),
            other => Err(Error::InvalidArgument(format!("unknown sweep `{other}`"))),
        }
    }
}

/// Acceptance bound for one margin column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Above(f64),
}

impl Bound {
    pub fn holds(self, v: f64) -> bool {
        match self {
            Self::AtMost(b) => v <= b,
            Self::AtLeast(b) => v >= b,
            Self::Above(b) => v > b,
        }
    }

    /// Whether `a` is a worse value than `b` under this bound.
    fn worse(self, a: f64, b: f64) -> bool {
        match self {
            Self::AtMost(_) => a > b,
            Self::AtLeast(_) | Self::Above(_) => a < b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Column {
    pub name: &'static str,
    pub bound: Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub index: u64,
    pub seed: u64,
    /// One entry per column; `None` when the margin does not apply.
    pub margins: Vec<Option<f64>>,
    pub error: Option<String>,
}

impl TrialRow {
    pub fn ok(&self, columns: &[Column]) -> bool {
        self.error.is_none()
            && self
                .margins
                .iter()
                .zip(columns)
                .all(|(m, c)| m.is_none_or(|v| c.bound.holds(v)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub trials: u64,
    pub dim: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub config: SweepConfig,
    pub columns: Vec<Column>,
    pub rows: Vec<TrialRow>,
    /// Worst value per column across trials.
    pub worst: Vec<Option<f64>>,
    /// Indices into `rows` of failing trials.
    pub violations: Vec<usize>,
}

impl SweepSummary {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const FIDELITY_COLUMNS: [Column; 5] = [
    Column {
        name: "self_fidelity_error",
        bound: Bound::AtMost(1e-12),
    },
    Column {
        name: "multiplicativity_violation",
        bound: Bound::AtMost(1e-9),
    },
    Column {
        name: "monotonicity_margin",
        bound: Bound::AtLeast(-1e-9),
    },
    Column {
        name: "symmetry_error",
        bound: Bound::AtMost(1e-9),
    },
    Column {
        name: "unitary_invariance_error",
        bound: Bound::AtMost(1e-9),
    },
];

pub const FIXED_POINT_COLUMNS: [Column; 3] = [
    Column {
        name: "residual",
        bound: Bound::AtMost(1e-10),
    },
    Column {
        name: "spectral_radius_excess",
        bound: Bound::AtMost(1e-10),
    },
    Column {
        name: "eig_cesaro_distance",
        bound: Bound::AtMost(1e-8),
    },
];

pub const BASELINE_COLUMNS: [Column; 1] = [Column {
    name: "worst_infidelity",
    bound: Bound::Above(1e-6),
}];

fn random_state(rng: &mut SimRng, d: usize) -> Result<DensityMatrix> {
    DensityMatrix::single(random::random_density(rng, d))
}

fn fidelity_trial(rng: &mut SimRng, d: usize) -> Result<Vec<Option<f64>>> {
    let (ri, rj, si, sj) = (
        random_state(rng, d)?,
        random_state(rng, d)?,
        random_state(rng, d)?,
        random_state(rng, d)?,
    );
    let self_err = (fidelity(&ri, &ri)? - 1.0).abs();
    let mult = check_multiplicativity(&ri, &si, &rj, &sj)?;
    let dims = Dims::new(vec![d, d])?;
    let big_a = DensityMatrix::single(random::random_density(rng, d * d))?;
    let big_b = DensityMatrix::single(random::random_density(rng, d * d))?;
    let mono = check_monotonicity(&big_a, &big_b, &dims, &[1])?;
    let f = fidelity(&ri, &rj)?;
    let sym = (f - fidelity(&rj, &ri)?).abs();
    let u = random::random_unitary(rng, d);
    let inv = (fidelity(&ri.conjugate(&u)?, &rj.conjugate(&u)?)? - f).abs();
    Ok([self_err, mult, mono, sym, inv].map(Some).to_vec())
}

/// Random Deutsch problem with CR and CTC both of dimension `d`.
pub fn random_problem(rng: &mut SimRng, d: usize) -> Result<DeutschProblem> {
    let layout = Layout::with_ctc(&[("Q", d)], d)?;
    let u = random::random_unitary(rng, d * d);
    let input = if rng.random_bool(0.5) {
        random_state(rng, d)?
    } else {
        random::random_pure(rng, d).projector()
    };
    DeutschProblem::new(layout, u, input)
}

fn fixed_point_trial(rng: &mut SimRng, d: usize) -> Result<Vec<Option<f64>>> {
    let problem = random_problem(rng, d)?;
    let eig =
        ctc_engine::solve_fixed_point(&problem, &SolverOptions::with_method(SolverMethod::Eig))?;
    let radius = ctc_engine::spectral_radius(&problem)?;
    let agreement = if eig.multiplicity == 1 {
        let ces = ctc_engine::solve_fixed_point(
            &problem,
            &SolverOptions::with_method(SolverMethod::Cesaro),
        )?;
        Some(linalg::trace_distance(
            eig.rho_ctc.matrix(),
            ces.rho_ctc.matrix(),
        )?)
    } else {
        None
    };
    Ok(vec![Some(eig.residual), Some(radius - 1.0), agreement])
}

/// `|0⟩` and `(|0⟩ + |1⟩)/√2` in dimension `d`.
pub fn zero_plus_states(d: usize) -> Result<Vec<PureState>> {
    let mut plus = vec![0.0; d];
    plus[0] = std::f64::consts::FRAC_1_SQRT_2;
    plus[1] = std::f64::consts::FRAC_1_SQRT_2;
    Ok(vec![PureState::basis(d, 0)?, PureState::from_real(&plus)?])
}

/// Ancilla dimension used by the baseline sweep.
pub const BASELINE_ANCILLA_DIM: usize = 2;

fn baseline_trial(rng: &mut SimRng, d: usize) -> Result<Vec<Option<f64>>> {
    let states = zero_plus_states(d)?;
    let u = random::random_unitary(rng, d * d * BASELINE_ANCILLA_DIM);
    let ancilla = DensityMatrix::basis(BASELINE_ANCILLA_DIM, 0)?;
    Ok(vec![Some(no_ctc_baseline(&states, &u, &ancilla)?)])
}

pub fn columns(kind: SweepKind) -> &'static [Column] {
    match kind {
        SweepKind::FidelityProps => &FIDELITY_COLUMNS,
        SweepKind::FixedPoints => &FIXED_POINT_COLUMNS,
        SweepKind::NoCloningBaseline => &BASELINE_COLUMNS,
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepSummary> {
    if config.dim < 2 {
        return Err(Error::BadRegisterDim(config.dim));
    }
    if config.trials == 0 {
        return Err(Error::InvalidArgument(
            "sweep needs at least one trial".into(),
        ));
    }
    let columns = columns(config.kind).to_vec();
    let trial: fn(&mut SimRng, usize) -> Result<Vec<Option<f64>>> = match config.kind {
        SweepKind::FidelityProps => fidelity_trial,
        SweepKind::FixedPoints => fixed_point_trial,
        SweepKind::NoCloningBaseline => baseline_trial,
    };
    let mut rows = Vec::new();
    for index in 0..config.trials {
        let seed = random::trial_seed(config.seed, index);
        let mut rng = random::rng(seed);
        let (margins, error) = match trial(&mut rng, config.dim) {
            Ok(m) => (m, None),
            Err(e) => (vec![None; columns.len()], Some(e.to_string())),
        };
        rows.push(TrialRow {
            index,
            seed,
            margins,
            error,
        });
    }
    let mut worst: Vec<Option<f64>> = vec![None; columns.len()];
    for row in &rows {
        for ((w, m), c) in worst.iter_mut().zip(&row.margins).zip(&columns) {
            if let Some(v) = *m {
                if w.is_none_or(|cur| c.bound.worse(v, cur)) {
                    *w = Some(v);
                }
            }
        }
    }
    let violations = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.ok(&columns))
        .map(|(i, _)| i)
        .collect();
    Ok(SweepSummary {
        config: config.clone(),
        columns,
        rows,
        worst,
        violations,
    })
}
