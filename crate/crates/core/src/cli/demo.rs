//! The three canned experiments behind `ctcsim demo`.

use std::path::Path;

use crate::cloning::{self, build_mixed_cloner, build_pure_cloner};
use crate::ctc_engine::SolverOptions;
use crate::dsl;
use crate::error::{Error, Result};
use crate::linalg;
use crate::nosignal;
use crate::quantum::{Alphabet, DensityMatrix, PureState};
use crate::sweep::zero_plus_states;

use super::report::{CheckJson, DemoReport, DemoResult, FORMAT_VERSION};

/// Tolerance of the PASS/FAIL line.
pub const DEMO_TOL: f64 = 1e-9;
/// Probabilities must sum to 1 within this.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DemoName {
    ClonePure,
    CloneMixed,
    Nosignal,
}

impl DemoName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ClonePure => "clone-pure",
            Self::CloneMixed => "clone-mixed",
            Self::Nosignal => "nosignal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ClonerChoice {
    Mixed,
    Pure,
}

/// `preset:zero-plus` or `@<state file>`.
pub fn load_alphabet(spec: &str) -> Result<Alphabet> {
    if spec == "preset:zero-plus" {
        return Alphabet::new(zero_plus_states(2)?);
    }
    match spec.strip_prefix('@') {
        Some(path) => Alphabet::new(dsl::load_state_file(Path::new(path))?),
        None => Err(Error::InvalidArgument(format!(
            "alphabet `{spec}` is neither `preset:zero-plus` nor `@<file>`"
        ))),
    }
}

/// Parses `p0,p1,...` into a probability vector.
pub fn parse_probs(text: &str) -> Result<Vec<f64>> {
    let probs = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("`{t}` is not a probability")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if probs.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two probabilities".into(),
        ));
    }
    if let Some(p) = probs.iter().find(|&&p| p < 0.0) {
        return Err(Error::InvalidArgument(format!("negative probability {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidArgument(format!(
            "probabilities sum to {sum}, not 1"
        )));
    }
    Ok(probs)
}

pub struct DemoArgs<'a> {
    pub alphabet: &'a str,
    pub index: usize,
    pub probs: Option<&'a str>,
    pub cloner: ClonerChoice,
}

fn distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    linalg::trace_distance(a.matrix(), b.matrix())
}

pub fn run_demo(name: DemoName, args: &DemoArgs<'_>, opts: &SolverOptions) -> Result<DemoReport> {
    let (circuit, report, checks) = match name {
        DemoName::ClonePure => {
            let alphabet = load_alphabet(args.alphabet)?;
            let target = alphabet.states().get(args.index).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "index {} out of range for an alphabet of {} states",
                    args.index,
                    alphabet.len()
                ))
            })?;
            let cloner = build_pure_cloner(&alphabet)?;
            let rho = target.projector();
            let r = cloning::run_clone(&cloner, &rho, opts)?;
            let checks = vec![
                CheckJson::at_most(
                    "trace_distance(output, target (x) target)",
                    r.joint_distance,
                    DEMO_TOL,
                ),
                CheckJson::at_most("|1 - joint_fid|", (1.0 - r.joint_fid).abs(), DEMO_TOL),
            ];
            ((&cloner).into(), DemoResult::Clone((&r).into()), checks)
        }
        DemoName::CloneMixed => {
            let text = args.probs.ok_or_else(|| {
                Error::InvalidArgument("clone-mixed needs --probs p0,p1,...".into())
            })?;
            let probs = parse_probs(text)?;
            let cloner = build_mixed_cloner(probs.len())?;
            let rho = DensityMatrix::diagonal(&probs)?;
            let r = cloning::run_clone(&cloner, &rho, opts)?;
            let checks = vec![
                CheckJson::at_most(
                    "trace_distance(output, rho (x) rho)",
                    r.joint_distance,
                    DEMO_TOL,
                ),
                CheckJson::at_most(
                    "trace_distance(fixed point, rho)",
                    distance(&r.fixed_point.rho_ctc, &rho)?,
                    DEMO_TOL,
                ),
            ];
            ((&cloner).into(), DemoResult::Clone((&r).into()), checks)
        }
        DemoName::Nosignal => {
            let cloner = match args.cloner {
                ClonerChoice::Mixed => build_mixed_cloner(2)?,
                ClonerChoice::Pure => build_pure_cloner(&Alphabet::new(zero_plus_states(2)?)?)?,
            };
            // (|0⟩_A|1⟩_R + |1⟩_A|0⟩_R)/√2
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let bell = PureState::from_real(&[0.0, s, s, 0.0])?.projector();
            let r = nosignal::run_entangled_clone(&cloner, &bell, opts)?;
            let mut checks = vec![CheckJson::at_most(
                "trace_distance(Tr_R output, clone of Tr_R input)",
                r.deviation,
                DEMO_TOL,
            )];
            if args.cloner == ClonerChoice::Mixed {
                let rho_a = bell
                    .clone()
                    .with_dims(linalg::Dims::new(vec![2, 2])?)?
                    .partial_trace(&[0])?;
                checks.push(CheckJson::at_most(
                    "trace_distance(Tr_R output, rho_A (x) rho_A)",
                    distance(&r.reduced_ab, &rho_a.kron(&rho_a))?,
                    DEMO_TOL,
                ));
            }
            ((&cloner).into(), DemoResult::NoSignal((&r).into()), checks)
        }
    };
    Ok(DemoReport {
        format_version: FORMAT_VERSION,
        command: "demo",
        demo: name.as_str(),
        circuit,
        solver_options: opts.into(),
        report,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_are_validated() {
        assert_eq!(parse_probs("0.25,0.75").unwrap(), vec![0.25, 0.75]);
        for bad in ["1", "0.5,0.6", "-0.5,1.5", "a,b", "nan,0.5"] {
            assert!(parse_probs(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn demos_pass() {
        let opts = SolverOptions::default();
        let base = DemoArgs {
            alphabet: "preset:zero-plus",
            index: 1,
            probs: Some("0.25,0.75"),
            cloner: ClonerChoice::Mixed,
        };
        for name in [
            DemoName::ClonePure,
            DemoName::CloneMixed,
            DemoName::Nosignal,
        ] {
            assert!(
                run_demo(name, &base, &opts).unwrap().pass,
                "{}",
                name.as_str()
            );
        }
        let pure = DemoArgs {
            cloner: ClonerChoice::Pure,
            ..base
        };
        assert!(run_demo(DemoName::Nosignal, &pure, &opts).unwrap().pass);
    }
}
