mod common;

use std::path::Path;

use ctcsim::dsl::{
    self, load_circuit, lower, parse, parse_bytes, parse_matrix_file, parse_state_file, serialize,
    serialize_matrices, serialize_states, CircuitSpec, GateDecl, StateLiteral,
};
use ctcsim::error::Error;
use ctcsim::linalg::{trace_distance, CMatrix};
use ctcsim::quantum::{swap_gate, Layout};
use ctcsim::random::{self, SimRng};
use proptest::prelude::*;

const VALID: &str = "system A 2\nsystem CTC 2\ninput pure A : 0.6 0.8\ngate swap A CTC\n";

fn circuits() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/circuits"))
}

fn dim_of(spec: &CircuitSpec, name: &str) -> usize {
    spec.systems
        .iter()
        .find(|s| s.node.name == name)
        .unwrap()
        .node
        .dim
}

/// Makes a random spec lowerable: pure inputs and freshly written gate files.
fn lowerable(rng: &mut SimRng, dir: &Path) -> CircuitSpec {
    let mut spec = common::random_spec(rng);
    let shape = spec.clone();
    let dim = |n: &str| dim_of(&shape, n);
    for inp in &mut spec.inputs {
        let d = inp.node.registers.iter().map(|r| dim(r)).product();
        inp.node.state = StateLiteral::Pure(random::random_pure(rng, d).amplitudes().to_vec());
    }
    // swap and csum need equal dimensions
    spec.gates.retain(|g| match &g.node {
        GateDecl::Swap { a, b } => dim(a) == dim(b),
        GateDecl::Csum { ctrl, tgt } => dim(ctrl) == dim(tgt),
        _ => true,
    });
    for (k, g) in spec.gates.iter_mut().enumerate() {
        let name = format!("g{k}.mat");
        let family: Vec<CMatrix> = match &mut g.node {
            GateDecl::Select {
                ctrl, tgt, file, ..
            } => {
                *file = name.clone();
                (0..dim(ctrl))
                    .map(|_| random::random_unitary(rng, dim(tgt)).matrix().clone())
                    .collect()
            }
            GateDecl::Unitary { reg, file } => {
                *file = name.clone();
                vec![random::random_unitary(rng, dim(reg)).matrix().clone()]
            }
            _ => continue,
        };
        std::fs::write(dir.join(&name), serialize_matrices(&family)).unwrap();
    }
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialize_parse_round_trip(seed in any::<u64>()) {
        let spec = common::random_spec(&mut random::rng(seed));
        let text = serialize(&spec);
        let parsed = parse(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
        prop_assert_eq!(&parsed, &spec);
        prop_assert_eq!(serialize(&parsed), text);
    }

    #[test]
    fn every_bad_line_is_reported(seed in any::<u64>(), k in 1usize..6) {
        let mut rng = random::rng(seed);
        let bad = ["gate frobnicate A", "system Z zero", "input pure A : 1 2 3 x", "system", "gate swap A"];
        let mut lines: Vec<String> = VALID.lines().map(String::from).collect();
        for i in 0..k {
            let pos = rand::Rng::random_range(&mut rng, 0..=lines.len());
            lines.insert(pos, bad[i % bad.len()].to_string());
        }
        let errs = parse(&lines.join("\n")).unwrap_err();
        prop_assert!(errs.len() >= k, "{} errors for {} bad lines", errs.len(), k);
        prop_assert!(errs.windows(2).all(|w| (w[0].line, w[0].column) <= (w[1].line, w[1].column)));
    }

    #[test]
    fn lowered_circuits_are_unitary(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let spec = lowerable(&mut random::rng(seed), dir.path());
        let lowered = lower(&spec, dir.path()).map_err(|e| TestCaseError::fail(format!("{e}\n{}", serialize(&spec))))?;
        let p = &lowered.problem;
        prop_assert!(p.interaction().matrix().unitary_deviation() <= 1e-10);
        prop_assert_eq!(p.layout().ctc_index(), Some(p.layout().len() - 1));
        let t = p.cr_input().matrix().trace();
        prop_assert!((t.re - 1.0).abs() <= 1e-10);
        let mut seen = lowered.permutation.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..spec.systems.len()).collect::<Vec<_>>());
    }

    #[test]
    fn matrix_files_round_trip(seed in any::<u64>(), side in 2usize..5, count in 1usize..4) {
        let mut rng = random::rng(seed);
        let ms: Vec<CMatrix> = (0..count).map(|_| random::ginibre(&mut rng, side, side)).collect();
        let back = parse_matrix_file(&serialize_matrices(&ms)).unwrap();
        prop_assert_eq!(back, ms);
    }

    #[test]
    fn state_files_round_trip(seed in any::<u64>(), dim in 2usize..5, count in 1usize..4) {
        let mut rng = random::rng(seed);
        let states: Vec<_> = (0..count).map(|_| random::random_pure(&mut rng, dim)).collect();
        let back = parse_state_file(&serialize_states(&states)).unwrap();
        for (a, b) in back.iter().zip(&states) {
            prop_assert!(a.amplitudes().iter().zip(b.amplitudes()).all(|(x, y)| (x - y).norm() <= 1e-15));
        }
    }
}

#[test]
fn fuzz_smoke() {
    let mut rng = random::rng(77);
    for _ in 0..2000 {
        let input = common::fuzz_input(&mut rng, 4096);
        let _ = parse_bytes(&input);
        let _ = parse_matrix_file(&String::from_utf8_lossy(&input));
    }
}

#[test]
fn swap_file_lowers_to_swap() {
    let lowered = load_circuit(&circuits().join("swap.ctc")).unwrap();
    let layout = Layout::with_ctc(&[("A", 2)], 2).unwrap();
    let expected = swap_gate(&layout, "A", "CTC").unwrap();
    assert!(
        lowered
            .problem
            .interaction()
            .matrix()
            .max_abs_diff(expected.matrix())
            <= 1e-15
    );
}

#[test]
fn shipped_circuits_load() {
    for name in ["swap.ctc", "zero_plus_cloner.ctc", "bell_mixed_cloner.ctc"] {
        let lowered = load_circuit(&circuits().join(name)).unwrap();
        assert!(
            lowered.problem.interaction().matrix().unitary_deviation() <= 1e-12,
            "{name}"
        );
    }
    let states = dsl::load_state_file(&circuits().join("zero_plus.states")).unwrap();
    assert_eq!(states.len(), 2);
}

#[test]
fn out_of_order_declarations_lower_consistently() {
    // CTC declared first, inputs in reverse; same problem as the natural order
    let natural = "system A 2\nsystem B 3\nsystem CTC 2\ninput pure A : 0.6 0.8\ninput pure B : 1 0 0\ngate csum A CTC\ngate swap A CTC\n";
    let shuffled = "system CTC 2\nsystem A 2\nsystem B 3\ninput pure B : 1 0 0\ninput pure A : 0.6 0.8\ngate csum A CTC\ngate swap A CTC\n";
    let here = Path::new(".");
    let a = lower(&parse(natural).unwrap(), here).unwrap();
    let b = lower(&parse(shuffled).unwrap(), here).unwrap();
    assert_eq!(a.problem.layout(), b.problem.layout());
    assert!(
        a.problem
            .interaction()
            .matrix()
            .max_abs_diff(b.problem.interaction().matrix())
            <= 1e-15
    );
    assert!(
        trace_distance(a.problem.cr_input().matrix(), b.problem.cr_input().matrix()).unwrap()
            <= 1e-15
    );
}

#[test]
fn missing_gate_file_is_io() {
    let spec =
        parse("system A 2\nsystem CTC 2\ninput pure A : 1 0\ngate unitary A @nope.mat\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(lower(&spec, dir.path()), Err(Error::Io { .. })));
}
