//! Generators shared by the integration tests.
#![allow(dead_code)]

use ctcsim::dsl::{CircuitSpec, GateDecl, InputDecl, Located, Span, StateLiteral, SystemDecl};
use ctcsim::linalg::Complex64;
use ctcsim::random::{self, SimRng};
use rand::seq::SliceRandom;
use rand::Rng;

const NAMES: [&str; 5] = ["A", "B", "R", "Q1", "anc_2"];
const FILES: [&str; 3] = ["u.mat", "dir/fam.mat", "x-1.mat"];

fn located<T>(node: T) -> Located<T> {
    Located::new(node, Span::default())
}

fn random_float(rng: &mut SimRng) -> f64 {
    match rng.random_range(0..4) {
        0 => 0.0,
        1 => rng.random_range(-1.0..1.0),
        2 => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-300..300)),
        _ => f64::from(rng.random_range(-3i32..4)) / 4.0,
    }
}

/// A valid circuit spec with random registers, inputs and gates.
pub fn random_spec(rng: &mut SimRng) -> CircuitSpec {
    let n_cr = rng.random_range(1..=3);
    let mut names: Vec<&str> = NAMES.to_vec();
    names.shuffle(rng);
    let mut systems: Vec<(String, usize)> = names[..n_cr]
        .iter()
        .map(|n| (n.to_string(), rng.random_range(2..=3)))
        .collect();
    let ctc_pos = rng.random_range(0..=n_cr);
    systems.insert(ctc_pos, ("CTC".to_string(), rng.random_range(2..=3)));

    let mut cr: Vec<(String, usize)> = systems.iter().filter(|s| s.0 != "CTC").cloned().collect();
    cr.shuffle(rng);
    let mut inputs = Vec::new();
    let mut rest = cr.as_slice();
    while !rest.is_empty() {
        let take = rng.random_range(1..=rest.len().min(2));
        let (group, tail) = rest.split_at(take);
        rest = tail;
        let dim: usize = group.iter().map(|g| g.1).product();
        let state = if rng.random_bool(0.5) {
            StateLiteral::Pure(random::random_pure(rng, dim).amplitudes().to_vec())
        } else {
            let rows = (0..dim)
                .map(|_| {
                    (0..dim)
                        .map(|_| Complex64::new(random_float(rng), random_float(rng)))
                        .collect()
                })
                .collect();
            StateLiteral::Mixed(rows)
        };
        inputs.push(located(InputDecl {
            registers: group.iter().map(|g| g.0.clone()).collect(),
            state,
        }));
    }

    let all: Vec<String> = systems.iter().map(|s| s.0.clone()).collect();
    let pick_two = |rng: &mut SimRng| {
        let mut v = all.clone();
        v.shuffle(rng);
        (v[0].clone(), v[1].clone())
    };
    let gates = (0..rng.random_range(0..6))
        .map(|_| {
            let file = FILES[rng.random_range(0..FILES.len())].to_string();
            let (a, b) = pick_two(rng);
            located(match rng.random_range(0..5) {
                0 => GateDecl::Swap { a, b },
                1 => GateDecl::Csum { ctrl: a, tgt: b },
                2 => GateDecl::Select {
                    ctrl: a,
                    tgt: b,
                    file,
                    adjoint: false,
                },
                3 => GateDecl::Select {
                    ctrl: a,
                    tgt: b,
                    file,
                    adjoint: true,
                },
                _ => GateDecl::Unitary { reg: a, file },
            })
        })
        .collect();

    CircuitSpec {
        systems: systems
            .into_iter()
            .map(|(name, dim)| located(SystemDecl { name, dim }))
            .collect(),
        inputs,
        gates,
    }
}

const VOCAB: [&str; 24] = [
    "system",
    "input",
    "gate",
    "pure",
    "mixed",
    "swap",
    "csum",
    "select",
    "select_adj",
    "unitary",
    "CTC",
    "A",
    "B",
    ":",
    ";",
    "#",
    "@f.mat",
    "2",
    "0.5",
    "1+2i",
    "-1e-3-4i",
    "\n",
    " ",
    "1e999",
];

/// Random fuzz input of at most `max_len` bytes: raw bytes, token soup or a
/// mutated valid circuit.
pub fn fuzz_input(rng: &mut SimRng, max_len: usize) -> Vec<u8> {
    let len = (rng.random_range(0.0..(max_len as f64).ln())).exp() as usize;
    let mut out = Vec::with_capacity(len);
    match rng.random_range(0..3) {
        0 => {
            out.resize(len, 0);
            rng.fill(out.as_mut_slice());
        }
        1 => {
            while out.len() < len {
                let t = VOCAB[rng.random_range(0..VOCAB.len())];
                out.extend_from_slice(t.as_bytes());
                if rng.random_bool(0.5) {
                    out.push(b' ');
                }
            }
        }
        _ => {
            while out.len() < len {
                let spec = random_spec(rng);
                out.extend_from_slice(ctcsim::dsl::serialize(&spec).as_bytes());
            }
            for _ in 0..rng.random_range(1..8) {
                let pos = rng.random_range(0..out.len().max(1));
                match rng.random_range(0..3) {
                    0 if pos < out.len() => out[pos] = rng.random(),
                    1 => out.insert(pos.min(out.len()), rng.random()),
                    _ if pos < out.len() => {
                        out.remove(pos);
                    }
                    _ => {}
                }
            }
        }
    }
    out.truncate(max_len);
    out
}
