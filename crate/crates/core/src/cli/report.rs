//! Report documents written by the CLI.
//!
//! Every report is a JSON object whose first field is `format_version`.
//! Matrices are `{"rows": r, "cols": c, "data": [[re, im], ...]}` in row-major
//! order. Field order is fixed by the struct definitions below; named-value
//! maps are sorted by key. The full schema is described in `docs/report-schema.md`.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::cloning::{CloneReport, ClonerCircuit};
use crate::ctc_engine::{FixedPointResult, SolverOptions};
use crate::linalg::CMatrix;
use crate::nosignal::NoSignalReport;
use crate::quantum::{DensityMatrix, Layout};
use crate::sweep::{Bound, SweepSummary};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl From<&DensityMatrix> for MatrixJson {
    fn from(m: &DensityMatrix) -> Self {
        m.matrix().into()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegisterJson {
    pub name: String,
    pub dim: usize,
}

pub fn layout_json(layout: &Layout) -> Vec<RegisterJson> {
    layout
        .registers()
        .iter()
        .map(|r| RegisterJson {
            name: r.name.clone(),
            dim: r.dim,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverOptionsJson {
    /// `"auto"` when the method is picked from the CTC dimension.
    pub method: String,
    pub tol_residual: f64,
    pub max_iter: usize,
}

impl From<&SolverOptions> for SolverOptionsJson {
    fn from(o: &SolverOptions) -> Self {
        Self {
            method: o.method.map_or("auto".to_string(), |m| m.to_string()),
            tol_residual: o.tol_residual,
            max_iter: o.max_iter,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointJson {
    pub method: String,
    pub residual: f64,
    pub multiplicity: usize,
    pub iterations: usize,
    pub canonical_selection: bool,
    pub matrix: MatrixJson,
}

impl From<&FixedPointResult> for FixedPointJson {
    fn from(f: &FixedPointResult) -> Self {
        Self {
            method: f.method_used.to_string(),
            residual: f.residual,
            multiplicity: f.multiplicity,
            iterations: f.iterations,
            canonical_selection: f.is_canonical_selection(),
            matrix: (&f.rho_ctc).into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalJson {
    pub traced: Vec<String>,
    pub kept: Vec<String>,
    pub matrix: MatrixJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub format_version: u32,
    pub command: &'static str,
    pub circuit: String,
    pub layout: Vec<RegisterJson>,
    /// Declaration index of each layout register.
    pub permutation: Vec<usize>,
    pub solver_options: SolverOptionsJson,
    pub fixed_point: FixedPointJson,
    pub output: MatrixJson,
    pub marginals: Vec<MarginalJson>,
    pub fidelities: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckJson {
    pub description: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckJson {
    pub fn at_most(description: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            description: description.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CloneReportJson {
    pub input_state: MatrixJson,
    pub fixed_point: FixedPointJson,
    pub output: MatrixJson,
    pub clone_a: MatrixJson,
    pub clone_b: MatrixJson,
    pub fid_a: f64,
    pub fid_b: f64,
    pub joint_fid: f64,
    pub joint_distance: f64,
}

impl From<&CloneReport> for CloneReportJson {
    fn from(r: &CloneReport) -> Self {
        Self {
            input_state: (&r.input_state).into(),
            fixed_point: (&r.fixed_point).into(),
            output: (&r.output).into(),
            clone_a: (&r.clone_a).into(),
            clone_b: (&r.clone_b).into(),
            fid_a: r.fid_a,
            fid_b: r.fid_b,
            joint_fid: r.joint_fid,
            joint_distance: r.joint_distance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NoSignalReportJson {
    pub rho_tot: MatrixJson,
    pub fixed_point: FixedPointJson,
    pub reduced_ab: MatrixJson,
    pub expected_ab: MatrixJson,
    pub deviation: f64,
    pub reduced_r: MatrixJson,
    pub reference_deviation: f64,
}

impl From<&NoSignalReport> for NoSignalReportJson {
    fn from(r: &NoSignalReport) -> Self {
        Self {
            rho_tot: (&r.rho_tot).into(),
            fixed_point: (&r.fixed_point).into(),
            reduced_ab: (&r.reduced_ab).into(),
            expected_ab: (&r.expected_ab).into(),
            deviation: r.deviation,
            reduced_r: (&r.reduced_r).into(),
            reference_deviation: r.reference_deviation,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CircuitJson {
    pub kind: &'static str,
    pub layout: Vec<RegisterJson>,
    pub gate_order: Vec<String>,
    pub note: &'static str,
}

impl From<&ClonerCircuit> for CircuitJson {
    fn from(c: &ClonerCircuit) -> Self {
        Self {
            kind: c.kind.as_str(),
            layout: layout_json(&c.layout),
            gate_order: c.labels().into_iter().map(String::from).collect(),
            note: c.gate_order_note(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum DemoResult {
    Clone(CloneReportJson),
    NoSignal(NoSignalReportJson),
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub format_version: u32,
    pub command: &'static str,
    pub demo: &'static str,
    pub circuit: CircuitJson,
    pub solver_options: SolverOptionsJson,
    pub report: DemoResult,
    pub checks: Vec<CheckJson>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnJson {
    pub name: &'static str,
    pub bound: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialJson {
    pub trial: u64,
    pub seed: u64,
    pub margins: BTreeMap<&'static str, Option<f64>>,
    pub error: Option<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViolationJson {
    pub trial: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummaryJson {
    pub worst: BTreeMap<&'static str, Option<f64>>,
    pub violations: Vec<ViolationJson>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub format_version: u32,
    pub command: &'static str,
    pub kind: &'static str,
    pub trials: u64,
    pub dim: usize,
    pub seed: u64,
    pub columns: Vec<ColumnJson>,
    pub rows: Vec<TrialJson>,
    pub summary: SweepSummaryJson,
}

pub fn bound_text(b: Bound) -> String {
    match b {
        Bound::AtMost(x) => format!("<= {x:e}"),
        Bound::AtLeast(x) => format!(">= {x:e}"),
        Bound::Above(x) => format!("> {x:e}"),
    }
}

impl From<&SweepSummary> for SweepReport {
    fn from(s: &SweepSummary) -> Self {
        let named = |values: &[Option<f64>]| -> BTreeMap<&'static str, Option<f64>> {
            s.columns
                .iter()
                .zip(values)
                .map(|(c, v)| (c.name, *v))
                .collect()
        };
        Self {
            format_version: FORMAT_VERSION,
            command: "sweep",
            kind: s.config.kind.as_str(),
            trials: s.config.trials,
            dim: s.config.dim,
            seed: s.config.seed,
            columns: s
                .columns
                .iter()
                .map(|c| ColumnJson {
                    name: c.name,
                    bound: bound_text(c.bound),
                })
                .collect(),
            rows: s
                .rows
                .iter()
                .map(|r| TrialJson {
                    trial: r.index,
                    seed: r.seed,
                    margins: named(&r.margins),
                    error: r.error.clone(),
                    ok: r.ok(&s.columns),
                })
                .collect(),
            summary: SweepSummaryJson {
                worst: named(&s.worst),
                violations: s
                    .violations
                    .iter()
                    .map(|&i| ViolationJson {
                        trial: s.rows[i].index,
                        seed: s.rows[i].seed,
                    })
                    .collect(),
                pass: s.pass(),
            },
        }
    }
}

/// Sweep table: one row per trial and a final `worst` row.
pub fn sweep_csv(s: &SweepSummary) -> String {
    let fmt = |v: &Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut out = String::from("trial,seed");
    for c in &s.columns {
        out.push(',');
        out.push_str(c.name);
    }
    out.push_str(",ok\n");
    for r in &s.rows {
        let margins: Vec<String> = r.margins.iter().map(fmt).collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.index,
            r.seed,
            margins.join(","),
            r.ok(&s.columns)
        ));
    }
    let worst: Vec<String> = s.worst.iter().map(fmt).collect();
    out.push_str(&format!("worst,,{},{}\n", worst.join(","), s.pass()));
    out
}

/// `key,value` lines for every scalar outside an array, keys dot-joined.
pub fn flatten_scalars(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, out);
                }
            }
            Value::Array(_) => {}
            Value::String(s) => out.push_str(&format!("{prefix},{}\n", csv_field(s))),
            Value::Null => out.push_str(&format!("{prefix},\n")),
            other => out.push_str(&format!("{prefix},{other}\n")),
        }
    }
    let mut out = String::from("key,value\n");
    walk("", value, &mut out);
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
