//! Solve/verify/simulate drivers over parsed spec files, and result
//! emission as JSON or CSV.
//!
//! JSON output is deterministic: fields keep declaration order and every
//! float is written with 17 significant digits.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dual_deter::{solve_dual_deter, CellDiagnostic, DualDeterSolution};
use crate::error::{Error, Result};
use crate::general::{solve_general, GeneralValueTable, SnapMode};
use crate::graph::{NodeId, Topology};
use crate::rng::RngSeed;
use crate::scalar_lq::{solve_scalar_lq, ScalarValueTable};
use crate::simulator::{estimate_expected_cost, saddle_check, CostEstimate, SaddleReport};
use crate::spec_file::{Game, GameSpecFile, ModelKind};

pub const SOLVER_VERSION: &str = env!("CARGO_PKG_VERSION");

/// In-memory solution for any model kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    ScalarLq(ScalarValueTable),
    DualDeter(DualDeterSolution),
    General(GeneralValueTable),
}

pub fn solve(spec: &GameSpecFile) -> Result<Solution> {
    Ok(match &spec.game {
        Game::ScalarLq(s) => Solution::ScalarLq(solve_scalar_lq(s)?),
        Game::DualDeter(d) => Solution::DualDeter(solve_dual_deter(d)?),
        Game::General(g) => Solution::General(solve_general(g)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Values {
    /// `p[k-1][node]`, `V = p x²`.
    Coefficients { p: Vec<Vec<f64>> },
    /// `v[k-1][node][x]` over the listed grid points.
    Grid { grid: Vec<Vec<f64>>, v: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub k: usize,
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_index: Option<usize>,
    pub actions: Vec<String>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policies {
    pub defender: Vec<PolicyRow>,
    pub adversary: Vec<PolicyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub samples: usize,
    pub seed: u64,
    pub initial_node: String,
    pub x1: Vec<f64>,
    pub estimate: CostEstimate,
    pub solver_value: f64,
    /// `(mean − solver_value) / std_error`; 0 when the estimate is degenerate
    /// or exact.
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub solver_version: String,
    pub spec_sha256: String,
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub horizon: usize,
    pub nodes: Vec<String>,
    pub values: Values,
    pub policies: Policies,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Vec<CellDiagnostic>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
}

fn labels(topology: &Topology, names: &[String], node: NodeId, defender: bool) -> Vec<String> {
    let actions = if defender {
        topology.defender_actions(node)
    } else {
        topology.adversary_actions(node)
    };
    actions.iter().map(|&a| Topology::action_label(a, names)).collect()
}

fn table_rows(topology: &Topology, names: &[String], steps: &[Vec<Vec<f64>>], defender: bool) -> Vec<PolicyRow> {
    steps
        .iter()
        .enumerate()
        .flat_map(|(t, per_node)| {
            per_node.iter().enumerate().map(move |(node, probs)| PolicyRow {
                k: t + 1,
                node: names[node].clone(),
                x_index: None,
                actions: labels(topology, names, node, defender),
                probabilities: probs.clone(),
            })
        })
        .collect()
}

pub fn bundle(spec: &GameSpecFile, solution: &Solution) -> ResultBundle {
    let topo = spec.game.topology();
    let names = &spec.node_names;
    let coefficient_bundle = |t: &ScalarValueTable| {
        (
            Values::Coefficients {
                p: t.coefficients().to_vec(),
            },
            Policies {
                defender: table_rows(topo, names, t.defender_policy().steps(), true),
                adversary: table_rows(topo, names, t.adversary_policy().steps(), false),
            },
        )
    };
    let (values, policies, diagnostics) = match solution {
        Solution::ScalarLq(t) => {
            let (v, p) = coefficient_bundle(t);
            (v, p, None)
        }
        Solution::DualDeter(d) => {
            let (v, p) = coefficient_bundle(&d.table);
            (v, p, Some(d.diagnostics.clone()))
        }
        Solution::General(t) => {
            let Game::General(g) = &spec.game else {
                unreachable!("general solution for a non-general spec")
            };
            let grid_rows = |steps: &[Vec<Vec<Vec<f64>>>], defender: bool| -> Vec<PolicyRow> {
                let mut rows = Vec::new();
                for (s, per_node) in steps.iter().enumerate() {
                    for (node, per_x) in per_node.iter().enumerate() {
                        for (x, probs) in per_x.iter().enumerate() {
                            rows.push(PolicyRow {
                                k: s + 1,
                                node: names[node].clone(),
                                x_index: Some(x),
                                actions: labels(topo, names, node, defender),
                                probabilities: probs.clone(),
                            });
                        }
                    }
                }
                rows
            };
            (
                Values::Grid {
                    grid: g.grid().points().to_vec(),
                    v: t.values().to_vec(),
                },
                Policies {
                    defender: grid_rows(t.defender_policy().steps(), true),
                    adversary: grid_rows(t.adversary_policy().steps(), false),
                },
                None,
            )
        }
    };
    ResultBundle {
        solver_version: SOLVER_VERSION.to_string(),
        spec_sha256: spec.sha256.clone(),
        model: spec.model,
        title: spec.title.clone(),
        horizon: spec.game.horizon(),
        nodes: names.clone(),
        values,
        policies,
        diagnostics,
        simulation: None,
    }
}

pub fn run_solve(spec: &GameSpecFile) -> Result<ResultBundle> {
    Ok(bundle(spec, &solve(spec)?))
}

/// Initial state as the simulator sees it.
enum Start {
    Scalar(f64),
    Grid(usize),
}

fn start_state(spec: &GameSpecFile, x1: Option<&[f64]>) -> Result<Start> {
    let x = x1.or(spec.initial_x.as_deref());
    match &spec.game {
        Game::General(g) => match x {
            Some(x) => Ok(Start::Grid(g.grid().locate(x, SnapMode::Exact)?)),
            None => Ok(Start::Grid(0)),
        },
        _ => match x {
            None => Ok(Start::Scalar(1.0)),
            Some([v]) if v.is_finite() => Ok(Start::Scalar(*v)),
            Some(_) => Err(Error::Spec("scalar models take a single finite initial state".into())),
        },
    }
}

fn start_node(spec: &GameSpecFile, alpha1: Option<&str>) -> Result<NodeId> {
    match alpha1 {
        Some(name) => spec
            .node_index(name)
            .or_else(|| name.parse::<usize>().ok().filter(|&i| i < spec.node_names.len()))
            .ok_or_else(|| Error::Spec(format!("unknown initial node {name:?}"))),
        None => Ok(spec.initial_node.unwrap_or(0)),
    }
}

fn value_from(solution: &Solution, node: NodeId, start: &Start) -> Result<f64> {
    match (solution, start) {
        (Solution::ScalarLq(t), Start::Scalar(x)) => t.evaluate_value(1, node, *x),
        (Solution::DualDeter(d), Start::Scalar(x)) => d.table.evaluate_value(1, node, *x),
        (Solution::General(t), Start::Grid(x)) => t.value_at(1, node, *x),
        _ => unreachable!("start state matches the model kind"),
    }
}

/// Monte Carlo estimate of the expected cost under the solved policies.
pub fn run_simulate(spec: &GameSpecFile, solution: &Solution, samples: usize, seed: u64, x1: Option<&[f64]>, alpha1: Option<&str>) -> Result<SimulationSummary> {
    let node = start_node(spec, alpha1)?;
    spec.game.topology().check_node(node)?;
    let start = start_state(spec, x1)?;
    let solver_value = value_from(solution, node, &start)?;
    let seed_ = RngSeed(seed);
    let (estimate, x1) = match (&spec.game, solution, &start) {
        (Game::ScalarLq(g), Solution::ScalarLq(t), Start::Scalar(x)) => (
            estimate_expected_cost(g, t.defender_policy(), t.adversary_policy(), *x, node, samples, seed_)?,
            vec![*x],
        ),
        (Game::DualDeter(d), Solution::DualDeter(s), Start::Scalar(x)) => (
            estimate_expected_cost(d.as_scalar_lq(), s.table.defender_policy(), s.table.adversary_policy(), *x, node, samples, seed_)?,
            vec![*x],
        ),
        (Game::General(g), Solution::General(t), Start::Grid(x)) => (
            estimate_expected_cost(g, t.defender_policy(), t.adversary_policy(), *x, node, samples, seed_)?,
            g.grid().point(*x).to_vec(),
        ),
        _ => return Err(Error::Precondition("solution does not match the spec's model".into())),
    };
    let z_score = if estimate.std_error > 0.0 {
        (estimate.mean - solver_value) / estimate.std_error
    } else {
        0.0
    };
    Ok(SimulationSummary {
        samples,
        seed,
        initial_node: spec.node_names[node].clone(),
        x1,
        estimate,
        solver_value,
        z_score,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSaddle {
    pub node: String,
    #[serde(flatten)]
    pub report: SaddleReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub spec_sha256: String,
    pub tol: f64,
    pub x1: Vec<f64>,
    /// Saddle certification from every starting node at `x1`.
    pub saddle: Vec<NodeSaddle>,
    /// Dual-deter only: how many cells each resolution covered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolutions: Option<BTreeMap<String, usize>>,
    pub negative_coefficients: usize,
    pub passed: bool,
}

/// Certifies the solved policies by exact best response from every node.
pub fn run_verify(spec: &GameSpecFile, solution: &Solution, tol: f64) -> Result<VerifyReport> {
    let start = start_state(spec, None)?;
    let nodes = spec.node_names.len();
    let mut saddle = Vec::with_capacity(nodes);
    for node in 0..nodes {
        let value = value_from(solution, node, &start)?;
        let report = match (&spec.game, solution, &start) {
            (Game::ScalarLq(g), Solution::ScalarLq(t), Start::Scalar(x)) => saddle_check(g, t.defender_policy(), t.adversary_policy(), x, node, value, tol)?,
            (Game::DualDeter(d), Solution::DualDeter(s), Start::Scalar(x)) => {
                saddle_check(d.as_scalar_lq(), s.table.defender_policy(), s.table.adversary_policy(), x, node, value, tol)?
            }
            (Game::General(g), Solution::General(t), Start::Grid(x)) => saddle_check(g, t.defender_policy(), t.adversary_policy(), x, node, value, tol)?,
            _ => return Err(Error::Precondition("solution does not match the spec's model".into())),
        };
        saddle.push(NodeSaddle {
            node: spec.node_names[node].clone(),
            report,
        });
    }
    let (resolutions, negative) = match solution {
        Solution::DualDeter(d) => {
            let mut counts = BTreeMap::new();
            for diag in &d.diagnostics {
                let key = serde_json::to_value(diag.resolution)?.as_str().unwrap_or_default().to_string();
                *counts.entry(key).or_insert(0) += 1;
            }
            (Some(counts), d.table.negative_coefficients().len())
        }
        Solution::ScalarLq(t) => (None, t.negative_coefficients().len()),
        Solution::General(_) => (None, 0),
    };
    let x1 = match (&spec.game, &start) {
        (Game::General(g), Start::Grid(x)) => g.grid().point(*x).to_vec(),
        (_, Start::Scalar(x)) => vec![*x],
        _ => Vec::new(),
    };
    let passed = saddle.iter().all(|s| s.report.passed) && negative == 0;
    Ok(VerifyReport {
        spec_sha256: spec.sha256.clone(),
        tol,
        x1,
        saddle,
        resolutions,
        negative_coefficients: negative,
        passed,
    })
}

/// Pretty printer that writes floats with 17 significant digits.
struct FixedFloats<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl serde_json::ser::Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Deterministic JSON for any serializable report.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = FixedFloats {
        inner: serde_json::ser::PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `result.json`, or `values.csv`, `policy_defender.csv` and
/// `policy_adversary.csv`, into `dir`.
pub fn emit(bundle: &ResultBundle, format: OutputFormat, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    match format {
        OutputFormat::Json => {
            let path = dir.join("result.json");
            std::fs::write(&path, to_json_string(bundle)?).map_err(io_err(&path))
        }
        OutputFormat::Csv => {
            write_values_csv(bundle, &dir.join("values.csv"))?;
            write_policy_csv(&bundle.policies.defender, &dir.join("policy_defender.csv"))?;
            write_policy_csv(&bundle.policies.adversary, &dir.join("policy_adversary.csv"))
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_values_csv(bundle: &ResultBundle, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    match &bundle.values {
        Values::Coefficients { p } => {
            w.write_record(["k", "node", "coefficient"])?;
            for (t, row) in p.iter().enumerate() {
                for (node, v) in row.iter().enumerate() {
                    w.write_record([(t + 1).to_string(), bundle.nodes[node].clone(), v.to_string()])?;
                }
            }
        }
        Values::Grid { grid, v } => {
            let dim = grid.first().map_or(0, Vec::len);
            let mut header = vec!["k".to_string(), "node".into(), "x_index".into()];
            header.extend((0..dim).map(|i| format!("x_{i}")));
            header.push("value".into());
            w.write_record(&header)?;
            for (t, per_node) in v.iter().enumerate() {
                for (node, row) in per_node.iter().enumerate() {
                    for (x, val) in row.iter().enumerate() {
                        let mut rec = vec![(t + 1).to_string(), bundle.nodes[node].clone(), x.to_string()];
                        rec.extend(grid[x].iter().map(f64::to_string));
                        rec.push(val.to_string());
                        w.write_record(&rec)?;
                    }
                }
            }
        }
    }
    w.flush().map_err(io_err(path))
}

fn write_policy_csv(rows: &[PolicyRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let with_x = rows.iter().any(|r| r.x_index.is_some());
    if with_x {
        w.write_record(["k", "node", "x_index", "target", "probability"])?;
    } else {
        w.write_record(["k", "node", "target", "probability"])?;
    }
    for r in rows {
        for (target, p) in r.actions.iter().zip(&r.probabilities) {
            let mut rec = vec![r.k.to_string(), r.node.clone()];
            if let Some(x) = r.x_index {
                rec.push(x.to_string());
            }
            rec.push(target.clone());
            rec.push(p.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(io_err(path))
}
