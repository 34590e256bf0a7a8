//! JSON game-spec format.
//!
//! Every node-keyed table (`costs.g`, `dynamics.f`, `transitions`, ...) maps
//! node names to either a constant or a per-time array; constants are
//! broadcast over the horizon. Parsing collects every problem it finds and
//! reports them together, each with a path into the document.
//!
//! The schema is documented in `data/spec.schema.json`.

use std::path::Path;

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dual_deter::DualDeterSpec;
use crate::error::{Error, Result, Violation};
use crate::general::{GeneralGameSpec, StateGrid};
use crate::graph::{DualDeterTopology, GameGraph, NodeId, Topology};
use crate::scalar_lq::{ScalarCoefficients, ScalarLQSpec};

/// JSON schema describing the format.
pub const SCHEMA: &str = include_str!("../data/spec.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    General,
    ScalarLq,
    DualDeter,
}

impl ModelKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "general" => Some(Self::General),
            "scalar_lq" => Some(Self::ScalarLq),
            "dual_deter" => Some(Self::DualDeter),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Game {
    General(GeneralGameSpec),
    ScalarLq(ScalarLQSpec),
    DualDeter(DualDeterSpec),
}

impl Game {
    pub fn topology(&self) -> &Topology {
        match self {
            Game::General(g) => g.topology(),
            Game::ScalarLq(s) => s.topology(),
            Game::DualDeter(d) => d.as_scalar_lq().topology(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Game::General(g) => g.horizon(),
            Game::ScalarLq(s) => s.horizon(),
            Game::DualDeter(d) => d.horizon(),
        }
    }
}

/// A validated spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpecFile {
    pub model: ModelKind,
    pub title: Option<String>,
    pub notes: Vec<String>,
    pub node_names: Vec<String>,
    pub initial_node: Option<NodeId>,
    /// Initial state: one coordinate for scalar models, a grid point for
    /// general ones.
    pub initial_x: Option<Vec<f64>>,
    pub game: Game,
    /// SHA-256 of the source text, lowercase hex.
    pub sha256: String,
}

impl GameSpecFile {
    pub fn node_index(&self, name: &str) -> Option<NodeId> {
        self.node_names.iter().position(|n| n == name)
    }
}

pub fn parse_spec(path: &Path) -> Result<GameSpecFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec_str(&text)
}

pub fn parse_spec_str(text: &str) -> Result<GameSpecFile> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        Error::Validation(vec![Violation::new(
            "$",
            format!("not valid JSON: {e}"),
        )])
    })?;
    let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
    let mut p = Parser::default();
    let parsed = p.document(&root);
    match parsed {
        Some(mut spec) if p.violations.is_empty() => {
            spec.sha256 = sha256;
            Ok(spec)
        }
        _ => Err(Error::Validation(p.violations)),
    }
}

const ROOT_KEYS: &[&str] = &[
    "$schema",
    "model",
    "title",
    "notes",
    "horizon",
    "nodes",
    "edges",
    "chain_length",
    "interior_targets",
    "costs",
    "dynamics",
    "bias",
    "initial",
    "grid",
    "transitions",
];

#[derive(Default)]
struct Parser {
    violations: Vec<Violation>,
}

impl Parser {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation::new(path, message));
    }

    fn document(&mut self, root: &Value) -> Option<GameSpecFile> {
        let Some(obj) = root.as_object() else {
            self.fail("$", "top level must be an object");
            return None;
        };
        for key in obj.keys() {
            if !ROOT_KEYS.contains(&key.as_str()) {
                self.fail(format!("$.{key}"), "unknown field");
            }
        }

        let model = match obj.get("model") {
            Some(Value::String(s)) => ModelKind::parse(s).or_else(|| {
                self.fail("$.model", format!("unknown model {s:?} (expected general, scalar_lq or dual_deter)"));
                None
            }),
            Some(_) => {
                self.fail("$.model", "must be a string");
                None
            }
            None => {
                self.fail("$.model", "required");
                None
            }
        };
        let title = match obj.get("title") {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.fail("$.title", "must be a string");
                None
            }
        };
        let notes = match obj.get("notes") {
            None => Vec::new(),
            Some(Value::String(s)) => vec![s.clone()],
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .filter_map(|(i, v)| {
                    v.as_str().map(str::to_string).or_else(|| {
                        self.fail(format!("$.notes[{i}]"), "must be a string");
                        None
                    })
                })
                .collect(),
            Some(_) => {
                self.fail("$.notes", "must be a string or an array of strings");
                Vec::new()
            }
        };
        let horizon = match obj.get("horizon") {
            Some(v) => match v.as_u64() {
                Some(h) if h >= 1 => Some(h as usize),
                _ => {
                    self.fail("$.horizon", "must be a positive integer");
                    None
                }
            },
            None => {
                self.fail("$.horizon", "required");
                None
            }
        };
        let model = model?;

        let topology_and_names = match model {
            ModelKind::DualDeter => self.chain(obj),
            ModelKind::General | ModelKind::ScalarLq => self.graph(obj),
        };
        self.bias(obj);
        let (topology, names) = topology_and_names?;
        let horizon = horizon?;

        let initial = self.initial(obj, &names);

        let game = match model {
            ModelKind::General => {
                if obj.contains_key("dynamics") {
                    self.fail("$.dynamics", "general models take `transitions` instead");
                }
                self.general(obj, topology, horizon, &names).map(Game::General)
            }
            ModelKind::ScalarLq | ModelKind::DualDeter => {
                for key in ["grid", "transitions"] {
                    if obj.contains_key(key) {
                        self.fail(format!("$.{key}"), "only allowed for general models");
                    }
                }
                let coef = self.scalar_coefficients(obj, horizon, &names);
                match (coef, topology) {
                    (Some(coef), Topology::DualDeter(chain)) => self.lift(DualDeterSpec::new(chain, horizon, coef)).map(Game::DualDeter),
                    (Some(coef), topology) => self.lift(ScalarLQSpec::new(topology, horizon, coef)).map(Game::ScalarLq),
                    (None, _) => None,
                }
            }
        }?;

        let (initial_node, initial_x) = initial.unwrap_or((None, None));
        if let (Game::General(g), Some(x)) = (&game, &initial_x) {
            if x.len() != g.grid().dim() {
                self.fail("$.initial.x", format!("needs {} coordinates", g.grid().dim()));
            }
        }
        if let (Game::ScalarLq(_) | Game::DualDeter(_), Some(x)) = (&game, &initial_x) {
            if x.len() != 1 {
                self.fail("$.initial.x", "scalar models take a single number");
            }
        }

        Some(GameSpecFile {
            model,
            title,
            notes,
            node_names: names,
            initial_node,
            initial_x,
            game,
            sha256: String::new(),
        })
    }

    fn lift<T>(&mut self, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail("$", e.to_string());
                None
            }
        }
    }

    fn names(&mut self, v: &Value, path: &str) -> Option<Vec<String>> {
        let Some(items) = v.as_array() else {
            self.fail(path, "must be an array of node names");
            return None;
        };
        if items.is_empty() {
            self.fail(path, "needs at least one node");
            return None;
        }
        let mut names = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match item.as_str() {
                Some(s) if !s.is_empty() => {
                    if names.iter().any(|n| n == s) {
                        self.fail(format!("{path}[{i}]"), format!("duplicate node name {s:?}"));
                        ok = false;
                    }
                    names.push(s.to_string());
                }
                _ => {
                    self.fail(format!("{path}[{i}]"), "must be a non-empty string");
                    ok = false;
                }
            }
        }
        ok.then_some(names)
    }

    fn node_ref(&mut self, v: &Value, path: &str, names: &[String]) -> Option<NodeId> {
        match v.as_str() {
            Some(s) => names.iter().position(|n| n == s).or_else(|| {
                self.fail(path, format!("unknown node {s:?}"));
                None
            }),
            None => {
                self.fail(path, "must be a node name");
                None
            }
        }
    }

    fn graph(&mut self, obj: &serde_json::Map<String, Value>) -> Option<(Topology, Vec<String>)> {
        for key in ["chain_length", "interior_targets"] {
            if obj.contains_key(key) {
                self.fail(format!("$.{key}"), "only allowed for dual_deter models");
            }
        }
        let names = match obj.get("nodes") {
            Some(v) => self.names(v, "$.nodes"),
            None => {
                self.fail("$.nodes", "required");
                None
            }
        }?;
        let mut edges = Vec::new();
        match obj.get("edges") {
            None => {}
            Some(Value::Array(items)) => {
                for (i, e) in items.iter().enumerate() {
                    let path = format!("$.edges[{i}]");
                    match e.as_array().map(Vec::as_slice) {
                        Some([from, to]) => {
                            let from = self.node_ref(from, &format!("{path}[0]"), &names);
                            let to = self.node_ref(to, &format!("{path}[1]"), &names);
                            if let (Some(from), Some(to)) = (from, to) {
                                edges.push((from, to));
                            }
                        }
                        _ => self.fail(path, "must be a [from, to] pair of node names"),
                    }
                }
            }
            Some(_) => self.fail("$.edges", "must be an array of [from, to] pairs"),
        }
        let graph = self.lift(GameGraph::new(names.len(), edges))?;
        Some((graph.into(), names))
    }

    fn chain(&mut self, obj: &serde_json::Map<String, Value>) -> Option<(Topology, Vec<String>)> {
        if obj.contains_key("edges") {
            self.fail("$.edges", "dual_deter models derive their edges from the chain");
        }
        let n = match obj.get("chain_length").map(Value::as_u64) {
            Some(Some(n)) if n >= 1 => n as usize,
            Some(_) => {
                self.fail("$.chain_length", "must be a positive integer");
                return None;
            }
            None => {
                self.fail("$.chain_length", "required");
                return None;
            }
        };
        let names = match obj.get("nodes") {
            Some(v) => {
                let names = self.names(v, "$.nodes")?;
                if names.len() != n + 1 {
                    self.fail("$.nodes", format!("a chain of length {n} has {} nodes, got {}", n + 1, names.len()));
                    return None;
                }
                names
            }
            None => (0..=n).map(|i| i.to_string()).collect(),
        };
        let mut down: Vec<NodeId> = (0..=n).map(|i| i.saturating_sub(1)).collect();
        let mut up: Vec<NodeId> = (0..=n).map(|i| (i + 1).min(n)).collect();
        match obj.get("interior_targets") {
            None => {}
            Some(Value::Object(t)) => {
                for (key, table) in t {
                    let target = match key.as_str() {
                        "down" => &mut down,
                        "up" => &mut up,
                        _ => {
                            self.fail(format!("$.interior_targets.{key}"), "unknown field (expected down or up)");
                            continue;
                        }
                    };
                    let Some(map) = table.as_object() else {
                        self.fail(format!("$.interior_targets.{key}"), "must map node names to node names");
                        continue;
                    };
                    for (from, to) in map {
                        let path = format!("$.interior_targets.{key}.{from}");
                        let Some(from) = names.iter().position(|nm| nm == from) else {
                            self.fail(path, "unknown node");
                            continue;
                        };
                        if from == 0 || from == n {
                            self.fail(path, "boundary nodes have no interior targets");
                            continue;
                        }
                        if let Some(to) = self.node_ref(to, &path, &names) {
                            target[from] = to;
                        }
                    }
                }
            }
            Some(_) => self.fail("$.interior_targets", "must be an object with down/up maps"),
        }
        match DualDeterTopology::with_targets(n, down, up) {
            Ok(chain) => Some((chain.into(), names)),
            Err(e) => {
                self.fail("$.interior_targets", e.to_string());
                None
            }
        }
    }

    fn bias(&mut self, obj: &serde_json::Map<String, Value>) {
        let Some(bias) = obj.get("bias") else { return };
        let mut nonzero = false;
        let mut walk = vec![bias];
        while let Some(v) = walk.pop() {
            match v {
                Value::Number(x) => nonzero |= x.as_f64() != Some(0.0),
                Value::Array(a) => walk.extend(a),
                Value::Object(m) => walk.extend(m.values()),
                _ => {
                    self.fail("$.bias", "must contain only numbers");
                    return;
                }
            }
        }
        if nonzero {
            self.fail("$.bias", "affine value terms are not supported; every bias entry must be 0");
        }
    }

    fn initial(&mut self, obj: &serde_json::Map<String, Value>, names: &[String]) -> Option<(Option<NodeId>, Option<Vec<f64>>)> {
        let v = obj.get("initial")?;
        let Some(m) = v.as_object() else {
            self.fail("$.initial", "must be an object with node and x");
            return None;
        };
        for key in m.keys() {
            if key != "node" && key != "x" {
                self.fail(format!("$.initial.{key}"), "unknown field");
            }
        }
        let node = m.get("node").and_then(|v| self.node_ref(v, "$.initial.node", names));
        let x = match m.get("x") {
            None => None,
            Some(Value::Number(n)) => n.as_f64().map(|x| vec![x]),
            Some(Value::Array(a)) => {
                let xs: Option<Vec<f64>> = a.iter().map(Value::as_f64).collect();
                if xs.is_none() {
                    self.fail("$.initial.x", "must be a number or an array of numbers");
                }
                xs
            }
            Some(_) => {
                self.fail("$.initial.x", "must be a number or an array of numbers");
                None
            }
        };
        Some((node, x))
    }

    fn number(&mut self, v: &Value, path: &str, nonneg: bool) -> Option<f64> {
        match v.as_f64() {
            Some(x) if !x.is_finite() => {
                self.fail(path, "must be finite");
                None
            }
            Some(x) if nonneg && x < 0.0 => {
                self.fail(path, format!("{x} is negative; costs must be non-negative"));
                None
            }
            Some(x) => Some(x),
            None => {
                self.fail(path, "must be a number");
                None
            }
        }
    }

    /// Node-keyed object: one entry per node, no extras.
    fn per_node<'v>(&mut self, v: Option<&'v Value>, path: &str, names: &[String]) -> Option<Vec<&'v Value>> {
        let Some(v) = v else {
            self.fail(path, "required");
            return None;
        };
        let Some(map) = v.as_object() else {
            self.fail(path, "must map every node name to a value");
            return None;
        };
        for key in map.keys() {
            if !names.contains(key) {
                self.fail(format!("{path}.{key}"), "unknown node");
            }
        }
        let mut out = Vec::with_capacity(names.len());
        let mut ok = true;
        for name in names {
            match map.get(name) {
                Some(v) => out.push(v),
                None => {
                    self.fail(format!("{path}.{name}"), "missing");
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    /// Number or per-time array of `steps` numbers.
    fn scalar_series(&mut self, v: &Value, path: &str, steps: usize, nonneg: bool) -> Option<Vec<f64>> {
        match v {
            Value::Array(items) => {
                if items.len() != steps {
                    self.fail(path, format!("needs {steps} time entries, got {}", items.len()));
                    return None;
                }
                let vals: Vec<Option<f64>> = items
                    .iter()
                    .enumerate()
                    .map(|(i, x)| self.number(x, &format!("{path}[{i}]"), nonneg))
                    .collect();
                vals.into_iter().collect()
            }
            _ => self.number(v, path, nonneg).map(|x| vec![x; steps]),
        }
    }

    fn scalar_table(&mut self, obj: Option<&Value>, path: &str, names: &[String], steps: usize, nonneg: bool) -> Option<Vec<Vec<f64>>> {
        let entries = self.per_node(obj, path, names)?;
        let series: Vec<Option<Vec<f64>>> = entries
            .iter()
            .zip(names)
            .map(|(v, name)| self.scalar_series(v, &format!("{path}.{name}"), steps, nonneg))
            .collect();
        let series: Vec<Vec<f64>> = series.into_iter().collect::<Option<_>>()?;
        Some((0..steps).map(|t| series.iter().map(|s| s[t]).collect()).collect())
    }

    fn scalar_coefficients(&mut self, obj: &serde_json::Map<String, Value>, horizon: usize, names: &[String]) -> Option<ScalarCoefficients> {
        let costs = self.section(obj, "costs", &["g", "d", "a"]);
        let dynamics = self.section(obj, "dynamics", &["f"]);
        let g = self.scalar_table(costs.and_then(|c| c.get("g")), "$.costs.g", names, horizon + 1, true);
        let d = self.scalar_table(costs.and_then(|c| c.get("d")), "$.costs.d", names, horizon, true);
        let a = self.scalar_table(costs.and_then(|c| c.get("a")), "$.costs.a", names, horizon, true);
        let f = self.scalar_table(dynamics.and_then(|c| c.get("f")), "$.dynamics.f", names, horizon, false);
        Some(ScalarCoefficients { f: f?, g: g?, d: d?, a: a? })
    }

    fn section<'v>(&mut self, obj: &'v serde_json::Map<String, Value>, key: &str, fields: &[&str]) -> Option<&'v serde_json::Map<String, Value>> {
        match obj.get(key) {
            Some(Value::Object(m)) => {
                for k in m.keys() {
                    if !fields.contains(&k.as_str()) {
                        self.fail(format!("$.{key}.{k}"), "unknown field");
                    }
                }
                Some(m)
            }
            Some(_) => {
                self.fail(format!("$.{key}"), "must be an object");
                None
            }
            None => {
                self.fail(format!("$.{key}"), "required");
                None
            }
        }
    }

    /// Number (constant in time and state), `[len]` (constant in time) or
    /// `[steps][len]`.
    fn grid_series(&mut self, v: &Value, path: &str, steps: usize, len: usize, nonneg: bool) -> Option<Vec<Vec<f64>>> {
        let row = |p: &mut Self, v: &Value, path: &str| -> Option<Vec<f64>> {
            match v {
                Value::Array(items) if items.len() == len => {
                    let vals: Vec<Option<f64>> = items
                        .iter()
                        .enumerate()
                        .map(|(i, x)| p.number(x, &format!("{path}[{i}]"), nonneg))
                        .collect();
                    vals.into_iter().collect()
                }
                Value::Array(items) => {
                    p.fail(path, format!("needs {len} grid entries, got {}", items.len()));
                    None
                }
                _ => {
                    p.fail(path, "must be an array of numbers");
                    None
                }
            }
        };
        match v {
            Value::Array(items) if items.first().is_some_and(Value::is_array) => {
                if items.len() != steps {
                    self.fail(path, format!("needs {steps} time entries, got {}", items.len()));
                    return None;
                }
                let rows: Vec<Option<Vec<f64>>> = items
                    .iter()
                    .enumerate()
                    .map(|(t, r)| row(self, r, &format!("{path}[{t}]")))
                    .collect();
                rows.into_iter().collect()
            }
            Value::Array(_) => row(self, v, path).map(|r| vec![r; steps]),
            _ => self.number(v, path, nonneg).map(|x| vec![vec![x; len]; steps]),
        }
    }

    fn grid_table(&mut self, obj: Option<&Value>, path: &str, names: &[String], steps: usize, len: usize, nonneg: bool) -> Option<Vec<Vec<Vec<f64>>>> {
        let entries = self.per_node(obj, path, names)?;
        let series: Vec<Option<Vec<Vec<f64>>>> = entries
            .iter()
            .zip(names)
            .map(|(v, name)| self.grid_series(v, &format!("{path}.{name}"), steps, len, nonneg))
            .collect();
        let series: Vec<Vec<Vec<f64>>> = series.into_iter().collect::<Option<_>>()?;
        Some((0..steps).map(|t| series.iter().map(|s| s[t].clone()).collect()).collect())
    }

    fn grid(&mut self, obj: &serde_json::Map<String, Value>) -> Option<StateGrid> {
        let Some(Value::Array(items)) = obj.get("grid") else {
            self.fail("$.grid", "required: an array of numbers or of coordinate arrays");
            return None;
        };
        let mut points = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let path = format!("$.grid[{i}]");
            match item {
                Value::Array(coords) => {
                    let c: Vec<Option<f64>> = coords
                        .iter()
                        .enumerate()
                        .map(|(j, x)| self.number(x, &format!("{path}[{j}]"), false))
                        .collect();
                    points.push(c.into_iter().collect::<Option<Vec<f64>>>()?);
                }
                _ => points.push(vec![self.number(item, &path, false)?]),
            }
        }
        match StateGrid::new(points) {
            Ok(g) => Some(g),
            Err(e) => {
                self.fail("$.grid", e.to_string());
                None
            }
        }
    }

    fn general(&mut self, obj: &serde_json::Map<String, Value>, topology: Topology, horizon: usize, names: &[String]) -> Option<GeneralGameSpec> {
        let grid = self.grid(obj)?;
        let len = grid.len();
        let costs = self.section(obj, "costs", &["g", "d", "a"]);
        let g = self.grid_table(costs.and_then(|c| c.get("g")), "$.costs.g", names, horizon + 1, len, true);
        let d = self.grid_table(costs.and_then(|c| c.get("d")), "$.costs.d", names, horizon, len, true);
        let a = self.grid_table(costs.and_then(|c| c.get("a")), "$.costs.a", names, horizon, len, true);
        let transitions = self.grid_table(obj.get("transitions"), "$.transitions", names, horizon, len, true);
        let transitions = transitions.map(|t| {
            let mut bad = Vec::new();
            let idx: Vec<Vec<Vec<usize>>> = t
                .iter()
                .enumerate()
                .map(|(k, per_node)| {
                    per_node
                        .iter()
                        .enumerate()
                        .map(|(node, row)| {
                            row.iter()
                                .enumerate()
                                .map(|(x, &v)| {
                                    if v.fract() != 0.0 || v < 0.0 || v >= len as f64 {
                                        bad.push(format!("$.transitions.{}[k={}][{x}]", names[node], k + 1));
                                    }
                                    v as usize
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            bad.dedup();
            for path in bad {
                self.fail(path, format!("must be a grid index in 0..{len}"));
            }
            idx
        });
        let spec = GeneralGameSpec::new(topology, horizon, grid, transitions?, g?, d?, a?);
        self.lift(spec)
    }
}
