//! Model files (JSON documents, see `docs/model-format.md`) and CSV output.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments;
use crate::family::VertexKind;
use crate::generators;
use crate::graph::FactorGraph;
use crate::model::ModelSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variables: Vec<VariableDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factors: Vec<FactorDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise_binary: Option<PairwiseBinary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub id: String,
    #[serde(flatten)]
    pub kind: VertexKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorDecl {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub members: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// `exp(Σ J_ij x_i x_j + Σ h_i x_i)` over ±1 variables; undeclared ids become spin variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairwiseBinary {
    #[serde(rename = "J", default)]
    pub couplings: Vec<(String, String, f64)>,
    #[serde(rename = "h", default)]
    pub fields: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// Pairwise ±1 torus with uniform coupling and field.
    TorusIsing {
        rows: usize,
        cols: usize,
        #[serde(rename = "J")]
        j: f64,
        #[serde(default)]
        h: f64,
    },
    CycleIsing {
        n: usize,
        #[serde(rename = "J")]
        j: f64,
        #[serde(default)]
        h: f64,
    },
    CompleteIsing {
        n: usize,
        #[serde(rename = "J")]
        j: f64,
        #[serde(default)]
        h: f64,
    },
    /// Degree-4 factors at the grid points, ±1 variables on the grid edges.
    GridFactorTorus {
        #[serde(default = "three")]
        rows: usize,
        #[serde(default = "three")]
        cols: usize,
        #[serde(rename = "K")]
        k: f64,
        #[serde(rename = "J")]
        j: f64,
    },
    /// Fixed-mean (zero) Gaussian torus, precision `diagonal·I − coupling·adjacency`.
    GaussianTorus {
        rows: usize,
        cols: usize,
        coupling: f64,
        #[serde(default = "one")]
        diagonal: f64,
    },
    GaussianCycle {
        n: usize,
        coupling: f64,
        #[serde(default = "one")]
        diagonal: f64,
    },
}

fn three() -> usize {
    3
}

fn one() -> f64 {
    1.0
}

/// A parsed model together with the factor ids used in its document.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: ModelSpec,
    pub factor_ids: Vec<String>,
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        msg: e.to_string(),
        line: e.line(),
        column: e.column(),
    }
}

pub fn parse_model(text: &str) -> Result<LoadedModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(json_error)?;
    build_model(&file)
}

pub fn load_model(path: &std::path::Path) -> Result<LoadedModel> {
    parse_model(&std::fs::read_to_string(path)?)
}

fn generated(model: ModelSpec) -> LoadedModel {
    let factor_ids = (0..model.graph().num_factors()).map(|a| format!("f{a}")).collect();
    LoadedModel { model, factor_ids }
}

pub fn build_model(file: &ModelFile) -> Result<LoadedModel> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Invalid(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    if let Some(g) = &file.generator {
        if !file.variables.is_empty() || !file.factors.is_empty() || file.pairwise_binary.is_some() {
            return Err(Error::Invalid("a generator block cannot be combined with other model blocks".into()));
        }
        return generate(g).map(generated);
    }
    let mut ids: Vec<String> = Vec::new();
    let mut kinds: Vec<VertexKind> = Vec::new();
    for v in &file.variables {
        if ids.contains(&v.id) {
            return Err(Error::DuplicateVertex(v.id.clone()));
        }
        ids.push(v.id.clone());
        kinds.push(v.kind);
    }
    let mut members: Vec<Vec<String>> = file.factors.iter().map(|f| f.members.clone()).collect();
    let mut params: Vec<BTreeMap<String, f64>> = Vec::new();
    let mut factor_ids: Vec<String> = file
        .factors
        .iter()
        .enumerate()
        .map(|(a, f)| f.id.clone().unwrap_or_else(|| format!("f{a}")))
        .collect();
    let mut pending_fields: Vec<(String, f64)> = Vec::new();
    if let Some(pb) = &file.pairwise_binary {
        let declare = |id: &str, ids: &mut Vec<String>, kinds: &mut Vec<VertexKind>| {
            if !ids.iter().any(|x| x == id) {
                ids.push(id.to_string());
                kinds.push(VertexKind::Spin);
            }
        };
        for (i, j, _) in &pb.couplings {
            declare(i, &mut ids, &mut kinds);
            declare(j, &mut ids, &mut kinds);
            members.push(vec![i.clone(), j.clone()]);
            factor_ids.push(format!("J:{i},{j}"));
        }
        for (i, h) in &pb.fields {
            declare(i, &mut ids, &mut kinds);
            pending_fields.push((i.clone(), *h));
        }
        for (i, _) in &pending_fields {
            if !members[file.factors.len()..].iter().any(|m| m.contains(i)) {
                members.push(vec![i.clone()]);
                factor_ids.push(format!("h:{i}"));
            }
        }
    }
    let mut seen = HashSet::new();
    for id in &factor_ids {
        if !seen.insert(id) {
            return Err(Error::Invalid(format!("factor id `{id}` used twice")));
        }
    }
    let graph = FactorGraph::build(&ids, &members)?;
    for f in &file.factors {
        params.push(f.params.clone());
    }
    if let Some(pb) = &file.pairwise_binary {
        for (idx, (i, j, c)) in pb.couplings.iter().enumerate() {
            if kinds[graph.vertex_index(i).unwrap()] != VertexKind::Spin
                || kinds[graph.vertex_index(j).unwrap()] != VertexKind::Spin
            {
                return Err(Error::Invalid(format!("coupling {idx} joins non-spin variables")));
            }
            let mut m = BTreeMap::new();
            m.insert(format!("x{i}*x{j}"), *c);
            params.push(m);
        }
        while params.len() < members.len() {
            params.push(BTreeMap::new());
        }
        for (i, h) in &pending_fields {
            let v = graph.vertex_index(i).unwrap();
            if kinds[v] != VertexKind::Spin {
                return Err(Error::Invalid(format!("field on non-spin variable `{i}`")));
            }
            let first = file.factors.len()
                + members[file.factors.len()..]
                    .iter()
                    .position(|m| m.contains(i))
                    .expect("field factor exists");
            *params[first].entry(format!("x{i}")).or_insert(0.0) += h;
        }
    }
    let model = ModelSpec::from_named(graph, kinds, &params)?;
    Ok(LoadedModel { model, factor_ids })
}

pub fn generate(g: &Generator) -> Result<ModelSpec> {
    let ising = |graph: FactorGraph, j: f64, h: f64| {
        let m = graph.num_factors();
        let n = graph.num_vertices();
        ModelSpec::ising(graph, &vec![j; m], &vec![h; n])
    };
    let check = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(what.to_string()))
        }
    };
    match *g {
        Generator::TorusIsing { rows, cols, j, h } => {
            check(rows >= 2 && cols >= 2, "torus needs at least 2 rows and 2 columns")?;
            ising(generators::torus(rows, cols), j, h)
        }
        Generator::CycleIsing { n, j, h } => {
            check(n >= 3, "cycle needs at least 3 vertices")?;
            ising(generators::cycle(n), j, h)
        }
        Generator::CompleteIsing { n, j, h } => {
            check(n >= 2, "complete graph needs at least 2 vertices")?;
            ising(generators::complete(n), j, h)
        }
        Generator::GridFactorTorus { rows, cols, k, j } => {
            check(rows >= 2 && cols >= 2, "grid needs at least 2 rows and 2 columns")?;
            experiments::grid_model_sized(rows, cols, k, j)
        }
        Generator::GaussianTorus {
            rows,
            cols,
            coupling,
            diagonal,
        } => {
            check(rows >= 2 && cols >= 2, "torus needs at least 2 rows and 2 columns")?;
            gaussian(generators::torus(rows, cols), coupling, diagonal)
        }
        Generator::GaussianCycle { n, coupling, diagonal } => {
            check(n >= 3, "cycle needs at least 3 vertices")?;
            gaussian(generators::cycle(n), coupling, diagonal)
        }
    }
}

fn gaussian(graph: FactorGraph, coupling: f64, diagonal: f64) -> Result<ModelSpec> {
    let m = graph.num_factors();
    let n = graph.num_vertices();
    ModelSpec::fixed_mean_gaussian(graph, &vec![coupling; m], &vec![diagonal; n], &vec![0.0; n])
}

/// Explicit form: every variable and factor listed, parameters keyed by statistic name.
pub fn to_model_file(loaded: &LoadedModel) -> ModelFile {
    let m = &loaded.model;
    let g = m.graph();
    ModelFile {
        schema_version: SCHEMA_VERSION,
        variables: (0..g.num_vertices())
            .map(|i| VariableDecl {
                id: g.label(i).to_string(),
                kind: m.family().kind(i),
            })
            .collect(),
        factors: (0..g.num_factors())
            .map(|a| FactorDecl {
                id: Some(loaded.factor_ids[a].clone()),
                members: g.factor(a).iter().map(|&i| g.label(i).to_string()).collect(),
                params: m.named_params(a),
            })
            .collect(),
        pairwise_binary: None,
        generator: None,
    }
}

/// Canonical document: explicit form, fixed key order, two-space indentation.
pub fn serialize_model(loaded: &LoadedModel) -> String {
    let mut s = serde_json::to_string_pretty(&to_model_file(loaded)).expect("model file serializes");
    s.push('\n');
    s
}

/// Parameter vectors keyed by statistic name, for comparing models across documents.
pub fn semantic_form(model: &ModelSpec) -> Vec<(Vec<String>, BTreeMap<String, f64>)> {
    let g = model.graph();
    (0..g.num_factors())
        .map(|a| {
            (
                g.factor(a).iter().map(|&i| g.label(i).to_string()).collect(),
                model.named_params(a),
            )
        })
        .collect()
}

/// 17 significant digits, round-trip safe.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Comma-separated, header row first, LF line endings.
pub fn write_csv<W: std::io::Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, header, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Invalid(e.to_string()))
}

/// Expectation vector keyed by the coordinate names of vertex `i`.
pub fn named_vertex_vector(model: &ModelSpec, i: usize, v: &DVector<f64>) -> BTreeMap<String, f64> {
    model
        .family()
        .kind(i)
        .coordinate_names(model.graph().label(i))
        .into_iter()
        .zip(v.iter().copied())
        .collect()
}

/// Expectation vector keyed by the statistic names of factor `a`.
pub fn named_factor_vector(model: &ModelSpec, a: usize, v: &DVector<f64>) -> BTreeMap<String, f64> {
    model.family().stat_names(a).iter().cloned().zip(v.iter().copied()).collect()
}
