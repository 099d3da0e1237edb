//! File formats: CSV panels, JSON documents for graphs, reports and ground
//! truth, and Graphviz DOT export.
//!
//! Node labels in every JSON document and in DOT output are 1-based; the
//! in-memory types are 0-based. Component positions in `ordering` and in the
//! ordering trace are 1-based as well.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::admm::AdmmSummary;
use crate::error::{Error, Result};
use crate::graph::{self, ChainGraph, CoefficientPair, DirectedEdge, Provenance, UndirectedEdge};
use crate::pipeline::{BenchRow, EstimationConfig, FitMetrics, RateSummary, RunReport, Tuning};
use crate::simgen::{ComponentNoise, GroundTruth};
use crate::spectral::TimeSeriesPanel;

/// Reads a panel: a header row of column names, then one row per time point.
pub fn read_panel_csv<R: Read>(reader: R) -> Result<(TimeSeriesPanel, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::InvalidInput("CSV has no header row".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let rec = rec.map_err(|e| Error::InvalidInput(format!("line {line}: {e}")))?;
        if rec.len() != names.len() {
            return Err(Error::InvalidInput(format!(
                "line {line}: expected {} fields, found {}",
                names.len(),
                rec.len()
            )));
        }
        let mut row = Vec::with_capacity(names.len());
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "line {line}, column {} ({}): cannot parse {field:?} as a number",
                    j + 1,
                    names[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "line {line}, column {} ({}): non-finite value {field:?}",
                    j + 1,
                    names[j]
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("CSV has a header but no data rows".into()));
    }
    Ok((TimeSeriesPanel::from_rows(&rows)?, names))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

pub fn read_panel_csv_file(path: &Path) -> Result<(TimeSeriesPanel, Vec<String>)> {
    read_panel_csv(open(path)?).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// Default column names `x1, x2, ...`.
pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("x{k}")).collect()
}

pub fn write_panel_csv<W: Write>(writer: W, panel: &TimeSeriesPanel, names: &[String]) -> Result<()> {
    if names.len() != panel.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} column names for a {}-column panel",
            names.len(),
            panel.dim()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(names)?;
    let data = panel.data();
    for t in 0..data.nrows() {
        // `{}` on f64 prints the shortest representation that parses back
        // to the same value.
        w.write_record((0..data.ncols()).map(|k| format!("{}", data[(t, k)])))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_panel_csv_file(path: &Path, panel: &TimeSeriesPanel, names: &[String]) -> Result<()> {
    write_panel_csv(BufWriter::new(File::create(path)?), panel, names)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedJson {
    pub from: usize,
    pub to: usize,
    #[serde(rename = "in_A")]
    pub in_a: bool,
    #[serde(rename = "in_B")]
    pub in_b: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub p: usize,
    pub undirected: Vec<[usize; 2]>,
    pub directed: Vec<DirectedJson>,
    pub components: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<usize>>,
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

fn zero_based(v: &[usize], bound: usize, what: &str) -> Result<Vec<usize>> {
    v.iter()
        .map(|&x| {
            if x == 0 || x > bound {
                Err(Error::InvalidInput(format!("{what} label {x} outside 1..={bound}")))
            } else {
                Ok(x - 1)
            }
        })
        .collect()
}

impl From<&ChainGraph> for GraphJson {
    fn from(g: &ChainGraph) -> Self {
        Self {
            p: g.p,
            undirected: g.undirected.iter().map(|e| [e.a + 1, e.b + 1]).collect(),
            directed: g
                .directed
                .iter()
                .map(|(e, prov)| DirectedJson {
                    from: e.from + 1,
                    to: e.to + 1,
                    in_a: prov.in_a,
                    in_b: prov.in_b,
                })
                .collect(),
            components: g.components.iter().map(|c| one_based(c)).collect(),
            ordering: g.ordering.as_ref().map(|o| one_based(o)),
        }
    }
}

impl GraphJson {
    /// Converts back to the in-memory graph. The listed components must be
    /// a partition of the nodes that contains every undirected edge.
    pub fn to_graph(&self) -> Result<ChainGraph> {
        let p = self.p;
        let mut undirected = BTreeSet::new();
        for pair in &self.undirected {
            let z = zero_based(pair, p, "node")?;
            if z[0] == z[1] {
                return Err(Error::InvalidInput(format!("self-loop on node {}", pair[0])));
            }
            undirected.insert(UndirectedEdge::new(z[0], z[1]));
        }
        let mut directed = BTreeMap::new();
        for d in &self.directed {
            let z = zero_based(&[d.from, d.to], p, "node")?;
            directed.insert(
                DirectedEdge { from: z[0], to: z[1] },
                Provenance {
                    in_a: d.in_a,
                    in_b: d.in_b,
                },
            );
        }
        let mut components: Vec<Vec<usize>> = self
            .components
            .iter()
            .map(|c| {
                let mut z = zero_based(c, p, "node")?;
                z.sort_unstable();
                Ok(z)
            })
            .collect::<Result<_>>()?;
        let mut seen = vec![false; p];
        for &k in components.iter().flatten() {
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidInput(format!("node {} listed in two components", k + 1)));
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!("node {} is in no component", k + 1)));
        }
        let ordering = match &self.ordering {
            Some(o) => {
                let z = zero_based(o, components.len(), "component")?;
                let mut sorted = z.clone();
                sorted.sort_unstable();
                if sorted != (0..components.len()).collect::<Vec<_>>() {
                    return Err(Error::InvalidInput("ordering is not a permutation of the components".into()));
                }
                Some(z)
            }
            None => None,
        };
        // Keep the library convention (components ordered by smallest
        // member) and remap the ordering accordingly.
        let mut idx: Vec<usize> = (0..components.len()).collect();
        idx.sort_by_key(|&g| components[g].first().copied());
        let mut pos = vec![0; idx.len()];
        for (new, &old) in idx.iter().enumerate() {
            pos[old] = new;
        }
        components = idx.iter().map(|&g| components[g].clone()).collect();
        let ordering = ordering.map(|o| o.into_iter().map(|g| pos[g]).collect());
        let g = ChainGraph {
            p,
            undirected,
            directed,
            components,
            ordering,
        };
        let derived = graph::components_from_undirected(p, g.undirected.iter().copied())?;
        let of = g.component_of();
        for comp in &derived {
            if comp.iter().any(|&k| of[k] != of[comp[0]]) {
                return Err(Error::InvalidInput(
                    "an undirected edge joins nodes of different components".into(),
                ));
            }
        }
        Ok(g)
    }
}

/// Coefficient matrices as row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffsJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::InvalidInput(format!("{what}: ragged rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what}: non-finite entry")));
    }
    Ok(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

impl From<&CoefficientPair> for CoeffsJson {
    fn from(c: &CoefficientPair) -> Self {
        Self {
            a: rows_of(&c.a),
            b: rows_of(&c.b),
        }
    }
}

impl CoeffsJson {
    pub fn to_coeffs(&self) -> Result<CoefficientPair> {
        let a = matrix_from_rows(&self.a, "A")?;
        let b = matrix_from_rows(&self.b, "B")?;
        if !a.is_square() || a.shape() != b.shape() {
            return Err(Error::InvalidInput("A and B must be square and of equal size".into()));
        }
        Ok(CoefficientPair { a, b })
    }
}

/// One step of the ordering search: the discrepancy of every candidate
/// component (1-based position in `graph.components`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub placed: usize,
    pub candidates: Vec<(usize, f64)>,
}

/// The report written by `fit`. Run times are not included so that the
/// document depends only on the data and the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub graph: GraphJson,
    pub coeffs: CoeffsJson,
    pub tuning: Tuning,
    pub admm: AdmmSummary,
    pub ordering_trace: Vec<TraceStep>,
    pub dropped_first_observation: bool,
    pub config: EstimationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<FitMetrics>,
}

impl From<&RunReport> for ReportJson {
    fn from(r: &RunReport) -> Self {
        let ordering_trace = r
            .ordering
            .ordering
            .iter()
            .zip(&r.ordering.discrepancy_trace)
            .map(|(&placed, step)| TraceStep {
                placed: placed + 1,
                candidates: step.iter().map(|&(g, d)| (g + 1, d)).collect(),
            })
            .collect();
        Self {
            graph: GraphJson::from(&r.estimated),
            coeffs: CoeffsJson::from(&r.coeffs),
            tuning: r.tuning,
            admm: r.admm.clone(),
            ordering_trace,
            dropped_first_observation: r.dropped_first_observation,
            config: r.config.clone(),
            metrics: r.metrics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseJson {
    pub nodes: Vec<usize>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
}

/// Ground truth as written by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthJson {
    pub graph: GraphJson,
    pub coeffs: CoeffsJson,
    pub noise: Vec<NoiseJson>,
    pub spectral_radius_x: f64,
    pub rescale_applied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer1: Option<Vec<usize>>,
    pub burn_in: usize,
}

impl From<&GroundTruth> for TruthJson {
    fn from(t: &GroundTruth) -> Self {
        Self {
            graph: GraphJson::from(&t.graph),
            coeffs: CoeffsJson::from(&t.coeffs),
            noise: t
                .noise
                .iter()
                .map(|n| NoiseJson {
                    nodes: one_based(&n.nodes),
                    c: rows_of(&n.c),
                    sigma: rows_of(&n.sigma),
                })
                .collect(),
            spectral_radius_x: t.spectral_radius_x,
            rescale_applied: t.rescale_applied,
            layer1: t.layer1.as_ref().map(|l| one_based(l)),
            burn_in: t.burn_in,
        }
    }
}

impl TruthJson {
    pub fn to_truth(&self) -> Result<GroundTruth> {
        let graph = self.graph.to_graph()?;
        let coeffs = self.coeffs.to_coeffs()?;
        if coeffs.dim() != graph.p {
            return Err(Error::InvalidInput("coefficient size differs from p".into()));
        }
        let noise = self
            .noise
            .iter()
            .map(|n| {
                Ok(ComponentNoise {
                    nodes: zero_based(&n.nodes, graph.p, "node")?,
                    c: matrix_from_rows(&n.c, "C")?,
                    sigma: matrix_from_rows(&n.sigma, "sigma")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut truth = GroundTruth::from_parts(graph, coeffs, noise, self.burn_in)?;
        truth.rescale_applied = self.rescale_applied;
        truth.layer1 = match &self.layer1 {
            Some(l) => Some(zero_based(l, truth.p(), "node")?),
            None => None,
        };
        Ok(truth)
    }
}

/// Any document carrying a graph and coefficients; both [`ReportJson`] and
/// [`TruthJson`] qualify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateJson {
    pub graph: GraphJson,
    pub coeffs: CoeffsJson,
}

/// One line per grid cell: mean and standard error of every rate, then SHD.
pub fn write_bench_csv<W: Write>(writer: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["design", "p", "T", "replications", "succeeded"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for kind in ["Eu", "A", "B"] {
        for rate in ["recall", "precision", "mcc"] {
            header.push(format!("{kind}_{rate}_mean"));
            header.push(format!("{kind}_{rate}_se"));
        }
    }
    header.push("shd_mean".into());
    header.push("shd_se".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            format!("{:?}", r.cell.design),
            r.cell.p.to_string(),
            r.cell.t.to_string(),
            r.replications.to_string(),
            r.succeeded.to_string(),
        ];
        let push = |rec: &mut Vec<String>, s: &RateSummary| {
            for ms in [s.recall, s.precision, s.mcc] {
                rec.push(ms.mean.to_string());
                rec.push(ms.se.to_string());
            }
        };
        push(&mut rec, &r.undirected);
        push(&mut rec, &r.a);
        push(&mut rec, &r.b);
        rec.push(r.shd.mean.to_string());
        rec.push(r.shd.se.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Graphviz rendering. Undirected edges have no arrowhead; a directed edge
/// is solid when its largest-magnitude coefficient (over `A` and `B`) is
/// positive and dashed when negative. Labels are 1-based.
pub fn to_dot(graph: &ChainGraph, coeffs: Option<&CoefficientPair>, names: Option<&[String]>) -> String {
    let label = |k: usize| -> String {
        match names {
            Some(n) if k < n.len() => n[k].replace('"', "\\\""),
            _ => format!("{}", k + 1),
        }
    };
    let mut out = String::from("digraph tscg {\n  node [shape=circle];\n");
    for (g, comp) in graph.components.iter().enumerate() {
        if comp.len() > 1 {
            out.push_str(&format!("  subgraph cluster_{} {{\n    style=dotted;\n", g + 1));
            for &k in comp {
                out.push_str(&format!("    n{};\n", k + 1));
            }
            out.push_str("  }\n");
        }
    }
    for k in 0..graph.p {
        out.push_str(&format!("  n{} [label=\"{}\"];\n", k + 1, label(k)));
    }
    for e in &graph.undirected {
        out.push_str(&format!("  n{} -> n{} [dir=none];\n", e.a + 1, e.b + 1));
    }
    for (e, prov) in &graph.directed {
        let weight = coeffs.map(|c| {
            let va = c.a[(e.to, e.from)];
            let vb = c.b[(e.to, e.from)];
            if va.abs() >= vb.abs() { va } else { vb }
        });
        let style = match weight {
            Some(w) if w < 0.0 => "dashed",
            _ => "solid",
        };
        let tag = match (prov.in_a, prov.in_b) {
            (true, true) => "A,B",
            (true, false) => "A",
            (false, true) => "B",
            (false, false) => "",
        };
        out.push_str(&format!(
            "  n{} -> n{} [style={style}, label=\"{tag}\"];\n",
            e.from + 1,
            e.to + 1
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen;

    #[test]
    fn csv_round_trip_is_exact() {
        let panel = TimeSeriesPanel::from_rows(&[vec![0.1, -2.5e-7], vec![1.0 / 3.0, 1e300], vec![0.0, -0.0]]).unwrap();
        let mut buf = Vec::new();
        write_panel_csv(&mut buf, &panel, &default_names(2)).unwrap();
        let (back, names) = read_panel_csv(&buf[..]).unwrap();
        assert_eq!(names, vec!["x1", "x2"]);
        assert_eq!(back.data(), panel.data());
    }

    #[test]
    fn csv_errors_name_line_and_column() {
        let err = read_panel_csv("a,b\n1,2\n3,oops\n".as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("column 2") && err.contains("(b)"), "{err}");
        let err = read_panel_csv("a,b\n1,NaN\n".as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("non-finite"), "{err}");
        assert!(read_panel_csv("a,b\n".as_bytes()).is_err());
        assert!(read_panel_csv("a,b\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn graph_json_is_one_based_and_round_trips() {
        let truth = simgen::fixture().unwrap();
        let j = GraphJson::from(&truth.graph);
        assert!(j.undirected.contains(&[1, 3]));
        assert!(j.undirected.contains(&[3, 5]));
        assert_eq!(j.components[0], vec![1, 3, 5]);
        let text = serde_json::to_string(&j).unwrap();
        assert!(text.contains("\"in_A\""));
        let back: GraphJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_graph().unwrap(), truth.graph);
    }

    #[test]
    fn graph_json_rejects_bad_labels() {
        let mut j = GraphJson::from(&simgen::fixture().unwrap().graph);
        j.undirected.push([0, 2]);
        assert!(j.to_graph().is_err());
        let mut j = GraphJson::from(&simgen::fixture().unwrap().graph);
        j.undirected.push([1, 2]);
        assert!(j.to_graph().is_err(), "edge across components must be rejected");
        let mut j = GraphJson::from(&simgen::fixture().unwrap().graph);
        j.components.pop();
        assert!(j.to_graph().is_err());
    }

    #[test]
    fn truth_json_round_trips() {
        let spec = simgen::DesignSpec::new(simgen::Design::RandomOrder, 12, 200, 5);
        let truth = simgen::generate_graph(&spec).unwrap();
        let text = to_json_string(&TruthJson::from(&truth)).unwrap();
        let back: TruthJson = serde_json::from_str(&text).unwrap();
        let t2 = back.to_truth().unwrap();
        assert_eq!(t2.graph, truth.graph);
        assert_eq!(t2.coeffs, truth.coeffs);
        assert_eq!(t2.noise, truth.noise);
        assert_eq!(t2.spectral_radius_x, truth.spectral_radius_x);
    }

    #[test]
    fn dot_styles() {
        let truth = simgen::fixture().unwrap();
        let dot = to_dot(&truth.graph, Some(&truth.coeffs), None);
        assert!(dot.contains("n1 -> n3 [dir=none]"));
        // 4 -> 7 has A = -0.8 and B = 0.8; ties go to A.
        assert!(dot.contains("n4 -> n7 [style=dashed, label=\"A,B\"]"), "{dot}");
        assert!(dot.contains("n3 -> n6 [style=solid, label=\"A\"]"), "{dot}");
        assert!(dot.starts_with("digraph") && dot.ends_with("}\n"));
    }
}
