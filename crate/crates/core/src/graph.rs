//! Chain graph data model, chain components, TSCG-feasibility and the edge
//! recovery metrics (recall, precision, MCC, SHD).
//!
//! Nodes are 0-based throughout the library; the JSON formats in [`crate::io`]
//! shift them to 1-based.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unordered node pair with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UndirectedEdge {
    pub a: usize,
    pub b: usize,
}

impl UndirectedEdge {
    pub fn new(x: usize, y: usize) -> Self {
        assert_ne!(x, y, "self-loops are not edges");
        Self {
            a: x.min(y),
            b: x.max(y),
        }
    }
}

/// `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DirectedEdge {
    pub from: usize,
    pub to: usize,
}

/// Which coefficient matrices carry a directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub in_a: bool,
    pub in_b: bool,
}

/// In-memory chain graph. Use [`crate::io::GraphJson`] for serialization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainGraph {
    pub p: usize,
    pub undirected: BTreeSet<UndirectedEdge>,
    pub directed: BTreeMap<DirectedEdge, Provenance>,
    /// Chain components, each sorted, ordered by smallest member.
    pub components: Vec<Vec<usize>>,
    /// Causal ordering as a permutation of component positions, if known.
    pub ordering: Option<Vec<usize>>,
}

impl ChainGraph {
    /// Graph with the given undirected edges and no directed edges; the
    /// components are derived from the edges.
    pub fn from_undirected(p: usize, undirected: BTreeSet<UndirectedEdge>) -> Result<Self> {
        let components = components_from_undirected(p, undirected.iter().copied())?;
        Ok(Self {
            p,
            undirected,
            directed: BTreeMap::new(),
            components,
            ordering: None,
        })
    }

    /// Directed edges read off the nonzero entries of `A` and `B`:
    /// `l -> k` whenever `A[k, l] != 0` or `B[k, l] != 0`.
    pub fn set_directed_from(&mut self, coeffs: &CoefficientPair) {
        self.directed = directed_support(coeffs);
    }

    /// Component index of every node.
    pub fn component_of(&self) -> Vec<usize> {
        let mut of = vec![usize::MAX; self.p];
        for (g, comp) in self.components.iter().enumerate() {
            for &k in comp {
                of[k] = g;
            }
        }
        of
    }

    /// Directed edges as a set, ignoring provenance.
    pub fn directed_set(&self) -> BTreeSet<DirectedEdge> {
        self.directed.keys().copied().collect()
    }

    /// Relabels nodes: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut inv = vec![0; self.p];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let undirected = self
            .undirected
            .iter()
            .map(|e| UndirectedEdge::new(inv[e.a], inv[e.b]))
            .collect();
        let mut g = ChainGraph::from_undirected(self.p, undirected)?;
        g.directed = self
            .directed
            .iter()
            .map(|(e, prov)| {
                (
                    DirectedEdge {
                        from: inv[e.from],
                        to: inv[e.to],
                    },
                    *prov,
                )
            })
            .collect();
        Ok(g)
    }
}

/// Contemporaneous (`A`) and lag-1 (`B`) coefficient matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPair {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl CoefficientPair {
    pub fn zeros(p: usize) -> Self {
        Self {
            a: DMatrix::zeros(p, p),
            b: DMatrix::zeros(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `(I - A)^{-1} B`, the reduced-form VAR(1) transition.
    pub fn transition(&self) -> Result<DMatrix<f64>> {
        let p = self.dim();
        let ia = DMatrix::<f64>::identity(p, p) - &self.a;
        let lu = ia.lu();
        lu.solve(&self.b)
            .ok_or_else(|| Error::Numerical("I - A is singular".into()))
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let p = self.dim();
        Self {
            a: DMatrix::from_fn(p, p, |i, j| self.a[(perm[i], perm[j])]),
            b: DMatrix::from_fn(p, p, |i, j| self.b[(perm[i], perm[j])]),
        }
    }
}

pub fn directed_support(coeffs: &CoefficientPair) -> BTreeMap<DirectedEdge, Provenance> {
    let p = coeffs.dim();
    let mut out = BTreeMap::new();
    for k in 0..p {
        for l in 0..p {
            let in_a = coeffs.a[(k, l)] != 0.0;
            let in_b = coeffs.b[(k, l)] != 0.0;
            if in_a || in_b {
                out.insert(DirectedEdge { from: l, to: k }, Provenance { in_a, in_b });
            }
        }
    }
    out
}

/// Connected components of the undirected graph, each sorted and listed by
/// smallest member.
pub fn components_from_undirected(
    p: usize,
    edges: impl IntoIterator<Item = UndirectedEdge>,
) -> Result<Vec<Vec<usize>>> {
    let mut parent: Vec<usize> = (0..p).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in edges {
        if e.a >= p || e.b >= p {
            return Err(Error::InvalidInput(format!(
                "edge ({}, {}) out of range for {p} nodes",
                e.a + 1,
                e.b + 1
            )));
        }
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..p {
        let r = find(&mut parent, k);
        groups.entry(r).or_default().push(k);
    }
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    Ok(comps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// Components do not match the connected components of the undirected edges.
    ComponentMismatch,
    /// A pair carries both an undirected and a directed edge, or edges both ways.
    DoubleEdge { a: usize, b: usize },
    /// Nonzero coefficient inside a diagonal block (same component).
    WithinComponent { matrix: char, row: usize, col: usize },
    /// Nonzero coefficient pointing against the stated causal ordering.
    AgainstOrdering { matrix: char, row: usize, col: usize },
    /// Nonzero coefficient on a component-level directed cycle.
    Cycle { matrix: char, row: usize, col: usize },
    /// Directed edge set disagrees with the support of `A`/`B`.
    EdgeSupportMismatch { from: usize, to: usize },
    ShapeMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Checks that `(graph, coeffs)` admits a node permutation that makes `A`
/// and `B` block lower-triangular with zero diagonal blocks over the chain
/// components, consistently with the graph's ordering when one is given.
pub fn is_feasible(graph: &ChainGraph, coeffs: &CoefficientPair) -> FeasibilityReport {
    let p = graph.p;
    let mut violations = Vec::new();
    let shapes_ok = coeffs.a.shape() == (p, p) && coeffs.b.shape() == (p, p);
    if !shapes_ok {
        return FeasibilityReport {
            feasible: false,
            violations: vec![Violation::ShapeMismatch],
        };
    }
    match components_from_undirected(p, graph.undirected.iter().copied()) {
        Ok(c) if c == graph.components => {}
        _ => violations.push(Violation::ComponentMismatch),
    }
    let comp_of = {
        let mut of = vec![usize::MAX; p];
        for (g, comp) in graph.components.iter().enumerate() {
            for &k in comp {
                if k < p {
                    of[k] = g;
                }
            }
        }
        of
    };
    if comp_of.contains(&usize::MAX) {
        violations.push(Violation::ComponentMismatch);
        return FeasibilityReport {
            feasible: false,
            violations,
        };
    }
    for e in graph.directed.keys() {
        let rev = DirectedEdge {
            from: e.to,
            to: e.from,
        };
        if graph.undirected.contains(&UndirectedEdge::new(e.from, e.to))
            || (graph.directed.contains_key(&rev) && e.from < e.to)
        {
            violations.push(Violation::DoubleEdge {
                a: e.from.min(e.to),
                b: e.from.max(e.to),
            });
        }
    }
    let support = directed_support(coeffs);
    for e in graph.directed.keys() {
        if !support.contains_key(e) {
            violations.push(Violation::EdgeSupportMismatch {
                from: e.from,
                to: e.to,
            });
        }
    }
    for e in support.keys() {
        if !graph.directed.contains_key(e) {
            violations.push(Violation::EdgeSupportMismatch {
                from: e.from,
                to: e.to,
            });
        }
    }

    let position: Option<Vec<usize>> = graph.ordering.as_ref().map(|ord| {
        let mut pos = vec![usize::MAX; graph.components.len()];
        for (s, &g) in ord.iter().enumerate() {
            if g < pos.len() {
                pos[g] = s;
            }
        }
        pos
    });
    if let Some(pos) = &position {
        if pos.contains(&usize::MAX) || pos.len() != graph.ordering.as_ref().unwrap().len() {
            violations.push(Violation::ComponentMismatch);
        }
    }

    // component-level digraph from cross-component nonzeros
    let g_count = graph.components.len();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); g_count];
    let mut cross: Vec<(char, usize, usize, usize, usize)> = Vec::new();
    for (name, m) in [('A', &coeffs.a), ('B', &coeffs.b)] {
        for k in 0..p {
            for l in 0..p {
                if m[(k, l)] == 0.0 {
                    continue;
                }
                let (gk, gl) = (comp_of[k], comp_of[l]);
                if gk == gl {
                    violations.push(Violation::WithinComponent {
                        matrix: name,
                        row: k,
                        col: l,
                    });
                    continue;
                }
                if let Some(pos) = &position {
                    if pos.get(gl).zip(pos.get(gk)).is_some_and(|(a, b)| a >= b) {
                        violations.push(Violation::AgainstOrdering {
                            matrix: name,
                            row: k,
                            col: l,
                        });
                    }
                }
                succ[gl].insert(gk);
                cross.push((name, k, l, gl, gk));
            }
        }
    }
    // Kahn: whatever cannot be peeled lies on or behind a cycle
    let mut indeg = vec![0usize; g_count];
    for s in &succ {
        for &t in s {
            indeg[t] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..g_count).filter(|&g| indeg[g] == 0).collect();
    let mut removed = vec![false; g_count];
    while let Some(g) = queue.pop_front() {
        removed[g] = true;
        for &t in &succ[g] {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                queue.push_back(t);
            }
        }
    }
    for &(name, k, l, gl, gk) in &cross {
        if !removed[gl] && !removed[gk] {
            violations.push(Violation::Cycle {
                matrix: name,
                row: k,
                col: l,
            });
        }
    }
    FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    }
}

/// Confusion counts and rates for a support-recovery problem.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub recall: f64,
    pub precision: f64,
    pub mcc: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl EdgeMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let (tpf, fpf, fnf, tnf) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
        let den = (tpf + fpf) * (tpf + fnf) * (tnf + fpf) * (tnf + fnf);
        let mcc = if den == 0.0 {
            0.0
        } else {
            (tpf * tnf - fpf * fnf) / den.sqrt()
        };
        Self {
            recall: ratio(tp, tp + fn_),
            precision: ratio(tp, tp + fp),
            mcc,
            tp,
            fp,
            fn_,
            tn,
        }
    }
}

/// Recall, precision and MCC of `estimated` against `truth` over a universe
/// of `universe_size` candidate edges.
pub fn edge_metrics<T: Ord>(
    estimated: &BTreeSet<T>,
    truth: &BTreeSet<T>,
    universe_size: usize,
) -> Result<EdgeMetrics> {
    let tp = estimated.intersection(truth).count();
    let fp = estimated.len() - tp;
    let fn_ = truth.len() - tp;
    let covered = tp + fp + fn_;
    if covered > universe_size {
        return Err(Error::InvalidInput(format!(
            "{covered} distinct edges do not fit in a universe of {universe_size}"
        )));
    }
    Ok(EdgeMetrics::from_counts(tp, fp, fn_, universe_size - covered))
}

/// Undirected-edge metrics over the `p(p-1)/2` unordered pairs.
pub fn undirected_metrics(estimated: &ChainGraph, truth: &ChainGraph) -> Result<EdgeMetrics> {
    check_same_p(estimated, truth)?;
    let p = truth.p;
    for e in estimated.undirected.iter().chain(&truth.undirected) {
        if e.b >= p {
            return Err(Error::InvalidInput(format!("edge ({}, {}) outside [p]", e.a + 1, e.b + 1)));
        }
    }
    edge_metrics(&estimated.undirected, &truth.undirected, p * (p - 1) / 2)
}

/// Support metrics of a coefficient matrix over the `p(p-1)` off-diagonal
/// positions.
pub fn support_metrics(estimated: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<EdgeMetrics> {
    if estimated.shape() != truth.shape() || !estimated.is_square() {
        return Err(Error::InvalidInput("coefficient shapes differ".into()));
    }
    let p = truth.nrows();
    let support = |m: &DMatrix<f64>| -> Result<BTreeSet<(usize, usize)>> {
        let mut s = BTreeSet::new();
        for k in 0..p {
            for l in 0..p {
                if m[(k, l)] != 0.0 {
                    if k == l {
                        return Err(Error::InvalidInput(format!(
                            "diagonal entry ({}, {}) is outside the off-diagonal universe",
                            k + 1,
                            l + 1
                        )));
                    }
                    s.insert((k, l));
                }
            }
        }
        Ok(s)
    };
    edge_metrics(&support(estimated)?, &support(truth)?, p * (p - 1))
}

fn check_same_p(a: &ChainGraph, b: &ChainGraph) -> Result<()> {
    if a.p != b.p {
        return Err(Error::InvalidInput(format!(
            "graphs have different node counts ({} vs {})",
            a.p, b.p
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairKind {
    None,
    Undirected,
    /// Edge from the smaller to the larger node.
    Forward,
    Backward,
    Both,
}

fn pair_kinds(g: &ChainGraph) -> BTreeMap<(usize, usize), PairKind> {
    let mut out = BTreeMap::new();
    for e in &g.undirected {
        out.insert((e.a, e.b), PairKind::Undirected);
    }
    for e in g.directed.keys() {
        let key = (e.from.min(e.to), e.from.max(e.to));
        let dir = if e.from < e.to {
            PairKind::Forward
        } else {
            PairKind::Backward
        };
        let entry = out.entry(key).or_insert(PairKind::None);
        *entry = match *entry {
            PairKind::None => dir,
            k if k == dir => k,
            _ => PairKind::Both,
        };
    }
    out
}

/// Structural Hamming distance: the number of unordered pairs whose edge
/// status (absent, undirected, or directed with its orientation) differs.
pub fn shd(estimated: &ChainGraph, truth: &ChainGraph) -> Result<usize> {
    check_same_p(estimated, truth)?;
    let ke = pair_kinds(estimated);
    let kt = pair_kinds(truth);
    let keys: BTreeSet<_> = ke.keys().chain(kt.keys()).collect();
    Ok(keys
        .into_iter()
        .filter(|key| {
            ke.get(key).copied().unwrap_or(PairKind::None)
                != kt.get(key).copied().unwrap_or(PairKind::None)
        })
        .count())
}
