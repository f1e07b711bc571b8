//! Signal-flow graphs and Mason's gain formula.
//!
//! A [`FlowGraph`] holds wave-variable nodes and directed branches whose
//! gains are sampled on a frequency grid. Topology (paths, loops,
//! non-touching loop sets) is enumerated once and reused for every
//! frequency. [`solve_linear`] solves the same graph as a dense linear
//! system and serves as an independent check on [`mason_transfer`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Default limit on the number of simple cycles enumerated per graph.
pub const DEFAULT_LOOP_CAP: usize = 10_000;

/// Limit on the number of mutually non-touching loop combinations.
pub const NON_TOUCHING_CAP: usize = 1_000_000;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SfgError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("branch gain for {from} -> {to} has {actual} samples, expected {expected}")]
    GainLength {
        from: String,
        to: String,
        expected: usize,
        actual: usize,
    },
    #[error("node `{0}` has incoming branches and cannot be used as a source")]
    NotASource(String),
    #[error("graph has more than {cap} simple cycles")]
    TooManyLoops { cap: usize },
    #[error("graph has more than {cap} non-touching loop combinations")]
    TooManyLoopSets { cap: usize },
}

/// Per-frequency failure of a solve.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SolveError {
    #[error("graph determinant vanishes at grid index {index}")]
    SingularDeterminant { index: usize },
    #[error("linear system I - A is singular at grid index {index}")]
    SingularSystem { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: NodeId,
    pub to: NodeId,
    pub gain: Vec<Complex64>,
}

/// Directed graph of wave variables with per-frequency complex branch
/// gains.
///
/// Node ids follow the lexicographic order of the labels, so orderings by
/// id and by label agree. Parallel branches are summed on insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph {
    labels: Vec<String>,
    index: BTreeMap<String, NodeId>,
    branches: Vec<Branch>,
    successors: Vec<Vec<(NodeId, usize)>>,
    has_incoming: Vec<bool>,
    sinks: Vec<NodeId>,
    n_freq: usize,
}

#[derive(Debug, Clone)]
pub struct FlowGraphBuilder {
    n_freq: usize,
    nodes: BTreeMap<String, ()>,
    branches: BTreeMap<(String, String), Vec<Complex64>>,
    sinks: Vec<String>,
}

impl FlowGraphBuilder {
    pub fn new(n_freq: usize) -> Self {
        Self {
            n_freq,
            nodes: BTreeMap::new(),
            branches: BTreeMap::new(),
            sinks: Vec::new(),
        }
    }

    pub fn node(&mut self, label: &str) -> &mut Self {
        self.nodes.entry(label.to_owned()).or_default();
        self
    }

    /// Adds `from -> to`; a second branch between the same ordered pair is
    /// summed into the first.
    pub fn branch(&mut self, from: &str, to: &str, gain: Vec<Complex64>) -> Result<&mut Self, SfgError> {
        if gain.len() != self.n_freq {
            return Err(SfgError::GainLength {
                from: from.to_owned(),
                to: to.to_owned(),
                expected: self.n_freq,
                actual: gain.len(),
            });
        }
        self.node(from).node(to);
        match self.branches.get_mut(&(from.to_owned(), to.to_owned())) {
            Some(existing) => existing.iter_mut().zip(&gain).for_each(|(e, g)| *e += g),
            None => {
                self.branches.insert((from.to_owned(), to.to_owned()), gain);
            }
        }
        Ok(self)
    }

    /// Same gain at every frequency.
    pub fn constant_branch(&mut self, from: &str, to: &str, gain: Complex64) -> &mut Self {
        let n = self.n_freq;
        self.branch(from, to, vec![gain; n])
            .expect("constant gain vector has grid length")
    }

    pub fn sink(&mut self, label: &str) -> &mut Self {
        self.node(label);
        if !self.sinks.iter().any(|s| s == label) {
            self.sinks.push(label.to_owned());
        }
        self
    }

    pub fn build(&self) -> FlowGraph {
        let labels: Vec<String> = self.nodes.keys().cloned().collect();
        let index: BTreeMap<String, NodeId> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let branches: Vec<Branch> = self
            .branches
            .iter()
            .map(|((f, t), g)| Branch {
                from: index[f],
                to: index[t],
                gain: g.clone(),
            })
            .collect();
        let mut successors = vec![Vec::new(); labels.len()];
        let mut has_incoming = vec![false; labels.len()];
        for (bi, b) in branches.iter().enumerate() {
            successors[b.from].push((b.to, bi));
            has_incoming[b.to] = true;
        }
        for s in &mut successors {
            s.sort_unstable();
        }
        let mut sinks: Vec<NodeId> = self.sinks.iter().map(|s| index[s]).collect();
        sinks.sort_unstable();
        FlowGraph {
            labels,
            index,
            branches,
            successors,
            has_incoming,
            sinks,
            n_freq: self.n_freq,
        }
    }
}

impl FlowGraph {
    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id]
    }

    pub fn id(&self, label: &str) -> Result<NodeId, SfgError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| SfgError::UnknownNode(label.to_owned()))
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch_between(&self, from: NodeId, to: NodeId) -> Option<&Branch> {
        self.successors[from]
            .iter()
            .find(|(t, _)| *t == to)
            .map(|&(_, bi)| &self.branches[bi])
    }

    /// Nodes without incoming branches.
    pub fn sources(&self) -> Vec<NodeId> {
        (0..self.n_nodes()).filter(|&n| !self.has_incoming[n]).collect()
    }

    pub fn sinks(&self) -> &[NodeId] {
        &self.sinks
    }

    pub fn labels_of(&self, nodes: &[NodeId]) -> Vec<&str> {
        nodes.iter().map(|&n| self.label(n)).collect()
    }

    fn gain_at(&self, from: NodeId, to: NodeId, k: usize) -> Complex64 {
        self.branch_between(from, to)
            .map(|b| b.gain[k])
            .expect("consecutive path nodes are joined by a branch")
    }

    fn path_gain(&self, nodes: &[NodeId], closed: bool) -> Vec<Complex64> {
        (0..self.n_freq)
            .map(|k| {
                let mut g = nodes
                    .windows(2)
                    .map(|w| self.gain_at(w[0], w[1], k))
                    .product::<Complex64>();
                if closed {
                    g *= self.gain_at(nodes[nodes.len() - 1], nodes[0], k);
                }
                g
            })
            .collect()
    }

    /// DOT rendering with gains annotated at grid index `freq_index`.
    pub fn to_dot(&self, freq_index: usize) -> String {
        let mut out = String::from("digraph sfg {\n  rankdir=LR;\n");
        let sources = self.sources();
        for (id, label) in self.labels.iter().enumerate() {
            let shape = if sources.contains(&id) {
                "box"
            } else if self.sinks.contains(&id) {
                "doublecircle"
            } else {
                "ellipse"
            };
            let _ = writeln!(out, "  \"{label}\" [shape={shape}];");
        }
        for b in &self.branches {
            let g = b.gain[freq_index];
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{:.6}∠{:.3}°\"];",
                self.labels[b.from],
                self.labels[b.to],
                g.norm(),
                g.arg().to_degrees()
            );
        }
        out.push_str("}\n");
        out
    }
}

/// All simple directed paths `src -> dst` in lexicographic order of their
/// node sequences.
pub fn enumerate_paths(g: &FlowGraph, src: NodeId, dst: NodeId) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    let mut on_path = vec![false; g.n_nodes()];
    let mut stack = vec![src];
    on_path[src] = true;
    paths_from(g, dst, &mut stack, &mut on_path, &mut out);
    out
}

fn paths_from(g: &FlowGraph, dst: NodeId, stack: &mut Vec<NodeId>, on_path: &mut [bool], out: &mut Vec<Vec<NodeId>>) {
    let here = *stack.last().unwrap();
    if here == dst {
        out.push(stack.clone());
        return;
    }
    for &(next, _) in &g.successors[here] {
        if !on_path[next] {
            on_path[next] = true;
            stack.push(next);
            paths_from(g, dst, stack, on_path, out);
            stack.pop();
            on_path[next] = false;
        }
    }
}

/// All simple cycles, each rotated to start at its smallest node and the
/// list sorted lexicographically.
///
/// Johnson's algorithm restricted to the strongly connected component of
/// each start vertex. Fails once more than `cap` cycles have been found.
pub fn enumerate_loops(g: &FlowGraph, cap: usize) -> Result<Vec<Vec<NodeId>>, SfgError> {
    let n = g.n_nodes();
    let mut cycles = Vec::new();
    for start in 0..n {
        let component = scc_containing(g, start);
        if component.count_ones(..) == 0 {
            continue;
        }
        let mut search = JohnsonSearch {
            g,
            allowed: &component,
            start,
            blocked: vec![false; n],
            blocked_by: vec![Vec::new(); n],
            stack: Vec::new(),
            cycles: &mut cycles,
            cap,
        };
        search.circuit(start)?;
    }
    cycles.sort();
    Ok(cycles)
}

/// Strongly connected component of `start` within the subgraph of nodes
/// `>= start`. Empty when `start` lies on no cycle of that subgraph.
fn scc_containing(g: &FlowGraph, start: NodeId) -> FixedBitSet {
    let n = g.n_nodes();
    let reach = |forward: bool| {
        let mut seen = FixedBitSet::with_capacity(n);
        let mut todo = vec![start];
        while let Some(v) = todo.pop() {
            let nbrs: Vec<NodeId> = if forward {
                g.successors[v].iter().map(|&(t, _)| t).collect()
            } else {
                g.branches.iter().filter(|b| b.to == v).map(|b| b.from).collect()
            };
            for w in nbrs {
                if w >= start && !seen.contains(w) {
                    seen.insert(w);
                    todo.push(w);
                }
            }
        }
        seen
    };
    // `start` is only marked when reached again through a cycle.
    let mut both = reach(true);
    both.intersect_with(&reach(false));
    if both.contains(start) {
        both
    } else {
        FixedBitSet::with_capacity(n)
    }
}

struct JohnsonSearch<'a> {
    g: &'a FlowGraph,
    allowed: &'a FixedBitSet,
    start: NodeId,
    blocked: Vec<bool>,
    blocked_by: Vec<Vec<NodeId>>,
    stack: Vec<NodeId>,
    cycles: &'a mut Vec<Vec<NodeId>>,
    cap: usize,
}

impl JohnsonSearch<'_> {
    fn circuit(&mut self, v: NodeId) -> Result<bool, SfgError> {
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        let g = self.g;
        for &(w, _) in &g.successors[v] {
            if !self.allowed.contains(w) {
                continue;
            }
            if w == self.start {
                if self.cycles.len() >= self.cap {
                    return Err(SfgError::TooManyLoops { cap: self.cap });
                }
                self.cycles.push(self.stack.clone());
                found = true;
            } else if !self.blocked[w] && self.circuit(w)? {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &(w, _) in &g.successors[v] {
                if self.allowed.contains(w) && !self.blocked_by[w].contains(&v) {
                    self.blocked_by[w].push(v);
                }
            }
        }
        self.stack.pop();
        Ok(found)
    }

    fn unblock(&mut self, v: NodeId) {
        let mut todo = vec![v];
        while let Some(u) = todo.pop() {
            if self.blocked[u] {
                self.blocked[u] = false;
                todo.append(&mut self.blocked_by[u]);
            }
        }
    }
}

/// A path or loop with its gain at every frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPath {
    pub nodes: Vec<NodeId>,
    pub gain: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasonSolution {
    pub source: NodeId,
    pub sink: NodeId,
    /// `Σ Pₖ·Δₖ / Δ` per frequency, or the reason it is undefined there.
    pub transfer: Vec<Result<Complex64, SolveError>>,
    pub forward_paths: Vec<GainPath>,
    /// `Δₖ` for each forward path, per frequency.
    pub path_cofactors: Vec<Vec<Complex64>>,
    pub loops: Vec<GainPath>,
    pub determinant: Vec<Complex64>,
}

impl MasonSolution {
    /// Transfer values, failing on the first singular frequency.
    pub fn values(&self) -> Result<Vec<Complex64>, SolveError> {
        self.transfer.iter().copied().collect()
    }
}

/// Sets of pairwise node-disjoint loops (excluding the empty set) together
/// with the union of their nodes.
fn non_touching_sets(loops: &[Vec<NodeId>], n_nodes: usize) -> Result<Vec<(Vec<usize>, FixedBitSet)>, SfgError> {
    let masks: Vec<FixedBitSet> = loops
        .iter()
        .map(|l| {
            let mut m = FixedBitSet::with_capacity(n_nodes);
            l.iter().for_each(|&v| m.insert(v));
            m
        })
        .collect();
    let mut out = Vec::new();
    let mut frontier: Vec<(Vec<usize>, FixedBitSet)> =
        masks.iter().enumerate().map(|(i, m)| (vec![i], m.clone())).collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for (set, union) in &frontier {
            let last = *set.last().unwrap();
            for (j, m) in masks.iter().enumerate().skip(last + 1) {
                if union.is_disjoint(m) {
                    let mut s = set.clone();
                    s.push(j);
                    let mut u = union.clone();
                    u.union_with(m);
                    next.push((s, u));
                }
            }
        }
        out.append(&mut frontier);
        if out.len() + next.len() > NON_TOUCHING_CAP {
            return Err(SfgError::TooManyLoopSets { cap: NON_TOUCHING_CAP });
        }
        frontier = next;
    }
    Ok(out)
}

/// `1 − ΣL₁ + ΣL₂ − …` restricted to the loop sets accepted by `keep`,
/// together with the sum of term magnitudes (for the singularity test).
fn graph_determinant(
    sets: &[(Vec<usize>, FixedBitSet)],
    loop_gains: &[Complex64],
    keep: impl Fn(&FixedBitSet) -> bool,
) -> (Complex64, f64) {
    let mut delta = Complex64::new(1.0, 0.0);
    let mut scale = 1.0;
    for (set, union) in sets {
        if !keep(union) {
            continue;
        }
        let term: Complex64 = set.iter().map(|&i| loop_gains[i]).product();
        scale += term.norm();
        if set.len() % 2 == 1 {
            delta -= term;
        } else {
            delta += term;
        }
    }
    (delta, scale)
}

/// Transfer function `src -> dst` by Mason's gain formula, with the default
/// loop cap.
pub fn mason_transfer(g: &FlowGraph, src: NodeId, dst: NodeId) -> Result<MasonSolution, SfgError> {
    mason_transfer_capped(g, src, dst, DEFAULT_LOOP_CAP)
}

pub fn mason_transfer_capped(
    g: &FlowGraph,
    src: NodeId,
    dst: NodeId,
    loop_cap: usize,
) -> Result<MasonSolution, SfgError> {
    if src >= g.n_nodes() {
        return Err(SfgError::UnknownNode(format!("#{src}")));
    }
    if dst >= g.n_nodes() {
        return Err(SfgError::UnknownNode(format!("#{dst}")));
    }
    if g.has_incoming[src] {
        return Err(SfgError::NotASource(g.label(src).to_owned()));
    }
    let path_nodes = enumerate_paths(g, src, dst);
    let loop_nodes = enumerate_loops(g, loop_cap)?;
    let sets = non_touching_sets(&loop_nodes, g.n_nodes())?;

    let forward_paths: Vec<GainPath> = path_nodes
        .into_iter()
        .map(|nodes| GainPath {
            gain: g.path_gain(&nodes, false),
            nodes,
        })
        .collect();
    let loops: Vec<GainPath> = loop_nodes
        .into_iter()
        .map(|nodes| GainPath {
            gain: g.path_gain(&nodes, true),
            nodes,
        })
        .collect();
    let path_masks: Vec<FixedBitSet> = forward_paths
        .iter()
        .map(|p| {
            let mut m = FixedBitSet::with_capacity(g.n_nodes());
            p.nodes.iter().for_each(|&v| m.insert(v));
            m
        })
        .collect();

    let mut transfer = Vec::with_capacity(g.n_freq);
    let mut determinant = Vec::with_capacity(g.n_freq);
    let mut path_cofactors = vec![Vec::with_capacity(g.n_freq); forward_paths.len()];
    for k in 0..g.n_freq {
        let loop_gains: Vec<Complex64> = loops.iter().map(|l| l.gain[k]).collect();
        let (delta, scale) = graph_determinant(&sets, &loop_gains, |_| true);
        let mut numerator = Complex64::new(0.0, 0.0);
        for (pi, p) in forward_paths.iter().enumerate() {
            let mask = &path_masks[pi];
            let (cof, _) = graph_determinant(&sets, &loop_gains, |u| u.is_disjoint(mask));
            path_cofactors[pi].push(cof);
            numerator += p.gain[k] * cof;
        }
        determinant.push(delta);
        transfer.push(if delta.norm() <= 64.0 * f64::EPSILON * scale {
            Err(SolveError::SingularDeterminant { index: k })
        } else {
            Ok(numerator / delta)
        });
    }
    Ok(MasonSolution {
        source: src,
        sink: dst,
        transfer,
        forward_paths,
        path_cofactors,
        loops,
        determinant,
    })
}

/// Node values of the graph driven by `excitation`, per frequency.
///
/// `values[k][node]` solves `b = A·b + x` at grid index `k`, where
/// `A[to][from]` is the branch gain.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub values: Vec<Result<Vec<Complex64>, SolveError>>,
}

impl LinearSolution {
    /// One node's value across the grid.
    pub fn node(&self, id: NodeId) -> Result<Vec<Complex64>, SolveError> {
        self.values
            .iter()
            .map(|v| v.as_ref().map(|v| v[id]).map_err(|e| *e))
            .collect()
    }
}

/// Dense solve of `(I − A)·b = x` at each frequency.
pub fn solve_linear(g: &FlowGraph, excitation: &BTreeMap<NodeId, Complex64>) -> LinearSolution {
    let n = g.n_nodes();
    let mut x = DVector::<Complex64>::zeros(n);
    for (&node, &v) in excitation {
        x[node] += v;
    }
    let values = (0..g.n_freq)
        .map(|k| {
            let mut m = DMatrix::<Complex64>::identity(n, n);
            for b in &g.branches {
                m[(b.to, b.from)] -= b.gain[k];
            }
            let lu = m.lu();
            let u = lu.u();
            let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
            let max = diag.iter().copied().fold(0.0, f64::max);
            let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
            if n > 0 && (min == 0.0 || min <= 1e-13 * max) {
                return Err(SolveError::SingularSystem { index: k });
            }
            lu.solve(&x)
                .map(|v| v.iter().copied().collect())
                .ok_or(SolveError::SingularSystem { index: k })
        })
        .collect();
    LinearSolution { values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn chain() -> FlowGraph {
        let mut b = FlowGraphBuilder::new(1);
        b.constant_branch("s", "a", c(2.0, 0.0))
            .constant_branch("a", "t", c(0.0, 3.0))
            .sink("t");
        b.build()
    }

    #[test]
    fn chain_has_one_path() {
        let g = chain();
        let (s, t) = (g.id("s").unwrap(), g.id("t").unwrap());
        let paths = enumerate_paths(&g, s, t);
        assert_eq!(paths.len(), 1);
        assert_eq!(g.labels_of(&paths[0]), vec!["s", "a", "t"]);
        let sol = mason_transfer(&g, s, t).unwrap();
        assert_eq!(sol.values().unwrap(), vec![c(0.0, 6.0)]);
        assert_eq!(sol.determinant, vec![c(1.0, 0.0)]);
    }

    #[test]
    fn diamond_paths_are_lexicographic() {
        let mut b = FlowGraphBuilder::new(1);
        b.constant_branch("s", "b", c(1.0, 0.0))
            .constant_branch("s", "a", c(1.0, 0.0))
            .constant_branch("b", "t", c(1.0, 0.0))
            .constant_branch("a", "t", c(1.0, 0.0));
        let g = b.build();
        let paths = enumerate_paths(&g, g.id("s").unwrap(), g.id("t").unwrap());
        let named: Vec<Vec<&str>> = paths.iter().map(|p| g.labels_of(p)).collect();
        assert_eq!(named, vec![vec!["s", "a", "t"], vec!["s", "b", "t"]]);
    }

    #[test]
    fn unreachable_sink_gives_no_paths() {
        let mut b = FlowGraphBuilder::new(1);
        b.constant_branch("s", "a", c(1.0, 0.0)).node("t");
        let g = b.build();
        assert!(enumerate_paths(&g, g.id("s").unwrap(), g.id("t").unwrap()).is_empty());
        let sol = mason_transfer(&g, g.id("s").unwrap(), g.id("t").unwrap()).unwrap();
        assert_eq!(sol.values().unwrap(), vec![c(0.0, 0.0)]);
    }

    #[test]
    fn loops_self_and_two_cycle() {
        let mut b = FlowGraphBuilder::new(1);
        b.constant_branch("a", "a", c(0.5, 0.0));
        let g = b.build();
        assert_eq!(enumerate_loops(&g, 10).unwrap(), vec![vec![0]]);

        let mut b = FlowGraphBuilder::new(1);
        b.constant_branch("b", "a", c(0.5, 0.0))
            .constant_branch("a", "b", c(0.5, 0.0))
            .constant_branch("b", "b", c(0.1, 0.0));
        let g = b.build();
        let loops = enumerate_loops(&g, 10).unwrap();
        let named: Vec<Vec<&str>> = loops.iter().map(|l| g.labels_of(l)).collect();
        assert_eq!(named, vec![vec!["a", "b"], vec!["b"]]);
    }

    #[test]
    fn acyclic_graph_has_no_loops_and_unit_determinant() {
        let g = chain();
        assert!(enumerate_loops(&g, 10).unwrap().is_empty());
        let sol = mason_transfer(&g, g.id("s").unwrap(), g.id("a").unwrap()).unwrap();
        assert_eq!(sol.determinant, vec![c(1.0, 0.0)]);
    }

    #[test]
    fn loop_cap_is_enforced() {
        // Complete digraph on 5 nodes has 84 simple cycles.
        let mut b = FlowGraphBuilder::new(1);
        let names = ["a", "b", "c", "d", "e"];
        for x in names {
            for y in names {
                if x != y {
                    b.constant_branch(x, y, c(0.1, 0.0));
                }
            }
        }
        let g = b.build();
        assert_eq!(enumerate_loops(&g, 1000).unwrap().len(), 84);
        assert_eq!(enumerate_loops(&g, 50), Err(SfgError::TooManyLoops { cap: 50 }));
    }

    #[test]
    fn self_loop_geometric_series() {
        let ell = c(0.3, 0.4);
        let a = c(2.0, -1.0);
        let mut b = FlowGraphBuilder::new(1);
        b.constant_branch("s", "x", a).constant_branch("x", "x", ell);
        let g = b.build();
        let sol = mason_transfer(&g, g.id("s").unwrap(), g.id("x").unwrap()).unwrap();
        let expected = a / (c(1.0, 0.0) - ell);
        assert!((sol.values().unwrap()[0] - expected).norm() < 1e-15);
    }

    #[test]
    fn singular_determinant_is_per_frequency() {
        let mut b = FlowGraphBuilder::new(2);
        b.branch("s", "x", vec![c(1.0, 0.0); 2])
            .unwrap()
            .branch("x", "x", vec![c(1.0, 0.0), c(0.5, 0.0)])
            .unwrap();
        let g = b.build();
        let (s, x) = (g.id("s").unwrap(), g.id("x").unwrap());
        let sol = mason_transfer(&g, s, x).unwrap();
        assert_eq!(sol.transfer[0], Err(SolveError::SingularDeterminant { index: 0 }));
        assert!((sol.transfer[1].unwrap() - c(2.0, 0.0)).norm() < 1e-15);
        let lin = solve_linear(&g, &BTreeMap::from([(s, c(1.0, 0.0))]));
        assert_eq!(lin.values[0], Err(SolveError::SingularSystem { index: 0 }));
        assert!((lin.values[1].as_ref().unwrap()[x] - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn mason_requires_source() {
        let g = chain();
        let a = g.id("a").unwrap();
        assert_eq!(
            mason_transfer(&g, a, g.id("t").unwrap()),
            Err(SfgError::NotASource("a".into()))
        );
        assert_eq!(g.id("zz"), Err(SfgError::UnknownNode("zz".into())));
    }

    #[test]
    fn linear_chain_and_zero_excitation() {
        let g = chain();
        let (s, t) = (g.id("s").unwrap(), g.id("t").unwrap());
        let lin = solve_linear(&g, &BTreeMap::from([(s, c(1.0, 0.0))]));
        assert_eq!(lin.node(t).unwrap(), vec![c(0.0, 6.0)]);
        let zero = solve_linear(&g, &BTreeMap::new());
        assert!(zero.values[0].as_ref().unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn parallel_branches_are_summed() {
        let mut b = FlowGraphBuilder::new(1);
        b.constant_branch("s", "t", c(1.0, 0.0))
            .constant_branch("s", "t", c(0.0, 2.0));
        let g = b.build();
        assert_eq!(g.branches().len(), 1);
        assert_eq!(g.branches()[0].gain, vec![c(1.0, 2.0)]);
        assert!(b.branch("s", "t", vec![]).is_err());
    }

    #[test]
    fn dot_export_is_deterministic() {
        let mut b = FlowGraphBuilder::new(1);
        b.constant_branch("a_BA", "x", c(0.0, 1.0)).sink("x");
        let dot = b.build().to_dot(0);
        assert!(dot.starts_with("digraph sfg {"));
        assert!(dot.contains("\"a_BA\" [shape=box];"));
        assert!(dot.contains("\"x\" [shape=doublecircle];"));
        assert!(dot.contains("\"a_BA\" -> \"x\" [label=\"1.000000∠90.000°\"];"));
        assert_eq!(dot, b.build().to_dot(0));
    }
}
