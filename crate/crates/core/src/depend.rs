//! Data dependences between statements of a single loop.
//!
//! Every subscript is `i + c`, so two accesses to the same array conflict at
//! exactly one constant iteration distance. For a write `x[i + cw]` and a read
//! `x[i + cr]` the read in iteration `k + (cw - cr)` touches the element the
//! write stored in iteration `k`. The sign of that difference decides whether
//! the pair is a flow (read-after-write) or anti (write-after-read)
//! dependence; write/write pairs give output dependences the same way.
//!
//! Within one statement instance all reads happen before the write, so
//! `a[i] = a[i] + 1` depends on nothing.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dsl::LoopNest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DepKind {
    Flow,
    Anti,
    Output,
}

impl DepKind {
    pub fn glyph(self) -> &'static str {
        match self {
            DepKind::Flow => "δf",
            DepKind::Anti => "δa",
            DepKind::Output => "δo",
        }
    }
}

/// `source` in iteration `k` must happen before `sink` in iteration `k + distance`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dependence {
    pub kind: DepKind,
    pub source: String,
    pub sink: String,
    pub array: String,
    pub distance: i64,
    /// The sink appears before the source in statement order.
    pub lexbackward: bool,
}

impl Dependence {
    /// Builds a dependence between two statements of `l`, deriving the
    /// lexical direction from their positions.
    pub fn between(
        l: &LoopNest,
        kind: DepKind,
        source: &str,
        sink: &str,
        array: &str,
        distance: i64,
    ) -> Dependence {
        let lexbackward = match (l.position(source), l.position(sink)) {
            (Some(s), Some(t)) => t < s,
            _ => false,
        };
        Dependence {
            kind,
            source: source.to_string(),
            sink: sink.to_string(),
            array: array.to_string(),
            distance,
            lexbackward,
        }
    }

    pub fn is_carried(&self) -> bool {
        self.distance > 0
    }
}

impl fmt::Display for Dependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} {}->{} Δ={} ({})",
            self.kind, self.source, self.sink, self.distance, self.array
        )
    }
}

/// Statement-level dependence graph of one loop.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Dependence>,
}

impl DepGraph {
    /// Loop-carried edges (distance at least one).
    pub fn carried(&self) -> Vec<Dependence> {
        self.edges
            .iter()
            .filter(|d| d.is_carried())
            .cloned()
            .collect()
    }

    pub fn node_index(&self, label: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == label)
    }

    /// Successor lists by node index, one entry per edge.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if let (Some(s), Some(t)) = (self.node_index(&e.source), self.node_index(&e.sink)) {
                adj[s].push(t);
            }
        }
        adj
    }

    /// True when some edge joins `a` and `b` in either direction.
    pub fn connects(&self, a: &str, b: &str) -> bool {
        self.edges
            .iter()
            .any(|e| (e.source == a && e.sink == b) || (e.source == b && e.sink == a))
    }
}

/// Computes every flow, anti and output dependence of `l`.
pub fn analyze(l: &LoopNest) -> DepGraph {
    let stmts = &l.statements;
    // (source pos, sink pos, kind, array, distance)
    let mut found: BTreeSet<(usize, usize, DepKind, String, i64)> = BTreeSet::new();

    for (wx, writer) in stmts.iter().enumerate() {
        let w = &writer.lhs;
        for (ry, reader) in stmts.iter().enumerate() {
            for r in reader.reads() {
                if r.array != w.array {
                    continue;
                }
                let d = w.offset - r.offset;
                if d > 0 {
                    found.insert((wx, ry, DepKind::Flow, w.array.clone(), d));
                } else if d < 0 {
                    found.insert((ry, wx, DepKind::Anti, w.array.clone(), -d));
                } else if wx < ry {
                    found.insert((wx, ry, DepKind::Flow, w.array.clone(), 0));
                } else if ry < wx {
                    found.insert((ry, wx, DepKind::Anti, w.array.clone(), 0));
                }
            }
        }
        for (vy, other) in stmts.iter().enumerate().skip(wx + 1) {
            let v = &other.lhs;
            if v.array != w.array {
                continue;
            }
            // other's write in iteration k + d hits the element written here in k
            let d = w.offset - v.offset;
            if d >= 0 {
                found.insert((wx, vy, DepKind::Output, w.array.clone(), d));
            } else {
                found.insert((vy, wx, DepKind::Output, w.array.clone(), -d));
            }
        }
    }

    let edges = found
        .into_iter()
        .map(|(s, t, kind, array, distance)| Dependence {
            kind,
            source: stmts[s].label.clone(),
            sink: stmts[t].label.clone(),
            array,
            distance,
            lexbackward: t < s,
        })
        .collect();

    DepGraph {
        nodes: stmts.iter().map(|s| s.label.clone()).collect(),
        edges,
    }
}

/// Graphviz rendering; edge labels carry the kind glyph, distance and array.
pub fn to_dot(g: &DepGraph) -> String {
    let mut out = String::from("digraph depgraph {\n    node [shape=circle];\n");
    for n in &g.nodes {
        let _ = writeln!(out, "    \"{n}\";");
    }
    for e in &g.edges {
        let style = if e.lexbackward { ", style=dashed" } else { "" };
        let _ = writeln!(
            out,
            "    \"{}\" -> \"{}\" [label=\"{} Δ={} {}\"{}];",
            e.source,
            e.sink,
            e.kind.glyph(),
            e.distance,
            e.array,
            style
        );
    }
    out.push_str("}\n");
    out
}
