//! Removal of redundant synchronization.
//!
//! A dependence needs no send/wait pair of its own when every instance of it
//! is already ordered by a chain of program-order edges (statements of one
//! iteration run in order on one thread) and the sync edges of dependences
//! that remain synchronized. Two deciders are provided:
//!
//! * [`eliminate_by_reduction`] searches for such a chain in a small
//!   iteration-space diagram (ISD). Distances are constant, so one anchored
//!   instance stands for all of them.
//! * [`eliminate_by_pattern`] recognises the common special case where a
//!   lexically backward dependence of distance one can be replayed to walk
//!   from the source of the candidate to its sink.
//!
//! [`oracle_enforced`] checks every instance over a full iteration space and
//! is used to validate both.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::depend::Dependence;
use crate::dsl::LoopNest;
use crate::syncgen::SyncError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    ProgramOrder,
    Dep,
    Sync,
}

/// Statement instance: `label` executed in iteration `iteration`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IsdNode {
    pub label: String,
    pub iteration: i64,
}

impl IsdNode {
    pub fn new(label: impl Into<String>, iteration: i64) -> Self {
        IsdNode {
            label: label.into(),
            iteration,
        }
    }
}

impl std::fmt::Display for IsdNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({})", self.label, self.iteration)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsdEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    /// Index into [`Isd::deps`] for dependence and sync edges.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dep: Option<usize>,
}

/// Iteration-space diagram over iterations `0..width`.
///
/// Node `iteration * statements.len() + position` is the instance of the
/// statement at `position` in that iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Isd {
    pub width: i64,
    pub statements: Vec<String>,
    pub deps: Vec<Dependence>,
    pub nodes: Vec<IsdNode>,
    pub edges: Vec<IsdEdge>,
}

impl Isd {
    pub fn node_id(&self, label: &str, iteration: i64) -> Option<usize> {
        let pos = self.statements.iter().position(|s| s == label)?;
        (0..self.width)
            .contains(&iteration)
            .then(|| iteration as usize * self.statements.len() + pos)
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].push(e.to);
        }
        adj
    }
}

/// Builds the diagram for `deps` over `width` iterations; dependence edges
/// are tagged with `kind`.
fn build(l: &LoopNest, deps: &[Dependence], width: i64, kind: EdgeKind) -> Isd {
    let statements: Vec<String> = l.statements.iter().map(|s| s.label.clone()).collect();
    let s = statements.len();
    let width = width.max(0);
    let nodes = (0..width)
        .flat_map(|k| {
            statements
                .iter()
                .map(move |lab| IsdNode::new(lab.clone(), k))
        })
        .collect();

    let mut edges = Vec::new();
    for k in 0..width as usize {
        for p in 1..s {
            edges.push(IsdEdge {
                from: k * s + p - 1,
                to: k * s + p,
                kind: EdgeKind::ProgramOrder,
                dep: None,
            });
        }
    }
    for (di, d) in deps.iter().enumerate() {
        let (Some(src), Some(snk)) = (l.position(&d.source), l.position(&d.sink)) else {
            continue;
        };
        for k in 0..width {
            let t = k + d.distance;
            if t >= width || t < 0 {
                continue;
            }
            edges.push(IsdEdge {
                from: k as usize * s + src,
                to: t as usize * s + snk,
                kind,
                dep: Some(di),
            });
        }
    }
    Isd {
        width,
        statements,
        deps: deps.to_vec(),
        nodes,
        edges,
    }
}

/// ISD with program-order edges and one dependence edge per in-range instance.
pub fn build_isd(l: &LoopNest, deps: &[Dependence], width: i64) -> Isd {
    build(l, deps, width, EdgeKind::Dep)
}

fn prime_factors(mut v: i64, out: &mut BTreeSet<i64>) {
    let mut p = 2;
    while p * p <= v {
        while v % p == 0 {
            out.insert(p);
            v /= p;
        }
        p += 1;
    }
    if v > 1 {
        out.insert(v);
    }
}

/// Product of the distinct primes dividing any of `distances`, plus one.
///
/// This is smaller than `d + 1` whenever a distance `d` has a repeated
/// prime factor (for `[4]` it is 3), so [`eliminate_by_reduction`] widens
/// its diagram to cover the candidate's sink.
pub fn window_size(distances: &[i64]) -> i64 {
    let mut primes = BTreeSet::new();
    for &d in distances {
        prime_factors(d.abs(), &mut primes);
    }
    primes.iter().product::<i64>() + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ElimMethod {
    IsdReduction,
    Pattern,
}

/// Why a dependence could be dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Witness {
    /// Chain of instances from the anchored source to the sink.
    Path { nodes: Vec<IsdNode> },
    /// The backward distance-one dependence that covers it.
    Pattern { eliminator: Dependence },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Eliminated {
    pub dep: Dependence,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElimResult {
    pub method: ElimMethod,
    pub retained: Vec<Dependence>,
    pub eliminated: Vec<Eliminated>,
}

impl ElimResult {
    pub fn eliminated_deps(&self) -> Vec<&Dependence> {
        self.eliminated.iter().map(|e| &e.dep).collect()
    }

    pub fn is_eliminated(&self, d: &Dependence) -> bool {
        self.eliminated.iter().any(|e| &e.dep == d)
    }
}

fn positions(l: &LoopNest, deps: &[Dependence]) -> Result<Vec<(usize, usize)>, SyncError> {
    deps.iter()
        .map(|d| {
            if d.distance < 1 {
                return Err(SyncError::NotCarried(d.clone()));
            }
            let s = l
                .position(&d.source)
                .ok_or_else(|| SyncError::UnknownStatement(d.source.clone()))?;
            let t = l
                .position(&d.sink)
                .ok_or_else(|| SyncError::UnknownStatement(d.sink.clone()))?;
            Ok((s, t))
        })
        .collect()
}

/// Order in which both deciders consider candidates: largest distance first,
/// then later source, later sink, array, kind.
pub fn candidate_order(l: &LoopNest, deps: &[Dependence]) -> Result<Vec<usize>, SyncError> {
    let pos = positions(l, deps)?;
    let mut order: Vec<usize> = (0..deps.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&deps[a], &deps[b]);
        db.distance
            .cmp(&da.distance)
            .then(pos[b].0.cmp(&pos[a].0))
            .then(pos[b].1.cmp(&pos[a].1))
            .then_with(|| da.array.cmp(&db.array))
            .then(da.kind.cmp(&db.kind))
    });
    Ok(order)
}

/// Windowed path search: is `candidate` ordered by program order plus the
/// sync edges of `usable`? Returns the path on success.
///
/// The diagram spans `max(window_size(distances), Δ + 1)` iterations with
/// the candidate's source in iteration 0; `distances` are those of `usable`
/// together with the candidate.
pub fn reduction_check(
    l: &LoopNest,
    usable: &[Dependence],
    candidate: &Dependence,
) -> Option<Vec<IsdNode>> {
    let mut distances: Vec<i64> = usable.iter().map(|d| d.distance).collect();
    distances.push(candidate.distance);
    let width = window_size(&distances).max(candidate.distance + 1);

    let isd = build(l, usable, width, EdgeKind::Sync);
    let start = isd.node_id(&candidate.source, 0)?;
    let goal = isd.node_id(&candidate.sink, candidate.distance)?;
    let adj = isd.successors();

    let mut parent = vec![usize::MAX; isd.nodes.len()];
    let mut queue = VecDeque::from([start]);
    parent[start] = start;
    while let Some(v) = queue.pop_front() {
        if v == goal {
            break;
        }
        for &w in &adj[v] {
            if parent[w] == usize::MAX {
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    if parent[goal] == usize::MAX || start == goal {
        return None;
    }
    let mut path = vec![goal];
    while *path.last().unwrap() != start {
        path.push(parent[*path.last().unwrap()]);
    }
    path.reverse();
    Some(path.into_iter().map(|v| isd.nodes[v].clone()).collect())
}

/// Transitive-reduction elimination over an anchored ISD window.
///
/// Candidates are taken in [`candidate_order`]. A candidate is dropped when
/// [`reduction_check`] finds a path using only dependences still retained;
/// dropped dependences never justify later ones.
pub fn eliminate_by_reduction(l: &LoopNest, deps: &[Dependence]) -> Result<ElimResult, SyncError> {
    let order = candidate_order(l, deps)?;
    let mut alive = vec![true; deps.len()];
    let mut eliminated = Vec::new();

    for c in order {
        let usable: Vec<Dependence> = deps
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != c && alive[j])
            .map(|(_, d)| d.clone())
            .collect();
        if let Some(nodes) = reduction_check(l, &usable, &deps[c]) {
            alive[c] = false;
            eliminated.push(Eliminated {
                dep: deps[c].clone(),
                witness: Witness::Path { nodes },
            });
        }
    }

    Ok(ElimResult {
        method: ElimMethod::IsdReduction,
        retained: retained(deps, &alive),
        eliminated,
    })
}

fn retained(deps: &[Dependence], alive: &[bool]) -> Vec<Dependence> {
    deps.iter()
        .zip(alive)
        .filter(|(_, a)| **a)
        .map(|(d, _)| d.clone())
        .collect()
}

/// Pattern-matching elimination.
///
/// `e` is dropped when some retained `r` (other than `e`) satisfies:
/// the source of `e` is at or before the source of `r`; the sink of `r` is at
/// or before the sink of `e`; `r` is lexically backward; `|Δr| = 1`; and
/// `Δe`, `Δr` have the same sign.
pub fn eliminate_by_pattern(l: &LoopNest, deps: &[Dependence]) -> Result<ElimResult, SyncError> {
    let pos = positions(l, deps)?;
    let order = candidate_order(l, deps)?;
    let mut alive = vec![true; deps.len()];
    let mut eliminated = Vec::new();

    for e in order {
        let (src_e, snk_e) = pos[e];
        let de = deps[e].distance;
        let matched = (0..deps.len()).find(|&r| {
            let (src_r, snk_r) = pos[r];
            let dr = deps[r].distance;
            r != e
                && alive[r]
                && src_e <= src_r
                && snk_r <= snk_e
                && snk_r < src_r
                && dr.abs() == 1
                && dr.signum() == de.signum()
        });
        if let Some(r) = matched {
            alive[e] = false;
            eliminated.push(Eliminated {
                dep: deps[e].clone(),
                witness: Witness::Pattern {
                    eliminator: deps[r].clone(),
                },
            });
        }
    }

    Ok(ElimResult {
        method: ElimMethod::Pattern,
        retained: retained(deps, &alive),
        eliminated,
    })
}

/// Exhaustive check over iterations `0..n`: every in-range instance of
/// `candidate` must be reachable through program order and the sync edges of
/// `retained`.
pub fn oracle_enforced(
    l: &LoopNest,
    retained: &[Dependence],
    candidate: &Dependence,
    n: i64,
) -> bool {
    let labels: Vec<&str> = l.statements.iter().map(|s| s.label.as_str()).collect();
    let s = labels.len() as i64;
    let pos = |label: &str| labels.iter().position(|x| *x == label).map(|p| p as i64);
    let id = |p: i64, k: i64| (k * s + p) as usize;
    let total = (n.max(0) * s) as usize;

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); total];
    for k in 0..n {
        for p in 1..s {
            adj[id(p - 1, k)].push(id(p, k));
        }
    }
    for d in retained {
        let (Some(a), Some(b)) = (pos(&d.source), pos(&d.sink)) else {
            continue;
        };
        for k in 0..n {
            if (0..n).contains(&(k + d.distance)) {
                adj[id(a, k)].push(id(b, k + d.distance));
            }
        }
    }

    let (Some(src), Some(snk)) = (pos(&candidate.source), pos(&candidate.sink)) else {
        return false;
    };
    (0..n)
        .filter(|k| (0..n).contains(&(k + candidate.distance)))
        .all(|k| {
            let from = id(src, k);
            let to = id(snk, k + candidate.distance);
            let mut seen = vec![false; total];
            let mut stack = vec![from];
            seen[from] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            from != to && seen[to]
        })
}

/// Both deciders side by side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub reduction: ElimResult,
    pub pattern: ElimResult,
    /// Both removed exactly the same dependences.
    pub agreement: bool,
}

pub fn compare(l: &LoopNest, deps: &[Dependence]) -> Result<Comparison, SyncError> {
    let reduction = eliminate_by_reduction(l, deps)?;
    let pattern = eliminate_by_pattern(l, deps)?;
    let a: BTreeSet<String> = reduction
        .eliminated
        .iter()
        .map(|e| e.dep.to_string())
        .collect();
    let b: BTreeSet<String> = pattern
        .eliminated
        .iter()
        .map(|e| e.dep.to_string())
        .collect();
    Ok(Comparison {
        agreement: a == b,
        reduction,
        pattern,
    })
}

/// Graphviz rendering of an ISD with one rank per iteration. Program order is
/// dashed; retained dependences are solid and eliminated ones dotted; edges
/// on a witness path are bold.
pub fn to_dot_isd(isd: &Isd, highlight: Option<&ElimResult>) -> String {
    let mut bold: BTreeSet<(String, String)> = BTreeSet::new();
    if let Some(h) = highlight {
        for e in &h.eliminated {
            if let Witness::Path { nodes } = &e.witness {
                for pair in nodes.windows(2) {
                    bold.insert((pair[0].to_string(), pair[1].to_string()));
                }
            }
        }
    }

    let mut out = String::from("digraph isd {\n    rankdir=LR;\n    node [shape=box];\n");
    let s = isd.statements.len();
    for k in 0..isd.width as usize {
        let _ = write!(out, "    {{ rank=same;");
        for node in &isd.nodes[k * s..(k + 1) * s] {
            let _ = write!(out, " \"{node}\";");
        }
        out.push_str(" }\n");
    }
    for e in &isd.edges {
        let from = isd.nodes[e.from].to_string();
        let to = isd.nodes[e.to].to_string();
        let mut attrs = Vec::new();
        match (e.kind, e.dep.map(|d| &isd.deps[d])) {
            (EdgeKind::ProgramOrder, _) | (_, None) => attrs.push("style=dashed".to_string()),
            (_, Some(d)) => {
                attrs.push(format!("label=\"{} {}\"", d.kind.glyph(), d.array));
                let gone = highlight.is_some_and(|h| h.is_eliminated(d));
                attrs.push(if gone { "style=dotted" } else { "style=solid" }.to_string());
            }
        }
        if bold.contains(&(from.clone(), to.clone())) {
            attrs.push("penwidth=3".to_string());
        }
        let _ = writeln!(out, "    \"{from}\" -> \"{to}\" [{}];", attrs.join(", "));
    }
    out.push_str("}\n");
    out
}
