//! Loop distribution driven by the dependence graph.
//!
//! The pipeline is: contract strongly connected components, order the
//! components topologically so every remaining dependence points forward,
//! optionally merge neighbouring independent components that read common
//! data, then split the loop into one loop per group. Groups without an
//! internal loop-carried dependence are marked parallel; cyclic components
//! stay sequential.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depend::{analyze, DepGraph};
use crate::dsl::{LoopNest, Program};

/// Strongly connected components in topological order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SccPartition {
    pub components: Vec<Vec<String>>,
    pub is_cyclic: Vec<bool>,
}

impl SccPartition {
    pub fn has_cycles(&self) -> bool {
        self.is_cyclic.iter().any(|c| *c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FissionGroup {
    pub statements: Vec<String>,
    pub parallel: bool,
}

/// Ordered statement groups, one output loop per group.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FissionPlan {
    pub groups: Vec<FissionGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RestructureError {
    #[error("plan does not mention statement `{0}`")]
    MissingStatement(String),
    #[error("plan names unknown or repeated statement `{0}`")]
    UnknownStatement(String),
}

/// Tarjan's algorithm over the dependence graph, followed by a stable
/// topological sort of the condensation (ties go to the component holding
/// the lexically earliest statement).
pub fn scc(g: &DepGraph) -> SccPartition {
    let n = g.nodes.len();
    let adj = g.adjacency();
    let raw = tarjan(&adj);

    let mut comp_of = vec![0usize; n];
    for (c, members) in raw.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }

    let k = raw.len();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
    let mut indeg = vec![0usize; k];
    let mut self_loop = vec![false; k];
    for (v, outs) in adj.iter().enumerate() {
        for &w in outs {
            let (cv, cw) = (comp_of[v], comp_of[w]);
            if cv == cw {
                self_loop[cv] |= v == w;
            } else if succ[cv].insert(cw) {
                indeg[cw] += 1;
            }
        }
    }

    let first = |c: usize| raw[c].iter().copied().min().unwrap_or(usize::MAX);
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> = (0..k)
        .filter(|&c| indeg[c] == 0)
        .map(|c| Reverse((first(c), c)))
        .collect();

    let mut out = SccPartition::default();
    while let Some(Reverse((_, c))) = ready.pop() {
        let mut members = raw[c].clone();
        members.sort_unstable();
        out.is_cyclic.push(members.len() > 1 || self_loop[c]);
        out.components
            .push(members.into_iter().map(|v| g.nodes[v].clone()).collect());
        for &d in &succ[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.push(Reverse((first(d), d)));
            }
        }
    }
    out
}

struct Tarjan<'a> {
    adj: &'a [Vec<usize>],
    counter: usize,
    index: Vec<Option<usize>>,
    lowlink: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    out: Vec<Vec<usize>>,
}

fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut t = Tarjan {
        adj,
        counter: 0,
        index: vec![None; n],
        lowlink: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        out: Vec::new(),
    };
    for v in 0..n {
        if t.index[v].is_none() {
            t.connect(v);
        }
    }
    t.out
}

impl Tarjan<'_> {
    fn connect(&mut self, v: usize) {
        self.index[v] = Some(self.counter);
        self.lowlink[v] = self.counter;
        self.counter += 1;
        self.stack.push(v);
        self.on_stack[v] = true;

        for &w in &self.adj[v] {
            match self.index[w] {
                None => {
                    self.connect(w);
                    self.lowlink[v] = self.lowlink[v].min(self.lowlink[w]);
                }
                Some(iw) if self.on_stack[w] => {
                    self.lowlink[v] = self.lowlink[v].min(iw);
                }
                Some(_) => {}
            }
        }

        if Some(self.lowlink[v]) == self.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = self.stack.pop() {
                self.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            self.out.push(comp);
        }
    }
}

/// Statement order implied by the partition: components in topological
/// order, members of a component in their original order.
pub fn toposort(p: &SccPartition) -> Vec<String> {
    p.components.iter().flatten().cloned().collect()
}

fn has_internal_carried(g: &DepGraph, members: &[String]) -> bool {
    let set: HashSet<&str> = members.iter().map(String::as_str).collect();
    g.edges
        .iter()
        .any(|e| e.is_carried() && set.contains(e.source.as_str()) && set.contains(e.sink.as_str()))
}

/// One group per component, parallel unless the component is cyclic.
pub fn plan_per_component(g: &DepGraph, p: &SccPartition) -> FissionPlan {
    FissionPlan {
        groups: p
            .components
            .iter()
            .map(|c| FissionGroup {
                statements: c.clone(),
                parallel: !has_internal_carried(g, c),
            })
            .collect(),
    }
}

/// Greedy left-to-right merge of adjacent parallel components that share a
/// read array and are joined by no dependence. Cyclic components are never
/// merged.
pub fn group_for_locality(l: &LoopNest, g: &DepGraph, p: &SccPartition) -> FissionPlan {
    let reads_of = |label: &str| -> BTreeSet<String> {
        l.statement(label)
            .map(|s| s.reads().into_iter().map(|r| r.array.clone()).collect())
            .unwrap_or_default()
    };

    let mut groups: Vec<FissionGroup> = Vec::new();
    let mut current_reads: BTreeSet<String> = BTreeSet::new();

    for (comp, &cyclic) in p.components.iter().zip(&p.is_cyclic) {
        let comp_reads: BTreeSet<String> = comp.iter().flat_map(|s| reads_of(s)).collect();
        let parallel = !cyclic && !has_internal_carried(g, comp);

        let merge = match groups.last() {
            Some(last) if last.parallel && parallel => {
                let independent = last
                    .statements
                    .iter()
                    .all(|a| comp.iter().all(|b| !g.connects(a, b)));
                independent && !current_reads.is_disjoint(&comp_reads)
            }
            _ => false,
        };

        if merge {
            let last = groups.last_mut().expect("merge implies a previous group");
            last.statements.extend(comp.iter().cloned());
            current_reads.extend(comp_reads);
        } else {
            groups.push(FissionGroup {
                statements: comp.clone(),
                parallel,
            });
            current_reads = comp_reads;
        }
    }
    FissionPlan { groups }
}

/// Splits `l` into one loop per plan group. Statements keep their text;
/// sync instructions are dropped.
pub fn fission(l: &LoopNest, plan: &FissionPlan) -> Result<Program, RestructureError> {
    let mut seen = HashSet::new();
    let mut loops = Vec::with_capacity(plan.groups.len());
    for group in &plan.groups {
        let mut statements = Vec::with_capacity(group.statements.len());
        for label in &group.statements {
            let stmt = l
                .statement(label)
                .filter(|_| seen.insert(label.as_str()))
                .ok_or_else(|| RestructureError::UnknownStatement(label.clone()))?;
            statements.push(stmt.clone());
        }
        loops.push(LoopNest {
            index: l.index.clone(),
            lower: l.lower,
            upper: l.upper.clone(),
            parallel: group.parallel,
            statements,
            syncs: Vec::new(),
        });
    }
    if let Some(missing) = l
        .statements
        .iter()
        .find(|s| !seen.contains(s.label.as_str()))
    {
        return Err(RestructureError::MissingStatement(missing.label.clone()));
    }
    Ok(Program { loops })
}

/// Everything produced while distributing one loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restructured {
    pub graph: DepGraph,
    pub partition: SccPartition,
    pub plan: FissionPlan,
    pub program: Program,
}

/// Runs analysis, SCC contraction, sorting and fission on one loop.
pub fn restructure(l: &LoopNest, locality: bool) -> Restructured {
    let graph = analyze(l);
    let partition = scc(&graph);
    let plan = if locality {
        group_for_locality(l, &graph, &partition)
    } else {
        plan_per_component(&graph, &partition)
    };
    let program = fission(l, &plan).expect("plan derived from the loop covers every statement");
    Restructured {
        graph,
        partition,
        plan,
        program,
    }
}
