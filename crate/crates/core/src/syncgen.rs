//! Producer/consumer synchronization of loop-carried dependences.
//!
//! Each synchronized dependence gets its own register. The source
//! statement is followed by `send(r, i, x)`, publishing that iteration `i`
//! has produced its value; the sink is preceded by `wait(r, i-d, x)`, which
//! blocks until iteration `i-d` has been published.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depend::{analyze, Dependence};
use crate::dsl::{LoopNest, SyncInstr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyncError {
    #[error("dependence {0} is not loop-carried")]
    NotCarried(Dependence),
    #[error("dependence refers to unknown statement `{0}`")]
    UnknownStatement(String),
    #[error("loop has no loop-carried dependences")]
    NothingToSynchronize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegAssignment {
    pub reg: u32,
    pub dep: Dependence,
}

/// A loop with its send/wait instructions and the dependences they enforce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncProgram {
    #[serde(rename = "loop")]
    pub loop_nest: LoopNest,
    pub deps: Vec<Dependence>,
    pub regmap: Vec<RegAssignment>,
}

impl SyncProgram {
    pub fn syncs(&self) -> &[SyncInstr] {
        &self.loop_nest.syncs
    }

    pub fn register_of(&self, dep: &Dependence) -> Option<u32> {
        self.regmap.iter().find(|a| &a.dep == dep).map(|a| a.reg)
    }
}

fn check_deps(l: &LoopNest, deps: &[Dependence]) -> Result<Vec<(usize, usize)>, SyncError> {
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

/// Registers `0..k` in order of source position, sink position, array name
/// (then kind and distance).
pub fn assign_registers(
    l: &LoopNest,
    deps: &[Dependence],
) -> Result<Vec<RegAssignment>, SyncError> {
    let positions = check_deps(l, deps)?;
    let mut order: Vec<usize> = (0..deps.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&deps[a], &deps[b]);
        positions[a]
            .cmp(&positions[b])
            .then_with(|| da.array.cmp(&db.array))
            .then_with(|| da.kind.cmp(&db.kind))
            .then_with(|| da.distance.cmp(&db.distance))
    });
    order.dedup_by(|a, b| deps[*a] == deps[*b]);
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(reg, i)| RegAssignment {
            reg: reg as u32,
            dep: deps[i].clone(),
        })
        .collect())
}

/// Inserts one send/wait pair per dependence. Existing sync instructions on
/// `l` are replaced.
pub fn insert_sync(l: &LoopNest, deps: &[Dependence]) -> Result<SyncProgram, SyncError> {
    let regmap = assign_registers(l, deps)?;
    let mut syncs = Vec::with_capacity(regmap.len() * 2);
    for RegAssignment { reg, dep } in &regmap {
        syncs.push(SyncInstr::send(*reg, dep.array.clone(), dep.source.clone()));
        syncs.push(SyncInstr::wait(
            *reg,
            dep.distance,
            dep.array.clone(),
            dep.sink.clone(),
        ));
    }
    Ok(SyncProgram {
        loop_nest: LoopNest { syncs, ..l.clone() },
        deps: regmap.iter().map(|a| a.dep.clone()).collect(),
        regmap,
    })
}

/// Synchronizes every loop-carried dependence found by [`analyze`].
pub fn synchronize(l: &LoopNest) -> Result<SyncProgram, SyncError> {
    let deps = analyze(l).carried();
    if deps.is_empty() {
        return Err(SyncError::NothingToSynchronize);
    }
    insert_sync(l, &deps)
}
