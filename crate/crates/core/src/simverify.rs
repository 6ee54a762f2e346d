//! Sequential reference interpreter and a deterministic shared-memory
//! simulator with send/wait registers.
//!
//! The simulator steps virtual threads one body item (statement, send or
//! wait) at a time. Each thread owns a fixed subset of the iterations and
//! runs them in ascending order. Writes go to a per-thread buffer that is
//! published to shared memory by every send and wait (both act as fences)
//! and when the thread finishes its share of the loop. Loops of a program
//! are separated by a barrier.
//!
//! Every memory cell carries the instance that wrote it, so a run can be
//! compared read-by-read with the sequential execution.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{BodyItem, LoopNest, Program, Statement, SyncOp};
use crate::syncgen::SyncProgram;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8], mut h: u64) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Initial content of `array[index]`, a fixed value in `0..1000`.
pub fn default_value(array: &str, index: i64) -> i64 {
    let h = fnv1a(array.as_bytes(), FNV_OFFSET);
    (mix(h ^ index as u64) % 1000) as i64
}

/// Array contents; cells never written read as [`default_value`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Memory {
    pub cells: BTreeMap<String, BTreeMap<i64, i64>>,
}

impl Memory {
    pub fn get(&self, array: &str, index: i64) -> i64 {
        self.cells
            .get(array)
            .and_then(|m| m.get(&index))
            .copied()
            .unwrap_or_else(|| default_value(array, index))
    }

    pub fn set(&mut self, array: &str, index: i64, value: i64) {
        self.cells
            .entry(array.to_string())
            .or_default()
            .insert(index, value);
    }

    /// Stable 64-bit digest of the written cells.
    pub fn fingerprint(&self) -> u64 {
        let mut h = FNV_OFFSET;
        for (array, cells) in &self.cells {
            for (index, value) in cells {
                if *value == default_value(array, *index) {
                    continue;
                }
                h = fnv1a(array.as_bytes(), h);
                h = fnv1a(&index.to_le_bytes(), h);
                h = fnv1a(&value.to_le_bytes(), h);
            }
        }
        h
    }
}

impl PartialEq for Memory {
    fn eq(&self, other: &Self) -> bool {
        let arrays: HashSet<&String> = self.cells.keys().chain(other.cells.keys()).collect();
        arrays.into_iter().all(|a| {
            let empty = BTreeMap::new();
            let mine = self.cells.get(a).unwrap_or(&empty);
            let theirs = other.cells.get(a).unwrap_or(&empty);
            mine.keys()
                .chain(theirs.keys())
                .all(|i| self.get(a, *i) == other.get(a, *i))
        })
    }
}

impl Eq for Memory {}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Address {
    pub array: String,
    pub index: i64,
}

/// Statement instance, identified by loop position, label and iteration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Instance {
    #[serde(rename = "loop")]
    pub loop_index: usize,
    pub label: String,
    pub iteration: i64,
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}:{}({})", self.loop_index, self.label, self.iteration)
    }
}

/// Provenance of a cell value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Writer {
    Initial,
    Instance(Instance),
}

/// Who observed a value that differs from the sequential run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observer {
    Read(Instance),
    /// The cell's final content.
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub observer: Observer,
    pub address: Address,
    pub expected: Writer,
    pub observed: Writer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Distribution {
    /// Contiguous chunks of iterations.
    Block,
    /// Round-robin.
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Policy {
    /// Uniform choice among runnable threads.
    Random,
    /// Always the thread holding the lowest iteration.
    Sequential,
    /// Favour threads holding high iterations for a seeded prefix of each
    /// loop, then behave like `Random`.
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub threads: usize,
    pub distribution: Distribution,
    pub seed: u64,
    pub policy: Policy,
}

impl Schedule {
    pub fn new(threads: usize, distribution: Distribution, seed: u64, policy: Policy) -> Self {
        Schedule {
            threads,
            distribution,
            seed,
            policy,
        }
    }

    /// Which thread runs each iteration of `range`.
    pub fn assign(&self, iterations: std::ops::Range<i64>) -> Vec<Vec<i64>> {
        let t = self.threads.max(1);
        let count = (iterations.end - iterations.start).max(0) as usize;
        let chunk = count.div_ceil(t).max(1);
        let mut out = vec![Vec::new(); t];
        for (k, i) in iterations.enumerate() {
            let owner = match self.distribution {
                Distribution::Block => k / chunk,
                Distribution::Cyclic => k % t,
            };
            out[owner].push(i);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    pub thread: usize,
    #[serde(rename = "loop")]
    pub loop_index: usize,
    pub iteration: i64,
    pub item: String,
    /// `(register, value)` added by a send.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sent: Option<(u32, i64)>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} t{} L{} i={} {}",
            self.step, self.thread, self.loop_index, self.iteration, self.item
        )?;
        if let Some((r, v)) = self.sent {
            write!(f, " reg{r}+={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    #[serde(rename = "final")]
    pub final_memory: Memory,
    pub matched_oracle: bool,
    pub deadlocked: bool,
    pub blocked_threads: Vec<usize>,
    pub violations: Vec<Violation>,
    pub steps: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("loop {loop_index}: register {reg} is sent by more than one instruction")]
    SharedRegister { loop_index: usize, reg: u32 },
    #[error("schedule needs at least one thread")]
    NoThreads,
}

type Cell = (i64, Writer);
/// (loop, statement position, iteration, read ordinal)
type ReadSite = (usize, usize, i64, usize);

fn instance(loop_index: usize, s: &Statement, iteration: i64) -> Instance {
    Instance {
        loop_index,
        label: s.label.clone(),
        iteration,
    }
}

/// Runs the program in source order, ignoring sync instructions.
/// Arithmetic wraps.
pub fn run_sequential(p: &Program, n: i64) -> Memory {
    let mut mem = Memory::default();
    for l in &p.loops {
        for i in l.iterations(n) {
            for s in &l.statements {
                let v = s.rhs.eval(&mut |r| mem.get(&r.array, i + r.offset));
                mem.set(&s.lhs.array, i + s.lhs.offset, v);
            }
        }
    }
    mem
}

struct Reference {
    memory: Memory,
    finals: HashMap<Address, Writer>,
    reads: HashMap<ReadSite, Writer>,
}

fn tagged_sequential(p: &Program, n: i64) -> Reference {
    let mut cells: HashMap<Address, Cell> = HashMap::new();
    let mut reads = HashMap::new();
    for (li, l) in p.loops.iter().enumerate() {
        for i in l.iterations(n) {
            for (si, s) in l.statements.iter().enumerate() {
                let mut ordinal = 0;
                let v = s.rhs.eval(&mut |r| {
                    let addr = Address {
                        array: r.array.clone(),
                        index: i + r.offset,
                    };
                    let (v, w) = cells.get(&addr).cloned().unwrap_or_else(|| {
                        (default_value(&addr.array, addr.index), Writer::Initial)
                    });
                    reads.insert((li, si, i, ordinal), w);
                    ordinal += 1;
                    v
                });
                let addr = Address {
                    array: s.lhs.array.clone(),
                    index: i + s.lhs.offset,
                };
                cells.insert(addr, (v, Writer::Instance(instance(li, s, i))));
            }
        }
    }
    let mut memory = Memory::default();
    let mut finals = HashMap::new();
    for (addr, (v, w)) in cells {
        memory.set(&addr.array, addr.index, v);
        finals.insert(addr, w);
    }
    Reference {
        memory,
        finals,
        reads,
    }
}

#[derive(Clone, Copy)]
enum Op {
    Stmt(usize),
    Send(u32),
    Wait(u32, i64),
}

fn lower_ops(l: &LoopNest) -> Vec<Op> {
    l.body()
        .into_iter()
        .map(|item| match item {
            BodyItem::Stmt(s) => Op::Stmt(
                l.position(&s.label)
                    .expect("body statement belongs to loop"),
            ),
            BodyItem::Sync(s) => match s.op {
                SyncOp::Send => Op::Send(s.reg),
                SyncOp::Wait => Op::Wait(s.reg, s.offset),
            },
        })
        .collect()
}

fn check_registers(p: &Program) -> Result<(), SimError> {
    for (li, l) in p.loops.iter().enumerate() {
        let mut seen = HashSet::new();
        for s in l.syncs.iter().filter(|s| s.op == SyncOp::Send) {
            if !seen.insert(s.reg) {
                return Err(SimError::SharedRegister {
                    loop_index: li,
                    reg: s.reg,
                });
            }
        }
    }
    Ok(())
}

struct VThread {
    iterations: Vec<i64>,
    iter_pos: usize,
    op_pos: usize,
    buffer: HashMap<Address, Cell>,
}

impl VThread {
    fn done(&self) -> bool {
        self.iter_pos >= self.iterations.len()
    }

    fn current(&self) -> i64 {
        self.iterations[self.iter_pos]
    }

    fn flush(&mut self, shared: &mut HashMap<Address, Cell>) {
        shared.extend(self.buffer.drain());
    }
}

struct Engine<'a> {
    program: &'a Program,
    n: i64,
    schedule: Schedule,
    rng: ChaCha8Rng,
    shared: HashMap<Address, Cell>,
    observed_reads: Vec<(ReadSite, Address, Writer)>,
    steps: u64,
    trace: Option<Vec<TraceEvent>>,
}

enum LoopOutcome {
    Finished,
    Deadlock(Vec<usize>),
}

impl Engine<'_> {
    fn run_loop(&mut self, li: usize) -> LoopOutcome {
        let program = self.program;
        let l = &program.loops[li];
        let ops = lower_ops(l);
        let lower = l.lower;
        let mut threads: Vec<VThread> = self
            .schedule
            .assign(l.iterations(self.n))
            .into_iter()
            .map(|iterations| VThread {
                iterations,
                iter_pos: 0,
                op_pos: 0,
                buffer: HashMap::new(),
            })
            .collect();
        let mut registers: HashMap<u32, HashSet<i64>> = HashMap::new();

        let total_ops = l.iterations(self.n).count() * ops.len();
        let prefix = match self.schedule.policy {
            Policy::Adversarial => self.rng.gen_range(0..=total_ops),
            _ => 0,
        };
        let mut local_steps = 0usize;

        loop {
            let runnable: Vec<usize> = (0..threads.len())
                .filter(|&t| {
                    let th = &threads[t];
                    if th.done() {
                        return false;
                    }
                    match ops[th.op_pos] {
                        Op::Wait(reg, offset) => {
                            let want = th.current() - offset;
                            want < lower || registers.get(&reg).is_some_and(|s| s.contains(&want))
                        }
                        _ => true,
                    }
                })
                .collect();

            if runnable.is_empty() {
                let blocked: Vec<usize> =
                    (0..threads.len()).filter(|&t| !threads[t].done()).collect();
                if blocked.is_empty() {
                    return LoopOutcome::Finished;
                }
                for th in &mut threads {
                    th.flush(&mut self.shared);
                }
                return LoopOutcome::Deadlock(blocked);
            }

            let t = match self.schedule.policy {
                Policy::Sequential => *runnable
                    .iter()
                    .min_by_key(|&&t| threads[t].current())
                    .expect("nonempty"),
                Policy::Adversarial if local_steps < prefix => *runnable
                    .iter()
                    .max_by_key(|&&t| (threads[t].current(), std::cmp::Reverse(t)))
                    .expect("nonempty"),
                _ => runnable[self.rng.gen_range(0..runnable.len())],
            };

            let th = &mut threads[t];
            let i = th.current();
            let mut sent = None;
            let item = match ops[th.op_pos] {
                Op::Stmt(si) => {
                    let s = &l.statements[si];
                    let mut ordinal = 0;
                    let shared = &self.shared;
                    let buffer = &th.buffer;
                    let observed = &mut self.observed_reads;
                    let v = s.rhs.eval(&mut |r| {
                        let addr = Address {
                            array: r.array.clone(),
                            index: i + r.offset,
                        };
                        let (v, w) = buffer
                            .get(&addr)
                            .or_else(|| shared.get(&addr))
                            .cloned()
                            .unwrap_or_else(|| {
                                (default_value(&addr.array, addr.index), Writer::Initial)
                            });
                        observed.push(((li, si, i, ordinal), addr, w));
                        ordinal += 1;
                        v
                    });
                    let addr = Address {
                        array: s.lhs.array.clone(),
                        index: i + s.lhs.offset,
                    };
                    th.buffer
                        .insert(addr, (v, Writer::Instance(instance(li, s, i))));
                    s.label.clone()
                }
                Op::Send(reg) => {
                    th.flush(&mut self.shared);
                    registers.entry(reg).or_default().insert(i);
                    sent = Some((reg, i));
                    format!("send({reg})")
                }
                Op::Wait(reg, offset) => {
                    th.flush(&mut self.shared);
                    format!("wait({reg}, {})", i - offset)
                }
            };

            th.op_pos += 1;
            if th.op_pos == ops.len() {
                th.op_pos = 0;
                th.iter_pos += 1;
                if th.done() {
                    th.flush(&mut self.shared);
                }
            }

            if let Some(trace) = &mut self.trace {
                trace.push(TraceEvent {
                    step: self.steps,
                    thread: t,
                    loop_index: li,
                    iteration: i,
                    item,
                    sent,
                });
            }
            self.steps += 1;
            local_steps += 1;
        }
    }
}

/// Simulates every loop of `p` in parallel under `schedule` and compares the
/// outcome with [`run_sequential`].
pub fn simulate(p: &Program, n: i64, schedule: Schedule) -> Result<SimReport, SimError> {
    run(p, n, schedule, false)
}

/// Like [`simulate`] but records one trace event per step.
pub fn simulate_traced(p: &Program, n: i64, schedule: Schedule) -> Result<SimReport, SimError> {
    run(p, n, schedule, true)
}

/// Simulates a synchronized loop.
pub fn run_parallel(sp: &SyncProgram, n: i64, schedule: Schedule) -> Result<SimReport, SimError> {
    simulate(&Program::new(vec![sp.loop_nest.clone()]), n, schedule)
}

fn run(p: &Program, n: i64, schedule: Schedule, traced: bool) -> Result<SimReport, SimError> {
    if schedule.threads == 0 {
        return Err(SimError::NoThreads);
    }
    check_registers(p)?;
    let reference = tagged_sequential(&p.without_syncs(), n);

    let mut engine = Engine {
        program: p,
        n,
        schedule,
        rng: ChaCha8Rng::seed_from_u64(schedule.seed),
        shared: HashMap::new(),
        observed_reads: Vec::new(),
        steps: 0,
        trace: traced.then(Vec::new),
    };

    let mut blocked_threads = Vec::new();
    for li in 0..p.loops.len() {
        if let LoopOutcome::Deadlock(blocked) = engine.run_loop(li) {
            blocked_threads = blocked;
            break;
        }
    }
    let deadlocked = !blocked_threads.is_empty();

    let mut violations = Vec::new();
    for (site, address, observed) in &engine.observed_reads {
        let expected = reference
            .reads
            .get(site)
            .cloned()
            .unwrap_or(Writer::Initial);
        if &expected != observed {
            let (li, si, i, _) = *site;
            violations.push(Violation {
                observer: Observer::Read(instance(li, &p.loops[li].statements[si], i)),
                address: address.clone(),
                expected,
                observed: observed.clone(),
            });
        }
    }

    let mut final_memory = Memory::default();
    let mut addresses: Vec<&Address> = engine
        .shared
        .keys()
        .chain(reference.finals.keys())
        .collect();
    addresses.sort();
    addresses.dedup();
    for addr in addresses {
        let observed = engine
            .shared
            .get(addr)
            .map(|c| c.1.clone())
            .unwrap_or(Writer::Initial);
        let expected = reference
            .finals
            .get(addr)
            .cloned()
            .unwrap_or(Writer::Initial);
        if observed != expected {
            violations.push(Violation {
                observer: Observer::Final,
                address: addr.clone(),
                expected,
                observed,
            });
        }
    }
    for (addr, (v, _)) in &engine.shared {
        final_memory.set(&addr.array, addr.index, *v);
    }

    let matched_oracle = !deadlocked && violations.is_empty() && final_memory == reference.memory;
    Ok(SimReport {
        final_memory,
        matched_oracle,
        deadlocked,
        blocked_threads,
        violations,
        steps: engine.steps,
        trace: engine.trace.unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub seed: u64,
    pub threads: usize,
    pub deadlocked: bool,
    pub violations: usize,
}

/// Aggregate over a seeds × thread-counts sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub n: i64,
    pub threads: Vec<usize>,
    pub seeds: u64,
    pub base_seed: u64,
    pub distribution: Distribution,
    pub policy: Policy,
    pub runs: u64,
    pub passed: u64,
    pub failed: u64,
    pub deadlocked: u64,
    /// First failing runs in (threads, seed) order.
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// How many failing runs a [`SweepReport`] lists individually.
pub const MAX_LISTED_FAILURES: usize = 32;

/// Runs [`simulate`] for every thread count in `threads` and seeds
/// `base.seed .. base.seed + seeds`. Runs execute concurrently; results are
/// merged in (threads, seed) order.
pub fn sweep(
    p: &Program,
    n: i64,
    seeds: u64,
    threads: &[usize],
    base: Schedule,
) -> Result<SweepReport, SimError> {
    let jobs: Vec<(usize, u64)> = threads
        .iter()
        .flat_map(|&t| (0..seeds).map(move |k| (t, base.seed.wrapping_add(k))))
        .collect();
    let results: Vec<(usize, u64, SimReport)> = jobs
        .par_iter()
        .map(|&(t, seed)| {
            let s = Schedule {
                threads: t,
                seed,
                ..base
            };
            simulate(p, n, s).map(|r| (t, seed, r))
        })
        .collect::<Result<_, _>>()?;

    let mut report = SweepReport {
        n,
        threads: threads.to_vec(),
        seeds,
        base_seed: base.seed,
        distribution: base.distribution,
        policy: base.policy,
        runs: 0,
        passed: 0,
        failed: 0,
        deadlocked: 0,
        failures: Vec::new(),
    };
    for (t, seed, r) in results {
        report.runs += 1;
        if r.matched_oracle {
            report.passed += 1;
            continue;
        }
        report.failed += 1;
        if r.deadlocked {
            report.deadlocked += 1;
        }
        if report.failures.len() < MAX_LISTED_FAILURES {
            report.failures.push(SweepFailure {
                seed,
                threads: t,
                deadlocked: r.deadlocked,
                violations: r.violations.len(),
            });
        }
    }
    Ok(report)
}
