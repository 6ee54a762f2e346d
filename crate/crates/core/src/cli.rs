//! The `parasync` command line: parse, analyze, restructure, synchronize,
//! optimize and simulate, writing the artifacts of each stage to an output
//! directory.
//!
//! Exit codes: 0 success, 1 bad input, 2 I/O failure, 3 nothing to
//! synchronize, 4 simulation mismatch or deadlock.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::depend::{analyze, to_dot, DepGraph};
use crate::dsl::{parse, print, LoopNest, Program};
use crate::restructure::restructure;
use crate::simverify::{simulate_traced, sweep, Distribution, Policy, Schedule};
use crate::syncelim::{
    build_isd, compare, eliminate_by_pattern, eliminate_by_reduction, to_dot_isd, window_size,
    ElimResult,
};
use crate::syncgen::insert_sync;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NO_DEPS: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

/// Environment variable holding the default base seed for simulations.
pub const SEED_ENV: &str = "PARASYNC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Analyze,
    Transform,
    Sync,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Isd,
    Pattern,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Json,
    Dot,
    Loop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistArg {
    Block,
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Random,
    Sequential,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub command: Command,
    pub input: PathBuf,
    /// Value bound to a symbolic upper bound.
    pub n: i64,
    pub locality: bool,
    pub optimize: bool,
    pub method: Method,
    pub threads: Vec<usize>,
    pub seeds: u64,
    pub base_seed: u64,
    pub distribution: Distribution,
    pub policy: Policy,
    pub emit: Vec<Emit>,
    pub out: PathBuf,
    pub trace: bool,
}

impl PipelineConfig {
    pub fn new(command: Command, input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            command,
            input: input.into(),
            n: 16,
            locality: false,
            optimize: false,
            method: Method::Both,
            threads: vec![2, 3, 4],
            seeds: 100,
            base_seed: 0,
            distribution: Distribution::Cyclic,
            policy: Policy::Random,
            emit: vec![Emit::Json, Emit::Dot, Emit::Loop],
            out: out.into(),
            trace: false,
        }
    }

    fn emits(&self, e: Emit) -> bool {
        self.emit.contains(&e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "parasync",
    version,
    about = "Loop dependence analysis, fission and send/wait synchronization"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Write the dependence graph of each loop.
    Analyze(CommonArgs),
    /// Distribute loops into parallel and sequential pieces.
    Transform(CommonArgs),
    /// Insert send/wait pairs for loop-carried dependences.
    Sync(CommonArgs),
    /// Run seeded parallel schedules against the sequential result.
    Simulate(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 16)]
    n: i64,
    #[arg(long)]
    locality: bool,
    #[arg(long)]
    optimize: bool,
    #[arg(long, value_enum, default_value = "both")]
    method: Method,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    threads: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, value_enum, default_value = "cyclic")]
    dist: DistArg,
    #[arg(long, value_enum, default_value = "random")]
    policy: PolicyArg,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "json,dot,loop"
    )]
    emit: Vec<Emit>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the step trace of the first run.
    #[arg(long)]
    trace: bool,
}

/// Parses command-line arguments into a config. `PARASYNC_SEED` supplies the
/// base seed.
pub fn parse_args<I, T>(args: I) -> Result<PipelineConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let (command, a) = match cli.command {
        Sub::Analyze(a) => (Command::Analyze, a),
        Sub::Transform(a) => (Command::Transform, a),
        Sub::Sync(a) => (Command::Sync, a),
        Sub::Simulate(a) => (Command::Simulate, a),
    };
    let base_seed = std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0);
    Ok(PipelineConfig {
        command,
        input: a.input,
        n: a.n,
        locality: a.locality,
        optimize: a.optimize,
        method: a.method,
        threads: a.threads,
        seeds: a.seeds,
        base_seed,
        distribution: match a.dist {
            DistArg::Block => Distribution::Block,
            DistArg::Cyclic => Distribution::Cyclic,
        },
        policy: match a.policy {
            PolicyArg::Random => Policy::Random,
            PolicyArg::Sequential => Policy::Sequential,
            PolicyArg::Adversarial => Policy::Adversarial,
        },
        emit: a.emit,
        out: a.out,
        trace: a.trace,
    })
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(args) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_OK
            }
        }
    }
}

pub fn run(cfg: &PipelineConfig) -> i32 {
    match cfg.command {
        Command::Analyze => cmd_analyze(cfg),
        Command::Transform => cmd_transform(cfg),
        Command::Sync => cmd_sync(cfg),
        Command::Simulate => cmd_simulate(cfg),
    }
}

enum Failure {
    Input(String),
    Io(String),
}

impl Failure {
    fn report(self) -> i32 {
        match self {
            Failure::Input(m) => {
                eprintln!("error: {m}");
                EXIT_INPUT
            }
            Failure::Io(m) => {
                eprintln!("error: {m}");
                EXIT_IO
            }
        }
    }
}

fn load(cfg: &PipelineConfig) -> Result<Program, Failure> {
    let src = fs::read_to_string(&cfg.input)
        .map_err(|e| Failure::Io(format!("{}: {e}", cfg.input.display())))?;
    parse(&src).map_err(|e| Failure::Input(format!("{}:{e}", cfg.input.display())))
}

struct Writer<'a> {
    cfg: &'a PipelineConfig,
}

impl Writer<'_> {
    fn dir(&self) -> Result<&Path, Failure> {
        fs::create_dir_all(&self.cfg.out)
            .map_err(|e| Failure::Io(format!("{}: {e}", self.cfg.out.display())))?;
        Ok(&self.cfg.out)
    }

    fn text(&self, kind: Emit, name: &str, body: &str) -> Result<(), Failure> {
        if !self.cfg.emits(kind) {
            return Ok(());
        }
        let path = self.dir()?.join(name);
        fs::write(&path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut body = serde_json::to_string_pretty(value).expect("artifacts serialize");
        body.push('\n');
        self.text(Emit::Json, name, &body)
    }

    /// A single loop's artifact as an object, several as an array.
    fn per_loop<T: Serialize>(&self, name: &str, values: &[T]) -> Result<(), Failure> {
        match values {
            [one] => self.json(name, one),
            many => self.json(name, many),
        }
    }

    /// Unconditional write, used for the simulation report.
    fn always(&self, name: &str, body: &str) -> Result<(), Failure> {
        let path = self.dir()?.join(name);
        fs::write(&path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }
}

pub fn cmd_analyze(cfg: &PipelineConfig) -> i32 {
    analyze_inner(cfg).map_or_else(Failure::report, |_| EXIT_OK)
}

fn analyze_inner(cfg: &PipelineConfig) -> Result<(), Failure> {
    let program = load(cfg)?;
    let w = Writer { cfg };
    let graphs: Vec<DepGraph> = program.loops.iter().map(analyze).collect();
    for (li, g) in graphs.iter().enumerate() {
        println!(
            "loop {li}: {} statements, {} dependences",
            g.nodes.len(),
            g.edges.len()
        );
        for e in &g.edges {
            println!("  {e}");
        }
    }
    w.per_loop("depgraph.json", &graphs)?;
    let dot: String = graphs.iter().map(to_dot).collect();
    w.text(Emit::Dot, "depgraph.dot", &dot)
}

pub fn cmd_transform(cfg: &PipelineConfig) -> i32 {
    transform_inner(cfg).map_or_else(Failure::report, |_| EXIT_OK)
}

fn transform_inner(cfg: &PipelineConfig) -> Result<(), Failure> {
    let program = load(cfg)?;
    let w = Writer { cfg };
    let results: Vec<_> = program
        .loops
        .iter()
        .map(|l| restructure(l, cfg.locality))
        .collect();

    let out = Program::new(
        results
            .iter()
            .flat_map(|r| r.program.loops.clone())
            .collect(),
    );
    for (li, r) in results.iter().enumerate() {
        for (comp, cyclic) in r.partition.components.iter().zip(&r.partition.is_cyclic) {
            if *cyclic {
                println!(
                    "loop {li}: cyclic SCC {{{}}} stays sequential; run `parasync sync` to synchronize it",
                    comp.join(",")
                );
            }
        }
    }
    println!("{} loop(s) after fission", out.loops.len());

    let partitions: Vec<_> = results.iter().map(|r| &r.partition).collect();
    let plans: Vec<_> = results.iter().map(|r| &r.plan).collect();
    w.per_loop("scc.json", &partitions)?;
    w.per_loop("plan.json", &plans)?;
    w.text(Emit::Loop, "transformed.loop", &print(&out))
}

pub fn cmd_sync(cfg: &PipelineConfig) -> i32 {
    sync_inner(cfg).unwrap_or_else(Failure::report)
}

#[derive(Serialize)]
#[serde(untagged)]
enum ElimReport {
    Single(ElimResult),
    Both(crate::syncelim::Comparison),
}

fn sync_inner(cfg: &PipelineConfig) -> Result<i32, Failure> {
    let program = load(cfg)?;
    let w = Writer { cfg };

    let mut loops: Vec<LoopNest> = Vec::new();
    let mut sync_programs = Vec::new();
    let mut elims = Vec::new();
    let mut dots = String::new();

    for l in &program.loops {
        let base = l.without_syncs();
        let deps = analyze(&base).carried();
        if deps.is_empty() {
            loops.push(base);
            continue;
        }
        let keep = if cfg.optimize {
            let invalid = |e| Failure::Input(format!("{e}"));
            let (report, retained, highlight) = match cfg.method {
                Method::Isd => {
                    let r = eliminate_by_reduction(&base, &deps).map_err(invalid)?;
                    (ElimReport::Single(r.clone()), r.retained.clone(), r)
                }
                Method::Pattern => {
                    let r = eliminate_by_pattern(&base, &deps).map_err(invalid)?;
                    (ElimReport::Single(r.clone()), r.retained.clone(), r)
                }
                Method::Both => {
                    let c = compare(&base, &deps).map_err(invalid)?;
                    if !c.agreement {
                        println!("methods disagree; using the transitive-reduction result");
                    }
                    let r = c.reduction.clone();
                    (ElimReport::Both(c), r.retained.clone(), r)
                }
            };
            for e in &highlight.eliminated {
                println!("eliminated {}", e.dep);
            }
            let dists: Vec<i64> = deps.iter().map(|d| d.distance).collect();
            let width = window_size(&dists).max(dists.iter().max().copied().unwrap_or(0) + 1);
            dots.push_str(&to_dot_isd(
                &build_isd(&base, &deps, width),
                Some(&highlight),
            ));
            elims.push(report);
            retained
        } else {
            deps
        };
        let sp = insert_sync(&base, &keep).map_err(|e| Failure::Input(format!("{e}")))?;
        println!("{} send/wait pair(s)", sp.regmap.len());
        loops.push(sp.loop_nest.clone());
        sync_programs.push(sp);
    }

    if sync_programs.is_empty() {
        eprintln!("error: no loop-carried dependences to synchronize");
        return Ok(EXIT_NO_DEPS);
    }

    w.text(Emit::Loop, "sync.loop", &print(&Program::new(loops)))?;
    w.per_loop("syncprogram.json", &sync_programs)?;
    if cfg.optimize {
        w.per_loop("elim.json", &elims)?;
        w.text(Emit::Dot, "isd.dot", &dots)?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_simulate(cfg: &PipelineConfig) -> i32 {
    simulate_inner(cfg).unwrap_or_else(Failure::report)
}

fn simulate_inner(cfg: &PipelineConfig) -> Result<i32, Failure> {
    let program = load(cfg)?;
    if cfg.n < 1 {
        return Err(Failure::Input(format!(
            "--n must be at least 1, got {}",
            cfg.n
        )));
    }
    if cfg.seeds == 0 || cfg.threads.is_empty() || cfg.threads.contains(&0) {
        return Err(Failure::Input(
            "need at least one seed and positive thread counts".into(),
        ));
    }
    let w = Writer { cfg };
    let base = Schedule::new(cfg.threads[0], cfg.distribution, cfg.base_seed, cfg.policy);
    let report = sweep(&program, cfg.n, cfg.seeds, &cfg.threads, base)
        .map_err(|e| Failure::Input(format!("{e}")))?;

    let mut body = serde_json::to_string_pretty(&report).expect("report serializes");
    body.push('\n');
    w.always("sim.json", &body)?;

    if cfg.trace {
        let run =
            simulate_traced(&program, cfg.n, base).map_err(|e| Failure::Input(format!("{e}")))?;
        let text: String = run.trace.iter().map(|e| format!("{e}\n")).collect();
        w.always("trace.txt", &text)?;
    }

    println!(
        "{} runs: {} passed, {} failed ({} deadlocked)",
        report.runs, report.passed, report.failed, report.deadlocked
    );
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_MISMATCH
    })
}
