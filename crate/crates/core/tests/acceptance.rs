//! Acceptance suite: twelve criteria, one PASS/FAIL line each, with the
//! time limit of every criterion enforced. Exits non-zero on any failure.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{brute_force_deps, interpret, load_loop, random_loop};
use parasync::depend::{analyze, DepKind, Dependence};
use parasync::dsl::{print, print_loop, Program};
use parasync::restructure::{restructure, toposort};
use parasync::simverify::{run_sequential, sweep, Distribution, Policy, Schedule};
use parasync::syncelim::{
    compare, eliminate_by_pattern, eliminate_by_reduction, oracle_enforced, window_size, Witness,
};
use parasync::syncgen::{insert_sync, synchronize};

const CORPUS: u64 = 500;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn edges(l: &parasync::dsl::LoopNest) -> Vec<String> {
    analyze(l).edges.iter().map(ToString::to_string).collect()
}

fn c1_acyclic_dependences() -> Result<String, String> {
    let l = load_loop("acyclic.loop");
    let got = edges(&l);
    let want = [
        "Flow S1->S3 Δ=1 (a)",
        "Flow S2->S1 Δ=1 (b)",
        "Flow S2->S3 Δ=0 (b)",
        "Flow S2->S4 Δ=2 (b)",
        "Flow S4->S3 Δ=2 (d)",
    ];
    ensure!(got == want, "edges {got:?}");
    Ok("5 flow edges".into())
}

fn c2_topological_fission() -> Result<String, String> {
    let r = restructure(&load_loop("acyclic.loop"), false);
    let order = toposort(&r.partition);
    ensure!(order == ["S2", "S1", "S4", "S3"], "order {order:?}");
    let expected = "\
for (parallel i=1; i<n; i++) {
    S2: b[i] = c[i-1] + 2;
}

for (parallel i=1; i<n; i++) {
    S1: a[i] = b[i-1] + 1;
}

for (parallel i=1; i<n; i++) {
    S4: d[i] = b[i-2] - 3;
}

for (parallel i=1; i<n; i++) {
    S3: e[i] = a[i-1] + b[i] * d[i-2];
}
";
    let text = print(&r.program);
    ensure!(text == expected, "listing:\n{text}");
    Ok("S2, S1, S4, S3 as four parallel loops".into())
}

fn c3_locality_grouping() -> Result<String, String> {
    let r = restructure(&load_loop("acyclic.loop"), true);
    let groups: Vec<(Vec<String>, bool)> = r
        .plan
        .groups
        .iter()
        .map(|g| (g.statements.clone(), g.parallel))
        .collect();
    let want = vec![
        (vec!["S2".to_string()], true),
        (vec!["S1".to_string(), "S4".to_string()], true),
        (vec!["S3".to_string()], true),
    ];
    ensure!(groups == want, "groups {groups:?}");
    Ok("{S2} {S1,S4} {S3}".into())
}

fn c4_sync_insertion() -> Result<String, String> {
    let l = load_loop("recurrence.loop");
    let deps = vec![
        Dependence::between(&l, DepKind::Flow, "S1", "S3", "a", 1),
        Dependence::between(&l, DepKind::Flow, "S2", "S3", "b", 2),
        Dependence::between(&l, DepKind::Flow, "S3", "S2", "c", 1),
    ];
    let sp = insert_sync(&l, &deps).map_err(|e| e.to_string())?;
    let want = "\
for (i=1; i<n; i++) {
    S1: a[i] = b[i-1] + 1;
    send(0, i, a);
    wait(2, i-1, c);
    S2: b[i] = c[i-1] + 2;
    send(1, i, b);
    wait(1, i-2, b);
    wait(0, i-1, a);
    S3: c[i] = b[i-2] + a[i-1];
    send(2, i, c);
}
";
    let text = print_loop(&sp.loop_nest);
    ensure!(text == want, "listing:\n{text}");
    ensure!(sp.syncs().len() == 6, "{} instructions", sp.syncs().len());
    Ok("six instructions, registers 0/1/2".into())
}

fn c5_redundant_elimination() -> Result<String, String> {
    let l = load_loop("redundant_sync.loop");
    let deps = analyze(&l).carried();
    let a_dep = Dependence::between(&l, DepKind::Flow, "S1", "S3", "a", 2);
    let c_dep = Dependence::between(&l, DepKind::Flow, "S3", "S2", "c", 1);
    let red = eliminate_by_reduction(&l, &deps).map_err(|e| e.to_string())?;
    let pat = eliminate_by_pattern(&l, &deps).map_err(|e| e.to_string())?;
    for r in [&red, &pat] {
        ensure!(
            r.is_eliminated(&a_dep),
            "{:?} kept the a-dependence",
            r.method
        );
        ensure!(
            r.retained == [c_dep.clone()],
            "{:?} retained {:?}",
            r.method,
            r.retained
        );
    }
    let Witness::Path { nodes } = &red.eliminated[0].witness else {
        return Err("reduction witness is not a path".into());
    };
    let path: Vec<String> = nodes.iter().map(ToString::to_string).collect();
    let want = [
        "S1(0)", "S2(0)", "S3(0)", "S2(1)", "S3(1)", "S2(2)", "S3(2)",
    ];
    ensure!(path == want, "path {path:?}");
    let iterations: BTreeSet<i64> = nodes.iter().map(|n| n.iteration).collect();
    ensure!(
        iterations.len() == 3,
        "path spans {} iterations",
        iterations.len()
    );
    Ok(format!("witness {}", path.join("->")))
}

fn c6_window_bound() -> Result<String, String> {
    ensure!(
        window_size(&[2, 1]) == 3,
        "window_size([2,1]) = {}",
        window_size(&[2, 1])
    );
    ensure!(
        window_size(&[1]) == 2,
        "window_size([1]) = {}",
        window_size(&[1])
    );
    Ok("3 and 2".into())
}

fn c7_elimination_soundness() -> Result<String, String> {
    let mut checks = 0;
    for seed in 0..CORPUS {
        let l = random_loop(seed);
        let deps = analyze(&l).carried();
        let c = compare(&l, &deps).map_err(|e| e.to_string())?;
        for r in [&c.reduction, &c.pattern] {
            for e in &r.eliminated {
                for n in [8, 16, 24] {
                    ensure!(
                        oracle_enforced(&l, &r.retained, &e.dep, n),
                        "seed {seed}: {:?} unsoundly dropped {} (n={n})",
                        r.method,
                        e.dep
                    );
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{CORPUS} loops, {checks} oracle checks"))
}

fn c8_pattern_subset() -> Result<String, String> {
    let mut pattern_total = 0;
    let mut reduction_total = 0;
    for seed in 0..CORPUS {
        let l = random_loop(seed);
        let deps = analyze(&l).carried();
        let c = compare(&l, &deps).map_err(|e| e.to_string())?;
        let p: BTreeSet<String> = c
            .pattern
            .eliminated
            .iter()
            .map(|e| e.dep.to_string())
            .collect();
        let r: BTreeSet<String> = c
            .reduction
            .eliminated
            .iter()
            .map(|e| e.dep.to_string())
            .collect();
        ensure!(
            p.is_subset(&r),
            "seed {seed}: pattern {p:?} reduction {r:?}"
        );
        pattern_total += p.len();
        reduction_total += r.len();
    }
    Ok(format!(
        "{pattern_total} pattern vs {reduction_total} reduction eliminations"
    ))
}

fn c9_simulation_equivalence() -> Result<String, String> {
    let synced = synchronize(&load_loop("recurrence.loop")).map_err(|e| e.to_string())?;
    let redundant = load_loop("redundant_sync.loop");
    let kept = eliminate_by_reduction(&redundant, &analyze(&redundant).carried())
        .map_err(|e| e.to_string())?
        .retained;
    let optimized = insert_sync(&redundant, &kept).map_err(|e| e.to_string())?;
    let mut runs = 0;
    for (name, lp) in [
        ("recurrence", synced.loop_nest),
        ("redundant_sync", optimized.loop_nest),
    ] {
        let p = Program::new(vec![lp]);
        for policy in [Policy::Random, Policy::Adversarial] {
            let base = Schedule::new(2, Distribution::Cyclic, 0, policy);
            let r = sweep(&p, 16, 1000, &[2, 3, 4], base).map_err(|e| e.to_string())?;
            ensure!(
                r.deadlocked == 0,
                "{name} {policy:?}: {} deadlocks",
                r.deadlocked
            );
            ensure!(
                r.all_passed(),
                "{name} {policy:?}: failures {:?}",
                r.failures
            );
            runs += r.runs;
        }
    }
    Ok(format!("{runs} runs matched"))
}

fn c10_race_exposure() -> Result<String, String> {
    let synced = synchronize(&load_loop("recurrence.loop")).map_err(|e| e.to_string())?;
    let stripped = Program::new(vec![synced.loop_nest.without_syncs()]);
    let base = Schedule::new(2, Distribution::Cyclic, 0, Policy::Adversarial);
    let r = sweep(&stripped, 16, 1000, &[2], base).map_err(|e| e.to_string())?;
    ensure!(r.failed >= 1, "no failing seed");
    Ok(format!(
        "{} of {} seeds fail, first seed {}",
        r.failed, r.runs, r.failures[0].seed
    ))
}

fn c11_fission_semantics() -> Result<String, String> {
    let l = load_loop("acyclic.loop");
    let original = Program::new(vec![l.clone()]);
    let reference = run_sequential(&original, 12);
    let cells = interpret(&original, 12);
    for locality in [false, true] {
        let out = restructure(&l, locality).program;
        ensure!(
            run_sequential(&out, 12) == reference,
            "locality={locality}: memory differs"
        );
        ensure!(
            interpret(&out, 12) == cells,
            "locality={locality}: interpreter differs"
        );
    }
    Ok(format!("{} written cells identical", cells.len()))
}

fn c12_brute_force_oracle() -> Result<String, String> {
    let mut compared = 0;
    for seed in 0..CORPUS {
        let l = random_loop(seed);
        let all = analyze(&l).edges;
        for upper in [2i64, 3, 4, 5, 6, 9, 16, 32] {
            let want = brute_force_deps(&l, upper);
            let got: BTreeSet<_> = all
                .iter()
                .filter(|e| e.distance < upper - l.lower)
                .map(|e| {
                    (
                        e.source.clone(),
                        e.sink.clone(),
                        e.kind,
                        e.array.clone(),
                        e.distance,
                    )
                })
                .collect();
            ensure!(
                got == want,
                "seed {seed}, n={upper}: analyzed {got:?} scanned {want:?}"
            );
            compared += 1;
        }
    }
    Ok(format!("{compared} loop/bound pairs agree"))
}

fn main() {
    let criteria: [(&str, Check, Duration); 12] = [
        (
            "acyclic dependence set",
            c1_acyclic_dependences,
            Duration::from_secs(1),
        ),
        (
            "topological fission listing",
            c2_topological_fission,
            Duration::from_secs(1),
        ),
        (
            "locality grouping",
            c3_locality_grouping,
            Duration::from_secs(1),
        ),
        (
            "send/wait insertion listing",
            c4_sync_insertion,
            Duration::from_secs(1),
        ),
        (
            "redundant dependence elimination",
            c5_redundant_elimination,
            Duration::from_secs(1),
        ),
        ("window bound", c6_window_bound, Duration::from_secs(1)),
        (
            "elimination soundness",
            c7_elimination_soundness,
            Duration::from_secs(120),
        ),
        (
            "pattern subset of reduction",
            c8_pattern_subset,
            Duration::from_secs(120),
        ),
        (
            "simulation equivalence",
            c9_simulation_equivalence,
            Duration::from_secs(60),
        ),
        ("race exposure", c10_race_exposure, Duration::from_secs(30)),
        (
            "fission preserves semantics",
            c11_fission_semantics,
            Duration::from_secs(1),
        ),
        (
            "brute-force dependence oracle",
            c12_brute_force_oracle,
            Duration::from_secs(60),
        ),
    ];

    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({elapsed:.2?})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
