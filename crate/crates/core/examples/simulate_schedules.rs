//! Runs a recurrence in parallel with and without synchronization and
//! reports how many schedules reproduce the sequential result.

use parasync::dsl::{parse, Program};
use parasync::simverify::{simulate_traced, sweep, Distribution, Policy, Schedule};
use parasync::syncgen::synchronize;

fn main() {
    let plain = parse(
        "for (i=1; i<n; i++) {
            S1: a[i] = b[i-1] + 1;
            S2: b[i] = c[i-1] + 2;
            S3: c[i] = b[i-2] + a[i-1];
        }",
    )
    .unwrap();
    let synced = Program::new(vec![synchronize(&plain.loops[0]).unwrap().loop_nest]);

    for policy in [Policy::Random, Policy::Adversarial] {
        let base = Schedule::new(2, Distribution::Cyclic, 0, policy);
        for (name, p) in [("unsynchronized", &plain), ("synchronized", &synced)] {
            let r = sweep(p, 16, 200, &[2, 3, 4], base).unwrap();
            println!("{policy:?} {name}: {}/{} runs match", r.passed, r.runs);
        }
    }

    let base = Schedule::new(2, Distribution::Block, 1, Policy::Adversarial);
    let run = simulate_traced(&plain, 6, base).unwrap();
    println!("\nfirst steps of a racy schedule:");
    for ev in run.trace.iter().take(12) {
        println!("  {ev}");
    }
    for v in run.violations.iter().take(3) {
        println!(
            "  violation at {:?}: expected {:?}, saw {:?}",
            v.address, v.expected, v.observed
        );
    }
}
