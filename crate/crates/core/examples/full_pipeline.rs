//! Parse, analyze, distribute, synchronize the cyclic remainder, prune
//! redundant pairs and verify by simulation.

use parasync::depend::analyze;
use parasync::dsl::{parse, print, Program};
use parasync::restructure::restructure;
use parasync::simverify::{sweep, Distribution, Policy, Schedule};
use parasync::syncelim::eliminate_by_reduction;
use parasync::syncgen::insert_sync;

fn main() {
    let src = "for (i=1; i<n; i++) {
        S1: x[i] = y[i-1] + 1;
        S2: y[i] = x[i-1] * 3;
        S3: z[i] = x[i] + w[i-2];
        S4: w[i] = z[i-1] - 5;
        S5: v[i] = 4;
    }";
    let program = parse(src).unwrap();
    let r = restructure(&program.loops[0], true);

    let mut loops = Vec::new();
    for l in &r.program.loops {
        let deps = analyze(l).carried();
        if l.parallel || deps.is_empty() {
            loops.push(l.clone());
            continue;
        }
        let kept = eliminate_by_reduction(l, &deps).unwrap().retained;
        println!(
            "{} carried dependence(s), {} need a send/wait pair",
            deps.len(),
            kept.len()
        );
        let mut synced = insert_sync(l, &kept).unwrap().loop_nest;
        synced.parallel = true;
        loops.push(synced);
    }
    let out = Program::new(loops);
    println!("\n{}", print(&out));

    let base = Schedule::new(2, Distribution::Cyclic, 0, Policy::Adversarial);
    let report = sweep(&out, 20, 300, &[2, 3, 4], base).unwrap();
    println!(
        "{}/{} adversarial schedules match sequential execution",
        report.passed, report.runs
    );
    assert!(report.all_passed());
}
