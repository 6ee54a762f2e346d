//! Synchronizes every loop-carried dependence of a recurrence with a
//! send/wait pair and shows the register assignment.

use parasync::dsl::{parse, print_loop};
use parasync::syncgen::synchronize;

fn main() {
    let program = parse(
        "for (i=1; i<n; i++) {
            S1: a[i] = b[i-1] + 1;
            S2: b[i] = c[i-1] + 2;
            S3: c[i] = b[i-2] + a[i-1];
        }",
    )
    .unwrap();

    let sp = synchronize(&program.loops[0]).expect("loop has carried dependences");
    for a in &sp.regmap {
        println!("register {}: {}", a.reg, a.dep);
    }
    println!("\n{}", print_loop(&sp.loop_nest));
}
