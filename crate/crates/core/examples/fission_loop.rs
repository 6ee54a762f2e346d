//! Distributes a loop into parallel pieces, with and without locality
//! grouping.

use parasync::dsl::{parse, print};
use parasync::restructure::{restructure, toposort};

fn main() {
    let program = parse(
        "for (i=1; i<n; i++) {
            S1: a[i] = b[i-1] + 1;
            S2: b[i] = c[i-1] + 2;
            S3: e[i] = a[i-1] + b[i] * d[i-2];
            S4: d[i] = b[i-2] - 3;
        }",
    )
    .unwrap();
    let l = &program.loops[0];

    let plain = restructure(l, false);
    println!("statement order: {}", toposort(&plain.partition).join(", "));
    println!("\none loop per component:\n{}", print(&plain.program));

    let grouped = restructure(l, true);
    println!(
        "statements reading the same data kept together:\n{}",
        print(&grouped.program)
    );

    // A recurrence cannot be split; it stays one sequential loop.
    let cyclic = parse(
        "for (i=1; i<n; i++) {
            S1: a[i] = b[i-1] + 1;
            S2: b[i] = a[i-1] * 2;
        }",
    )
    .unwrap();
    let r = restructure(&cyclic.loops[0], false);
    println!("recurrence:\n{}", print(&r.program));
}
