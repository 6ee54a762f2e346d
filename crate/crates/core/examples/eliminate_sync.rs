//! Removes send/wait pairs whose ordering is already implied by others,
//! using both deciders, and renders the iteration-space diagram.
//!
//!     cargo run --example eliminate_sync > isd.dot && dot -Tsvg isd.dot

use parasync::depend::analyze;
use parasync::dsl::{parse, print_loop};
use parasync::syncelim::{build_isd, compare, to_dot_isd, window_size, Witness};
use parasync::syncgen::insert_sync;

fn main() {
    let program = parse(
        "for (i=1; i<n; i++) {
            S1: a[i] = 7;
            S2: b[i] = c[i-1] + 1;
            S3: c[i] = a[i-2] * 2;
        }",
    )
    .unwrap();
    let l = &program.loops[0];
    let deps = analyze(l).carried();

    let c = compare(l, &deps).unwrap();
    eprintln!("deciders agree: {}", c.agreement);
    for e in &c.reduction.eliminated {
        match &e.witness {
            Witness::Path { nodes } => {
                let hops: Vec<String> = nodes.iter().map(ToString::to_string).collect();
                eprintln!("{} implied by {}", e.dep, hops.join(" -> "));
            }
            Witness::Pattern { eliminator } => eprintln!("{} implied by {eliminator}", e.dep),
        }
    }
    for e in &c.pattern.eliminated {
        if let Witness::Pattern { eliminator } = &e.witness {
            eprintln!("pattern: {} covered by {eliminator}", e.dep);
        }
    }

    let sp = insert_sync(l, &c.reduction.retained).unwrap();
    eprintln!("\n{}", print_loop(&sp.loop_nest));

    let dists: Vec<i64> = deps.iter().map(|d| d.distance).collect();
    let isd = build_isd(l, &deps, window_size(&dists));
    println!("{}", to_dot_isd(&isd, Some(&c.reduction)));
}
