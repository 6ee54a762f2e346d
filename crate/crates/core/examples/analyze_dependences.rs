//! Prints the dependence graph of a loop and its Graphviz form.
//!
//!     cargo run --example analyze_dependences [FILE]

use parasync::depend::{analyze, to_dot};
use parasync::dsl::parse;

const DEFAULT: &str = "for (i=1; i<n; i++) {
    S1: a[i] = b[i-1] + 1;
    S2: b[i] = c[i-1] + 2;
    S3: e[i] = a[i-1] + b[i] * d[i-2];
    S4: d[i] = b[i-2] - 3;
}";

fn main() {
    let src = std::env::args()
        .nth(1)
        .map(|f| std::fs::read_to_string(f).expect("readable input"))
        .unwrap_or_else(|| DEFAULT.to_string());
    let program = parse(&src).unwrap_or_else(|e| panic!("{e}"));

    for (k, l) in program.loops.iter().enumerate() {
        let g = analyze(l);
        println!("loop {k}:");
        for e in &g.edges {
            let carried = if e.is_carried() {
                "carried"
            } else {
                "independent"
            };
            println!("  {e}  [{carried}]");
        }
        println!("\n{}", to_dot(&g));
    }
}
