//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use parasync::depend::DepKind;
use parasync::dsl::{parse, ArrayRef, BinOp, Bound, Expr, LoopNest, Program, Statement};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ARRAYS: [&str; 4] = ["a", "b", "c", "d"];

pub fn program_file(name: &str) -> String {
    format!("{}/programs/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn load(name: &str) -> Program {
    parse(&std::fs::read_to_string(program_file(name)).unwrap()).unwrap()
}

pub fn load_loop(name: &str) -> LoopNest {
    load(name).loops.remove(0)
}

fn random_ref(rng: &mut ChaCha8Rng) -> ArrayRef {
    ArrayRef::new(
        ARRAYS[rng.gen_range(0..ARRAYS.len())],
        rng.gen_range(-2..=2),
    )
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.4) {
        if rng.gen_bool(0.8) {
            let r = random_ref(rng);
            Expr::array(r.array, r.offset)
        } else {
            Expr::lit(rng.gen_range(-9..=9))
        }
    } else {
        let op = [BinOp::Add, BinOp::Sub, BinOp::Mul][rng.gen_range(0..3)];
        Expr::bin(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))
    }
}

/// A loop of 2 to 5 statements over arrays `a..d` with offsets in `-2..=2`,
/// so every distance lies in `0..=4`.
pub fn random_loop(seed: u64) -> LoopNest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(2..=5);
    let statements = (1..=k)
        .map(|s| {
            Statement::new(
                format!("S{s}"),
                random_ref(&mut rng),
                random_expr(&mut rng, 2),
            )
        })
        .collect();
    LoopNest::new(1, Bound::Symbol("n".into()), statements)
}

pub fn arb_loop() -> impl Strategy<Value = LoopNest> {
    any::<u64>().prop_map(random_loop)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Role {
    Read,
    Write,
}

/// Enumerates every statement instance of `l` over `lower..upper` in
/// sequential order, records each memory access and classifies every
/// ordered pair of conflicting accesses from distinct instances. Returns
/// `(source, sink, kind, array, distance)` with distances in iterations.
pub fn brute_force_deps(
    l: &LoopNest,
    upper: i64,
) -> BTreeSet<(String, String, DepKind, String, i64)> {
    // (time, statement, iteration, role, array, cell)
    let mut accesses = Vec::new();
    for i in l.lower..upper {
        for s in &l.statements {
            for r in s.reads() {
                accesses.push((
                    s.label.clone(),
                    i,
                    Role::Read,
                    r.array.clone(),
                    i + r.offset,
                ));
            }
            accesses.push((
                s.label.clone(),
                i,
                Role::Write,
                s.lhs.array.clone(),
                i + s.lhs.offset,
            ));
        }
    }
    let mut out = BTreeSet::new();
    for (t, first) in accesses.iter().enumerate() {
        for second in &accesses[t + 1..] {
            if first.3 != second.3 || first.4 != second.4 {
                continue;
            }
            if first.0 == second.0 && first.1 == second.1 {
                continue;
            }
            let kind = match (first.2, second.2) {
                (Role::Write, Role::Read) => DepKind::Flow,
                (Role::Read, Role::Write) => DepKind::Anti,
                (Role::Write, Role::Write) => DepKind::Output,
                (Role::Read, Role::Read) => continue,
            };
            out.insert((
                first.0.clone(),
                second.0.clone(),
                kind,
                first.3.clone(),
                second.1 - first.1,
            ));
        }
    }
    out
}

fn eval_naive(e: &Expr, i: i64, mem: &std::collections::HashMap<(String, i64), i64>) -> i64 {
    match e {
        Expr::Lit { lit } => *lit,
        Expr::Ref { target } => {
            let cell = i + target.offset;
            mem.get(&(target.array.clone(), cell))
                .copied()
                .unwrap_or_else(|| parasync::simverify::default_value(&target.array, cell))
        }
        Expr::Bin { op, lhs, rhs } => {
            let (x, y) = (eval_naive(lhs, i, mem), eval_naive(rhs, i, mem));
            match op {
                BinOp::Add => x.wrapping_add(y),
                BinOp::Sub => x.wrapping_sub(y),
                BinOp::Mul => x.wrapping_mul(y),
            }
        }
    }
}

/// Straight-line interpreter kept apart from the library's executor.
/// Returns only the cells that were written.
pub fn interpret(p: &Program, n: i64) -> std::collections::BTreeMap<(String, i64), i64> {
    let mut mem = std::collections::HashMap::new();
    for l in &p.loops {
        let upper = match &l.upper {
            Bound::Const(c) => *c,
            Bound::Symbol(_) => n,
        };
        for i in l.lower..upper {
            for s in &l.statements {
                let v = eval_naive(&s.rhs, i, &mem);
                mem.insert((s.lhs.array.clone(), i + s.lhs.offset), v);
            }
        }
    }
    mem.into_iter().collect()
}
