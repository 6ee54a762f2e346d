//! A small auto-parallelizing compiler for single-level loops.
//!
//! Programs are written in a tiny loop language ([`dsl`]). The crate finds
//! the data dependences between statements ([`depend`]), distributes loops
//! into parallel and sequential pieces ([`restructure`]), synchronizes
//! loop-carried dependences with send/wait pairs ([`syncgen`]), removes
//! redundant pairs ([`syncelim`]) and checks the result by simulating
//! seeded parallel schedules against sequential execution ([`simverify`]).
//!
//! ```
//! use parasync::{depend, dsl, syncgen};
//!
//! let program = dsl::parse("for (i=1; i<n; i++) { S1: a[i] = a[i-1] + 1; }").unwrap();
//! let graph = depend::analyze(&program.loops[0]);
//! assert_eq!(graph.edges.len(), 1);
//!
//! let synced = syncgen::synchronize(&program.loops[0]).unwrap();
//! assert!(dsl::print_loop(&synced.loop_nest).contains("wait(0, i-1, a);"));
//! ```
//!
//! Runnable walkthroughs live in `examples/`; the `parasync` binary wires
//! the stages together (see [`cli`]).

pub mod cli;
pub mod depend;
pub mod dsl;
pub mod restructure;
pub mod simverify;
pub mod syncelim;
pub mod syncgen;
