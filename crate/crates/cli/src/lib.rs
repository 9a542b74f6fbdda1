//! Command-line front end for `smith-sched`: report types, the benchmark
//! harness and the randomized checker for the pair transformations.

pub mod bench;
pub mod report;
pub mod verify;

pub use bench::{analyze, load_suite, parse_suite, run_bench, BenchError, BenchOptions, BenchReport, SuiteInstance};
pub use report::{Exit, Failure, Value};
pub use verify::{verify, VerifyReport};
