//! Criterion benchmarks for the lortorus solvers; see `benches/solvers.rs`.
