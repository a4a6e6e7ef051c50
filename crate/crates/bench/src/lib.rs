//! Criterion benchmarks for the rate lab; see `benches/lab.rs`.
