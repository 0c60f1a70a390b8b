//! Benchmarks for bpgrad-core live in `benches/`.
