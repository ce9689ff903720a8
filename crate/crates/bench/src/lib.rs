//! Criterion benchmarks for the vulnlex pipeline live in `benches/`.
