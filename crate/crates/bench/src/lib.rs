//! Criterion benchmarks for the evolutionary engine; see `benches/`.
