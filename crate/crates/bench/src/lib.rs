//! Criterion benchmarks for the hibscreen kernels live under `benches/`.
