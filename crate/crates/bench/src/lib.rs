//! Benchmarks for the gradest kernels live in `benches/`.
