//! Criterion benchmarks for the `ladderlab-core` kernels; see `benches/kernels.rs`.
