//! Criterion benchmarks for the `contextval` kernels; see `benches/`.
