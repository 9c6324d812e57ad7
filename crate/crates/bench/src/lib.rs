//! Criterion benchmarks for `gridlab-core`; see `benches/`.
