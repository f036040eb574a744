//! Criterion benchmarks for `fdjs-core`; see `benches/`.
