//! Criterion benchmarks for `tsrev`; see `benches/`.
