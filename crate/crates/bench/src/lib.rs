//! Criterion benchmarks for gennet-core live under `benches/`.
