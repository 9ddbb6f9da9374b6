//! Criterion benchmarks for the varfit estimators live in `benches/`.
