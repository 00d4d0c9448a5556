//! Criterion benchmarks for sqmean live in `benches/`.
