//! Benchmarks for `fspde-core` live in `benches/`.
