//! Benchmarks for the event loops live in `benches/`.
