//! Criterion benchmarks for the tactile pipeline live in `benches/`; run
//! them with `cargo bench -p tactile-bench`.
