//! Benchmark-only crate; see `benches/tomography.rs`.
