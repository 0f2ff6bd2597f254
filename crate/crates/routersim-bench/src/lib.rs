//! Benchmark-only crate; the measurements live in `benches/simulator.rs`.
//!
//! Run with `cargo bench -p routersim-bench`.
