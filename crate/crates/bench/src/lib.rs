//! Benchmark helpers; see `benches/protocol.rs`.
