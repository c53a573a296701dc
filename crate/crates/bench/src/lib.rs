//! Criterion benchmarks for the STFT engine, norm scoring and sweeps; see `benches/`.
