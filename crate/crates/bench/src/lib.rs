//! Shared instance builders for the pipeline benchmarks.
