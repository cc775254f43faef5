//! Slice-level compute kernels behind the graph operations.

pub(crate) mod conv;
