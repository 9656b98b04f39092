//! Balanced separators for shallow-minor-free graphs.
//!
//! Given an undirected vertex-weighted graph and parameters `(h, ell,
//! epsilon)`, the algorithms here either produce a balanced 2/3-separator
//! or a verifiable certificate that the graph contains a `K_h` minor of
//! small depth. Three interchangeable engines are provided: a baseline
//! driven by a decremental approximate distance oracle, a clustering-based
//! variant, and a mini-cluster variant for the sparse regime.

pub mod clustering;
pub mod gen;
pub mod minicluster;
pub mod graph;
pub mod oracle;
pub mod separator;
pub mod verify;
