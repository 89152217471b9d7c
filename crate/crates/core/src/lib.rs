//! Symbolic calculus of classical and log-polyhomogeneous pseudodifferential operators on the
//! circle, with residues, canonical and weighted traces, and determinant anomalies.

#![forbid(unsafe_code)]

pub mod cutoff;
pub mod grid;
pub mod linalg;
pub mod quad;
pub mod special;
pub mod symbol;
pub mod star;
pub mod series;
pub mod holo;
pub mod operators;
pub mod trace;
pub mod anomaly;
