//! Frequency-domain S-parameter network simulation built on a
//! signal-flow-graph solver, for analysing and aligning load-modulated
//! balanced amplifiers.

pub mod components;
pub mod fixture;
pub mod lmba;
pub mod netcore;
pub mod sfg;
pub mod touchstone;
