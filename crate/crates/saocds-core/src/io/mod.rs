//! File formats and input generators: JSON model files, packed binary spike
//! traces, the sigma-delta front-end encoder, and random spike sources.

pub mod encode;
pub mod gen;
pub mod model;
pub mod trace;
