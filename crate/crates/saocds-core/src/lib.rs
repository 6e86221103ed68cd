//! Bit-exact simulator and cost model for a sparsity-aware streaming
//! spiking-neural-network accelerator.
//!
//! Two engine families sit at the centre and must agree to the bit: the
//! streaming engine walks compressed kernels iteration by iteration
//! ([`conv::ConvEngine`], [`fc::FcEngine`]) while the dense sliding-window
//! reference in [`reference`] recomputes every window the textbook way.
//! Both share the fixed-point neuron model in [`lif`], meter their memory
//! traffic in [`counters::CostCounters`], and compose into whole networks in
//! [`network`]. Around that core: kernel compression ([`coo`], [`compress`],
//! [`storage`]), schedule construction and cost modelling ([`schedule`],
//! [`metrics`]), and file formats plus input encoding ([`io`]).

pub mod compress;
pub mod conv;
pub mod coo;
pub mod counters;
pub mod error;
pub mod fc;
pub mod fixed;
pub mod io;
pub mod lif;
pub mod metrics;
pub mod network;
pub mod presets;
pub mod reference;
pub mod schedule;
pub mod spike;
pub mod storage;

pub use counters::CostCounters;
pub use error::Error;
pub use fixed::{Accumulator, FixedPoint16};
pub use spike::SpikeTensor;
