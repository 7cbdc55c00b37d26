//! Random walks in i.i.d. random environment on the integers.
//!
//! * [`env`]: environment laws, κ, sampled environments and potentials;
//! * [`valleys`]: valley decomposition of a potential and environment events;
//! * [`exact`]: exact computations for finite birth–death chains;
//! * [`walk`]: trajectory simulation, embedded walk and hitting-time decomposition;
//! * [`estimate`]: Monte Carlo probabilities, exponent fits and reference exponents.

pub mod env;
pub mod exact;
pub mod valleys;
pub mod walk;
pub mod estimate;
pub mod num;
pub mod rng;
