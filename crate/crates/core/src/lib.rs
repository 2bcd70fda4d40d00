//! Simulation toolkit for linear optics with adaptive (measurement-dependent)
//! interferometers.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`]: occupation-number states and multi-index enumeration,
//! * [`permanent`]: complex matrices, exact matrix permanents and unbiased
//!   permanent estimators,
//! * [`interferometer`]: validated unitaries, variational meshes and
//!   adaptive circuits keyed by intermediate measurement outcomes,
//! * [`strong_sim`]: exact and estimated output probabilities, post-selected
//!   output states and their inner products,
//! * [`sampler`]: shot-based emulation: outcome sampling, frequency
//!   estimates and the swap-style overlap estimation subroutine,
//! * [`qml`]: quantum-kernel Gram matrices, an SMO support-vector-machine
//!   trainer and a variational classifier trained directly on the device.
//!
//! All randomised routines take explicit seeds and are deterministic for a
//! fixed seed, including under `rayon` parallelism (parallel loops collect
//! into index order before any floating-point reduction).

pub mod error;
pub mod fock;
pub mod interferometer;
pub mod permanent;
pub mod qml;
pub mod sampler;
pub mod strong_sim;
mod util;

pub use error::{Error, Result};
pub use fock::FockState;
pub use interferometer::{AdaptiveInterferometer, Interferometer, VariationalInterferometer};
pub use permanent::{ComplexMatrix, PermanentEstimate};
