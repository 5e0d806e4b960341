//! Numerical laboratory for propagation of chaos in mean-field hierarchies.
//!
//! The classical side works on `S` discrete velocity states: [`model`] holds
//! the pair kernel and the hierarchy operators, [`master`] integrates the
//! exact `N`-particle master equation, [`meanfield`] the one-particle
//! kinetic equation, [`correlation`] builds the inclusion-exclusion
//! correlation errors and [`hierarchy`] integrates their closed evolution
//! system. [`bounds`] evaluates the explicit constants and checks the
//! size-of-chaos estimates. [`quantum`] repeats the exercise for qudits and
//! [`montecarlo`] simulates the continuous Kac and soft-sphere jump processes.

pub mod bounds;
pub mod correlation;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod kv;
pub mod master;
pub mod meanfield;
pub mod model;
pub mod montecarlo;
pub mod ode;
pub mod quantum;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{KernelPreset, OneBodyGenerator, PairKernel, StateSpace};
pub use tensor::Tensor;
