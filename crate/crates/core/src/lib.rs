//! Wavelet-based dynamic mode decomposition built on the continuous wavelet
//! transform (cWDMD).
//!
//! The pipeline: simulate output trajectories ([`dynsys`]), transform them with
//! a modulated-Gaussian or Morlet CWT ([`wavelet`]), assemble realified
//! observable matrices ([`observables`]), solve the EDMD least-squares problem
//! and extract Koopman spectral data ([`edmd`]), and evaluate the closed-form
//! Morlet reconstructions of the semigroup and resolvent ([`resolvent`]).

pub mod dynsys;
pub mod edmd;
pub mod error;
pub mod export;
pub mod observables;
pub mod resolvent;
pub mod wavelet;

pub use error::{Error, Result};
pub use num_complex::Complex64;
