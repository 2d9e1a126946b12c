//! Simulation engine for N interacting bosons occupying the three
//! quasi-momentum modes k = -1, 0, +1 of a rotating three-site ring lattice.
//!
//! The engine builds the fixed-N many-body Hamiltonian in the quasi-momentum
//! Fock basis, diagonalizes it (dense or block Davidson), propagates the
//! time-dependent Schrodinger equation with a norm-preserving exponential
//! midpoint integrator, and implements the measurement protocols built on
//! top: cat-state detection by modulation spectroscopy, rotation metrology
//! from the branch phase, and the two-time gap/splitting protocol.
//!
//! Units: hbar = 1, energies in units of the symmetric tunneling rate J,
//! times in 1/J.

pub mod dynamics;
pub mod effective;
pub mod eigen;
pub mod error;
pub mod fitting;
pub mod fock;
pub mod hamiltonian;
pub mod operator;
pub mod protocols;
pub mod spectra;
pub mod state;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
