//! First-principles calculator for two-species spin-1/2 models encoded in
//! circular and elliptical Rydberg states.
//!
//! The pipeline runs bottom-up: single-atom level structure in static fields
//! (radial + angular matrix elements, per-m diagonalization), dipole-dipole
//! pair Hamiltonians on a truncated product basis, reduction to an effective
//! 4x4 spin Hamiltonian (perturbative or exact), extraction of spin-model
//! coefficients, resonance tuning of the magnetic field, many-body assembly
//! on small lattices, and exact time evolution.

pub mod angular;
pub mod atomic;
pub mod constants;
pub mod error;
pub mod linalg;
pub mod config;
pub mod dynamics;
pub mod effective;
pub mod model;
pub mod pair;
pub mod scan;
pub mod radial;
pub mod species;
pub mod tuner;

pub use error::{Result, RydError};
