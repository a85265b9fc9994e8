//! Quantum wavepacket propagation on low-rank tensor trains.
//!
//! A d-dimensional wavefunction sampled on a tensor-product grid is stored as
//! a discrete tensor train (a chain of complex 3-way cores), or, in the
//! continuous variant, as a coefficient tensor train over per-dimension
//! orthonormal Legendre bases. Time evolution under a separable-plus-coupling
//! Hamiltonian is carried out with a Chebyshev expansion of the propagator
//! (Bessel-weighted polynomial series of the rescaled Hamiltonian), with a
//! split-operator Fourier method and dense full-grid propagators available as
//! cross-checks for small dimension counts.

extern crate openblas_src;

pub mod config;
pub mod error;
pub mod fft;
pub mod function_train;
pub mod hamiltonian;
pub mod models;
pub mod propagators;
pub mod runner;
pub mod tensor_train;

pub use error::TtError;

/// Complex double-precision scalar used throughout.
pub type C64 = num_complex::Complex64;
