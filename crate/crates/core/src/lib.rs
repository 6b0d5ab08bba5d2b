//! Exact-diagonalization simulator for η pairing in a laser-driven
//! half-filled Hubbard ring, with quantum Lyapunov and asymptotic control.
//!
//! The Hamiltonian is `H(Φ) = -t_h Σ (e^{iΦ} c†_{i,σ} c_{i+1,σ} + h.c.) + U Σ n_{i↑} n_{i↓}`
//! on a periodic chain at fixed particle numbers. States are propagated
//! with Φ held constant over each step, and feedback laws pick Φ from
//! the expectation of the drift operator `Q`, which satisfies
//! `d<η²>/dt = t_h sin(Φ) <Q>`.

pub mod basis;
pub mod analysis;
pub mod cache;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod evolution;
pub mod io;
pub mod lanczos;
pub mod linalg;
pub mod operators;
pub mod propagator;
pub mod pulses;
pub mod scan;
pub mod sparse;
pub mod system;

pub use error::{Error, Result};
