//! Littlewood-Paley analysis on the periodic torus, bounded approximation of
//! critical Triebel-Lizorkin functions, and a bounded solver for Hodge
//! systems `dψ = dφ`.

pub mod approx;
pub mod control;
pub mod error;
pub mod grid;
pub mod hodge;
pub mod input;
pub mod io;
pub mod littlewood_paley;
pub mod norms;
pub mod probe;
pub mod sum;

pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec, SpectralField};
