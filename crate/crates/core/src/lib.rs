//! Fractional processes as finite-dimensional affine Markov systems.

pub mod affine;
pub mod error;
pub mod fbm;
pub mod field;
pub mod io;
pub mod mc;
pub mod measure;
pub mod numerics;
pub mod rates;
pub mod rng;
pub mod stein;

pub use error::{Error, Result};
