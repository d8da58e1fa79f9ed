//! Numerical toolkit for first-order elliptic operators on wedges: indicial
//! roots, trace spaces, Mellin pairings, model-cone kernels, edge symbols and
//! boundary-condition checks.

pub mod checker;
pub mod commands;
pub mod config;
pub mod error;
pub mod fiber;
pub mod indicial;
pub mod cone;
pub mod linalg;
pub mod mellin;
pub mod models;
pub mod operator;
pub mod quadrature;
pub mod report;
pub mod symbols;

pub use error::{Result, WedgeError};
