//! Truncated Fock-space simulation of three-mode parametric down-conversion
//! and moment-based multipartite entanglement witnesses.

pub mod config;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod fock;
pub mod model;
pub mod output;
pub mod selftest;
pub mod witness;

pub use error::{Error, Result};
