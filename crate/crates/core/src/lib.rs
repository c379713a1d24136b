//! Simulator and verification suite for blind quantum computation with
//! quantum decoys.
//!
//! Alice hides her true input among superpositions of known input/output
//! pairs and asks Bob to run `f` on all of them. Any attempt by Bob to learn
//! the input disturbs the decoys, which Alice detects. This crate simulates
//! both the interactive and the one-shot variant of the protocol against
//! pluggable adversaries, evaluates the information/disturbance and detection
//! bounds in closed form, and checks numerically that no attack beats them.

pub mod attacks;
pub mod bounds;
pub mod cli;
pub mod decoys;
pub mod error;
pub mod protocol;
pub mod qcore;
pub mod rng;
pub mod rvf;

pub use error::{Error, Result};
