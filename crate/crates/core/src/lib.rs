#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod error;
pub mod func;
pub mod lawlib;
pub mod measure;
pub mod pathsim;
pub mod quad;
pub mod rng;
pub mod scenario;
pub mod stoprule;
pub mod verify;

pub use error::{Error, Result};
