//! Information reconciliation for continuous-variable QKD.
//!
//! The pipeline maps correlated Gaussian measurements to a binary problem with
//! multidimensional reconciliation ([`mdr`]), corrects Alice's view of Bob's
//! raw key with a rate-adaptive LDPC code decoded from Bob's syndrome
//! ([`code`], [`decoder`]) and confirms agreement with a CRC-32
//! ([`integrity`]). [`protocol`] ties the steps together and runs Monte-Carlo
//! campaigns; [`cli`] is the command-line front end.

pub mod algebra;
pub mod campaign;
pub mod channel;
pub mod cli;
pub mod code;
pub mod decoder;
pub mod error;
pub mod integrity;
pub mod mdr;
pub mod protocol;

pub use error::{Error, Result};
