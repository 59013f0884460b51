//! Passive vehicle classification from the received signal strength of a
//! small array of roadside radio links.
//!
//! The pipeline runs from fleet sampling ([`scenario`]) through RSSI trace
//! synthesis ([`channel`]) and attenuation-event features ([`features`]) to
//! car/truck classifiers ([`learn`]) and an online gateway ([`gateway`]).

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod features;
pub mod gateway;
pub mod io;
pub mod learn;
pub mod par;
pub mod scenario;

pub use error::{Error, Result};
pub use par::Exec;
