//! Link-level simulator for the C-V2X sidelink shared channel, used to
//! compare least-squares channel estimation with a convolutional denoiser.
//!
//! The signal chain is: transport block coding ([`transport`]), resource
//! grid mapping with DMRS pilots ([`grid`], [`dmrs`]), SC-FDMA modulation
//! ([`scfdma`]), a time-varying multipath channel ([`channel`]), channel
//! estimation and equalization ([`chanest`]), and the network ([`nn`]).
//! [`harness`] ties them together into datasets, training and metrics.

pub mod chanest;
pub mod channel;
pub mod dmrs;
pub mod error;
pub mod grid;
pub mod harness;
pub mod nn;
pub mod scfdma;
pub mod transport;

pub use error::{Error, Result};
