//! Roto-scale-translation equivariant convolutional networks with steerable
//! filter expansions, together with numerical checks of their equivariance
//! and deformation stability.

pub mod analysis;
pub mod basis;
pub mod container;
pub mod data;
pub mod deform;
pub mod error;
pub mod group;
pub mod harness;
pub mod net;

pub use error::{Error, Result};
