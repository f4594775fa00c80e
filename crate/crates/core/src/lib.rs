pub mod calibration;
pub mod clifford;
pub mod error;
mod fit;
pub mod modelsel;
pub mod protocols;
pub mod qchannel;
pub mod transmon;

pub use error::{Error, Result};
