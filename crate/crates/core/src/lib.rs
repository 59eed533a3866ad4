//! Classical reproduction of a DMET + qubit coupled-cluster pipeline for a
//! hydrogen ring, including trapped-ion circuit compilation, shot sampling,
//! readout correction, McWeeny purification and bootstrap error bars.

pub mod compiler;
pub mod dmet;
pub mod error;
pub mod fermion;
pub mod lbfgs;
pub mod mitigation;
pub mod pauli;
pub mod pipeline;
pub mod qcc;
pub mod reference;
pub mod sim;

pub use error::{Error, Result};
