pub mod cli;
pub mod config;
pub mod error;
pub mod fracops;
pub mod laplace_oracle;
pub mod mlf;
pub mod quad;
pub mod scalar_cauchy;
pub mod special;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
