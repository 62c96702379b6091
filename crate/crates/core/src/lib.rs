pub mod adapt;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod fdgrid;
pub mod feschemes;
pub mod input;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod oracle;
pub mod pdsolver;
pub mod postproc;
pub mod quadrature;

pub use error::{Error, Result};
