pub mod bang;
pub mod error;
pub mod format;
pub mod geometry;
pub mod kernel;
pub mod matrix;
pub mod oracle;
pub mod solver;
pub mod symmetrize;

pub use error::{Error, Result};
pub use matrix::Matrix;
