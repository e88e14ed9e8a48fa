pub mod conditions;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod ising;
pub mod linalg;
pub mod markov;
pub mod mps;
pub mod numerics;
pub mod spin;

pub use error::{Error, Result};
pub use exec::Execution;
