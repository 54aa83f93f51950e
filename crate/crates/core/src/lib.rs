pub mod audit;
pub mod constants;
pub mod error;
pub mod gaussian;
pub mod manifold;
pub mod pairing;
pub mod quadrature;
pub mod schrodinger;
pub mod special;
pub mod weight;

pub use error::{AuditError, Result};
