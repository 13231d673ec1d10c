pub mod bumps;
pub mod config;
pub mod error;
pub mod ext;
pub mod funcrep;
pub mod heisenberg;
pub mod krein;
pub mod neutral;
pub mod profile;
pub mod quadrature;
pub mod regularize;
pub mod report;
pub mod scenario;
pub mod sufficiency;
pub mod testfamily;

pub use error::{Error, Result};
pub use ext::Ext;
pub use funcrep::FunctionRep;
pub use quadrature::QuadratureSpec;
