pub mod asymptotics;
pub mod density;
pub mod error;
pub mod functionals;
pub mod gaussian;
pub mod serde_ext;
pub mod transport;
pub mod uncertainty;

pub use error::{Error, Result};
pub use gaussian::{LogValue, QuadratureConfig};
