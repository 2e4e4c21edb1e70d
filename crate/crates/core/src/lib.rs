pub mod adversary;
pub mod agreement;
pub mod bounds;
pub mod error;
pub mod exact;
pub mod functab;
pub mod gf;
pub mod par;
pub mod rm;
pub mod space;
pub mod stats;
pub mod testers;

pub use error::{Error, Result};
