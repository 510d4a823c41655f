pub mod battery;
pub mod contour;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod mc;
pub mod model;
pub mod numeric;
pub mod report;
pub mod variants;

pub use error::{Error, Result};
