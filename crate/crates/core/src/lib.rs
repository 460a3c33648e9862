pub mod cli;
pub mod dataset;
pub mod encode;
pub mod error;
pub mod eval;
pub mod forest;
pub mod layout;
pub mod pipeline;
pub mod pixelclf;
pub mod pngio;
pub mod record;
pub mod schema;
pub mod seeds;

pub use error::{Error, Result};
