pub mod config;
pub mod error;
pub mod experiment;
pub mod forward;
pub mod grid;
pub mod io;
pub mod presets;
pub mod reconstruction;
pub mod recurrence;
pub mod scenario;
pub mod streamline;
pub mod transport;

pub use error::{Error, Result};
