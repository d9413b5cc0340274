//! File formats, plant configuration and the command-line pipeline around
//! [`hfbs_core`].

pub mod clock;
pub mod config;
pub mod csvio;
pub mod error;
pub mod pipeline;

pub use clock::SystemClock;
pub use error::{AppError, AppResult};
