pub mod api;
pub mod cli;
pub mod commands;
pub mod datadir;
pub mod error;
pub mod feedback;
pub mod server;

pub use error::{Error, Result};
