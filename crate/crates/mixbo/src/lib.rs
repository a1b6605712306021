//! Campaign store, file formats, command line and HTTP service on top of
//! `mixbo-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod oracle_config;
pub mod runner;
pub mod service;
pub mod store;

pub use error::{AppError, ExitClass, Result};
pub use mixbo_core as core;
pub use store::Store;
