//! Command-line runner and HTTP session service for `agent-causal`.

pub mod commands;
pub mod error;
pub mod service;
pub mod system;

pub use error::{ApiError, CliError};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
mod service_guide {}
