//! HTTP API and command-line front end for the `metablend` pipeline.
//!
//! The router in [`api`] and the commands in [`cli`] both drive a
//! [`metablend::studio::Studio`] built by [`providers::build_engine`] from a
//! resolved [`config::Config`].

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod providers;

pub use error::ApiError;
