//! Checks shared by the core integration tests and the acceptance runner.
//!
//! Every check returns `Ok(detail)` or `Err(reason)` so callers can either
//! assert on it or report it.

#![allow(dead_code)]

pub mod laws;
pub mod scenarios;
pub mod templates;

use std::path::PathBuf;

pub type Check = Result<String, String>;

/// Workspace root; both crates live two levels below it.
pub fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixtures(name: &str) -> PathBuf {
    workspace().join("fixtures").join(name)
}

/// `Err(what)` unless `cond` holds.
pub fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}
