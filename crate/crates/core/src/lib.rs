//! Ideation engine for visual blends.
//!
//! The pipeline starts from a short expression ("global warming"), splits it
//! into concepts, maps each concept to concrete objects and their visible
//! attributes, scores object and attribute pairs by embedding similarity and
//! sentiment, and composes text-to-image prompts that fuse two objects into
//! one. Results are tracked in a [`studio::Session`] and laid out on a 2D
//! canvas by object and attribute similarity.
//!
//! External services (knowledge base, language model, image model,
//! embeddings, sentiment) sit behind traits, each with a live HTTP
//! implementation and a fixture or bundled implementation for offline use.

pub mod blend;
pub mod clock;
pub mod engine;
pub mod expression;
pub mod http;
pub mod knowledge;
pub mod limit;
pub mod mapping;
pub mod oracle;
pub mod scoring;
pub mod studio;

mod error;

pub use error::{Error, ErrorClass};

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes via a temp file and rename so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

// Book chapters are compiled as doc-tests so the snippets stay in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/concepts.md")]
    mod concepts {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/prompts.md")]
    mod prompts {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/offline.md")]
    mod offline {}
}
