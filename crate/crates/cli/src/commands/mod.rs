//! Subcommand implementations.

pub mod build_prefs;
pub mod convert;
pub mod eval;
pub mod grad_check;
pub mod report;
pub mod train;
pub mod validate;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use tutor_align_core::backends::Backend;
use tutor_align_core::corpus::{load_corpus, Corpus, Split};

use crate::config::{effective_cache_dir, RunConfig};
use crate::Globals;

/// Load a corpus and resolve relative image references against the corpus
/// file's directory, so backends can read image bytes from anywhere.
pub(crate) fn load_corpus_resolved(path: &Path, split: Split) -> Result<Corpus> {
    let mut corpus =
        load_corpus(path, split).with_context(|| format!("loading corpus {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for sample in &mut corpus.samples {
        if let Some(image_ref) = &sample.image_ref {
            let as_path = Path::new(image_ref);
            if as_path.is_relative() {
                sample.image_ref = Some(base.join(as_path).display().to_string());
            }
        }
    }
    Ok(corpus)
}

pub(crate) fn build_backend(
    globals: &Globals,
    config: &RunConfig,
    id: &str,
) -> Result<Backend> {
    let mut backend_config = config.backend(id)?.clone();
    if let Some(p) = globals.parallelism {
        backend_config.parallelism = p;
    }
    let cache_dir = effective_cache_dir(&globals.cache_dir, Some(config));
    Backend::new(backend_config, cache_dir.as_deref())
        .with_context(|| format!("constructing backend {id}"))
}

pub(crate) fn output_dir(globals: &Globals, config: Option<&RunConfig>) -> PathBuf {
    globals
        .out
        .clone()
        .or_else(|| config.map(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

pub(crate) fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}
