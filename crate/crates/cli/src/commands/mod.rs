pub mod eval;
pub mod explain;
pub mod ingest;
pub mod proximity;
pub mod robustness;
pub mod split;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use posasc::corpus::{
    load_embeddings, read_dataset, vocabulary, Dataset, DatasetMeta, Domain, EmbeddingTable, SourceFormat, Split,
};

use crate::error::CliError;
use crate::manifest::{digest, InputDigest};
use crate::settings::Hyper;

/// Writes `bytes`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::write(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::write(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::write(path, e))
}

/// `<path>.manifest.json`, for commands whose output is a single file.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default()
}

pub fn infer_format(path: &Path, flag: Option<SourceFormat>) -> Result<SourceFormat, CliError> {
    if let Some(f) = flag {
        return Ok(f);
    }
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("xml") => Ok(SourceFormat::SemEval),
        Some("json") => Ok(SourceFormat::Arts),
        Some("jsonl") => Ok(SourceFormat::Jsonl),
        _ => Err(CliError::Usage(format!(
            "cannot tell the format of {}; pass --format",
            path.display()
        ))),
    }
}

pub fn infer_domain(path: &Path, flag: Option<Domain>) -> Result<Domain, CliError> {
    if let Some(d) = flag {
        return Ok(d);
    }
    let name = file_name(path);
    match (name.contains("lap"), name.contains("rest")) {
        (true, false) => Ok(Domain::Laptop),
        (false, true) => Ok(Domain::Restaurant),
        _ => Err(CliError::Usage(format!(
            "cannot tell the domain of {}; pass --domain",
            path.display()
        ))),
    }
}

pub fn infer_split(path: &Path, flag: Option<Split>) -> Split {
    flag.unwrap_or_else(|| if file_name(path).contains("train") { Split::Train } else { Split::Test })
}

/// Reads a dataset and hashes the file it came from.
pub fn load_dataset(
    role: &str,
    path: &Path,
    format: SourceFormat,
    meta: DatasetMeta,
) -> Result<(Dataset, InputDigest), CliError> {
    let digest = digest(role, path)?;
    let ingested = read_dataset(path, format, meta).map_err(|e| CliError::read(path, e))?;
    if !ingested.warnings.is_empty() {
        log::warn!("{}: {} instance(s) skipped or adjusted", path.display(), ingested.warnings.len());
        for w in &ingested.warnings {
            log::debug!("{}: {w}", path.display());
        }
    }
    if ingested.dataset.is_empty() {
        return Err(CliError::Data(format!("{}: no instances", path.display())));
    }
    Ok((ingested.dataset, digest))
}

/// Word vectors for every surface in `datasets`: from the configured file, or
/// seeded random vectors when none is given.
pub fn embedding_table(hyper: &Hyper, datasets: &[&Dataset]) -> Result<(EmbeddingTable, Option<InputDigest>), CliError> {
    let vocab = vocabulary(datasets.iter().copied());
    let dim = hyper.train.model.embed_dim;
    match &hyper.embeddings {
        Some(path) => {
            let d = digest("embeddings", path)?;
            let (table, cov) = load_embeddings(path, &vocab, dim, 0).map_err(|e| CliError::read(path, e))?;
            log::info!(
                "{}: {} of {} words found, {} lines skipped",
                path.display(),
                cov.found,
                vocab.len(),
                cov.skipped_lines
            );
            Ok((table, Some(d)))
        }
        None => {
            log::warn!("no --embeddings file; using random {dim}-d word vectors");
            Ok((EmbeddingTable::random(&vocab, dim, 0)?, None))
        }
    }
}

/// Caps the worker pool. Only the first call in a process has an effect.
pub fn set_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
}
