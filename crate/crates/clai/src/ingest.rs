//! Reading corpora from disk.

use std::path::{Path, PathBuf};

use clai_core::retrieval::{parse_man_page, parse_qa, Corpus, CorpusError, QaReport};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("no readable man pages in {0}")]
    NoPages(PathBuf),
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
}

/// One document per file; the file stem is the command name. Unreadable
/// files are skipped with a warning. Files are read in name order.
pub fn ingest_man_pages(dir: &Path) -> Result<Corpus, IngestError> {
    let entries = std::fs::read_dir(dir).map_err(|source| IngestError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut docs = Vec::new();
    for path in paths {
        let Some(command) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        match std::fs::read_to_string(&path) {
            Ok(text) if !text.trim().is_empty() => docs.push(parse_man_page(command, &text)),
            Ok(_) => log::warn!("skipping empty man page {}", path.display()),
            Err(e) => log::warn!("skipping unreadable man page {}: {e}", path.display()),
        }
    }
    if docs.is_empty() {
        return Err(IngestError::NoPages(dir.to_owned()));
    }
    Corpus::new(docs).map_err(|source| IngestError::Corpus {
        path: dir.to_owned(),
        source,
    })
}

pub fn ingest_qa(path: &Path) -> Result<(Corpus, QaReport), IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    let (corpus, report) = parse_qa(&text).map_err(|source| IngestError::Corpus {
        path: path.to_owned(),
        source,
    })?;
    if report.malformed > 0 {
        log::warn!(
            "{}: skipped {} malformed lines",
            path.display(),
            report.malformed
        );
    }
    if report.duplicates > 0 {
        log::warn!(
            "{}: {} duplicate ids, later lines kept",
            path.display(),
            report.duplicates
        );
    }
    Ok((corpus, report))
}
