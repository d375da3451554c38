//! Persistent bandit state and the TF-IDF model cache.

use std::path::{Path, PathBuf};

use clai_core::orchestration::{BanditError, BanditState, PersistedBandit};
use clai_core::retrieval::{Corpus, CorpusError, TfIdfModel};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn write_atomically(path: &Path, text: &str) -> Result<(), StoreError> {
    let io = |source| StoreError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn save_bandit(path: &Path, state: &BanditState) -> Result<(), StoreError> {
    let text =
        serde_json::to_string_pretty(&state.to_persisted()).expect("bandit state serializes");
    write_atomically(path, &text)
}

/// `Ok(None)` when nothing has been saved yet.
pub fn load_bandit(path: &Path) -> Result<Option<BanditState>, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(source) => {
            return Err(StoreError::Io {
                path: path.to_owned(),
                source,
            })
        }
    };
    let persisted: PersistedBandit =
        serde_json::from_str(&text).map_err(|source| StoreError::Parse {
            path: path.to_owned(),
            source,
        })?;
    Ok(Some(BanditState::from_persisted(persisted)?))
}

/// Hex SHA-256 over the corpus content, used as the cache key.
pub fn corpus_hash(corpus: &Corpus) -> String {
    let mut hasher = Sha256::new();
    for doc in corpus.docs() {
        let line = serde_json::to_string(&(&doc.doc_id, &doc.title, &doc.body))
            .expect("strings serialize");
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Models keyed by corpus hash under one directory.
#[derive(Debug, Clone)]
pub struct ModelCache {
    dir: PathBuf,
}

impl ModelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, corpus: &Corpus) -> PathBuf {
        self.dir.join(format!("{}.json", corpus_hash(corpus)))
    }

    /// Loads the cached model for `corpus`, building and caching it on a
    /// miss. An unreadable cache entry is rebuilt rather than trusted.
    pub fn get_or_build(&self, corpus: &Corpus) -> Result<TfIdfModel, StoreError> {
        let path = self.path_for(corpus);
        if let Ok(text) = std::fs::read_to_string(&path) {
            match serde_json::from_str::<TfIdfModel>(&text) {
                Ok(model) if model.doc_ids().len() == corpus.len() => return Ok(model),
                Ok(_) => log::warn!(
                    "cached model {} does not fit its corpus; rebuilding",
                    path.display()
                ),
                Err(e) => log::warn!(
                    "cached model {} unreadable ({e}); rebuilding",
                    path.display()
                ),
            }
        }
        let model = TfIdfModel::build(corpus)?;
        let text = serde_json::to_string(&model).expect("models serialize");
        if let Err(e) = write_atomically(&path, &text) {
            log::warn!("cannot cache model: {e}");
        }
        Ok(model)
    }
}
