//! Offline retrieval over man pages and Q&A posts.

pub mod corpus;
pub mod tfidf;
pub mod tokenize;

pub use corpus::{
    man_description, man_section, parse_man_page, parse_qa, Corpus, CorpusError, Document, QaReport,
};
pub use tfidf::{build_tfidf, cosine_rank, TfIdfModel};
pub use tokenize::{tokenize, STOPWORDS};
