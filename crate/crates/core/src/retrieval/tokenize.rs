use alloc::string::String;
use alloc::vec::Vec;

/// Words dropped before indexing or querying.
pub const STOPWORDS: [&str; 50] = [
    "a", "an", "the", "how", "do", "i", "to", "in", "of", "for", "is", "it", "on", "with", "and",
    "or", "what", "my", "me", "can", "you", "from", "by", "this", "that", "are", "as", "at", "be",
    "but", "does", "did", "if", "into", "its", "no", "not", "so", "than", "then", "there", "these",
    "they", "was", "we", "were", "which", "will", "your", "am",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Lowercases, splits on every non-alphanumeric character, and drops
/// one-character tokens and stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_lowercase)
        .filter(|t| !is_stopword(t))
        .collect()
}
