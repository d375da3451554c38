//! Character-level edit distance.

use alloc::vec::Vec;

/// Levenshtein distance over Unicode scalar values (insert, delete and
/// substitute each cost 1).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Similarity between a suggestion and what the user actually ran:
/// `1 - levenshtein(a, b) / max(|a|, |b|)`, lengths counted in characters.
/// Two empty strings are identical.
pub fn indirect_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;
    use proptest::prelude::*;

    /// Exhaustive recursive definition, exponential but obviously correct.
    fn oracle(a: &[char], b: &[char]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = oracle(ra, rb) + usize::from(x != y);
                sub.min(oracle(ra, b) + 1).min(oracle(a, rb) + 1)
            }
        }
    }

    #[test]
    fn known_distances() {
        assert_eq!(levenshtein("gti", "git"), 2);
        assert_eq!(levenshtein("sl", "ls"), 2);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("ls", "ls"), 0);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(indirect_similarity("git status", "git status"), 1.0);
        assert!((indirect_similarity("gti status", "git status") - 0.8).abs() < 1e-12);
        // distance("git status", "ls") = 9 over max length 10
        assert_eq!(levenshtein("git status", "ls"), 9);
        assert!((indirect_similarity("git status", "ls") - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_recursive_oracle(a in "[a-d]{0,6}", b in "[a-d]{0,6}") {
            let ca: alloc::vec::Vec<char> = a.chars().collect();
            let cb: alloc::vec::Vec<char> = b.chars().collect();
            prop_assert_eq!(levenshtein(&a, &b), oracle(&ca, &cb));
        }

        #[test]
        fn similarity_is_symmetric_and_bounded(a in ".{0,12}", b in ".{0,12}") {
            let s = indirect_similarity(&a, &b);
            prop_assert_eq!(s, indirect_similarity(&b, &a));
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn identical_strings_are_fully_similar(a in ".{1,12}") {
            let copy = String::from(a.as_str());
            prop_assert_eq!(indirect_similarity(&a, &copy), 1.0);
        }
    }
}
