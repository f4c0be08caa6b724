use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Built-in English stopword list.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few",
    "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "however", "i", "if", "in", "into", "is", "it",
    "its", "itself", "just", "may", "me", "might", "more", "most", "must", "my", "myself", "no",
    "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "ourselves", "out", "over", "own", "s", "same", "she", "should", "so", "some", "such", "t",
    "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these",
    "they", "this", "those", "through", "thus", "to", "too", "under", "until", "up", "upon",
    "us", "using", "very", "via", "was", "we", "were", "what", "when", "where", "whether",
    "which", "while", "who", "whom", "why", "will", "with", "within", "without", "would", "you",
    "your", "yours", "yourself", "yourselves",
];

/// Lowercasing tokenizer: runs of Unicode letters and digits form tokens,
/// everything else separates them. Tokens shorter than `min_len` characters
/// and stopwords are dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    stopwords: BTreeSet<String>,
    min_len: usize,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::with_stopwords(DEFAULT_STOPWORDS.iter().map(|s| s.to_string()))
    }
}

impl Tokenizer {
    pub fn with_stopwords(stopwords: impl IntoIterator<Item = String>) -> Self {
        Tokenizer {
            stopwords: stopwords.into_iter().map(|s| s.to_lowercase()).collect(),
            min_len: 2,
        }
    }

    /// One stopword per line; blank lines and `#` comments ignored.
    pub fn from_stopword_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Tokenizer::with_stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from),
        ))
    }

    pub fn stopwords(&self) -> impl Iterator<Item = &str> {
        self.stopwords.iter().map(String::as_str)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut current = String::new();
        let mut flush = |current: &mut String| {
            if current.chars().count() >= self.min_len && !self.stopwords.contains(current.as_str()) {
                tokens.push(std::mem::take(current));
            } else {
                current.clear();
            }
        };
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                current.extend(ch.to_lowercase());
            } else if !current.is_empty() {
                flush(&mut current);
            }
        }
        if !current.is_empty() {
            flush(&mut current);
        }
        tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_rules() {
        let t = Tokenizer::default();
        assert_eq!(
            t.tokenize("Amyloid function in Alzheimer's disease"),
            vec!["amyloid", "function", "alzheimer", "disease"]
        );
        assert!(t.tokenize("").is_empty());
        assert_eq!(
            t.tokenize("T-lymphocytes T-lymphocytes"),
            vec!["lymphocytes", "lymphocytes"]
        );
    }

    #[test]
    fn unicode_letters_and_digits() {
        let t = Tokenizer::default();
        assert_eq!(t.tokenize("Größe CO2/H2O"), vec!["größe", "co2", "h2o"]);
    }

    #[test]
    fn custom_stopwords() {
        let t = Tokenizer::with_stopwords(vec!["Graphene".to_string()]);
        assert_eq!(t.tokenize("graphene oxide in water"), vec!["oxide", "in", "water"]);
    }
}
