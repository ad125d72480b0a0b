use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;

const BUILTIN: &[(&str, &str)] = &[
    ("de", include_str!("../../data/stopwords/de.txt")),
    ("en", include_str!("../../data/stopwords/en.txt")),
    ("fi", include_str!("../../data/stopwords/fi.txt")),
    ("fr", include_str!("../../data/stopwords/fr.txt")),
    ("sv", include_str!("../../data/stopwords/sv.txt")),
];

/// Per-language stop-word lists. Lookups are case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct StopWords {
    lists: HashMap<String, HashSet<String>>,
}

impl StopWords {
    pub fn empty() -> Self {
        Self::default()
    }

    /// A store knowing `language` but with no words in them.
    pub fn empty_with(language: &str) -> Self {
        let mut sw = Self::default();
        sw.lists.insert(language.to_string(), HashSet::new());
        sw
    }

    /// The shipped lists for de, en, fi, fr and sv.
    pub fn builtin() -> Self {
        let mut sw = Self::default();
        for (lang, text) in BUILTIN {
            sw.insert_list(lang, text);
        }
        sw
    }

    /// Adds (or extends) a language from newline-separated words.
    pub fn insert_list(&mut self, language: &str, text: &str) {
        let set = self.lists.entry(language.to_string()).or_default();
        set.extend(
            text.lines()
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .map(str::to_lowercase),
        );
    }

    pub fn has_language(&self, language: &str) -> bool {
        self.lists.contains_key(language)
    }

    pub fn contains(&self, language: &str, word: &str) -> bool {
        self.lists
            .get(language)
            .is_some_and(|s| s.contains(&word.to_lowercase()))
    }
}

/// True for tokens made only of Unicode punctuation.
pub fn is_punctuation(token: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\p{P}+$").expect("static regex"))
        .is_match(token)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lists() {
        let sw = StopWords::builtin();
        assert!(sw.contains("de", "den"));
        assert!(sw.contains("de", "Den"));
        assert!(sw.contains("fr", "été"));
        assert!(sw.contains("en", "the"));
        assert!(!sw.contains("en", "berlin"));
        assert!(!sw.has_language("la"));
    }

    #[test]
    fn punctuation() {
        assert!(is_punctuation(","));
        assert!(is_punctuation("«"));
        assert!(is_punctuation("..."));
        assert!(is_punctuation("—"));
        assert!(!is_punctuation("1886"));
        assert!(!is_punctuation("H."));
    }
}
