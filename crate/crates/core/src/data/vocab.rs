use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Per-language token ↔ id map.
///
/// Layout: the four specials, then one reserved `<2xx>` token per target
/// language of the experiment (the same block in every vocabulary), then
/// regular tokens by descending frequency with ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub language: String,
    tokens: Vec<String>,
    target_languages: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_parts(language: String, target_languages: Vec<String>, regular: Vec<String>) -> Self {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(target_languages.iter().map(|l| target_token_text(l)));
        tokens.extend(regular);
        let mut v = Vocabulary {
            language,
            tokens,
            target_languages,
            index: HashMap::new(),
        };
        v.reindex();
        v
    }

    fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    /// Restores the lookup index after deserialization.
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        let mut v: Vocabulary = serde_json::from_str(text)?;
        v.reindex();
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// First id of the regular (non-reserved) block.
    pub fn first_regular(&self) -> usize {
        SPECIALS.len() + self.target_languages.len()
    }

    pub fn regular_tokens(&self) -> &[String] {
        &self.tokens[self.first_regular()..]
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Maps tokens to ids; unknown tokens become [`UNK`].
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).filter(|i| *i >= self.first_regular()).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|i| self.token(*i).unwrap_or(SPECIALS[UNK]).to_string())
            .collect()
    }

    /// Id of the reserved token asking for output in `language`.
    pub fn target_token(&self, language: &str) -> Option<usize> {
        self.target_languages
            .iter()
            .position(|l| l == language)
            .map(|p| SPECIALS.len() + p)
    }
}

pub fn target_token_text(language: &str) -> String {
    format!("<2{language}>")
}

/// Builds a vocabulary from the tokens of `sentences` occurring at least
/// `min_count` times.
pub fn build_vocab<'a, I, S>(sentences: I, language: &str, min_count: usize, target_languages: &[String]) -> Vocabulary
where
    I: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for t in s {
            *counts.entry(t.as_ref()).or_default() += 1;
        }
    }
    let reserved: Vec<String> = SPECIALS
        .iter()
        .map(|s| s.to_string())
        .chain(target_languages.iter().map(|l| target_token_text(l)))
        .collect();
    let mut regular: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count.max(1) && !reserved.iter().any(|r| r == t))
        .collect();
    regular.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_parts(
        language.to_string(),
        target_languages.to_vec(),
        regular.into_iter().map(|(t, _)| t.to_string()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn min_count_filters() {
        let s = toks("a a b");
        let v = build_vocab([s.as_slice()], "xx", 2, &[]);
        assert!(v.id("a").is_some());
        assert!(v.id("b").is_none());
        assert_eq!(v.encode(&toks("b a")), vec![UNK, 4]);
        let v = build_vocab([s.as_slice()], "xx", 1, &[]);
        assert_eq!(v.regular_tokens(), ["a", "b"]);
    }

    #[test]
    fn ties_are_lexicographic() {
        let s = toks("z y x y z x q");
        let v = build_vocab([s.as_slice()], "xx", 1, &[]);
        assert_eq!(v.regular_tokens(), ["x", "y", "z", "q"]);
    }

    #[test]
    fn reserved_block() {
        let langs = vec!["de".to_string(), "en".to_string()];
        let s = toks("hello");
        let v = build_vocab([s.as_slice()], "en", 1, &langs);
        assert_eq!(v.target_token("de"), Some(4));
        assert_eq!(v.target_token("en"), Some(5));
        assert_eq!(v.first_regular(), 6);
        assert_eq!(v.id("hello"), Some(6));
        assert_eq!(v.decode(&[BOS, 6, EOS]), ["<s>", "hello", "</s>"]);
        // A literal "<2de>" in text is not the reserved id.
        assert_eq!(v.encode(&toks("<2de>")), vec![UNK]);
        let back = Vocabulary::from_json(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back.id("hello"), Some(6));
    }

    #[test]
    fn all_rare_gives_reserved_only() {
        let s = toks("a b c");
        let v = build_vocab([s.as_slice()], "xx", 5, &[]);
        assert_eq!(v.len(), 4);
        assert_eq!(v.encode(&s), vec![UNK; 3]);
    }
}
