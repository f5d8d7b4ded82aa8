//! Text normalization and tokenization.
//!
//! [`normalize`] applies five rules in a fixed order:
//!
//! 1. URL spans become the URL token. A URL starts with `http://` or
//!    `https://` (ASCII case-insensitive) anywhere, or with `t.co/` at a word
//!    boundary, and runs to the next whitespace.
//! 2. Mentions (`@` followed by letters, decimal digits or `_`) become the
//!    user token.
//! 3. `#` characters are deleted.
//! 4. Every character that is not a Unicode letter (`L*`), decimal digit
//!    (`Nd`) or whitespace becomes a space, except nonspacing marks (`Mn`,
//!    e.g. Arabic diacritics), which are deleted so that a vocalized word
//!    stays one word. Emoji become spaces.
//! 5. Whitespace runs collapse to a single space; the result is trimmed.
//!
//! Replacement tokens are inserted as separate words and are never altered
//! by later rules. Optional lowercasing and Arabic letter-variant folding run
//! between rules 4 and 5 when enabled.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    pub replace_urls: bool,
    pub replace_mentions: bool,
    pub strip_hash_symbol: bool,
    pub strip_non_alphanumeric: bool,
    pub url_token: String,
    pub user_token: String,
    pub lowercase: bool,
    pub fold_arabic_variants: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            replace_urls: true,
            replace_mentions: true,
            strip_hash_symbol: true,
            strip_non_alphanumeric: true,
            url_token: "URL".to_string(),
            user_token: "USER".to_string(),
            lowercase: false,
            fold_arabic_variants: false,
        }
    }
}

impl NormalizationConfig {
    /// Replacement tokens must be non-empty runs of letters and decimal
    /// digits so that normalized output stays inside that alphabet.
    pub fn validate(&self) -> Result<()> {
        for (name, token) in [("url_token", &self.url_token), ("user_token", &self.user_token)] {
            if token.is_empty() || !token.chars().all(is_kept) {
                return Err(Error::Config(format!(
                    "{name} must be a non-empty run of letters and digits, got {token:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Ordered whitespace-free tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i:https?://)\S*|\bt\.co/\S*").unwrap())
}

fn mention_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@[\p{L}\p{Nd}_]+").unwrap())
}

fn letter_or_digit() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[\p{L}\p{Nd}]$").unwrap())
}

fn nonspacing_mark() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\p{Mn}$").unwrap())
}

fn is_nonspacing_mark(c: char) -> bool {
    if c.is_ascii() {
        return false;
    }
    let mut buf = [0u8; 4];
    nonspacing_mark().is_match(c.encode_utf8(&mut buf))
}

fn is_kept(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_alphanumeric();
    }
    let mut buf = [0u8; 4];
    letter_or_digit().is_match(c.encode_utf8(&mut buf))
}

enum Piece<'a> {
    Text(std::borrow::Cow<'a, str>),
    Token(&'a str),
}

fn replace_spans<'a>(pieces: Vec<Piece<'a>>, re: &Regex, token: &'a str) -> Vec<Piece<'a>> {
    let mut out = Vec::with_capacity(pieces.len());
    for piece in pieces {
        let text = match piece {
            Piece::Text(t) => t,
            token_piece => {
                out.push(token_piece);
                continue;
            }
        };
        let mut last = 0;
        for m in re.find_iter(&text) {
            if m.start() > last {
                out.push(Piece::Text(text[last..m.start()].to_string().into()));
            }
            out.push(Piece::Token(token));
            last = m.end();
        }
        if last == 0 {
            out.push(Piece::Text(text));
        } else if last < text.len() {
            out.push(Piece::Text(text[last..].to_string().into()));
        }
    }
    out
}

fn fold_arabic(c: char) -> char {
    match c {
        'أ' | 'إ' | 'آ' | 'ٱ' => 'ا',
        'ة' => 'ه',
        'ى' => 'ي',
        c => c,
    }
}

pub fn normalize(text: &str, config: &NormalizationConfig) -> String {
    let mut pieces = vec![Piece::Text(text.into())];
    if config.replace_urls {
        pieces = replace_spans(pieces, url_pattern(), &config.url_token);
    }
    if config.replace_mentions {
        pieces = replace_spans(pieces, mention_pattern(), &config.user_token);
    }

    let mut joined = String::with_capacity(text.len() + 8);
    for piece in &pieces {
        match piece {
            Piece::Token(t) => {
                joined.push(' ');
                joined.push_str(t);
                joined.push(' ');
            }
            Piece::Text(t) => {
                for c in t.chars() {
                    if c == '#' && config.strip_hash_symbol {
                        continue;
                    }
                    if config.strip_non_alphanumeric && !c.is_whitespace() && !is_kept(c) {
                        if !is_nonspacing_mark(c) {
                            joined.push(' ');
                        }
                        continue;
                    }
                    let c = if config.fold_arabic_variants { fold_arabic(c) } else { c };
                    joined.push(c);
                }
            }
        }
    }

    if config.lowercase {
        // Lowercasing can emit combining marks (e.g. for 'İ'), so rule 4 is
        // re-applied to the lowered words.
        let mut lowered = String::with_capacity(joined.len());
        for word in joined.split_whitespace() {
            lowered.push(' ');
            if word == config.url_token || word == config.user_token {
                lowered.push_str(word);
                continue;
            }
            for c in word.chars().flat_map(char::to_lowercase) {
                if !config.strip_non_alphanumeric || is_kept(c) {
                    lowered.push(c);
                } else if !is_nonspacing_mark(c) {
                    lowered.push(' ');
                }
            }
        }
        joined = lowered;
    }

    let mut out = String::with_capacity(joined.len());
    for word in joined.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits normalized text on whitespace.
pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence {
        tokens: text.split_whitespace().map(str::to_string).collect(),
    }
}

/// `tokenize(normalize(text))`.
pub fn preprocess(text: &str, config: &NormalizationConfig) -> TokenSequence {
    tokenize(&normalize(text, config))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn norm(s: &str) -> String {
        normalize(s, &NormalizationConfig::default())
    }

    #[test]
    fn arabic_example() {
        assert_eq!(norm("تحقق #كورونا http://t.co/ab1 @user1!"), "تحقق كورونا URL USER");
    }

    #[test]
    fn diacritics_do_not_split_words() {
        assert_eq!(norm("مُحَمَّد"), "محمد");
        assert_eq!(norm("cafe\u{301} ok"), "cafe ok");
    }

    #[test]
    fn trivial_cases() {
        assert_eq!(norm(""), "");
        assert_eq!(norm("no-markup plain text"), "no markup plain text");
        assert_eq!(norm("  \t\n "), "");
    }

    #[test]
    fn tokens_are_separate_words() {
        assert_eq!(norm("mail a@b.com now"), "mail a USER com now");
        assert_eq!(norm("see(https://x.y/a#b)"), "see URL");
        assert_eq!(norm("HTTPS://EXAMPLE.COM"), "URL");
        assert_eq!(norm("at.co/abc"), "at co abc");
        assert_eq!(norm("t.co/abc"), "URL");
    }

    #[test]
    fn tokenize_cases() {
        assert_eq!(tokenize("تحقق كورونا URL USER").tokens(), ["تحقق", "كورونا", "URL", "USER"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a  b").tokens(), ["a", "b"]);
    }

    #[test]
    fn disabled_rules() {
        let config = NormalizationConfig {
            replace_urls: false,
            replace_mentions: false,
            strip_hash_symbol: false,
            strip_non_alphanumeric: false,
            ..Default::default()
        };
        assert_eq!(normalize(" #a  @b http://c ", &config), "#a @b http://c");
    }

    #[test]
    fn optional_folding() {
        let config = NormalizationConfig {
            lowercase: true,
            fold_arabic_variants: true,
            ..Default::default()
        };
        assert_eq!(normalize("Hello أحمد مدرسة http://x", &config), "hello احمد مدرسه URL");
        assert_eq!(normalize(&normalize("Hi URL", &config), &config), "hi URL");
        assert_eq!(normalize("İstanbul", &config), "istanbul");
    }

    #[test]
    fn token_validation() {
        assert!(NormalizationConfig::default().validate().is_ok());
        let bad = NormalizationConfig {
            url_token: "<URL>".into(),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let empty = NormalizationConfig {
            user_token: String::new(),
            ..Default::default()
        };
        assert!(empty.validate().is_err());
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC*") {
            let once = norm(&s);
            prop_assert_eq!(norm(&once), once.clone());
        }

        #[test]
        fn output_alphabet(s in "(\\PC|[#@:/. ]|http://|t\\.co/)*") {
            let out = norm(&s);
            prop_assert!(!out.starts_with(' ') && !out.ends_with(' '));
            prop_assert!(!out.contains("  "));
            prop_assert!(out.chars().all(|c| c == ' ' || is_kept(c)));
        }
    }
}
