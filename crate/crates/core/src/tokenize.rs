//! Language-aware tokenization shared by scoring, diagnostics and shuffling.
//!
//! Two modes exist. `Whitespace` splits on Unicode whitespace. `PerCharacter`
//! yields extended grapheme clusters and drops the whitespace ones, which is
//! the usual choice for scripts written without word separators (Chinese,
//! Japanese, Thai).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::error::Error;
use crate::lang::Lang;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerMode {
    Whitespace,
    PerCharacter,
}

impl FromStr for TokenizerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ws" | "whitespace" | "space" => Ok(TokenizerMode::Whitespace),
            "char" | "chars" | "per_character" | "per-character" | "grapheme" => {
                Ok(TokenizerMode::PerCharacter)
            }
            other => Err(Error::InvalidValue(format!(
                "unknown tokenizer mode `{other}`"
            ))),
        }
    }
}

impl fmt::Display for TokenizerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenizerMode::Whitespace => "whitespace",
            TokenizerMode::PerCharacter => "per_character",
        })
    }
}

/// Per-language tokenizer choice, keyed by primary language subtag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    modes: BTreeMap<String, TokenizerMode>,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        let modes = ["zh", "th", "ja"]
            .into_iter()
            .map(|l| (l.to_string(), TokenizerMode::PerCharacter))
            .collect();
        TokenizerConfig { modes }
    }
}

impl TokenizerConfig {
    /// Whitespace for every language.
    pub fn whitespace_only() -> Self {
        TokenizerConfig {
            modes: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, lang: &Lang, mode: TokenizerMode) -> &mut Self {
        self.modes.insert(lang.primary(), mode);
        self
    }

    pub fn mode(&self, lang: &Lang) -> TokenizerMode {
        self.modes
            .get(&lang.primary())
            .copied()
            .unwrap_or(TokenizerMode::Whitespace)
    }

    /// Applies overrides written as `zh=char,th=char,de=ws` on top of the
    /// defaults.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self, Error> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (lang, mode) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidValue(format!("expected lang=mode, got `{item}`")))?;
            self.set(&Lang::new(lang), mode.parse()?);
        }
        Ok(self)
    }

    /// Canonical `lang=mode` listing, used in provenance records.
    pub fn describe(&self) -> String {
        self.modes
            .iter()
            .map(|(l, m)| format!("{l}={m}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// A token borrowed from its source text with its byte range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

pub fn tokenize_spans(text: &str, mode: TokenizerMode) -> Vec<Token<'_>> {
    match mode {
        TokenizerMode::Whitespace => whitespace_spans(text),
        TokenizerMode::PerCharacter => text
            .grapheme_indices(true)
            .filter(|(_, g)| !g.chars().all(char::is_whitespace))
            .map(|(start, g)| Token {
                text: g,
                start,
                end: start + g.len(),
            })
            .collect(),
    }
}

pub fn tokenize_with(text: &str, mode: TokenizerMode) -> Vec<String> {
    tokenize_spans(text, mode)
        .into_iter()
        .map(|t| t.text.to_string())
        .collect()
}

/// Tokenizes `text` with the mode configured for `lang`.
pub fn tokenize(text: &str, lang: &Lang, config: &TokenizerConfig) -> Vec<String> {
    tokenize_with(text, config.mode(lang))
}

fn whitespace_spans(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    text: &text[s..i],
                    start: s,
                    end: i,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &text[s..],
            start: s,
            end: text.len(),
        });
    }
    out
}
