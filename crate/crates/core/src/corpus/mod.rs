//! Entity-annotated sentences and the corpora built from them.
//!
//! Two on-disk formats are supported: CoNLL-style BIO2 token/tag files
//! ([`parse_conll`], [`write_conll`]) and line-delimited JSON records
//! carrying a class label ([`parse_labeled`], [`write_labeled`]).

mod conll;
mod labeled;
mod lexicon;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conll::{parse_conll, parse_conll_with_warnings, write_conll, ParseWarning};
pub use labeled::{parse_labeled, write_labeled};
pub use lexicon::{build_category_lexicon, CategoryLexicon};

/// Name of an entity class such as `PER` or `LOC`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityCategory(String);

impl EntityCategory {
    pub const PER: &'static str = "PER";
    pub const LOC: &'static str = "LOC";
    pub const ORG: &'static str = "ORG";
    pub const DATE: &'static str = "DATE";
    pub const TIME: &'static str = "TIME";

    /// The predefined categories. Any other non-empty name is accepted too.
    pub const CANONICAL: [&'static str; 5] =
        [Self::PER, Self::LOC, Self::ORG, Self::DATE, Self::TIME];

    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::invalid("entity category must not be empty"));
        }
        if name.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "entity category `{name}` contains whitespace"
            )));
        }
        Ok(EntityCategory(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for EntityCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityCategory::new(s)
    }
}

impl TryFrom<String> for EntityCategory {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        EntityCategory::new(s)
    }
}

impl From<EntityCategory> for String {
    fn from(c: EntityCategory) -> String {
        c.0
    }
}

/// Half-open token range `[start, end)` labelled with a category.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub category: EntityCategory,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, category: EntityCategory) -> Self {
        EntitySpan {
            start,
            end,
            category,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotatedSentence {
    tokens: Vec<String>,
    spans: Vec<EntitySpan>,
    label: Option<String>,
}

impl AnnotatedSentence {
    /// Builds a sentence after checking tokens and spans.
    ///
    /// Tokens must be non-empty and whitespace-free; spans must lie within
    /// the sentence, be non-empty, sorted by start and non-overlapping.
    pub fn new(
        tokens: Vec<String>,
        spans: Vec<EntitySpan>,
        label: Option<String>,
    ) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("sentence has no tokens"));
        }
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!(
                    "token {i} ({tok:?}) is empty or contains whitespace"
                )));
            }
        }
        let mut prev_end = 0;
        for span in &spans {
            if span.is_empty() || span.end > tokens.len() {
                return Err(Error::invalid(format!(
                    "span [{}, {}) out of range for {} tokens",
                    span.start,
                    span.end,
                    tokens.len()
                )));
            }
            if span.start < prev_end {
                return Err(Error::invalid(format!(
                    "span [{}, {}) overlaps or precedes the previous span",
                    span.start, span.end
                )));
            }
            prev_end = span.end;
        }
        Ok(AnnotatedSentence {
            tokens,
            spans,
            label,
        })
    }

    /// Whitespace-tokenizes `text` and attaches spans over the resulting tokens.
    pub fn from_text(text: &str, spans: Vec<EntitySpan>, label: Option<String>) -> Result<Self> {
        let tokens = text.split_whitespace().map(str::to_owned).collect();
        AnnotatedSentence::new(tokens, spans, label)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn spans(&self) -> &[EntitySpan] {
        &self.spans
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Surface string of a span, tokens joined by single spaces.
    pub fn span_text(&self, span: &EntitySpan) -> String {
        self.tokens[span.start..span.end].join(" ")
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    pub fn with_spans(self, spans: Vec<EntitySpan>) -> Result<Self> {
        AnnotatedSentence::new(self.tokens, spans, self.label)
    }

    /// BIO2 tag for every token.
    pub fn bio_tags(&self) -> Vec<BioTag> {
        let mut tags = vec![BioTag::Outside; self.tokens.len()];
        for span in &self.spans {
            tags[span.start] = BioTag::Begin(span.category.clone());
            for tag in &mut tags[span.start + 1..span.end] {
                *tag = BioTag::Inside(span.category.clone());
            }
        }
        tags
    }
}

/// A single BIO2 tag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BioTag {
    Outside,
    Begin(EntityCategory),
    Inside(EntityCategory),
}

impl BioTag {
    pub fn category(&self) -> Option<&EntityCategory> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(c) | BioTag::Inside(c) => Some(c),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::Outside => f.write_str("O"),
            BioTag::Begin(c) => write!(f, "B-{c}"),
            BioTag::Inside(c) => write!(f, "I-{c}"),
        }
    }
}

impl FromStr for BioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(BioTag::Outside);
        }
        match s.split_once('-') {
            Some(("B", cat)) => Ok(BioTag::Begin(EntityCategory::new(cat)?)),
            Some(("I", cat)) => Ok(BioTag::Inside(EntityCategory::new(cat)?)),
            _ => Err(Error::invalid(format!("malformed BIO tag `{s}`"))),
        }
    }
}

/// Rebuilds spans from a BIO tag sequence.
///
/// An `I-X` that does not continue an open `X` span starts a new span, as
/// if it were `B-X`. The second element lists the positions where that
/// happened.
pub fn spans_from_bio(tags: &[BioTag]) -> (Vec<EntitySpan>, Vec<usize>) {
    let mut spans: Vec<EntitySpan> = Vec::new();
    let mut coerced = Vec::new();
    let mut open = false;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            BioTag::Outside => open = false,
            BioTag::Begin(c) => {
                spans.push(EntitySpan::new(i, i + 1, c.clone()));
                open = true;
            }
            BioTag::Inside(c) => match spans.last_mut() {
                Some(last) if open && last.end == i && &last.category == c => last.end = i + 1,
                _ => {
                    coerced.push(i);
                    spans.push(EntitySpan::new(i, i + 1, c.clone()));
                    open = true;
                }
            },
        }
    }
    (spans, coerced)
}

/// An ordered collection of sentences. Sentence indices feed seed derivation,
/// so order is significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Corpus {
    pub name: String,
    pub sentences: Vec<AnnotatedSentence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sentences: Vec<AnnotatedSentence>) -> Self {
        Corpus {
            name: name.into(),
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Every category that occurs in at least one span, sorted.
    pub fn categories(&self) -> Vec<EntityCategory> {
        let set: std::collections::BTreeSet<_> = self
            .sentences
            .iter()
            .flat_map(|s| s.spans().iter().map(|sp| sp.category.clone()))
            .collect();
        set.into_iter().collect()
    }

    pub fn span_count(&self) -> usize {
        self.sentences.iter().map(|s| s.spans().len()).sum()
    }

    pub fn span_token_count(&self) -> usize {
        self.sentences
            .iter()
            .flat_map(|s| s.spans())
            .map(EntitySpan::len)
            .sum()
    }
}
