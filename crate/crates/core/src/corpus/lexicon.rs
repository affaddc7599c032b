use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Corpus, EntityCategory};
use crate::mechanism::Granularity;

/// Occurrence counts of surface forms per category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryLexicon {
    counts: BTreeMap<EntityCategory, BTreeMap<String, u64>>,
}

impl CategoryLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, category: EntityCategory, form: impl Into<String>) {
        *self
            .counts
            .entry(category)
            .or_default()
            .entry(form.into())
            .or_insert(0) += 1;
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn categories(&self) -> impl Iterator<Item = &EntityCategory> {
        self.counts.keys()
    }

    pub fn forms(&self, category: &EntityCategory) -> Option<&BTreeMap<String, u64>> {
        self.counts.get(category)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityCategory, &BTreeMap<String, u64>)> {
        self.counts.iter()
    }

    pub fn total(&self, category: &EntityCategory) -> u64 {
        self.counts
            .get(category)
            .map_or(0, |forms| forms.values().sum())
    }

    /// Most frequent form of a category; ties go to the lexicographically
    /// smallest form.
    pub fn most_frequent(&self, category: &EntityCategory) -> Option<&str> {
        let forms = self.counts.get(category)?;
        let mut best: Option<(&String, u64)> = None;
        for (form, &n) in forms {
            if best.is_none_or(|(_, b)| n > b) {
                best = Some((form, n));
            }
        }
        best.map(|(f, _)| f.as_str())
    }
}

/// Counts span surface forms per category.
///
/// At word granularity every in-span token counts once per occurrence; at
/// entity granularity the whole span, joined by single spaces, counts once.
pub fn build_category_lexicon(corpus: &Corpus, granularity: Granularity) -> CategoryLexicon {
    let mut lexicon = CategoryLexicon::new();
    for sentence in &corpus.sentences {
        for span in sentence.spans() {
            match granularity {
                Granularity::Word => {
                    for tok in &sentence.tokens()[span.start..span.end] {
                        lexicon.add(span.category.clone(), tok.as_str());
                    }
                }
                Granularity::Entity => lexicon.add(span.category.clone(), sentence.span_text(span)),
            }
        }
    }
    lexicon
}
