//! Token-independent replacement distributions, one per entity category.
//!
//! A [`ReplacementPolicy`] never looks at the token being replaced: sampling
//! takes only a category and a random stream. That is the structural
//! guarantee the closed-form privacy bound relies on.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CategoryLexicon, EntityCategory};
use crate::error::{Error, Result};

const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// All mass on one surrogate per category.
    Degenerate,
    Uniform,
    /// Proportional to corpus counts.
    Frequency,
    /// Proportional to weights read from an external lexicon.
    Gazetteer,
}

/// Categorical distribution over surrogates, stored in lexicographic order of
/// the surrogate strings together with its running sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDistribution {
    surrogates: Vec<String>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CategoryDistribution {
    /// Normalizes positive weights. Duplicate surrogates have their weights added.
    fn from_weights<I, S>(weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut merged: BTreeMap<String, f64> = BTreeMap::new();
        for (s, w) in weights {
            let s = s.into();
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!(
                    "weight {w} for surrogate {s:?} is not positive"
                )));
            }
            if s.trim().is_empty() {
                return Err(Error::invalid("surrogate must not be blank"));
            }
            *merged.entry(s).or_insert(0.0) += w;
        }
        if merged.is_empty() {
            return Err(Error::invalid("distribution has no surrogates"));
        }
        let total: f64 = merged.values().sum();
        let (surrogates, masses): (Vec<String>, Vec<f64>) =
            merged.into_iter().map(|(s, w)| (s, w / total)).unzip();
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        let dist = CategoryDistribution {
            surrogates,
            masses,
            cumulative,
        };
        debug_assert!((dist.total_mass() - 1.0).abs() <= MASS_TOLERANCE);
        Ok(dist)
    }

    pub fn len(&self) -> usize {
        self.surrogates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surrogates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.surrogates
            .iter()
            .map(String::as_str)
            .zip(self.masses.iter().copied())
    }

    pub fn mass(&self, surrogate: &str) -> f64 {
        self.surrogates
            .binary_search_by(|s| s.as_str().cmp(surrogate))
            .map_or(0.0, |i| self.masses[i])
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn min_mass(&self) -> f64 {
        self.masses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Inverse-CDF lookup: the first surrogate whose cumulative mass exceeds
    /// `u`. Draws at or beyond the final cumulative value (rounding) map to the
    /// last surrogate.
    pub fn select(&self, u: f64) -> &str {
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.surrogates.len() - 1);
        &self.surrogates[idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementPolicy {
    kind: PolicyKind,
    categories: BTreeMap<EntityCategory, CategoryDistribution>,
}

impl ReplacementPolicy {
    fn build(
        kind: PolicyKind,
        categories: BTreeMap<EntityCategory, CategoryDistribution>,
    ) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::invalid("replacement policy covers no category"));
        }
        Ok(ReplacementPolicy { kind, categories })
    }

    /// A policy with no categories. Only useful for strategies that never
    /// replace anything.
    pub fn empty() -> Self {
        ReplacementPolicy {
            kind: PolicyKind::Degenerate,
            categories: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn covers(&self, category: &EntityCategory) -> bool {
        self.categories.contains_key(category)
    }

    pub fn categories(&self) -> impl Iterator<Item = &EntityCategory> {
        self.categories.keys()
    }

    pub fn distribution(&self, category: &EntityCategory) -> Option<&CategoryDistribution> {
        self.categories.get(category)
    }

    /// Probability of emitting `surrogate` for `category`; zero outside the support.
    pub fn mass(&self, category: &EntityCategory, surrogate: &str) -> f64 {
        self.categories
            .get(category)
            .map_or(0.0, |d| d.mass(surrogate))
    }

    /// Every surrogate of every category.
    pub fn support(&self) -> impl Iterator<Item = (&EntityCategory, &str)> {
        self.categories
            .iter()
            .flat_map(|(c, d)| d.surrogates.iter().map(move |s| (c, s.as_str())))
    }

    pub fn sample<R: Rng + ?Sized>(&self, category: &EntityCategory, rng: &mut R) -> Result<&str> {
        let dist = self
            .categories
            .get(category)
            .ok_or_else(|| Error::UncoveredCategory(category.to_string()))?;
        let u: f64 = rng.sample(Open01);
        Ok(dist.select(u))
    }
}

/// Each category gets exactly one surrogate (redaction marker, category
/// marker or a fixed exemplar).
pub fn degenerate_policy(mapping: &BTreeMap<EntityCategory, String>) -> Result<ReplacementPolicy> {
    let categories = mapping
        .iter()
        .map(|(c, s)| Ok((c.clone(), CategoryDistribution::from_weights([(s.clone(), 1.0)])?)))
        .collect::<Result<_>>()?;
    ReplacementPolicy::build(PolicyKind::Degenerate, categories)
}

pub fn uniform_policy(vocab: &PrivateVocabulary) -> Result<ReplacementPolicy> {
    let categories = vocab
        .iter()
        .map(|(c, forms)| {
            let dist = CategoryDistribution::from_weights(forms.iter().map(|f| (f.clone(), 1.0)))?;
            Ok((c.clone(), dist))
        })
        .collect::<Result<_>>()?;
    ReplacementPolicy::build(PolicyKind::Uniform, categories)
}

/// Mass proportional to the corpus counts in `lexicon`.
pub fn frequency_policy(lexicon: &CategoryLexicon) -> Result<ReplacementPolicy> {
    let categories = lexicon
        .iter()
        .map(|(c, forms)| {
            let dist =
                CategoryDistribution::from_weights(forms.iter().map(|(f, &n)| (f.clone(), n as f64)))?;
            Ok((c.clone(), dist))
        })
        .collect::<Result<_>>()?;
    ReplacementPolicy::build(PolicyKind::Frequency, categories)
}

/// Reads `category<TAB>surrogate<TAB>weight` lines. Blank lines are skipped;
/// a surrogate may contain spaces (for entity-level replacement).
pub fn gazetteer_policy(text: &str) -> Result<ReplacementPolicy> {
    let mut weights: BTreeMap<EntityCategory, Vec<(String, f64)>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [cat, surrogate, weight] = fields[..] else {
            return Err(Error::parse(
                lineno,
                format!("expected `category<TAB>token<TAB>weight`, found {} field(s)", fields.len()),
            ));
        };
        let category = EntityCategory::new(cat).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let weight: f64 = weight
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("weight `{weight}` is not a number")))?;
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::parse(lineno, format!("weight {weight} must be positive")));
        }
        if surrogate.trim().is_empty() {
            return Err(Error::parse(lineno, "empty surrogate"));
        }
        weights
            .entry(category)
            .or_default()
            .push((surrogate.to_owned(), weight));
    }
    if weights.is_empty() {
        return Err(Error::invalid("gazetteer has no entries"));
    }
    let categories = weights
        .into_iter()
        .map(|(c, w)| Ok((c, CategoryDistribution::from_weights(w)?)))
        .collect::<Result<_>>()?;
    ReplacementPolicy::build(PolicyKind::Gazetteer, categories)
}

/// The set of surface forms per category that may occur as originals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateVocabulary {
    forms: BTreeMap<EntityCategory, BTreeSet<String>>,
}

impl PrivateVocabulary {
    pub fn new(forms: BTreeMap<EntityCategory, BTreeSet<String>>) -> Result<Self> {
        if let Some((c, _)) = forms.iter().find(|(_, f)| f.is_empty()) {
            return Err(Error::invalid(format!("vocabulary for {c} is empty")));
        }
        Ok(PrivateVocabulary { forms })
    }

    pub fn from_lexicon(lexicon: &CategoryLexicon) -> Self {
        let forms = lexicon
            .iter()
            .map(|(c, f)| (c.clone(), f.keys().cloned().collect()))
            .collect();
        PrivateVocabulary { forms }
    }

    /// Reads `category<TAB>token` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut forms: BTreeMap<EntityCategory, BTreeSet<String>> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let Some((cat, form)) = line.split_once('\t') else {
                return Err(Error::parse(lineno, "expected `category<TAB>token`"));
            };
            if form.trim().is_empty() || form.contains('\t') {
                return Err(Error::parse(lineno, "expected `category<TAB>token`"));
            }
            let category =
                EntityCategory::new(cat).map_err(|e| Error::parse(lineno, e.to_string()))?;
            forms.entry(category).or_default().insert(form.to_owned());
        }
        Ok(PrivateVocabulary { forms })
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn categories(&self) -> impl Iterator<Item = &EntityCategory> {
        self.forms.keys()
    }

    pub fn forms(&self, category: &EntityCategory) -> Option<&BTreeSet<String>> {
        self.forms.get(category)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityCategory, &BTreeSet<String>)> {
        self.forms.iter()
    }
}

/// Smallest policy mass over the vocabulary of `category`. Forms outside the
/// policy support contribute zero.
pub fn min_mass(
    policy: &ReplacementPolicy,
    vocab: &PrivateVocabulary,
    category: &EntityCategory,
) -> Result<f64> {
    let forms = vocab
        .forms(category)
        .ok_or_else(|| Error::invalid(format!("category {category} not in vocabulary")))?;
    Ok(forms
        .iter()
        .map(|f| policy.mass(category, f))
        .fold(1.0, f64::min))
}
