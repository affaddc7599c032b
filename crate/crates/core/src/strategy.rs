//! Named replacement strategies, selectable at runtime.
//!
//! Each strategy is a [`StrategyFactory`] that knows its default unit
//! granularity and how to turn a [`PolicySource`] plus the corpus being
//! transformed into a [`ReplacementPolicy`]. The [`StrategyRegistry`] maps
//! names to factories; [`StrategyRegistry::with_defaults`] registers the six
//! built-in strategies.

use std::collections::BTreeMap;

use crate::corpus::{build_category_lexicon, Corpus, EntityCategory};
use crate::error::{Error, Result};
use crate::mechanism::{Granularity, ReplacementStrategy, StrategyName};
use crate::policy::{
    degenerate_policy, frequency_policy, gazetteer_policy, uniform_policy, PrivateVocabulary,
    ReplacementPolicy,
};

/// Non-word marker used by redaction.
pub const REDACTION_MARKER: &str = "IIIII";

/// Where a strategy's surrogates come from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PolicySource {
    /// Whatever the strategy uses when nothing else is asked for.
    #[default]
    Default,
    /// Uniform over the corpus span forms.
    Uniform,
    /// Corpus relative frequencies.
    Corpus,
    /// Contents of a `category<TAB>token<TAB>weight` file.
    Gazetteer(String),
    /// One fixed surrogate per category.
    Exemplars(BTreeMap<EntityCategory, String>),
}

impl PolicySource {
    fn label(&self) -> &'static str {
        match self {
            PolicySource::Default => "default",
            PolicySource::Uniform => "uniform",
            PolicySource::Corpus => "corpus",
            PolicySource::Gazetteer(_) => "gazetteer",
            PolicySource::Exemplars(_) => "exemplars",
        }
    }
}

/// Everything needed to instantiate a strategy by name.
#[derive(Debug, Clone)]
pub struct StrategyConfig {
    pub name: String,
    pub p: f64,
    pub source: PolicySource,
    /// Overrides the strategy's default granularity when set.
    pub granularity: Option<Granularity>,
    pub consistent_mapping: bool,
}

impl StrategyConfig {
    pub fn new(name: impl Into<String>, p: f64) -> Self {
        StrategyConfig {
            name: name.into(),
            p,
            source: PolicySource::Default,
            granularity: None,
            consistent_mapping: false,
        }
    }

    pub fn with_source(mut self, source: PolicySource) -> Self {
        self.source = source;
        self
    }

    pub fn with_granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = Some(granularity);
        self
    }
}

pub trait StrategyFactory: Send + Sync {
    fn name(&self) -> StrategyName;

    fn description(&self) -> &'static str;

    fn default_granularity(&self) -> Granularity;

    fn supports(&self, granularity: Granularity) -> bool {
        granularity == self.default_granularity()
    }

    /// Replacement probability the strategy forces regardless of configuration.
    fn fixed_p(&self) -> Option<f64> {
        None
    }

    fn policy(
        &self,
        source: &PolicySource,
        corpus: &Corpus,
        granularity: Granularity,
    ) -> Result<ReplacementPolicy>;
}

fn unsupported(name: StrategyName, source: &PolicySource) -> Error {
    Error::invalid(format!("{name} cannot use a {} policy", source.label()))
}

/// Corpus categories plus the canonical ones, so marker policies cover
/// corpora without spans.
fn marker_categories(corpus: &Corpus) -> Vec<EntityCategory> {
    let mut cats = corpus.categories();
    for name in EntityCategory::CANONICAL {
        let c = EntityCategory::new(name).expect("canonical category");
        if !cats.contains(&c) {
            cats.push(c);
        }
    }
    cats.sort();
    cats
}

fn corpus_policy(
    source: &PolicySource,
    corpus: &Corpus,
    granularity: Granularity,
    name: StrategyName,
) -> Result<ReplacementPolicy> {
    match source {
        PolicySource::Default | PolicySource::Corpus => {
            frequency_policy(&build_category_lexicon(corpus, granularity))
        }
        PolicySource::Uniform => uniform_policy(&PrivateVocabulary::from_lexicon(
            &build_category_lexicon(corpus, granularity),
        )),
        PolicySource::Gazetteer(text) => gazetteer_policy(text),
        PolicySource::Exemplars(_) => Err(unsupported(name, source)),
    }
}

struct NoReplacement;

impl StrategyFactory for NoReplacement {
    fn name(&self) -> StrategyName {
        StrategyName::NoReplacement
    }

    fn description(&self) -> &'static str {
        "leave every token as it is"
    }

    fn default_granularity(&self) -> Granularity {
        Granularity::Word
    }

    fn supports(&self, _: Granularity) -> bool {
        true
    }

    fn fixed_p(&self) -> Option<f64> {
        Some(0.0)
    }

    fn policy(&self, _: &PolicySource, _: &Corpus, _: Granularity) -> Result<ReplacementPolicy> {
        Ok(ReplacementPolicy::empty())
    }
}

struct Redact;

impl StrategyFactory for Redact {
    fn name(&self) -> StrategyName {
        StrategyName::Redact
    }

    fn description(&self) -> &'static str {
        "replace with a non-word marker"
    }

    fn default_granularity(&self) -> Granularity {
        Granularity::Entity
    }

    fn supports(&self, _: Granularity) -> bool {
        true
    }

    fn policy(&self, source: &PolicySource, corpus: &Corpus, _: Granularity) -> Result<ReplacementPolicy> {
        match source {
            PolicySource::Default => degenerate_policy(
                &marker_categories(corpus)
                    .into_iter()
                    .map(|c| (c, REDACTION_MARKER.to_owned()))
                    .collect(),
            ),
            PolicySource::Exemplars(map) => degenerate_policy(map),
            other => Err(unsupported(self.name(), other)),
        }
    }
}

struct TypedPlaceholder;

impl StrategyFactory for TypedPlaceholder {
    fn name(&self) -> StrategyName {
        StrategyName::TypedPlaceholder
    }

    fn description(&self) -> &'static str {
        "replace with the category name"
    }

    fn default_granularity(&self) -> Granularity {
        Granularity::Entity
    }

    fn supports(&self, _: Granularity) -> bool {
        true
    }

    fn policy(&self, source: &PolicySource, corpus: &Corpus, _: Granularity) -> Result<ReplacementPolicy> {
        match source {
            PolicySource::Default => degenerate_policy(
                &marker_categories(corpus)
                    .into_iter()
                    .map(|c| {
                        let marker = c.to_string();
                        (c, marker)
                    })
                    .collect(),
            ),
            other => Err(unsupported(self.name(), other)),
        }
    }
}

struct NamedPlaceholder;

impl StrategyFactory for NamedPlaceholder {
    fn name(&self) -> StrategyName {
        StrategyName::NamedPlaceholder
    }

    fn description(&self) -> &'static str {
        "replace with one fixed exemplar per category"
    }

    fn default_granularity(&self) -> Granularity {
        Granularity::Entity
    }

    fn supports(&self, _: Granularity) -> bool {
        true
    }

    fn policy(
        &self,
        source: &PolicySource,
        corpus: &Corpus,
        granularity: Granularity,
    ) -> Result<ReplacementPolicy> {
        match source {
            PolicySource::Exemplars(map) => degenerate_policy(map),
            // most frequent form of each category
            PolicySource::Default => {
                let lexicon = build_category_lexicon(corpus, granularity);
                let map = lexicon
                    .categories()
                    .filter_map(|c| Some((c.clone(), lexicon.most_frequent(c)?.to_owned())))
                    .collect();
                degenerate_policy(&map)
            }
            other => Err(unsupported(self.name(), other)),
        }
    }
}

struct WordByWord;

impl StrategyFactory for WordByWord {
    fn name(&self) -> StrategyName {
        StrategyName::WordByWord
    }

    fn description(&self) -> &'static str {
        "replace each in-span word with a same-category word"
    }

    fn default_granularity(&self) -> Granularity {
        Granularity::Word
    }

    fn policy(
        &self,
        source: &PolicySource,
        corpus: &Corpus,
        granularity: Granularity,
    ) -> Result<ReplacementPolicy> {
        corpus_policy(source, corpus, granularity, self.name())
    }
}

struct FullEntity;

impl StrategyFactory for FullEntity {
    fn name(&self) -> StrategyName {
        StrategyName::FullEntity
    }

    fn description(&self) -> &'static str {
        "replace each entity as a unit with a same-category entity"
    }

    fn default_granularity(&self) -> Granularity {
        Granularity::Entity
    }

    fn policy(
        &self,
        source: &PolicySource,
        corpus: &Corpus,
        granularity: Granularity,
    ) -> Result<ReplacementPolicy> {
        corpus_policy(source, corpus, granularity, self.name())
    }
}

pub struct StrategyRegistry {
    factories: BTreeMap<String, Box<dyn StrategyFactory>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(NoReplacement));
        reg.register(Box::new(Redact));
        reg.register(Box::new(TypedPlaceholder));
        reg.register(Box::new(NamedPlaceholder));
        reg.register(Box::new(WordByWord));
        reg.register(Box::new(FullEntity));
        reg
    }

    /// Adds or replaces the factory registered under its name.
    pub fn register(&mut self, factory: Box<dyn StrategyFactory>) {
        self.factories
            .insert(factory.name().as_str().to_owned(), factory);
    }

    pub fn get(&self, name: &str) -> Result<&dyn StrategyFactory> {
        self.factories
            .get(name)
            .map(Box::as_ref)
            .ok_or_else(|| Error::UnknownStrategy(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn StrategyFactory> {
        self.factories.values().map(Box::as_ref)
    }

    /// Instantiates `config` for application to `corpus`.
    pub fn build(&self, config: &StrategyConfig, corpus: &Corpus) -> Result<ReplacementStrategy> {
        let factory = self.get(&config.name)?;
        let granularity = config
            .granularity
            .unwrap_or_else(|| factory.default_granularity());
        if !factory.supports(granularity) {
            return Err(Error::invalid(format!(
                "{} does not support {granularity} granularity",
                factory.name()
            )));
        }
        let p = factory.fixed_p().unwrap_or(config.p);
        let policy = factory.policy(&config.source, corpus, granularity)?;
        ReplacementStrategy::new(factory.name(), p, policy, granularity)?
            .with_consistent_mapping(config.consistent_mapping)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
