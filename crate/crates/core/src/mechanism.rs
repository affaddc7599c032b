//! The probabilistic replacement mechanism.
//!
//! For every sensitive unit a uniform draw `r` is taken from the unit's
//! random stream; when `r <= p` the unit is replaced by a surrogate sampled
//! from the strategy's policy for the unit's category, otherwise it is kept.
//! A unit is a single in-span token at [`Granularity::Word`] and a whole span
//! at [`Granularity::Entity`].

use std::fmt;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_category_lexicon, AnnotatedSentence, Corpus, EntitySpan};
use crate::error::{Error, Result};
use crate::policy::{PrivateVocabulary, ReplacementPolicy};
use crate::privacy::{privacy_report, PrivacyReport};
use crate::rng::{derived_stream, keyed_stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Word,
    Entity,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Word => "word",
            Granularity::Entity => "entity",
        })
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(Granularity::Word),
            "entity" => Ok(Granularity::Entity),
            _ => Err(Error::invalid(format!("unknown granularity `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    NoReplacement,
    Redact,
    TypedPlaceholder,
    NamedPlaceholder,
    WordByWord,
    FullEntity,
}

impl StrategyName {
    pub const ALL: [StrategyName; 6] = [
        StrategyName::NoReplacement,
        StrategyName::Redact,
        StrategyName::TypedPlaceholder,
        StrategyName::NamedPlaceholder,
        StrategyName::WordByWord,
        StrategyName::FullEntity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::NoReplacement => "no_replacement",
            StrategyName::Redact => "redact",
            StrategyName::TypedPlaceholder => "typed_placeholder",
            StrategyName::NamedPlaceholder => "named_placeholder",
            StrategyName::WordByWord => "word_by_word",
            StrategyName::FullEntity => "full_entity",
        }
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_owned()))
    }
}

/// A configured instance of the mechanism: which units, which policy, how often.
#[derive(Debug, Clone)]
pub struct ReplacementStrategy {
    name: StrategyName,
    p: f64,
    policy: ReplacementPolicy,
    granularity: Granularity,
    consistent_mapping: bool,
}

impl ReplacementStrategy {
    /// Checks:
    /// - `p` in `[0, 1]`, and `p == 0` for `no_replacement`;
    /// - `full_entity` is entity-granular and `word_by_word` word-granular
    ///   (placeholder strategies may use either);
    /// - at word granularity no surrogate contains whitespace, so token
    ///   counts are preserved;
    /// - every other strategy covers at least one category.
    pub fn new(
        name: StrategyName,
        p: f64,
        policy: ReplacementPolicy,
        granularity: Granularity,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("replacement probability {p} outside [0, 1]")));
        }
        match (name, granularity) {
            (StrategyName::FullEntity, Granularity::Word) => {
                return Err(Error::invalid("full_entity requires entity granularity"))
            }
            (StrategyName::WordByWord, Granularity::Entity) => {
                return Err(Error::invalid("word_by_word requires word granularity"))
            }
            _ => {}
        }
        if name == StrategyName::NoReplacement && p != 0.0 {
            return Err(Error::invalid("no_replacement requires p = 0"));
        }
        if name != StrategyName::NoReplacement && policy.categories().next().is_none() {
            return Err(Error::invalid(format!("{name} needs a non-empty policy")));
        }
        if granularity == Granularity::Word {
            if let Some((c, s)) = policy
                .support()
                .find(|(_, s)| s.chars().any(char::is_whitespace))
            {
                return Err(Error::invalid(format!(
                    "surrogate {s:?} for {c} contains whitespace; use entity granularity"
                )));
            }
        }
        Ok(ReplacementStrategy {
            name,
            p,
            policy,
            granularity,
            consistent_mapping: false,
        })
    }

    /// Maps every distinct original to one fixed surrogate. Only allowed for
    /// `full_entity`; the closed-form privacy bound does not hold with it on.
    pub fn with_consistent_mapping(mut self, on: bool) -> Result<Self> {
        if on && self.name != StrategyName::FullEntity {
            return Err(Error::invalid("consistent mapping is only available for full_entity"));
        }
        self.consistent_mapping = on;
        Ok(self)
    }

    pub fn name(&self) -> StrategyName {
        self.name
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn policy(&self) -> &ReplacementPolicy {
        &self.policy
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn consistent_mapping(&self) -> bool {
        self.consistent_mapping
    }

    fn check_coverage(&self, sentence: &AnnotatedSentence) -> Result<()> {
        if self.name == StrategyName::NoReplacement {
            return Ok(());
        }
        match sentence
            .spans()
            .iter()
            .find(|s| !self.policy.covers(&s.category))
        {
            Some(span) => Err(Error::UncoveredCategory(span.category.to_string())),
            None => Ok(()),
        }
    }
}

/// One sensitive unit as seen by the mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub sentence: usize,
    /// Position of the unit among the sensitive units of its sentence.
    pub unit: usize,
    pub category: String,
    pub original: String,
    pub emitted: String,
    pub replaced: bool,
    pub r: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransformationLog {
    pub records: Vec<LogRecord>,
}

impl TransformationLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn replaced_count(&self) -> usize {
        self.records.iter().filter(|r| r.replaced).count()
    }

    /// One JSON object per record and line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string())))
            .collect::<Result<_>>()?;
        Ok(TransformationLog { records })
    }
}

/// Where surrogates come from once a unit is selected for replacement.
enum SurrogateSource {
    /// Fresh draw from the sentence stream.
    Independent,
    /// Draw from a stream keyed by (category, original), so equal originals
    /// always get the same surrogate.
    Consistent { seed: u64 },
}

/// Transforms one sentence. Log records carry sentence index 0.
///
/// With consistent mapping on, surrogates are keyed by mapping seed 0; use
/// [`transform_corpus`] to key them by the corpus seed.
pub fn transform_sentence<R: Rng + ?Sized>(
    sentence: &AnnotatedSentence,
    strategy: &ReplacementStrategy,
    rng: &mut R,
) -> Result<(AnnotatedSentence, TransformationLog)> {
    let source = if strategy.consistent_mapping {
        SurrogateSource::Consistent { seed: 0 }
    } else {
        SurrogateSource::Independent
    };
    let (out, records) = transform_with(0, sentence, strategy, rng, &source)?;
    Ok((out, TransformationLog { records }))
}

fn transform_with<R: Rng + ?Sized>(
    index: usize,
    sentence: &AnnotatedSentence,
    strategy: &ReplacementStrategy,
    rng: &mut R,
    source: &SurrogateSource,
) -> Result<(AnnotatedSentence, Vec<LogRecord>)> {
    strategy.check_coverage(sentence)?;

    let tokens = sentence.tokens();
    let mut out_tokens: Vec<String> = Vec::with_capacity(tokens.len());
    let mut out_spans = Vec::with_capacity(sentence.spans().len());
    let mut records = Vec::new();
    let mut cursor = 0;

    for span in sentence.spans() {
        out_tokens.extend_from_slice(&tokens[cursor..span.start]);
        let start = out_tokens.len();
        let units: Vec<String> = match strategy.granularity {
            Granularity::Word => tokens[span.start..span.end].to_vec(),
            Granularity::Entity => vec![sentence.span_text(span)],
        };
        for original in units {
            let r: f64 = rng.sample(Open01);
            let replaced = r <= strategy.p;
            let emitted = if replaced {
                let category = &span.category;
                match source {
                    SurrogateSource::Independent => strategy.policy.sample(category, rng)?,
                    SurrogateSource::Consistent { seed } => {
                        let mut keyed = keyed_stream(*seed, &[category.as_str(), &original]);
                        strategy.policy.sample(category, &mut keyed)?
                    }
                }
                .to_owned()
            } else {
                original.clone()
            };
            out_tokens.extend(emitted.split_whitespace().map(str::to_owned));
            records.push(LogRecord {
                sentence: index,
                unit: records.len(),
                category: span.category.to_string(),
                original,
                emitted,
                replaced,
                r,
            });
        }
        out_spans.push(EntitySpan::new(start, out_tokens.len(), span.category.clone()));
        cursor = span.end;
    }
    out_tokens.extend_from_slice(&tokens[cursor..]);

    let out = AnnotatedSentence::new(out_tokens, out_spans, sentence.label().map(str::to_owned))?;
    Ok((out, records))
}

/// Result of transforming a whole corpus.
#[derive(Debug, Clone)]
pub struct CorpusTransform {
    pub corpus: Corpus,
    pub log: TransformationLog,
    pub report: PrivacyReport,
}

/// Transforms every sentence with its own stream derived from
/// `(master_seed, sentence index)`, so the result does not depend on the
/// order in which sentences are processed.
///
/// The attached report takes the private vocabulary to be the span forms of
/// `corpus` at the strategy's granularity.
pub fn transform_corpus(
    corpus: &Corpus,
    strategy: &ReplacementStrategy,
    master_seed: u64,
) -> Result<CorpusTransform> {
    let source = if strategy.consistent_mapping {
        SurrogateSource::Consistent { seed: master_seed }
    } else {
        SurrogateSource::Independent
    };
    let results: Vec<(AnnotatedSentence, Vec<LogRecord>)> = corpus
        .sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = derived_stream(master_seed, i as u64);
            transform_with(i, s, strategy, &mut rng, &source)
        })
        .collect::<Result<_>>()?;

    let mut sentences = Vec::with_capacity(results.len());
    let mut records = Vec::new();
    for (s, r) in results {
        sentences.push(s);
        records.extend(r);
    }
    let vocab = PrivateVocabulary::from_lexicon(&build_category_lexicon(corpus, strategy.granularity));
    let report = privacy_report(strategy, &vocab)?;
    Ok(CorpusTransform {
        corpus: Corpus::new(corpus.name.clone(), sentences),
        log: TransformationLog { records },
        report,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;
    use crate::corpus::EntityCategory;
    use crate::policy::{degenerate_policy, gazetteer_policy, uniform_policy};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cat(s: &str) -> EntityCategory {
        EntityCategory::new(s).unwrap()
    }

    fn sentence(text: &str, spans: &[(usize, usize, &str)]) -> AnnotatedSentence {
        let spans = spans
            .iter()
            .map(|&(s, e, c)| EntitySpan::new(s, e, cat(c)))
            .collect();
        AnnotatedSentence::from_text(text, spans, Some("L".into())).unwrap()
    }

    fn uniform(cat_name: &str, forms: &[&str]) -> ReplacementPolicy {
        let mut m = BTreeMap::new();
        m.insert(cat(cat_name), forms.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>());
        uniform_policy(&PrivateVocabulary::new(m).unwrap()).unwrap()
    }

    #[test]
    fn name_round_trip() {
        for n in StrategyName::ALL {
            assert_eq!(n.as_str().parse::<StrategyName>().unwrap(), n);
        }
        assert!(matches!(
            "shuffle".parse::<StrategyName>(),
            Err(Error::UnknownStrategy(_))
        ));
    }

    #[test]
    fn strategy_invariants() {
        let pol = uniform("LOC", &["a", "b"]);
        assert!(ReplacementStrategy::new(StrategyName::WordByWord, 1.5, pol.clone(), Granularity::Word).is_err());
        assert!(ReplacementStrategy::new(StrategyName::WordByWord, -0.1, pol.clone(), Granularity::Word).is_err());
        assert!(ReplacementStrategy::new(StrategyName::FullEntity, 1.0, pol.clone(), Granularity::Word).is_err());
        assert!(ReplacementStrategy::new(StrategyName::WordByWord, 1.0, pol.clone(), Granularity::Entity).is_err());
        assert!(ReplacementStrategy::new(StrategyName::NoReplacement, 0.5, pol.clone(), Granularity::Word).is_err());
        let wbw = ReplacementStrategy::new(StrategyName::WordByWord, 1.0, pol.clone(), Granularity::Word).unwrap();
        assert!(wbw.with_consistent_mapping(true).is_err());
        let fe = ReplacementStrategy::new(StrategyName::FullEntity, 1.0, pol, Granularity::Entity).unwrap();
        assert!(fe.with_consistent_mapping(true).unwrap().consistent_mapping());

        let multi = gazetteer_policy("LOC\tNew York\t1\n").unwrap();
        assert!(ReplacementStrategy::new(StrategyName::WordByWord, 1.0, multi.clone(), Granularity::Word).is_err());
        assert!(ReplacementStrategy::new(StrategyName::FullEntity, 1.0, multi, Granularity::Entity).is_ok());
    }

    #[test]
    fn p_zero_is_identity() {
        let s = sentence("fly from Frankfurt Airport to Rome", &[(2, 4, "LOC"), (5, 6, "LOC")]);
        let strat = ReplacementStrategy::new(StrategyName::WordByWord, 0.0, uniform("LOC", &["x", "y"]), Granularity::Word).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (out, log) = transform_sentence(&s, &strat, &mut rng).unwrap();
        assert_eq!(out, s);
        assert_eq!(log.len(), 3);
        assert!(log.records.iter().all(|r| !r.replaced && r.original == r.emitted));
    }

    #[test]
    fn uncovered_category_is_named() {
        let s = sentence("call Ann", &[(1, 2, "PER")]);
        let strat = ReplacementStrategy::new(StrategyName::WordByWord, 1.0, uniform("LOC", &["x"]), Granularity::Word).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match transform_sentence(&s, &strat, &mut rng) {
            Err(Error::UncoveredCategory(c)) => assert_eq!(c, "PER"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn entity_units_reindex_spans() {
        let s = sentence("from Frankfurt Airport to Rome now", &[(1, 3, "LOC"), (4, 5, "LOC")]);
        let policy = gazetteer_policy("LOC\tSan Jose del Cabo\t1\n").unwrap();
        let strat = ReplacementStrategy::new(StrategyName::FullEntity, 1.0, policy, Granularity::Entity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, log) = transform_sentence(&s, &strat, &mut rng).unwrap();
        assert_eq!(out.text(), "from San Jose del Cabo to San Jose del Cabo now");
        assert_eq!(out.spans()[0], EntitySpan::new(1, 5, cat("LOC")));
        assert_eq!(out.spans()[1], EntitySpan::new(6, 10, cat("LOC")));
        assert_eq!(log.records[0].original, "Frankfurt Airport");
        assert_eq!(out.label(), Some("L"));
    }

    #[test]
    fn single_word_surrogate_shrinks_span() {
        let s = sentence("from Frankfurt Airport to", &[(1, 3, "LOC")]);
        let mut m = BTreeMap::new();
        m.insert(cat("LOC"), "IIIII".to_string());
        let strat = ReplacementStrategy::new(StrategyName::Redact, 1.0, degenerate_policy(&m).unwrap(), Granularity::Entity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, _) = transform_sentence(&s, &strat, &mut rng).unwrap();
        assert_eq!(out.text(), "from IIIII to");
        assert_eq!(out.spans(), [EntitySpan::new(1, 2, cat("LOC"))]);
    }

    #[test]
    fn repeated_originals_get_independent_draws() {
        let text = vec!["Rome"; 200].join(" ");
        let spans: Vec<_> = (0..200).map(|i| (i, i + 1, "LOC")).collect();
        let s = sentence(&text, &spans);
        let strat = ReplacementStrategy::new(StrategyName::WordByWord, 1.0, uniform("LOC", &["a", "b", "c"]), Granularity::Word).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (out, _) = transform_sentence(&s, &strat, &mut rng).unwrap();
        let distinct: BTreeSet<_> = out.tokens().iter().collect();
        assert!(distinct.len() >= 2);
    }

    #[test]
    fn consistent_mapping_fixes_surrogates() {
        let sentences: Vec<_> = (0..50)
            .map(|_| sentence("to Rome or Paris", &[(1, 2, "LOC"), (3, 4, "LOC")]))
            .collect();
        let corpus = Corpus::new("c", sentences);
        let forms: Vec<String> = (0..20).map(|i| format!("city{i:02}")).collect();
        let refs: Vec<&str> = forms.iter().map(String::as_str).collect();
        let strat = ReplacementStrategy::new(StrategyName::FullEntity, 1.0, uniform("LOC", &refs), Granularity::Entity)
            .unwrap()
            .with_consistent_mapping(true)
            .unwrap();
        let out = transform_corpus(&corpus, &strat, 3).unwrap();
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for r in &out.log.records {
            map.entry(r.original.clone()).or_default().insert(r.emitted.clone());
        }
        assert!(map.values().all(|v| v.len() == 1));
        assert!(out.report.guarantee_void);
    }

    #[test]
    fn corpus_determinism_and_log_json() {
        let sentences: Vec<_> = (0..30)
            .map(|_| sentence("to Rome or Paris", &[(1, 2, "LOC"), (3, 4, "LOC")]))
            .collect();
        let corpus = Corpus::new("c", sentences);
        let strat = ReplacementStrategy::new(StrategyName::WordByWord, 0.5, uniform("LOC", &["a", "b"]), Granularity::Word).unwrap();
        let a = transform_corpus(&corpus, &strat, 11).unwrap();
        let b = transform_corpus(&corpus, &strat, 11).unwrap();
        assert_eq!(a.corpus, b.corpus);
        let ja = a.log.to_jsonl().unwrap();
        assert_eq!(ja, b.log.to_jsonl().unwrap());
        assert_eq!(TransformationLog::from_jsonl(&ja).unwrap(), a.log);
        let first = ja.lines().next().unwrap();
        let v: serde_json::Value = serde_json::from_str(first).unwrap();
        for key in ["sentence", "unit", "category", "original", "emitted", "replaced", "r"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let c = transform_corpus(&corpus, &strat, 12).unwrap();
        assert_ne!(a.corpus, c.corpus);
    }

    proptest! {
        #[test]
        fn outside_tokens_untouched(
            words in prop::collection::vec("[a-z]{1,6}", 2..12),
            p in 0.0f64..=1.0,
            seed in any::<u64>(),
            entity in any::<bool>(),
        ) {
            let n = words.len();
            let spans = vec![EntitySpan::new(0, 1, cat("LOC")), EntitySpan::new(n - 1, n, cat("LOC"))];
            let spans = if n == 2 { spans } else { vec![spans[0].clone(), EntitySpan::new(n - 2, n, cat("LOC"))] };
            let s = AnnotatedSentence::new(words.clone(), spans, None).unwrap();
            let (name, gran) = if entity {
                (StrategyName::FullEntity, Granularity::Entity)
            } else {
                (StrategyName::WordByWord, Granularity::Word)
            };
            let strat = ReplacementStrategy::new(name, p, uniform("LOC", &["X", "Y"]), gran).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (out, log) = transform_sentence(&s, &strat, &mut rng).unwrap();

            // tokens outside spans
            let outside = |s: &AnnotatedSentence| -> Vec<String> {
                let mut in_span = vec![false; s.len()];
                for sp in s.spans() { for f in &mut in_span[sp.start..sp.end] { *f = true; } }
                s.tokens().iter().zip(in_span).filter(|(_, f)| !f).map(|(t, _)| t.clone()).collect()
            };
            prop_assert_eq!(outside(&out), outside(&s));
            if !entity {
                prop_assert_eq!(out.len(), s.len());
                prop_assert_eq!(out.spans(), s.spans());
            }
            for r in &log.records {
                prop_assert_eq!(r.replaced, r.r <= p);
                prop_assert!(r.r > 0.0 && r.r < 1.0);
                if r.replaced {
                    prop_assert!(r.emitted == "X" || r.emitted == "Y");
                } else {
                    prop_assert_eq!(&r.emitted, &r.original);
                }
            }
        }
    }
}
