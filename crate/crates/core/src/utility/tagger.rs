//! Per-token naive Bayes BIO tagger.
//!
//! Each token is classified independently from three features: the token
//! itself, the previous token and the next token, all lowercased, with
//! `<s>` and `</s>` standing in past the sentence edges. Every feature gets
//! add-one smoothing with one extra slot for unseen values.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::{spans_from_bio, AnnotatedSentence, BioTag, Corpus};
use crate::error::{Error, Result};

const START: &str = "<s>";
const END: &str = "</s>";

#[derive(Debug, Clone, Default)]
struct FeatureTable {
    counts: HashMap<String, Vec<u32>>,
    /// ln(tag count + distinct values + 1), per tag
    log_denominator: Vec<f64>,
}

impl FeatureTable {
    fn add(&mut self, value: String, tag: usize, n_tags: usize) {
        self.counts.entry(value).or_insert_with(|| vec![0; n_tags])[tag] += 1;
    }

    fn finish(&mut self, tag_counts: &[u64]) {
        let v = self.counts.len() as f64 + 1.0;
        self.log_denominator = tag_counts.iter().map(|&n| (n as f64 + v).ln()).collect();
    }

    fn score(&self, value: &str, scores: &mut [f64]) {
        let c = self.counts.get(value);
        for (i, s) in scores.iter_mut().enumerate() {
            let n = c.map_or(0, |c| c[i]);
            *s += (n as f64 + 1.0).ln() - self.log_denominator[i];
        }
    }
}

#[derive(Debug, Clone)]
pub struct TokenTagger {
    tags: Vec<BioTag>,
    log_prior: Vec<f64>,
    current: FeatureTable,
    previous: FeatureTable,
    next: FeatureTable,
}

fn features(tokens: &[String], i: usize) -> [String; 3] {
    let prev = if i == 0 { START.to_owned() } else { tokens[i - 1].to_lowercase() };
    let next = tokens.get(i + 1).map_or_else(|| END.to_owned(), |t| t.to_lowercase());
    [tokens[i].to_lowercase(), prev, next]
}

pub fn train_token_tagger(train: &Corpus) -> Result<TokenTagger> {
    let tagged: Vec<(&AnnotatedSentence, Vec<BioTag>)> =
        train.sentences.iter().map(|s| (s, s.bio_tags())).collect();
    let tags: Vec<BioTag> = tagged
        .iter()
        .flat_map(|(_, t)| t.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if tags.is_empty() {
        return Err(Error::invalid("cannot train a tagger without tokens"));
    }
    let index: HashMap<&BioTag, usize> = tags.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let n = tags.len();

    let mut tag_counts = vec![0u64; n];
    let mut current = FeatureTable::default();
    let mut previous = FeatureTable::default();
    let mut next = FeatureTable::default();
    for (s, bio) in &tagged {
        for (i, tag) in bio.iter().enumerate() {
            let t = index[tag];
            tag_counts[t] += 1;
            let [cur, prev, nxt] = features(s.tokens(), i);
            current.add(cur, t, n);
            previous.add(prev, t, n);
            next.add(nxt, t, n);
        }
    }
    current.finish(&tag_counts);
    previous.finish(&tag_counts);
    next.finish(&tag_counts);

    let total: u64 = tag_counts.iter().sum();
    let log_prior = tag_counts.iter().map(|&c| (c as f64 / total as f64).ln()).collect();
    Ok(TokenTagger {
        tags,
        log_prior,
        current,
        previous,
        next,
    })
}

impl TokenTagger {
    /// Tags seen in training, in sorted order.
    pub fn tags(&self) -> &[BioTag] {
        &self.tags
    }

    /// Best tag per token; ties go to the tag that sorts first.
    pub fn predict_tags(&self, tokens: &[String]) -> Vec<BioTag> {
        (0..tokens.len())
            .map(|i| {
                let [cur, prev, nxt] = features(tokens, i);
                let mut scores = self.log_prior.clone();
                self.current.score(&cur, &mut scores);
                self.previous.score(&prev, &mut scores);
                self.next.score(&nxt, &mut scores);
                let mut best = 0;
                for (j, &s) in scores.iter().enumerate() {
                    if s > scores[best] {
                        best = j;
                    }
                }
                self.tags[best].clone()
            })
            .collect()
    }

    /// Sentence with predicted spans; stray `I-` tags open new spans.
    pub fn predict(&self, sentence: &AnnotatedSentence) -> AnnotatedSentence {
        let (spans, _) = spans_from_bio(&self.predict_tags(sentence.tokens()));
        sentence
            .clone()
            .with_spans(spans)
            .expect("spans rebuilt from tags are valid")
    }

    pub fn predict_corpus(&self, corpus: &Corpus) -> Corpus {
        Corpus::new(
            corpus.name.clone(),
            corpus.sentences.iter().map(|s| self.predict(s)).collect(),
        )
    }
}
