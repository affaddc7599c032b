//! Multinomial naive Bayes over lowercased unigrams with add-one smoothing.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::corpus::{AnnotatedSentence, Corpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SentenceClassifier {
    labels: Vec<String>,
    log_prior: Vec<f64>,
    /// token -> count per label
    counts: HashMap<String, Vec<u32>>,
    /// log of (tokens in label + vocabulary size + 1), the smoothed denominator
    log_denominator: Vec<f64>,
}

fn normalize(tok: &str) -> String {
    tok.to_lowercase()
}

pub fn train_sentence_classifier(train: &Corpus) -> Result<SentenceClassifier> {
    let mut by_label: BTreeMap<&str, Vec<&AnnotatedSentence>> = BTreeMap::new();
    for (i, s) in train.sentences.iter().enumerate() {
        let label = s
            .label()
            .ok_or_else(|| Error::invalid(format!("training sentence {i} has no label")))?;
        by_label.entry(label).or_default().push(s);
    }
    if by_label.is_empty() {
        return Err(Error::invalid("cannot train a classifier on an empty corpus"));
    }

    let labels: Vec<String> = by_label.keys().map(|l| l.to_string()).collect();
    let n_labels = labels.len();
    let mut counts: HashMap<String, Vec<u32>> = HashMap::new();
    let mut totals = vec![0u64; n_labels];
    let mut vocab: HashSet<String> = HashSet::new();
    let mut log_prior = Vec::with_capacity(n_labels);

    for (idx, sentences) in by_label.values().enumerate() {
        log_prior.push((sentences.len() as f64 / train.len() as f64).ln());
        for s in sentences {
            for tok in s.tokens() {
                let tok = normalize(tok);
                counts.entry(tok.clone()).or_insert_with(|| vec![0; n_labels])[idx] += 1;
                totals[idx] += 1;
                vocab.insert(tok);
            }
        }
    }
    let v = vocab.len() as f64 + 1.0;
    let log_denominator = totals.iter().map(|&n| (n as f64 + v).ln()).collect();

    Ok(SentenceClassifier {
        labels,
        log_prior,
        counts,
        log_denominator,
    })
}

impl SentenceClassifier {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Unnormalized log posterior per label, in label order.
    pub fn scores(&self, tokens: &[String]) -> Vec<f64> {
        let mut scores = self.log_prior.clone();
        for tok in tokens {
            let c = self.counts.get(&normalize(tok));
            for (i, score) in scores.iter_mut().enumerate() {
                let n = c.map_or(0, |c| c[i]);
                *score += (n as f64 + 1.0).ln() - self.log_denominator[i];
            }
        }
        scores
    }

    /// Highest-scoring label; ties go to the label that sorts first.
    pub fn predict(&self, sentence: &AnnotatedSentence) -> &str {
        let scores = self.scores(sentence.tokens());
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        &self.labels[best]
    }

    /// Copy of `corpus` with every label replaced by the prediction.
    pub fn predict_corpus(&self, corpus: &Corpus) -> Corpus {
        let sentences = corpus
            .sentences
            .iter()
            .map(|s| s.clone().with_label(Some(self.predict(s).to_owned())))
            .collect();
        Corpus::new(corpus.name.clone(), sentences)
    }
}
