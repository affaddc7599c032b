use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EntitySpan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold items of this class.
    pub support: usize,
}

impl ClassScores {
    fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, gold);
        ClassScores {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support: gold,
        }
    }
}

/// Scores for one evaluation.
///
/// For entity evaluation `accuracy` is token-level BIO accuracy and
/// precision/recall/F1 are exact-span micro averages. For sentence
/// classification all four top-level values equal the label accuracy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: BTreeMap<String, ClassScores>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn check_aligned(gold: &Corpus, predicted: &Corpus) -> Result<()> {
    if gold.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "gold has {} sentences, prediction has {}",
            gold.len(),
            predicted.len()
        )));
    }
    for (i, (g, p)) in gold.sentences.iter().zip(&predicted.sentences).enumerate() {
        if g.len() != p.len() {
            return Err(Error::invalid(format!(
                "sentence {i}: gold has {} tokens, prediction has {}",
                g.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

/// Exact-match span scoring: a predicted span is correct only when start,
/// end and category all equal a gold span of the same sentence.
pub fn entity_f1(gold: &Corpus, predicted: &Corpus) -> Result<EvalMetrics> {
    check_aligned(gold, predicted)?;
    let mut tp = 0;
    let mut n_gold = 0;
    let mut n_pred = 0;
    let mut tokens = 0;
    let mut tokens_ok = 0;
    // category -> (tp, predicted, gold)
    let mut per: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();

    for (g, p) in gold.sentences.iter().zip(&predicted.sentences) {
        let gold_spans: HashSet<&EntitySpan> = g.spans().iter().collect();
        for span in p.spans() {
            let entry = per.entry(span.category.to_string()).or_default();
            entry.1 += 1;
            if gold_spans.contains(span) {
                entry.0 += 1;
                tp += 1;
            }
        }
        for span in g.spans() {
            per.entry(span.category.to_string()).or_default().2 += 1;
        }
        n_gold += g.spans().len();
        n_pred += p.spans().len();
        tokens += g.len();
        tokens_ok += g
            .bio_tags()
            .iter()
            .zip(p.bio_tags())
            .filter(|(a, b)| *a == b)
            .count();
    }

    let precision = ratio(tp, n_pred);
    let recall = ratio(tp, n_gold);
    Ok(EvalMetrics {
        accuracy: ratio(tokens_ok, tokens),
        precision,
        recall,
        f1: harmonic(precision, recall),
        per_class: per
            .into_iter()
            .map(|(c, (t, np, ng))| (c, ClassScores::from_counts(t, np, ng)))
            .collect(),
    })
}

/// Sentence label accuracy with per-label precision and recall.
pub fn label_accuracy(gold: &Corpus, predicted: &Corpus) -> Result<EvalMetrics> {
    if gold.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "gold has {} sentences, prediction has {}",
            gold.len(),
            predicted.len()
        )));
    }
    let mut correct = 0;
    let mut per: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (i, (g, p)) in gold.sentences.iter().zip(&predicted.sentences).enumerate() {
        let gl = g
            .label()
            .ok_or_else(|| Error::invalid(format!("gold sentence {i} has no label")))?;
        let pl = p.label().unwrap_or("");
        per.entry(gl.to_owned()).or_default().2 += 1;
        if !pl.is_empty() {
            per.entry(pl.to_owned()).or_default().1 += 1;
        }
        if gl == pl {
            correct += 1;
            per.entry(gl.to_owned()).or_default().0 += 1;
        }
    }
    let acc = ratio(correct, gold.len());
    Ok(EvalMetrics {
        accuracy: acc,
        precision: acc,
        recall: acc,
        f1: acc,
        per_class: per
            .into_iter()
            .map(|(c, (t, np, ng))| (c, ClassScores::from_counts(t, np, ng)))
            .collect(),
    })
}
