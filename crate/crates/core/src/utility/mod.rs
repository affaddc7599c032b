//! Downstream utility of transformed corpora: a synthetic data generator,
//! two light-weight learners and the evaluation sweep.

mod classifier;
mod metrics;
mod sweep;
mod synth;
mod tagger;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::Result;

pub use classifier::{train_sentence_classifier, SentenceClassifier};
pub use metrics::{entity_f1, label_accuracy, ClassScores, EvalMetrics};
pub use sweep::{summarize, sweep, sweep_csv, SweepRow, SweepSpec, SweepSummary};
pub use synth::{gen_synthetic_corpus, LabelSpec, SynthSpec};
pub use tagger::{train_token_tagger, TokenTagger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Entity tagging, scored by exact-span F1.
    Ner,
    /// Sentence classification, scored by accuracy.
    Intent,
}

impl Task {
    pub fn metric(self) -> &'static str {
        match self {
            Task::Ner => "entity_f1",
            Task::Intent => "accuracy",
        }
    }

    /// The single number reported for this task.
    pub fn headline(self, m: &EvalMetrics) -> f64 {
        match self {
            Task::Ner => m.f1,
            Task::Intent => m.accuracy,
        }
    }
}

/// Trains the task's model on `train` and scores it on `test`.
pub fn evaluate_task(train: &Corpus, test: &Corpus, task: Task) -> Result<EvalMetrics> {
    match task {
        Task::Ner => {
            let tagger = train_token_tagger(train)?;
            entity_f1(test, &tagger.predict_corpus(test))
        }
        Task::Intent => {
            let clf = train_sentence_classifier(train)?;
            label_accuracy(test, &clf.predict_corpus(test))
        }
    }
}
