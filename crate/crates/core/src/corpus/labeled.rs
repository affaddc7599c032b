use serde::{Deserialize, Serialize};

use super::{AnnotatedSentence, Corpus, EntitySpan};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    text: String,
    label: String,
    spans: Vec<EntitySpan>,
}

/// Parses one JSON object per line with fields `text`, `label` and `spans`.
/// Span offsets index the whitespace tokens of `text`. Blank lines are skipped.
pub fn parse_labeled(text: &str) -> Result<Corpus> {
    let mut sentences = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let sentence = AnnotatedSentence::from_text(&record.text, record.spans, Some(record.label))
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        sentences.push(sentence);
    }
    Ok(Corpus::new("", sentences))
}

/// Writes the line format read by [`parse_labeled`]. Every sentence must carry
/// a label.
pub fn write_labeled(corpus: &Corpus) -> Result<String> {
    let mut out = String::new();
    for (i, sentence) in corpus.sentences.iter().enumerate() {
        let label = sentence
            .label()
            .ok_or_else(|| Error::invalid(format!("sentence {i} has no label")))?;
        let record = Record {
            text: sentence.text(),
            label: label.to_owned(),
            spans: sentence.spans().to_vec(),
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    Ok(out)
}
