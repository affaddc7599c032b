use std::fmt::Write as _;

use super::{spans_from_bio, AnnotatedSentence, BioTag, Corpus};
use crate::error::{Error, Result};

const LABEL_PREFIX: &str = "# label = ";

/// A recoverable irregularity found while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// Parses BIO2 `token<TAB>tag` lines; blank lines separate sentences.
///
/// A sentence may be preceded by a `# label = <class>` line. Other lines
/// starting with `#` and containing no tab are ignored. A lone `I-X` is
/// read as `B-X` and reported through `log::warn!`.
pub fn parse_conll(text: &str) -> Result<Corpus> {
    let (corpus, warnings) = parse_conll_with_warnings(text)?;
    for w in &warnings {
        log::warn!("line {}: {}", w.line, w.message);
    }
    Ok(corpus)
}

/// Like [`parse_conll`], returning coercion warnings instead of logging them.
pub fn parse_conll_with_warnings(text: &str) -> Result<(Corpus, Vec<ParseWarning>)> {
    let mut sentences = Vec::new();
    let mut warnings = Vec::new();
    let mut pending = Pending::default();

    for (idx, raw) in text.split('\n').enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            pending.flush(&mut sentences, &mut warnings)?;
            continue;
        }
        if line.starts_with('#') && !line.contains('\t') {
            if let Some(label) = line.strip_prefix(LABEL_PREFIX) {
                if !pending.tokens.is_empty() {
                    return Err(Error::parse(lineno, "label line inside a sentence"));
                }
                pending.label = Some(label.to_owned());
                pending.first_line.get_or_insert(lineno);
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                lineno,
                format!("expected `token<TAB>tag`, found {} field(s)", fields.len()),
            ));
        }
        let tag: BioTag = fields[1]
            .parse()
            .map_err(|e: Error| Error::parse(lineno, e.to_string()))?;
        pending.first_line.get_or_insert(lineno);
        pending.tokens.push(fields[0].to_owned());
        pending.tags.push(tag);
        pending.lines.push(lineno);
    }
    pending.flush(&mut sentences, &mut warnings)?;

    Ok((Corpus::new("", sentences), warnings))
}

#[derive(Default)]
struct Pending {
    tokens: Vec<String>,
    tags: Vec<BioTag>,
    label: Option<String>,
    lines: Vec<usize>,
    first_line: Option<usize>,
}

impl Pending {
    fn flush(
        &mut self,
        sentences: &mut Vec<AnnotatedSentence>,
        warnings: &mut Vec<ParseWarning>,
    ) -> Result<()> {
        let Some(first_line) = self.first_line.take() else {
            return Ok(());
        };
        let tokens = std::mem::take(&mut self.tokens);
        let tags = std::mem::take(&mut self.tags);
        let lines = std::mem::take(&mut self.lines);
        let label = self.label.take();
        if tokens.is_empty() {
            return Err(Error::parse(first_line, "label line without tokens"));
        }
        let (spans, coerced) = spans_from_bio(&tags);
        for i in coerced {
            warnings.push(ParseWarning {
                line: lines[i],
                message: format!("`{}` does not continue a span; read as B-", tags[i]),
            });
        }
        let sentence = AnnotatedSentence::new(tokens, spans, label)
            .map_err(|e| Error::parse(first_line, e.to_string()))?;
        sentences.push(sentence);
        Ok(())
    }
}

/// Writes a corpus in the format read by [`parse_conll`]. Every sentence is
/// terminated by a blank line.
pub fn write_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    for sentence in &corpus.sentences {
        if let Some(label) = sentence.label() {
            let _ = writeln!(out, "{LABEL_PREFIX}{label}");
        }
        for (tok, tag) in sentence.tokens().iter().zip(sentence.bio_tags()) {
            let _ = writeln!(out, "{tok}\t{tag}");
        }
        out.push('\n');
    }
    out
}
