//! Seeded generator of labeled, span-annotated utterances.
//!
//! Sentences come from per-label templates whose `{CAT}` slots are filled
//! with Zipf-distributed surface forms, then padded with filler words drawn
//! from a large pseudo-word vocabulary, much like the long tail of a noisy
//! transcript. Context words such as `at`, `for`
//! and `from` appear both before entities of several categories and before
//! ordinary words, so the words around a slot say little about what fills it.

use std::collections::{BTreeMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentence, Corpus, EntityCategory, EntitySpan};
use crate::error::{Error, Result};
use crate::rng::derived_stream;

const LOC: &[&str] = &[
    "Rome", "Paris", "London", "Berlin", "Madrid", "Vienna", "Oslo", "Dublin", "Prague", "Lisbon",
    "Athens", "New York", "Munich", "San Francisco", "Zurich", "Los Angeles", "Milan", "Hong Kong",
    "Boston", "Cape Town", "Chicago", "Frankfurt Airport", "Denver", "Tel Aviv", "Seattle",
    "Buenos Aires", "Toronto", "Las Vegas", "Sydney", "Rio de Janeiro",
];

const PER: &[&str] = &[
    "Smith", "Anna", "Miller", "Maria", "Peter", "Garcia", "Chen", "Kim", "Novak", "Sophie",
    "Lukas", "John Smith", "Emma", "Mary Jones", "Noah", "Anna Schmidt", "Olivia", "Lars Olsen",
    "Liam", "Mister Miller", "Mia", "Doctor Chen", "Ben", "Paul Weber", "Clara", "Eva Novak",
    "Hannah", "Tom Baker", "Jonas", "Jones",
];

const ORG: &[&str] = &[
    "SAP", "Lufthansa", "Siemens", "Google", "Apple", "IBM", "Nokia", "Ikea", "Bosch",
    "Deutsche Bank", "Airbus", "Air France", "Amazon", "Sushi Palace", "Oracle", "British Airways",
    "Intel", "Golden Dragon", "Adobe", "Red Cross", "Tesla", "Pizza Roma", "Spotify",
    "General Electric", "Blue Note",
];

const TIME: &[&str] = &[
    "noon", "midnight", "dawn", "tonight", "dusk", "lunchtime", "sunrise", "sunset", "teatime",
    "daybreak", "six pm", "seven am", "ten pm", "half past five", "nine thirty", "eight am",
    "quarter to four", "two pm", "eleven am", "noon sharp",
];

const DATE: &[&str] = &[
    "tomorrow", "monday", "friday", "tuesday", "wednesday", "thursday", "saturday", "sunday",
    "christmas", "easter", "next week", "halloween", "next monday", "thanksgiving", "march third",
    "the weekend", "june first", "new year", "april tenth", "the fifth",
];

/// Ordinary phrases that fit the same slots; they are tagged `O`.
const DISTRACTORS: &[(&str, &[&str])] = &[
    ("LOC", &["home", "work", "the airport", "the coast", "there", "my place", "the city", "the station"]),
    ("PER", &["someone", "my mom", "the boss", "him", "her", "my friend", "everyone", "the team"]),
    ("ORG", &["the bank", "a cafe", "the shop", "the office", "a restaurant", "the store", "the gym", "school"]),
    ("TIME", &["once", "lunch", "dinner", "night", "the latest", "breakfast", "some point", "the moment"]),
    ("DATE", &["time", "hold", "vacation", "the way", "a trip", "the list", "my own", "the phone"]),
];

fn distractors(category: &str) -> &'static [&'static str] {
    DISTRACTORS
        .iter()
        .find(|(c, _)| *c == category)
        .map_or(&[], |(_, d)| d)
}

fn pool(category: &str) -> Option<&'static [&'static str]> {
    match category {
        EntityCategory::LOC => Some(LOC),
        EntityCategory::PER => Some(PER),
        EntityCategory::ORG => Some(ORG),
        EntityCategory::TIME => Some(TIME),
        EntityCategory::DATE => Some(DATE),
        _ => None,
    }
}

/// One sentence label and the templates that realise it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub name: String,
    pub templates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_train: usize,
    pub n_test: usize,
    /// Number of distinct surface forms used per category.
    pub lexicon_sizes: BTreeMap<String, usize>,
    pub labels: Vec<LabelSpec>,
    /// Size of the pseudo-word filler vocabulary.
    pub filler_vocab: usize,
    /// Filler words per sentence are uniform on `0..=max_fillers`.
    pub max_fillers: usize,
    /// Chance that a slot is filled with an ordinary phrase instead of an
    /// entity.
    pub distractor_rate: f64,
}

fn label(name: &str, templates: &[&str]) -> LabelSpec {
    LabelSpec {
        name: name.to_owned(),
        templates: templates.iter().map(|t| t.to_string()).collect(),
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_train: 2500,
            n_test: 500,
            lexicon_sizes: [("LOC", 30), ("PER", 30), ("ORG", 25), ("TIME", 20), ("DATE", 20)]
                .into_iter()
                .map(|(c, n)| (c.to_owned(), n))
                .collect(),
            labels: vec![
                label(
                    "BookFlight",
                    &[
                        "book a flight from {LOC} to {LOC}",
                        "i want to fly to {LOC} on {DATE}",
                        "find me a flight from home to {LOC} at {TIME}",
                        "any flights with {ORG} to {LOC} for {DATE}",
                        "fly me to {LOC} with {PER}",
                    ],
                ),
                label(
                    "BookTable",
                    &[
                        "reserve a table at {ORG} for {TIME}",
                        "book a table for two at {ORG} on {DATE}",
                        "get us a table at {ORG} with {PER} for {DATE}",
                        "can we eat at home or at {ORG} at {TIME}",
                    ],
                ),
                label(
                    "CallContact",
                    &[
                        "call {PER} at {ORG}",
                        "please phone {PER} from work",
                        "ring {PER} on {DATE} at {TIME}",
                        "get {PER} from {ORG} on the line",
                    ],
                ),
                label(
                    "SetReminder",
                    &[
                        "remind me to meet {PER} at {TIME}",
                        "set a reminder for {DATE} at {TIME}",
                        "remind me about {ORG} on {DATE}",
                        "remind me at {TIME} to leave for {LOC}",
                    ],
                ),
                label(
                    "GetWeather",
                    &[
                        "what is the weather in {LOC}",
                        "will it rain in {LOC} on {DATE}",
                        "weather for {LOC} at {TIME}",
                        "is it cold at home or in {LOC} on {DATE}",
                    ],
                ),
            ],
            filler_vocab: 100_000,
            max_fillers: 10,
            distractor_rate: 0.4,
        }
    }
}

enum Piece {
    Word(String),
    Slot(EntityCategory),
}

fn parse_template(template: &str) -> Result<Vec<Piece>> {
    let mut pieces = Vec::new();
    for word in template.split_whitespace() {
        match word.strip_prefix('{').and_then(|w| w.strip_suffix('}')) {
            Some(cat) => pieces.push(Piece::Slot(EntityCategory::new(cat)?)),
            None if word.contains(['{', '}']) => {
                return Err(Error::invalid(format!("malformed slot `{word}` in `{template}`")))
            }
            None => pieces.push(Piece::Word(word.to_owned())),
        }
    }
    if pieces.is_empty() {
        return Err(Error::invalid("empty template"));
    }
    Ok(pieces)
}

/// Deterministic pseudo-word for index `i`, e.g. `bako`, `tirelu`.
fn filler_word(i: usize) -> String {
    const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
    let syllables = ONSETS.len() * VOWELS.len();
    let mut word = String::new();
    let mut n = i + syllables; // at least two syllables
    while n > 0 {
        let s = n % syllables;
        word.push_str(ONSETS[s / VOWELS.len()]);
        word.push_str(VOWELS[s % VOWELS.len()]);
        n /= syllables;
    }
    word
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| 1.0 / r as f64)).expect("n > 0")
}

/// Slot forms in use, their Zipf weights and the category's distractors.
type SlotForms = (Vec<&'static str>, WeightedIndex<f64>, &'static [&'static str]);

struct Generator {
    labels: Vec<(String, Vec<Vec<Piece>>)>,
    forms: BTreeMap<EntityCategory, SlotForms>,
    fillers: Vec<String>,
    filler_dist: Option<WeightedIndex<f64>>,
    max_fillers: usize,
    distractor_rate: f64,
}

impl Generator {
    fn new(spec: &SynthSpec) -> Result<Self> {
        if !(0.0..1.0).contains(&spec.distractor_rate) {
            return Err(Error::invalid("distractor_rate must lie in [0, 1)"));
        }
        if spec.labels.len() < 2 {
            return Err(Error::invalid("a synthetic spec needs at least two labels"));
        }
        let mut forms = BTreeMap::new();
        for (cat, &n) in &spec.lexicon_sizes {
            let category = EntityCategory::new(cat.as_str())?;
            let pool = pool(cat).ok_or_else(|| Error::invalid(format!("no built-in forms for category {cat}")))?;
            if n < 2 || n > pool.len() {
                return Err(Error::invalid(format!(
                    "lexicon size for {cat} must be between 2 and {}, got {n}",
                    pool.len()
                )));
            }
            forms.insert(category, (pool[..n].to_vec(), zipf(n), distractors(cat)));
        }

        let mut reserved: HashSet<String> = HashSet::new();
        let mut labels = Vec::new();
        let mut seen_names = HashSet::new();
        for l in &spec.labels {
            if l.name.is_empty() || l.name.contains(char::is_whitespace) || !seen_names.insert(&l.name) {
                return Err(Error::invalid(format!("bad or duplicate label name `{}`", l.name)));
            }
            if l.templates.is_empty() {
                return Err(Error::invalid(format!("label {} has no templates", l.name)));
            }
            let mut templates = Vec::new();
            for t in &l.templates {
                let pieces = parse_template(t)?;
                for piece in &pieces {
                    match piece {
                        Piece::Word(w) => {
                            reserved.insert(w.to_lowercase());
                        }
                        Piece::Slot(c) if !forms.contains_key(c) => {
                            return Err(Error::invalid(format!("template `{t}` uses {c}, which has no lexicon size")))
                        }
                        Piece::Slot(_) => {}
                    }
                }
                templates.push(pieces);
            }
            labels.push((l.name.clone(), templates));
        }
        for (list, _, other) in forms.values() {
            for f in list.iter().chain(other.iter()) {
                reserved.extend(f.split_whitespace().map(str::to_lowercase));
            }
        }

        let fillers: Vec<String> = (0..)
            .map(filler_word)
            .filter(|w| !reserved.contains(w))
            .take(spec.filler_vocab)
            .collect();
        let filler_dist = (!fillers.is_empty() && spec.max_fillers > 0).then(|| zipf(fillers.len()));
        Ok(Generator {
            labels,
            forms,
            fillers,
            filler_dist,
            max_fillers: spec.max_fillers,
            distractor_rate: spec.distractor_rate,
        })
    }

    fn sentence<R: Rng>(&self, rng: &mut R) -> Result<AnnotatedSentence> {
        let (name, templates) = &self.labels[rng.gen_range(0..self.labels.len())];
        let template = &templates[rng.gen_range(0..templates.len())];

        // units are kept whole so fillers never land inside an entity
        let mut units: Vec<(Vec<String>, Option<EntityCategory>)> = template
            .iter()
            .map(|piece| match piece {
                Piece::Word(w) => (vec![w.clone()], None),
                Piece::Slot(c) => {
                    let (list, dist, other) = &self.forms[c];
                    if !other.is_empty() && rng.gen_bool(self.distractor_rate) {
                        let phrase = other[rng.gen_range(0..other.len())];
                        return (phrase.split_whitespace().map(str::to_owned).collect(), None);
                    }
                    let form = list[dist.sample(rng)];
                    (form.split_whitespace().map(str::to_owned).collect(), Some(c.clone()))
                }
            })
            .collect();
        if let Some(dist) = &self.filler_dist {
            for _ in 0..rng.gen_range(0..=self.max_fillers) {
                let at = rng.gen_range(0..=units.len());
                units.insert(at, (vec![self.fillers[dist.sample(rng)].clone()], None));
            }
        }

        let mut tokens = Vec::new();
        let mut spans = Vec::new();
        for (words, cat) in units {
            let start = tokens.len();
            tokens.extend(words);
            if let Some(c) = cat {
                spans.push(EntitySpan::new(start, tokens.len(), c));
            }
        }
        AnnotatedSentence::new(tokens, spans, Some(name.clone()))
    }
}

const MAX_ATTEMPTS: usize = 1000;

/// Train and test corpora of the requested sizes. No test sentence repeats
/// a training sentence verbatim.
pub fn gen_synthetic_corpus(spec: &SynthSpec, seed: u64) -> Result<(Corpus, Corpus)> {
    let generator = Generator::new(spec)?;
    let mut rng = derived_stream(seed, 0);
    let train: Vec<AnnotatedSentence> = (0..spec.n_train)
        .map(|_| generator.sentence(&mut rng))
        .collect::<Result<_>>()?;
    let seen: HashSet<String> = train.iter().map(|s| s.text()).collect();

    let mut rng = derived_stream(seed, 1);
    let mut test = Vec::with_capacity(spec.n_test);
    for _ in 0..spec.n_test {
        let mut attempts = 0;
        loop {
            let s = generator.sentence(&mut rng)?;
            if !seen.contains(&s.text()) {
                test.push(s);
                break;
            }
            attempts += 1;
            if attempts == MAX_ATTEMPTS {
                return Err(Error::invalid(
                    "spec is too small to draw test sentences that differ from the training set",
                ));
            }
        }
    }
    Ok((Corpus::new("synthetic-train", train), Corpus::new("synthetic-test", test)))
}
