//! `deid`: replace sensitive spans in annotated corpora and account for the
//! privacy loss.
//!
//! Exit status is 0 on success, 1 when validation or verification fails and
//! 2 when an input cannot be read or parsed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "deid", version, about = "Differentially private entity replacement for text corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replace sensitive spans and write the corpus, a replacement log and a privacy report.
    Transform(TransformArgs),
    /// Compute ε for a replacement probability and policy, or the policy mass a target ε needs.
    Epsilon(EpsilonArgs),
    /// Check the closed-form ε against exact enumeration on a grid of uniform policies.
    Verify(VerifyArgs),
    /// Train and score downstream models over strategies, probabilities and seeds; writes CSV.
    Sweep(SweepArgs),
    /// Train a model on one corpus and score it on another.
    Evaluate(EvaluateArgs),
    /// Generate seeded synthetic train and test corpora.
    GenSynth(GenSynthArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    /// BIO2 token-per-line, blank line between sentences.
    Conll,
    /// One JSON record per line: {"text", "label", "spans"}.
    Labeled,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PolicyArg {
    /// The strategy's own default.
    Default,
    /// Uniform over the corpus span forms.
    Uniform,
    /// Relative frequencies of the corpus span forms.
    Corpus,
    /// Weights from the file given by --gazetteer.
    Gazetteer,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum GranularityArg {
    Word,
    Entity,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TaskArg {
    /// Entity tagging, scored by exact-span F1.
    Ner,
    /// Sentence classification, scored by accuracy.
    Intent,
}

/// Where surrogates come from.
#[derive(Args, Debug, Clone)]
struct PolicyOpts {
    /// Surrogate distribution.
    #[arg(long, value_enum, default_value_t = PolicyArg::Default)]
    policy: PolicyArg,
    /// `category<TAB>surrogate<TAB>weight` file, used with --policy gazetteer.
    #[arg(long, value_name = "PATH")]
    gazetteer: Option<PathBuf>,
    /// Fixed surrogate for a category, e.g. `LOC=London`. Repeatable.
    #[arg(long, value_name = "CAT=TOKEN")]
    exemplar: Vec<String>,
}

#[derive(Args, Debug)]
struct TransformArgs {
    /// Corpus to transform.
    #[arg(long, short)]
    input: PathBuf,
    /// Input format; guessed from the extension (.jsonl → labeled) when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Replacement strategy: no_replacement, redact, typed_placeholder,
    /// named_placeholder, word_by_word or full_entity.
    #[arg(long, short)]
    strategy: String,
    /// Probability that each sensitive unit is replaced.
    #[arg(long, short)]
    p: f64,
    #[command(flatten)]
    policy: PolicyOpts,
    /// Replacement unit; defaults to the strategy's own.
    #[arg(long, value_enum)]
    granularity: Option<GranularityArg>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Transformed corpus, written in the input format.
    #[arg(long, short)]
    output: PathBuf,
    /// Replacement log (JSON lines). Default: <output>.log.jsonl
    #[arg(long)]
    log: Option<PathBuf>,
    /// Privacy report (JSON). Default: <output>.report.json
    #[arg(long)]
    report: Option<PathBuf>,
    /// Recall of the sensitive-span identifier; the report then uses p × recall.
    #[arg(long)]
    recall: Option<f64>,
    /// Map each original to the same surrogate everywhere (full_entity only).
    /// Voids the privacy guarantee.
    #[arg(long)]
    consistent_mapping: bool,
}

#[derive(Args, Debug)]
struct EpsilonArgs {
    /// Replacement probability.
    #[arg(long, short)]
    p: f64,
    /// Smallest policy mass over the private vocabulary.
    #[arg(long, conflicts_with_all = ["vocab", "corpus"])]
    pi_min: Option<f64>,
    /// Private vocabulary, `category<TAB>token` per line.
    #[arg(long, value_name = "PATH", conflicts_with = "corpus")]
    vocab: Option<PathBuf>,
    /// Take the private vocabulary from the spans of this corpus.
    #[arg(long, value_name = "PATH")]
    corpus: Option<PathBuf>,
    /// Format of --corpus; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Span forms for --corpus are whole entities or single words.
    #[arg(long, value_enum, default_value_t = GranularityArg::Word)]
    granularity: GranularityArg,
    /// Surrogate distribution: uniform (over the vocabulary), corpus
    /// (frequencies, needs --corpus) or gazetteer (needs --gazetteer).
    #[arg(long, value_enum, default_value_t = PolicyArg::Uniform)]
    policy: PolicyArg,
    /// `category<TAB>surrogate<TAB>weight` file for --policy gazetteer.
    #[arg(long, value_name = "PATH")]
    gazetteer: Option<PathBuf>,
    /// Identifier recall; ε is computed for p × recall.
    #[arg(long)]
    recall: Option<f64>,
    /// Also print the smallest policy mass that achieves this ε at p.
    #[arg(long)]
    target_eps: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Comma-separated replacement probabilities.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.9,1.0")]
    p_grid: Vec<f64>,
    /// Comma-separated vocabulary sizes for the uniform policy.
    #[arg(long, value_delimiter = ',', default_value = "2,4,16")]
    k_grid: Vec<usize>,
    /// Test hook: add this amount to every closed-form value.
    #[arg(long, hide = true, default_value_t = 0.0)]
    inject_error: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Training corpus (transformed per cell).
    #[arg(long)]
    train: PathBuf,
    /// Test corpus (never transformed).
    #[arg(long)]
    test: PathBuf,
    /// Format of both corpora; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Comma-separated strategy names.
    #[arg(long, value_delimiter = ',', default_value = "no_replacement,redact,typed_placeholder,named_placeholder,word_by_word,full_entity")]
    strategies: Vec<String>,
    /// Comma-separated replacement probabilities.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1.0")]
    p_grid: Vec<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Comma-separated tasks.
    #[arg(long, value_delimiter = ',', value_enum, default_values_t = [TaskArg::Ner, TaskArg::Intent])]
    tasks: Vec<TaskArg>,
    /// Surrogate distribution for word_by_word and full_entity; the other
    /// strategies always use their defaults.
    #[arg(long, value_enum, default_value_t = PolicyArg::Default)]
    policy: PolicyArg,
    /// `category<TAB>surrogate<TAB>weight` file, used with --policy gazetteer.
    #[arg(long, value_name = "PATH")]
    gazetteer: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also print mean ± std per cell to stderr.
    #[arg(long)]
    summary: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Format of both corpora; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Metrics as JSON; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenSynthArgs {
    /// Generator spec as JSON; the built-in default when omitted.
    #[arg(long, value_name = "PATH")]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training corpus destination.
    #[arg(long, value_name = "PATH", required_unless_present = "print_default_spec")]
    train_out: Option<PathBuf>,
    /// Test corpus destination.
    #[arg(long, value_name = "PATH", required_unless_present = "print_default_spec")]
    test_out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Labeled)]
    format: Format,
    /// Print the default spec as JSON and exit.
    #[arg(long, conflicts_with = "spec")]
    print_default_spec: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Transform(a) => commands::transform(a),
        Command::Epsilon(a) => commands::epsilon(a),
        Command::Verify(a) => commands::verify(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::GenSynth(a) => commands::gen_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("deid: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
