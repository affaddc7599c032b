use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use deid_core::corpus::{
    build_category_lexicon, parse_conll_with_warnings, parse_labeled, write_conll, write_labeled, Corpus,
    EntityCategory,
};
use deid_core::mechanism::{transform_corpus, Granularity};
use deid_core::policy::{frequency_policy, gazetteer_policy, min_mass, uniform_policy, PrivateVocabulary};
use deid_core::privacy::{
    effective_p, epsilon as closed_form, min_policy_mass_for_epsilon, recall_adjusted_report, verify_bound, BoundCheck,
};
use deid_core::strategy::{PolicySource, StrategyConfig, StrategyRegistry};
use deid_core::utility::{evaluate_task, gen_synthetic_corpus, summarize, sweep_csv, SweepSpec, SynthSpec, Task};
use deid_core::Error;

use crate::{
    EpsilonArgs, EvaluateArgs, Format, GenSynthArgs, GranularityArg, PolicyArg, PolicyOpts, SweepArgs, TaskArg,
    TransformArgs, VerifyArgs,
};

/// A failed command: message for stderr and process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

const VALIDATION: u8 = 1;
const INPUT: u8 = 2;

impl Failure {
    fn validation(message: impl Display) -> Self {
        Failure {
            code: VALIDATION,
            message: message.to_string(),
        }
    }

    fn input(message: impl Display) -> Self {
        Failure {
            code: INPUT,
            message: message.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() { INPUT } else { VALIDATION };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Attaches the file name to a core error.
fn in_file(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| {
        let code = if e.is_input_error() { INPUT } else { VALIDATION };
        Failure {
            code,
            message: format!("{}: {e}", path.display()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn guess_format(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "json") => Format::Labeled,
        _ => Format::Conll,
    }
}

fn load_corpus(path: &Path, format: Option<Format>) -> Result<(Corpus, Format), Failure> {
    let format = format.unwrap_or_else(|| guess_format(path));
    let text = read(path)?;
    let mut corpus = match format {
        Format::Conll => {
            let (corpus, warnings) = parse_conll_with_warnings(&text).map_err(in_file(path))?;
            for w in warnings {
                log::warn!("{}: line {}: {}", path.display(), w.line, w.message);
            }
            corpus
        }
        Format::Labeled => parse_labeled(&text).map_err(in_file(path))?,
    };
    corpus.name = path.display().to_string();
    Ok((corpus, format))
}

fn render_corpus(corpus: &Corpus, format: Format) -> Result<String, Failure> {
    Ok(match format {
        Format::Conll => write_conll(corpus),
        Format::Labeled => write_labeled(corpus)?,
    })
}

fn granularity(g: GranularityArg) -> Granularity {
    match g {
        GranularityArg::Word => Granularity::Word,
        GranularityArg::Entity => Granularity::Entity,
    }
}

fn task(t: TaskArg) -> Task {
    match t {
        TaskArg::Ner => Task::Ner,
        TaskArg::Intent => Task::Intent,
    }
}

fn show(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "inf".to_owned()
    }
}

fn gazetteer_source(path: Option<&PathBuf>) -> Result<PolicySource, Failure> {
    let path = path.ok_or_else(|| Failure::validation("--policy gazetteer needs --gazetteer PATH"))?;
    let text = read(path)?;
    // parse once here so errors carry the file name
    gazetteer_policy(&text).map_err(in_file(path))?;
    Ok(PolicySource::Gazetteer(text))
}

fn policy_source(opts: &PolicyOpts) -> Result<PolicySource, Failure> {
    if !opts.exemplar.is_empty() {
        if opts.policy != PolicyArg::Default {
            return Err(Failure::validation("--exemplar cannot be combined with --policy"));
        }
        let mut map = BTreeMap::new();
        for pair in &opts.exemplar {
            let (cat, token) = pair
                .split_once('=')
                .filter(|(c, t)| !c.is_empty() && !t.trim().is_empty())
                .ok_or_else(|| Failure::validation(format!("--exemplar `{pair}` is not CAT=TOKEN")))?;
            let cat = EntityCategory::new(cat)?;
            if map.insert(cat.clone(), token.to_owned()).is_some() {
                return Err(Failure::validation(format!("--exemplar given twice for {cat}")));
            }
        }
        return Ok(PolicySource::Exemplars(map));
    }
    if opts.gazetteer.is_some() && opts.policy != PolicyArg::Gazetteer {
        return Err(Failure::validation("--gazetteer needs --policy gazetteer"));
    }
    Ok(match opts.policy {
        PolicyArg::Default => PolicySource::Default,
        PolicyArg::Uniform => PolicySource::Uniform,
        PolicyArg::Corpus => PolicySource::Corpus,
        PolicyArg::Gazetteer => gazetteer_source(opts.gazetteer.as_ref())?,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn transform(a: TransformArgs) -> CmdResult {
    let (corpus, format) = load_corpus(&a.input, a.format)?;
    let config = StrategyConfig {
        name: a.strategy.clone(),
        p: a.p,
        source: policy_source(&a.policy)?,
        granularity: a.granularity.map(granularity),
        consistent_mapping: a.consistent_mapping,
    };
    let strategy = StrategyRegistry::with_defaults().build(&config, &corpus)?;
    let result = transform_corpus(&corpus, &strategy, a.seed)?;
    let report = match a.recall {
        Some(recall) => {
            let vocab = PrivateVocabulary::from_lexicon(&build_category_lexicon(&corpus, strategy.granularity()));
            recall_adjusted_report(&strategy, &vocab, recall)?
        }
        None => result.report,
    };

    let log_path = a.log.unwrap_or_else(|| with_suffix(&a.output, ".log.jsonl"));
    let report_path = a.report.unwrap_or_else(|| with_suffix(&a.output, ".report.json"));
    write(&a.output, &render_corpus(&result.corpus, format)?)?;
    write(&log_path, &result.log.to_jsonl()?)?;
    write(&report_path, &report.to_json()?)?;

    log::info!(
        "{} of {} units replaced; overall epsilon {}",
        result.log.replaced_count(),
        result.log.len(),
        show(report.overall_epsilon)
    );
    if report.guarantee_void {
        log::warn!("consistent mapping is on: the reported epsilon is not a valid bound");
    }
    Ok(())
}

pub fn epsilon(a: EpsilonArgs) -> CmdResult {
    let p = match a.recall {
        Some(recall) => {
            let adjusted = effective_p(a.p, recall)?;
            println!("recall-adjusted\tp = {} x recall {recall} = {adjusted}", a.p);
            adjusted
        }
        None => {
            // validates p
            closed_form(a.p, 1.0)?;
            a.p
        }
    };

    if let Some(pi_min) = a.pi_min {
        println!("epsilon\t{}", show(closed_form(p, pi_min)?));
    } else if a.vocab.is_some() || a.corpus.is_some() {
        per_category_epsilon(&a, p)?;
    } else if a.target_eps.is_none() {
        if p == 1.0 {
            // every unit replaced: no policy can leak
            println!("epsilon\t0");
        } else {
            return Err(Failure::validation("give --pi-min, --vocab or --corpus (or --target-eps)"));
        }
    }

    if let Some(target) = a.target_eps {
        let mass = min_policy_mass_for_epsilon(p, target)?;
        println!("min_policy_mass\t{mass:e}");
    }
    Ok(())
}

fn per_category_epsilon(a: &EpsilonArgs, p: f64) -> CmdResult {
    let lexicon = match &a.corpus {
        Some(path) => {
            let (corpus, _) = load_corpus(path, a.format)?;
            Some(build_category_lexicon(&corpus, granularity(a.granularity)))
        }
        None => None,
    };
    let vocab = match (&a.vocab, &lexicon) {
        (Some(path), _) => PrivateVocabulary::parse(&read(path)?).map_err(in_file(path))?,
        (None, Some(lex)) => PrivateVocabulary::from_lexicon(lex),
        (None, None) => unreachable!("caller checks for a vocabulary source"),
    };
    let policy = match a.policy {
        PolicyArg::Uniform | PolicyArg::Default => uniform_policy(&vocab)?,
        PolicyArg::Corpus => match &lexicon {
            Some(lex) => frequency_policy(lex)?,
            None => return Err(Failure::validation("--policy corpus needs --corpus")),
        },
        PolicyArg::Gazetteer => {
            let path = a
                .gazetteer
                .as_ref()
                .ok_or_else(|| Failure::validation("--policy gazetteer needs --gazetteer PATH"))?;
            gazetteer_policy(&read(path)?).map_err(in_file(path))?
        }
    };

    println!("category\tmin_mass\tepsilon");
    let mut overall: f64 = 0.0;
    for category in vocab.categories() {
        let mass = min_mass(&policy, &vocab, category)?;
        let eps = closed_form(p, mass)?;
        overall = overall.max(eps);
        println!("{category}\t{mass}\t{}", show(eps));
    }
    println!("overall\t\t{}", show(overall));
    Ok(())
}

pub fn verify(a: VerifyArgs) -> CmdResult {
    if a.p_grid.is_empty() || a.k_grid.is_empty() {
        return Err(Failure::validation("empty grid"));
    }
    let category = EntityCategory::new(EntityCategory::LOC)?;
    println!("K\tp\ttheoretical\tempirical\tresult");
    let mut failed = 0;
    for &k in &a.k_grid {
        let forms: BTreeSet<String> = (0..k).map(|i| format!("t{i:04}")).collect();
        let vocab = PrivateVocabulary::new([(category.clone(), forms)].into_iter().collect())?;
        let policy = uniform_policy(&vocab)?;
        for &p in &a.p_grid {
            let check = verify_bound(p, &policy, &vocab, &category)?;
            let check = BoundCheck::compare(check.theoretical + a.inject_error, check.empirical);
            if !check.pass {
                failed += 1;
            }
            println!(
                "{k}\t{p}\t{}\t{}\t{}",
                show(check.theoretical),
                show(check.empirical),
                if check.pass { "pass" } else { "FAIL" }
            );
        }
    }
    let total = a.k_grid.len() * a.p_grid.len();
    if failed > 0 {
        return Err(Failure::validation(format!("{failed} of {total} cells disagree")));
    }
    println!("all {total} cells agree");
    Ok(())
}

pub fn sweep(a: SweepArgs) -> CmdResult {
    let (train, _) = load_corpus(&a.train, a.format)?;
    let (test, _) = load_corpus(&a.test, a.format)?;
    let value_source = match a.policy {
        PolicyArg::Default => PolicySource::Default,
        PolicyArg::Uniform => PolicySource::Uniform,
        PolicyArg::Corpus => PolicySource::Corpus,
        PolicyArg::Gazetteer => gazetteer_source(a.gazetteer.as_ref())?,
    };
    let strategies = a
        .strategies
        .iter()
        .map(|name| {
            let config = StrategyConfig::new(name.clone(), 0.0);
            if matches!(name.as_str(), "word_by_word" | "full_entity") {
                config.with_source(value_source.clone())
            } else {
                config
            }
        })
        .collect();
    let spec = SweepSpec {
        strategies,
        p_grid: a.p_grid,
        seeds: a.seeds,
        tasks: a.tasks.into_iter().map(task).collect(),
    };
    let rows = deid_core::utility::sweep(&train, &test, &spec, &StrategyRegistry::with_defaults())?;
    let csv = sweep_csv(&rows)?;
    match &a.output {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    if a.summary {
        for s in summarize(&rows) {
            eprintln!("{s}");
        }
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> CmdResult {
    let (train, _) = load_corpus(&a.train, a.format)?;
    let (test, _) = load_corpus(&a.test, a.format)?;
    let t = task(a.task);
    let metrics = evaluate_task(&train, &test, t)?;
    let mut json = serde_json::to_string_pretty(&metrics).map_err(Error::from)?;
    json.push('\n');
    match &a.output {
        Some(path) => write(path, &json)?,
        None => print!("{json}"),
    }
    log::info!("{} = {}", t.metric(), t.headline(&metrics));
    Ok(())
}

pub fn gen_synth(a: GenSynthArgs) -> CmdResult {
    if a.print_default_spec {
        let mut json = serde_json::to_string_pretty(&SynthSpec::default()).map_err(Error::from)?;
        json.push('\n');
        print!("{json}");
        return Ok(());
    }
    let spec = match &a.spec {
        Some(path) => serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        None => SynthSpec::default(),
    };
    let (train, test) = gen_synthetic_corpus(&spec, a.seed)?;
    let (train_out, test_out) = match (&a.train_out, &a.test_out) {
        (Some(tr), Some(te)) => (tr, te),
        _ => return Err(Failure::validation("--train-out and --test-out are required")),
    };
    write(train_out, &render_corpus(&train, a.format)?)?;
    write(test_out, &render_corpus(&test, a.format)?)?;
    Ok(())
}
