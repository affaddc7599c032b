use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::mechanism::transform_corpus;
use crate::strategy::{StrategyConfig, StrategyRegistry};

use super::{evaluate_task, Task};

/// Strategies × replacement probabilities × seeds, each cell trained on the
/// transformed training set and scored on the untouched test set.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// The `p` of each config is ignored; it comes from `p_grid`.
    pub strategies: Vec<StrategyConfig>,
    pub p_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    #[serde(serialize_with = "inf_as_text")]
    pub epsilon: f64,
    pub strategy: String,
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

fn inf_as_text<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

pub fn sweep(
    train: &Corpus,
    test: &Corpus,
    spec: &SweepSpec,
    registry: &StrategyRegistry,
) -> Result<Vec<SweepRow>> {
    if spec.seeds.is_empty() || spec.tasks.is_empty() || spec.strategies.is_empty() {
        return Err(Error::invalid("sweep needs at least one strategy, seed and task"));
    }
    let mut cells = Vec::new();
    for template in &spec.strategies {
        // a strategy with a fixed p is run once, not once per grid point
        let ps: Vec<f64> = match registry.get(&template.name)?.fixed_p() {
            Some(p) => vec![p],
            None if spec.p_grid.is_empty() => {
                return Err(Error::invalid("sweep needs a non-empty p grid"));
            }
            None => spec.p_grid.clone(),
        };
        for p in ps {
            for &seed in &spec.seeds {
                let mut config = template.clone();
                config.p = p;
                cells.push((config, seed));
            }
        }
    }

    let per_cell: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|(config, seed)| {
            let strategy = registry.build(config, train)?;
            let transformed = transform_corpus(train, &strategy, *seed)?;
            let epsilon = transformed.report.overall_epsilon;
            spec.tasks
                .iter()
                .map(|&task| {
                    let m = evaluate_task(&transformed.corpus, test, task)?;
                    Ok(SweepRow {
                        p: strategy.p(),
                        epsilon,
                        strategy: config.name.clone(),
                        task: task.to_string(),
                        metric: task.metric().to_owned(),
                        value: task.headline(&m),
                        seed: *seed,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["p", "epsilon", "strategy", "task", "metric", "value", "seed"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Mean and sample standard deviation across seeds for one
/// (strategy, p, task) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub strategy: String,
    pub p: f64,
    #[serde(serialize_with = "inf_as_text")]
    pub epsilon: f64,
    pub task: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

impl fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} p={:<5} eps={:<8} {:<7} {}={:.3} ± {:.3} (n={})",
            self.strategy,
            self.p,
            if self.epsilon.is_finite() { format!("{:.3}", self.epsilon) } else { "inf".into() },
            self.task,
            self.metric,
            self.mean,
            self.std,
            self.runs
        )
    }
}

/// Groups rows by (strategy, p, task) in order of first appearance.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut groups: Vec<(&SweepRow, Vec<f64>)> = Vec::new();
    for row in rows {
        match groups
            .iter_mut()
            .find(|(r, _)| r.strategy == row.strategy && r.p == row.p && r.task == row.task)
        {
            Some((_, values)) => values.push(row.value),
            None => groups.push((row, vec![row.value])),
        }
    }
    groups
        .into_iter()
        .map(|(row, values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = if values.len() > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SweepSummary {
                strategy: row.strategy.clone(),
                p: row.p,
                epsilon: row.epsilon,
                task: row.task.clone(),
                metric: row.metric.clone(),
                mean,
                std,
                runs: values.len(),
            }
        })
        .collect()
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Ner => "ner",
            Task::Intent => "intent",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ner" => Ok(Task::Ner),
            "intent" => Ok(Task::Intent),
            _ => Err(Error::invalid(format!("unknown task `{s}`; expected ner or intent"))),
        }
    }
}
