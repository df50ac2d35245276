//! The strategy × objective grid: tune each cell, retrain on the whole
//! corpus at the chosen scale, and score held-out annotated pairs.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::{
    occurrence_stats, split_annotated, split_unannotated, AnnotationSet, OccurrenceStats, ParallelCorpus,
};
use crate::error::{Error, Result};
use crate::eval::{decreasement, evaluate_corpus, EvalReport};
use crate::objectives::{DevSet, ObjectiveKind};
use crate::smoothing::{AddingStrategy, StrategyKind};
use crate::trainer::{train, TrainConfig};
use crate::tuner::{tune, TuneConfig};

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    /// Annotated pairs used for tuning; the rest are test pairs.
    pub dev_size: usize,
    /// Share of the corpus held out as development data for ml-unannotated.
    pub dev_fraction: f64,
    pub seed: u64,
    pub strategies: Vec<StrategyKind>,
    pub objectives: Vec<ObjectiveKind>,
    pub tune: TuneConfig<f64>,
    pub train: TrainConfig<f64>,
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub strategy: StrategyKind,
    pub objective: ObjectiveKind,
    pub lambda: Option<f64>,
    pub dev_value: Option<f64>,
    pub report: Option<EvalReport<f64>>,
    pub decreasement: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub dev_pairs: Vec<usize>,
    pub test_pairs: Vec<usize>,
    pub baseline: EvalReport<f64>,
    pub cells: Vec<CellOutcome>,
}

/// Runs the baseline and every requested cell. A failing cell is recorded
/// in its outcome; only failures shared by all cells (bad split, baseline
/// training) abort the run.
pub fn run_experiment(
    corpus: &ParallelCorpus,
    annotations: &AnnotationSet,
    spec: &ExperimentSpec,
) -> Result<ExperimentReport> {
    if spec.strategies.is_empty() || spec.objectives.is_empty() {
        return Err(Error::argument(
            "an experiment needs at least one strategy and one objective",
        ));
    }
    let (dev_ann, test_ann) = split_annotated(annotations, spec.dev_size, spec.seed)?;
    let test_pairs: Vec<usize> = test_ann.pair_indices().collect();

    let baseline_config = TrainConfig {
        lambda: 0.0,
        strategy: None,
        ..spec.train.clone()
    };
    let baseline_model = train(corpus, &baseline_config)?;
    let baseline = evaluate_corpus(&baseline_model.table, corpus, &test_ann, &test_pairs)?;

    let full_stats = Arc::new(occurrence_stats(corpus));
    let annotated_dev = DevSet::annotated(corpus, &dev_ann)?;
    let unannotated = if spec.objectives.iter().any(|o| !o.needs_annotation()) {
        let (train_part, dev_part) = split_unannotated(corpus, spec.dev_fraction, spec.seed)?;
        let stats = Arc::new(occurrence_stats(&train_part));
        Some((train_part, DevSet::unannotated(dev_part), stats))
    } else {
        None
    };

    let jobs: Vec<(StrategyKind, ObjectiveKind)> = spec
        .strategies
        .iter()
        .flat_map(|&s| spec.objectives.iter().map(move |&o| (s, o)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(strategy, objective)| {
            let run = || -> Result<(f64, f64, EvalReport<f64>)> {
                let (train_corpus, dev, stats): (&ParallelCorpus, &DevSet, &Arc<OccurrenceStats>) =
                    match (&unannotated, objective.needs_annotation()) {
                        (Some((t, d, s)), false) => (t, d, s),
                        _ => (corpus, &annotated_dev, &full_stats),
                    };
                let tuned = tune(
                    train_corpus,
                    dev,
                    Arc::new(AddingStrategy::new(strategy, Arc::clone(stats))),
                    objective,
                    &spec.tune,
                    &spec.train,
                )?;
                let config = TrainConfig {
                    lambda: tuned.lambda_star,
                    strategy: Some(Arc::new(AddingStrategy::new(strategy, Arc::clone(&full_stats)))),
                    ..spec.train.clone()
                };
                let model = train(corpus, &config)?;
                let report = evaluate_corpus(&model.table, corpus, &test_ann, &test_pairs)?;
                Ok((tuned.lambda_star, tuned.objective_value, report))
            };
            match run() {
                Ok((lambda, value, report)) => CellOutcome {
                    strategy,
                    objective,
                    lambda: Some(lambda),
                    dev_value: Some(value),
                    decreasement: Some(decreasement(baseline.aer, report.aer)),
                    report: Some(report),
                    error: None,
                },
                Err(err) => CellOutcome {
                    strategy,
                    objective,
                    lambda: None,
                    dev_value: None,
                    report: None,
                    decreasement: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();

    Ok(ExperimentReport {
        dev_pairs: dev_ann.pair_indices().collect(),
        test_pairs,
        baseline,
        cells,
    })
}

fn opt(v: Option<f64>, width: usize, precision: usize) -> String {
    match v {
        Some(x) => format!("{x:>width$.precision$}"),
        None => format!("{:>width$}", "failed"),
    }
}

impl ExperimentReport {
    pub fn failed_cells(&self) -> impl Iterator<Item = &CellOutcome> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    fn strategies(&self) -> Vec<StrategyKind> {
        let mut out: Vec<StrategyKind> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.strategy) {
                out.push(c.strategy);
            }
        }
        out
    }

    fn objectives(&self) -> Vec<ObjectiveKind> {
        let mut out: Vec<ObjectiveKind> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.objective) {
                out.push(c.objective);
            }
        }
        out
    }

    fn cell(&self, s: StrategyKind, o: ObjectiveKind) -> Option<&CellOutcome> {
        self.cells.iter().find(|c| c.strategy == s && c.objective == o)
    }

    fn table(
        &self,
        out: &mut String,
        title: &str,
        value: impl Fn(&CellOutcome) -> Option<f64>,
        precision: usize,
        width: usize,
    ) {
        let objectives = self.objectives();
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:<18}", "strategy");
        for o in &objectives {
            let _ = write!(out, " {:>w$}", o.token(), w = width.max(o.token().len()));
        }
        out.push('\n');
        for s in self.strategies() {
            let _ = write!(out, "{:<18}", s.token());
            for o in &objectives {
                let v = self.cell(s, *o).and_then(&value);
                let _ = write!(out, " {}", opt(v, width.max(o.token().len()), precision));
            }
            out.push('\n');
        }
        out.push('\n');
    }

    /// Human-readable summary: baseline, then AER, decreasement and tuned scale per cell.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "development pairs: {}    test pairs: {}\n",
            self.dev_pairs.len(),
            self.test_pairs.len()
        );
        let _ = writeln!(out, "baseline (no smoothing)");
        let _ = writeln!(
            out,
            "AER {:.6}    precision {:.6}    recall {:.6}\n",
            self.baseline.aer, self.baseline.precision, self.baseline.recall
        );
        self.table(&mut out, "AER", |c| c.report.as_ref().map(|r| r.aer), 6, 10);
        self.table(&mut out, "decreasement in AER", |c| c.decreasement, 6, 10);
        let mut lambdas = String::new();
        self.table(&mut lambdas, "tuned scale", |c| c.lambda, 4, 10);
        out.push_str(lambdas.trim_end());
        out.push('\n');
        out
    }

    /// One tab-separated row for the baseline and one per cell.
    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("strategy\tobjective\tstatus\tlambda\tdev_value\tprecision\trecall\taer\tdecreasement\n");
        let b = &self.baseline;
        let _ = writeln!(
            out,
            "baseline\t-\tok\t0\t-\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            b.precision, b.recall, b.aer, 0.0
        );
        let fmt = |v: Option<f64>, spec: fn(f64) -> String| v.map_or("-".to_owned(), spec);
        for c in &self.cells {
            let r = c.report.as_ref();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.strategy,
                c.objective,
                if c.error.is_some() { "failed" } else { "ok" },
                fmt(c.lambda, |x| format!("{x:.10e}")),
                fmt(c.dev_value, |x| format!("{x:.10e}")),
                fmt(r.map(|r| r.precision), |x| format!("{x:.6}")),
                fmt(r.map(|r| r.recall), |x| format!("{x:.6}")),
                fmt(r.map(|r| r.aer), |x| format!("{x:.6}")),
                fmt(c.decreasement, |x| format!("{x:.6}")),
            );
        }
        out
    }
}
