//! EM training for IBM Model 1 with an additively smoothed M-step.
//!
//! Each iteration collects expected link counts from the position-factored
//! posterior and re-estimates
//! `t(f|e) = (count(e,f) + λ·G(e,f)) / (count(e) + λ·Σ_f G(e,f))`.
//! Smoothing is applied in every iteration, not only the last.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::{ParallelCorpus, SentencePair, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::model::{normalize_column, Row, TranslationTable};
use crate::num::Real;
use crate::smoothing::{AddingStrategy, PriorRow};

const PAR_CHUNK: usize = 64;

/// Expected link counts `count(e, f)` with row totals `count(e)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable<T> {
    rows: Vec<Vec<(WordId, T)>>,
    totals: Vec<T>,
    source_vocab: Arc<Vocabulary>,
    target_vocab: Arc<Vocabulary>,
}

impl<T: Real> CountTable<T> {
    pub fn count(&self, e: WordId, f: WordId) -> T {
        self.rows
            .get(e as usize)
            .and_then(|row| row.binary_search_by_key(&f, |&(g, _)| g).ok().map(|pos| row[pos].1))
            .unwrap_or_else(T::zero)
    }

    pub fn total(&self, e: WordId) -> T {
        self.totals.get(e as usize).copied().unwrap_or_else(T::zero)
    }

    /// Nonzero-support cells of row `e`, sorted by target id.
    pub fn row(&self, e: WordId) -> &[(WordId, T)] {
        self.rows.get(e as usize).map_or(&[], Vec::as_slice)
    }

    pub fn source_len(&self) -> usize {
        self.rows.len()
    }

    pub fn target_len(&self) -> usize {
        self.target_vocab.len()
    }

    /// `Σ_e count(e)`, which equals the number of target tokens counted.
    pub fn grand_total(&self) -> T {
        self.totals.iter().copied().sum()
    }
}

struct Accumulator<T> {
    cells: Vec<HashMap<WordId, T>>,
    log_likelihood: T,
}

impl<T: Real> Accumulator<T> {
    fn new(source_len: usize) -> Self {
        Self {
            cells: (0..source_len).map(|_| HashMap::new()).collect(),
            log_likelihood: T::zero(),
        }
    }

    fn add_pair(&mut self, pair: &SentencePair, table: &TranslationTable<T>, buf: &mut Vec<T>) {
        let mut ll =
            table.epsilon().ln() - T::from_count(pair.target_len()) * T::from_count(pair.source_len() + 1).ln();
        for &f in &pair.target {
            let total = table.column_into(pair, f, buf);
            ll += if total > T::zero() {
                total.ln()
            } else {
                T::neg_infinity()
            };
            let posterior = normalize_column(buf, total);
            for (e, p) in pair.source_with_null().zip(posterior) {
                *self.cells[e as usize].entry(f).or_insert_with(T::zero) += p;
            }
        }
        self.log_likelihood += ll;
    }

    fn merge(&mut self, other: Accumulator<T>) {
        for (mine, theirs) in self.cells.iter_mut().zip(other.cells) {
            let mut theirs: Vec<_> = theirs.into_iter().collect();
            theirs.sort_unstable_by_key(|&(f, _)| f);
            for (f, c) in theirs {
                *mine.entry(f).or_insert_with(T::zero) += c;
            }
        }
        self.log_likelihood += other.log_likelihood;
    }

    fn finish(self, corpus: &ParallelCorpus) -> (CountTable<T>, T) {
        let (rows, totals) = self
            .cells
            .into_iter()
            .map(|cells| {
                let mut row: Vec<_> = cells.into_iter().collect();
                row.sort_unstable_by_key(|&(f, _)| f);
                let total: T = row.iter().map(|&(_, c)| c).sum();
                (row, total)
            })
            .unzip();
        let counts = CountTable {
            rows,
            totals,
            source_vocab: Arc::clone(corpus.source_vocab()),
            target_vocab: Arc::clone(corpus.target_vocab()),
        };
        (counts, self.log_likelihood)
    }
}

fn check_coverage<T: Real>(corpus: &ParallelCorpus, table: &TranslationTable<T>) -> Result<()> {
    if table.source_len() < corpus.source_vocab().len() || table.target_len() < corpus.target_vocab().len() {
        return Err(Error::Lookup {
            side: if table.source_len() < corpus.source_vocab().len() {
                "source"
            } else {
                "target"
            },
            word: "vocabulary larger than the translation table".into(),
        });
    }
    Ok(())
}

/// E-step: expected counts under `table`, plus the corpus log-likelihood under it.
fn expectation<T: Real>(corpus: &ParallelCorpus, table: &TranslationTable<T>, parallel: bool) -> (CountTable<T>, T) {
    let source_len = corpus.source_vocab().len();
    let acc = if parallel {
        corpus
            .pairs()
            .par_chunks(PAR_CHUNK)
            .map(|chunk| {
                let mut acc = Accumulator::new(source_len);
                let mut buf = Vec::new();
                for pair in chunk {
                    acc.add_pair(pair, table, &mut buf);
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Accumulator::new(source_len), |mut a, b| {
                a.merge(b);
                a
            })
    } else {
        let mut acc = Accumulator::new(source_len);
        let mut buf = Vec::new();
        for pair in corpus.pairs() {
            acc.add_pair(pair, table, &mut buf);
        }
        acc
    };
    acc.finish(corpus)
}

pub fn expectation_counts<T: Real>(corpus: &ParallelCorpus, table: &TranslationTable<T>) -> Result<CountTable<T>> {
    check_coverage(corpus, table)?;
    Ok(expectation(corpus, table, false).0)
}

/// Unsmoothed M-step: `t(f|e) = count(e,f) / count(e)`.
pub fn maximize<T: Real>(counts: &CountTable<T>) -> TranslationTable<T> {
    let target_len = counts.target_len();
    let rows = counts
        .rows
        .iter()
        .zip(&counts.totals)
        .map(|(row, &total)| {
            if total > T::zero() {
                Row::new(T::zero(), row.iter().map(|&(f, c)| (f, c / total)).collect())
            } else {
                Row::uniform(target_len)
            }
        })
        .collect();
    TranslationTable::from_rows(
        rows,
        Arc::clone(&counts.source_vocab),
        Arc::clone(&counts.target_vocab),
        T::one(),
    )
    .expect("count table rows match its vocabularies")
}

/// Smoothed M-step. Rows whose denominator is zero become uniform.
pub fn maximize_smoothed<T: Real>(
    counts: &CountTable<T>,
    strategy: &AddingStrategy<T>,
    lambda: T,
) -> Result<TranslationTable<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::argument(format!(
            "smoothing scale must be a finite value ≥ 0, got {lambda}"
        )));
    }
    if strategy.target_len() != counts.target_len() {
        return Err(Error::argument(format!(
            "strategy covers {} target words, counts cover {}",
            strategy.target_len(),
            counts.target_len()
        )));
    }
    let target_len = counts.target_len();
    let rows = (0..counts.source_len())
        .map(|e| {
            let e = e as WordId;
            let observed = counts.row(e);
            let denom = counts.total(e) + lambda * strategy.row_sum(e)?;
            if !(denom > T::zero()) {
                return Ok(Row::uniform(target_len));
            }
            Ok(match strategy.prior_row(e)? {
                PriorRow::Constant(g) => {
                    let pseudo = lambda * g;
                    Row::new(
                        pseudo / denom,
                        observed.iter().map(|&(f, c)| (f, (c + pseudo) / denom)).collect(),
                    )
                }
                PriorRow::Sparse(prior) => Row::new(T::zero(), merge_sparse(observed, prior, lambda, denom)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TranslationTable::from_rows(
        rows,
        Arc::clone(&counts.source_vocab),
        Arc::clone(&counts.target_vocab),
        T::one(),
    )
}

/// `(c + λ·g) / denom` over the union of both supports. Prior-only cells
/// that come out zero are left implicit.
fn merge_sparse<T: Real>(observed: &[(WordId, T)], prior: &[(WordId, T)], lambda: T, denom: T) -> Vec<(WordId, T)> {
    let mut out = Vec::with_capacity(observed.len().max(prior.len()));
    let (mut a, mut b) = (0, 0);
    while a < observed.len() || b < prior.len() {
        let fa = observed.get(a).map(|&(f, _)| f);
        let fb = prior.get(b).map(|&(f, _)| f);
        match (fa, fb) {
            (Some(x), Some(y)) if x == y => {
                out.push((x, (observed[a].1 + lambda * prior[b].1) / denom));
                a += 1;
                b += 1;
            }
            (Some(x), y) if y.is_none_or(|y| x < y) => {
                out.push((x, observed[a].1 / denom));
                a += 1;
            }
            (_, Some(y)) => {
                let v = lambda * prior[b].1 / denom;
                if v > T::zero() {
                    out.push((y, v));
                }
                b += 1;
            }
            _ => unreachable!(),
        }
    }
    out
}

/// Training settings. Without a strategy the M-step is the unsmoothed one
/// and `lambda` is ignored.
#[derive(Clone, Debug)]
pub struct TrainConfig<T> {
    pub iterations: usize,
    pub lambda: T,
    pub strategy: Option<Arc<AddingStrategy<T>>>,
    pub epsilon: T,
    /// Parallel E-step; counts agree with the sequential mode up to reduction order.
    pub parallel: bool,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            iterations: 10,
            lambda: T::zero(),
            strategy: None,
            epsilon: T::one(),
            parallel: false,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn smoothed(strategy: Arc<AddingStrategy<T>>, lambda: T) -> Self {
        Self {
            lambda,
            strategy: Some(strategy),
            ..Self::default()
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::argument("at least one EM iteration is required"));
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::argument(format!(
                "smoothing scale must be a finite value ≥ 0, got {}",
                self.lambda
            )));
        }
        if !(self.epsilon > T::zero()) {
            return Err(Error::argument("epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput<T> {
    pub table: TranslationTable<T>,
    /// Training log-likelihood under the table produced by each iteration.
    pub log_likelihood: Vec<T>,
}

/// Runs EM from the uniform table.
pub fn train<T: Real>(corpus: &ParallelCorpus, config: &TrainConfig<T>) -> Result<TrainOutput<T>> {
    train_with(corpus, config, |_, _, _| {})
}

/// Like [`train`], calling `observe(iteration, counts, table)` after each
/// M-step with the counts it consumed and the table it produced.
pub fn train_with<T, F>(corpus: &ParallelCorpus, config: &TrainConfig<T>, mut observe: F) -> Result<TrainOutput<T>>
where
    T: Real,
    F: FnMut(usize, &CountTable<T>, &TranslationTable<T>),
{
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::argument("cannot train on an empty corpus"));
    }
    let mut table = TranslationTable::uniform(Arc::clone(corpus.source_vocab()), Arc::clone(corpus.target_vocab()))?
        .with_epsilon(config.epsilon)?;
    let mut trace = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        let (counts, ll) = expectation(corpus, &table, config.parallel);
        if iteration > 1 {
            trace.push(ll);
        }
        let next = match &config.strategy {
            Some(strategy) => maximize_smoothed(&counts, strategy, config.lambda)?,
            None => maximize(&counts),
        };
        table = next.with_epsilon(config.epsilon)?;
        observe(iteration, &counts, &table);
    }
    trace.push(corpus.pairs().iter().map(|p| table.log_likelihood(p)).sum());
    Ok(TrainOutput {
        table,
        log_likelihood: trace,
    })
}
