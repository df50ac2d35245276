//! Development-set objectives used to choose the smoothing scale.

use std::fmt;
use std::str::FromStr;

use crate::corpus::{adapt_annotation, AnnotationSet, ParallelCorpus, RestrictedAlignment, SentencePair};
use crate::error::{Error, Result};
use crate::model::{normalize_column, TranslationTable};
use crate::num::Real;

pub const DEFAULT_ALPHA: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Whether `a` is strictly better than `b`. NaN is never better.
    pub fn better<T: Real>(self, a: T, b: T) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObjectiveKind {
    /// Log-likelihood of unannotated development pairs.
    MlUnannotated,
    /// Log-probability of the gold restricted alignments.
    MlAnnotated,
    /// Viterbi links that differ from the gold restricted alignment.
    ErrorCount,
    /// Continuous surrogate of the error count; larger `alpha` is sharper.
    SmoothedErrorCount { alpha: f64 },
}

impl ObjectiveKind {
    pub const TOKENS: [&'static str; 4] = ["ml-unannotated", "ml-annotated", "error-count", "smoothed-error-count"];

    pub fn all(alpha: f64) -> [ObjectiveKind; 4] {
        [
            Self::MlUnannotated,
            Self::MlAnnotated,
            Self::ErrorCount,
            Self::SmoothedErrorCount { alpha },
        ]
    }

    pub fn token(self) -> &'static str {
        match self {
            Self::MlUnannotated => Self::TOKENS[0],
            Self::MlAnnotated => Self::TOKENS[1],
            Self::ErrorCount => Self::TOKENS[2],
            Self::SmoothedErrorCount { .. } => Self::TOKENS[3],
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Self::MlUnannotated | Self::MlAnnotated => Direction::Maximize,
            Self::ErrorCount | Self::SmoothedErrorCount { .. } => Direction::Minimize,
        }
    }

    pub fn needs_annotation(self) -> bool {
        !matches!(self, Self::MlUnannotated)
    }

    /// Replaces the sharpness of a smoothed error count; other kinds are unchanged.
    pub fn with_alpha(self, alpha: f64) -> Self {
        match self {
            Self::SmoothedErrorCount { .. } => Self::SmoothedErrorCount { alpha },
            other => other,
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::all(DEFAULT_ALPHA)
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| Error::argument(format!("unknown objective {s:?}")))
    }
}

/// Development data: bare sentence pairs, or pairs with gold restricted alignments.
#[derive(Clone, Debug)]
pub enum DevSet {
    Unannotated(ParallelCorpus),
    Annotated {
        corpus: ParallelCorpus,
        gold: Vec<RestrictedAlignment>,
    },
}

impl DevSet {
    pub fn unannotated(corpus: ParallelCorpus) -> Self {
        DevSet::Unannotated(corpus)
    }

    /// Dev pairs are the annotated pairs of `corpus`, in ascending index order,
    /// each with its sure-only restricted alignment.
    pub fn annotated(corpus: &ParallelCorpus, annotations: &AnnotationSet) -> Result<Self> {
        let indices: Vec<usize> = annotations.pair_indices().collect();
        let dev = corpus.subset(&indices)?;
        let gold = indices
            .iter()
            .zip(dev.pairs())
            .map(|(&k, pair)| {
                let ann = annotations.get(k).expect("index taken from the set");
                adapt_annotation(ann, pair.target_len())
            })
            .collect();
        Self::with_gold(dev, gold)
    }

    pub fn with_gold(corpus: ParallelCorpus, gold: Vec<RestrictedAlignment>) -> Result<Self> {
        if gold.len() != corpus.len() {
            return Err(Error::argument(format!(
                "{} gold alignments for {} dev pairs",
                gold.len(),
                corpus.len()
            )));
        }
        for (k, (a, pair)) in gold.iter().zip(corpus.pairs()).enumerate() {
            if a.len() != pair.target_len() || a.iter().any(|&i| i > pair.source_len()) {
                return Err(Error::argument(format!(
                    "gold alignment {k} does not fit its sentence pair"
                )));
            }
        }
        Ok(DevSet::Annotated { corpus, gold })
    }

    pub fn corpus(&self) -> &ParallelCorpus {
        match self {
            DevSet::Unannotated(c) | DevSet::Annotated { corpus: c, .. } => c,
        }
    }

    pub fn is_annotated(&self) -> bool {
        matches!(self, DevSet::Annotated { .. })
    }

    fn annotated_pairs(&self) -> Result<impl Iterator<Item = (&SentencePair, &RestrictedAlignment)>> {
        match self {
            DevSet::Annotated { corpus, gold } => Ok(corpus.pairs().iter().zip(gold)),
            DevSet::Unannotated(_) => Err(Error::argument("objective requires annotated development pairs")),
        }
    }
}

/// Sum of pair log-likelihoods.
///
/// Words the table has never seen (ids past its vocabularies) are scored by
/// the uniform row: an unknown source word gives `1/|F|` to every target, and
/// an unknown target word gets `(l+1)/|F|` as its inner sum.
pub fn obj_ml_unannotated<T: Real>(dev: &DevSet, table: &TranslationTable<T>) -> Result<T> {
    let uniform = T::one() / T::from_count(table.target_len());
    let mut sum = T::zero();
    for pair in dev.corpus().pairs() {
        let mut ll =
            table.epsilon().ln() - T::from_count(pair.target_len()) * T::from_count(pair.source_len() + 1).ln();
        for &f in &pair.target {
            let inner: T = if f as usize >= table.target_len() {
                T::from_count(pair.source_len() + 1) * uniform
            } else {
                pair.source_with_null()
                    .map(|e| {
                        if (e as usize) < table.source_len() {
                            table.prob(e, f)
                        } else {
                            uniform
                        }
                    })
                    .sum()
            };
            if !(inner > T::zero()) {
                return Ok(T::neg_infinity());
            }
            ll += inner.ln();
        }
        sum += ll;
    }
    Ok(sum)
}

/// `Σ_k Σ_j ln t(f_j | e_{ā_j})` over the gold restricted alignments.
pub fn obj_ml_annotated<T: Real>(dev: &DevSet, table: &TranslationTable<T>) -> Result<T> {
    let mut sum = T::zero();
    for (pair, gold) in dev.annotated_pairs()? {
        table.check_pair(pair)?;
        for (&f, &i) in pair.target.iter().zip(gold.iter()) {
            let p = table.prob(pair.source_at(i), f);
            if !(p > T::zero()) {
                return Ok(T::neg_infinity());
            }
            sum += p.ln();
        }
    }
    Ok(sum)
}

/// Number of target positions whose Viterbi link differs from the gold one.
pub fn obj_error_count<T: Real>(dev: &DevSet, table: &TranslationTable<T>) -> Result<usize> {
    let mut errors = 0;
    for (pair, gold) in dev.annotated_pairs()? {
        table.check_pair(pair)?;
        let predicted = table.viterbi(pair);
        errors += predicted.iter().zip(gold.iter()).filter(|(a, b)| a != b).count();
    }
    Ok(errors)
}

/// `Σ_k Σ_j (1 − p(a_j = ā_j)^α / Σ_i p(a_j = i)^α)`.
///
/// Powers are taken in the log domain and rescaled by the largest one, so
/// large `alpha` neither overflows nor underflows to 0/0.
pub fn obj_smoothed_error_count<T: Real>(dev: &DevSet, table: &TranslationTable<T>, alpha: f64) -> Result<T> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::argument(format!(
            "alpha must be a finite value ≥ 1, got {alpha}"
        )));
    }
    let alpha = T::lit(alpha);
    let mut sum = T::zero();
    let mut buf = Vec::new();
    for (pair, gold) in dev.annotated_pairs()? {
        table.check_pair(pair)?;
        for (&f, &gold_i) in pair.target.iter().zip(gold.iter()) {
            let total = table.column_into(pair, f, &mut buf);
            let posterior = normalize_column(&buf, total);
            sum += T::one() - sharpened_share(&posterior, gold_i, alpha);
        }
    }
    Ok(sum)
}

/// `p_k^α / Σ_i p_i^α` for a probability vector with at least one positive entry.
pub(crate) fn sharpened_share<T: Real>(p: &[T], k: usize, alpha: T) -> T {
    let scaled: Vec<T> = p.iter().map(|&x| alpha * x.ln()).collect();
    let max = scaled.iter().copied().fold(T::neg_infinity(), T::max);
    let weights: Vec<T> = scaled.iter().map(|&s| (s - max).exp()).collect();
    let total: T = weights.iter().copied().sum();
    weights[k] / total
}

/// Evaluates `kind` on `dev` under `table`.
pub fn evaluate_objective<T: Real>(kind: ObjectiveKind, dev: &DevSet, table: &TranslationTable<T>) -> Result<T> {
    match kind {
        ObjectiveKind::MlUnannotated => obj_ml_unannotated(dev, table),
        ObjectiveKind::MlAnnotated => obj_ml_annotated(dev, table),
        ObjectiveKind::ErrorCount => obj_error_count(dev, table).map(T::from_count),
        ObjectiveKind::SmoothedErrorCount { alpha } => obj_smoothed_error_count(dev, table, alpha),
    }
}
