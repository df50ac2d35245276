//! Adding strategies `G(e, f)`: the pseudo-counts that the smoothed M-step
//! adds to each expected count, before scaling by `λ`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::corpus::{OccurrenceStats, WordId};
use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyKind {
    /// `G ≡ 1`; with `λ = n` this is add-n smoothing.
    AddOne,
    /// `G(e, f) = n_e`, the token count of the source word.
    AddSourceCount,
    /// `G(e, f) = dice(e, f)`.
    AddDice,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [Self::AddOne, Self::AddSourceCount, Self::AddDice];

    pub fn token(self) -> &'static str {
        match self {
            Self::AddOne => "add-one",
            Self::AddSourceCount => "add-source-count",
            Self::AddDice => "add-dice",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| Error::argument(format!("unknown strategy {s:?}")))
    }
}

pub fn g_add_one<T: Real>(_e: WordId, _f: WordId) -> T {
    T::one()
}

/// `n_e`, independent of `f`; NULL counts once per sentence pair.
pub fn g_source_count<T: Real>(e: WordId, f: WordId, stats: &OccurrenceStats) -> Result<T> {
    check_target(f, stats)?;
    stats
        .source_count(e)
        .map(|n| T::lit(n as f64))
        .ok_or_else(|| unknown_source(e))
}

/// `2·cooc(e,f) / (n_f + n_e)`, and exactly zero when the words never co-occur.
pub fn g_dice<T: Real>(e: WordId, f: WordId, stats: &OccurrenceStats) -> Result<T> {
    let n_e = stats.source_count(e).ok_or_else(|| unknown_source(e))?;
    let n_f = stats.target_count(f).ok_or_else(|| unknown_target(f))?;
    let cooc = stats.cooc(e, f).ok_or_else(|| unknown_target(f))?;
    Ok(dice_value(cooc, n_e, n_f))
}

fn dice_value<T: Real>(cooc: u64, n_e: u64, n_f: u64) -> T {
    if cooc == 0 {
        return T::zero();
    }
    T::lit(2.0 * cooc as f64) / T::lit((n_f + n_e) as f64)
}

fn check_target(f: WordId, stats: &OccurrenceStats) -> Result<()> {
    if (f as usize) < stats.target_vocab_len() {
        Ok(())
    } else {
        Err(unknown_target(f))
    }
}

fn unknown_source(e: WordId) -> Error {
    Error::Lookup {
        side: "source",
        word: format!("id {e}"),
    }
}

fn unknown_target(f: WordId) -> Error {
    Error::Lookup {
        side: "target",
        word: format!("id {f}"),
    }
}

/// Shape of one source word's pseudo-count row, as the M-step consumes it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PriorRow<'a, T> {
    /// The same value for every target word.
    Constant(T),
    /// Nonzero values only at the listed targets (sorted by id).
    Sparse(&'a [(WordId, T)]),
}

/// A strategy bound to the statistics of one training corpus, with row sums
/// precomputed.
#[derive(Clone, Debug)]
pub struct AddingStrategy<T> {
    kind: StrategyKind,
    stats: Arc<OccurrenceStats>,
    target_len: usize,
    source_counts: Vec<T>,
    dice_rows: Vec<Vec<(WordId, T)>>,
    dice_row_sums: Vec<T>,
}

impl<T: Real> AddingStrategy<T> {
    pub fn new(kind: StrategyKind, stats: Arc<OccurrenceStats>) -> Self {
        let target_len = stats.target_vocab_len();
        let source_counts = (0..stats.source_vocab_len() as WordId)
            .map(|e| T::lit(stats.source_count(e).unwrap_or(0) as f64))
            .collect();
        let (dice_rows, dice_row_sums) = if kind == StrategyKind::AddDice {
            dice_table(&stats)
        } else {
            (Vec::new(), Vec::new())
        };
        Self {
            kind,
            stats,
            target_len,
            source_counts,
            dice_rows,
            dice_row_sums,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn stats(&self) -> &Arc<OccurrenceStats> {
        &self.stats
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    pub fn g(&self, e: WordId, f: WordId) -> Result<T> {
        match self.kind {
            StrategyKind::AddOne => {
                self.source_index(e)?;
                check_target(f, &self.stats)?;
                Ok(g_add_one(e, f))
            }
            StrategyKind::AddSourceCount => g_source_count(e, f, &self.stats),
            StrategyKind::AddDice => g_dice(e, f, &self.stats),
        }
    }

    /// `Σ_f G(e, f)` over the whole target vocabulary, in closed form.
    pub fn row_sum(&self, e: WordId) -> Result<T> {
        let i = self.source_index(e)?;
        let width = T::from_count(self.target_len);
        Ok(match self.kind {
            StrategyKind::AddOne => width,
            StrategyKind::AddSourceCount => self.source_counts[i] * width,
            StrategyKind::AddDice => self.dice_row_sums[i],
        })
    }

    pub fn prior_row(&self, e: WordId) -> Result<PriorRow<'_, T>> {
        let i = self.source_index(e)?;
        Ok(match self.kind {
            StrategyKind::AddOne => PriorRow::Constant(T::one()),
            StrategyKind::AddSourceCount => PriorRow::Constant(self.source_counts[i]),
            StrategyKind::AddDice => PriorRow::Sparse(&self.dice_rows[i]),
        })
    }

    fn source_index(&self, e: WordId) -> Result<usize> {
        let i = e as usize;
        if i < self.source_counts.len() {
            Ok(i)
        } else {
            Err(unknown_source(e))
        }
    }
}

fn dice_table<T: Real>(stats: &OccurrenceStats) -> (Vec<Vec<(WordId, T)>>, Vec<T>) {
    (0..stats.source_vocab_len() as WordId)
        .map(|e| {
            let n_e = stats.source_count(e).unwrap_or(0);
            let row: Vec<(WordId, T)> = stats
                .cooc_row(e)
                .unwrap_or(&[])
                .iter()
                .map(|&(f, c)| (f, dice_value(c, n_e, stats.target_count(f).unwrap_or(0))))
                .collect();
            let sum: T = row.iter().map(|&(_, g)| g).sum();
            (row, sum)
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{occurrence_stats, ParallelCorpus, NULL_ID};

    fn t1() -> (ParallelCorpus, Arc<OccurrenceStats>) {
        let c = ParallelCorpus::from_texts("das haus\ndas buch", "the house\nthe book", false).unwrap();
        let s = Arc::new(occurrence_stats(&c));
        (c, s)
    }

    #[test]
    fn tokens_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.token().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("add-two".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn add_one_values() {
        let (_, s) = t1();
        let st = AddingStrategy::<f64>::new(StrategyKind::AddOne, s);
        assert_eq!(st.g(2, 1).unwrap(), 1.0);
        assert_eq!(st.row_sum(3).unwrap(), 3.0);
        assert_eq!(g_add_one::<f32>(0, 0), 1.0);
    }

    #[test]
    fn source_count_values() {
        let (c, s) = t1();
        let das = c.source_vocab().id("das").unwrap();
        let haus = c.source_vocab().id("haus").unwrap();
        for f in 0..3 {
            assert_eq!(g_source_count::<f64>(das, f, &s).unwrap(), 2.0);
            assert_eq!(g_source_count::<f64>(haus, f, &s).unwrap(), 1.0);
            assert_eq!(g_source_count::<f64>(NULL_ID, f, &s).unwrap(), 2.0);
        }
        assert!(g_source_count::<f64>(42, 0, &s).is_err());
        let st = AddingStrategy::<f64>::new(StrategyKind::AddSourceCount, s);
        assert_eq!(st.row_sum(das).unwrap(), 6.0);
    }

    #[test]
    fn dice_values() {
        let (c, s) = t1();
        let sv = c.source_vocab();
        let tv = c.target_vocab();
        let (das, haus) = (sv.id("das").unwrap(), sv.id("haus").unwrap());
        let (the, house, book) = (tv.id("the").unwrap(), tv.id("house").unwrap(), tv.id("book").unwrap());
        assert_eq!(g_dice::<f64>(das, the, &s).unwrap(), 1.0);
        assert!((g_dice::<f64>(haus, the, &s).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g_dice::<f64>(haus, book, &s).unwrap(), 0.0);
        assert!(g_dice::<f64>(haus, 9, &s).is_err());

        let st = AddingStrategy::<f64>::new(StrategyKind::AddDice, s);
        // haus co-occurs with the (2/3) and house (2·1/(1+1) = 1)
        assert!((st.row_sum(haus).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(st.g(haus, house).unwrap(), 1.0);
        assert!(st.row_sum(99).is_err());
    }
}
