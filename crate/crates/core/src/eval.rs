//! Precision, recall and alignment error rate against sure/possible gold links.

use std::fmt;

use crate::corpus::{adapt_annotation, AnnotationSet, Link, LinkSet, ParallelCorpus, SentencePair};
use crate::error::{Error, Result};
use crate::model::TranslationTable;
use crate::num::Real;

/// Viterbi links of one pair. NULL links are left out unless `emit_null`.
pub fn predicted_links<T: Real>(pair: &SentencePair, table: &TranslationTable<T>, emit_null: bool) -> Result<LinkSet> {
    table.check_pair(pair)?;
    Ok(links_from_alignment(&table.viterbi(pair), emit_null))
}

pub fn links_from_alignment(alignment: &[usize], emit_null: bool) -> LinkSet {
    alignment
        .iter()
        .enumerate()
        .filter(|&(_, &i)| emit_null || i != 0)
        .map(|(j, &i)| Link::new(i, j + 1))
        .collect()
}

/// Set sizes that every metric is computed from. Summing these over pairs
/// gives micro-averaged metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinkCounts {
    /// |A|
    pub predicted: usize,
    /// |S|
    pub sure: usize,
    /// |P ∩ A|
    pub possible_hits: usize,
    /// |S ∩ A|
    pub sure_hits: usize,
}

impl LinkCounts {
    pub fn from_sets(a: &LinkSet, s: &LinkSet, p: &LinkSet) -> Self {
        Self {
            predicted: a.len(),
            sure: s.len(),
            possible_hits: a.intersection(p).count(),
            sure_hits: a.intersection(s).count(),
        }
    }

    pub fn add(&mut self, other: LinkCounts) {
        self.predicted += other.predicted;
        self.sure += other.sure;
        self.possible_hits += other.possible_hits;
        self.sure_hits += other.sure_hits;
    }

    /// `|P∩A| / |A|`, or 1 when nothing is predicted.
    pub fn precision<T: Real>(&self) -> T {
        ratio_or(self.possible_hits, self.predicted, T::one())
    }

    /// `|S∩A| / |S|`, or 1 when there are no sure links.
    pub fn recall<T: Real>(&self) -> T {
        ratio_or(self.sure_hits, self.sure, T::one())
    }

    /// `1 − (|P∩A| + |S∩A|) / (|A| + |S|)`, or 0 when both sets are empty.
    pub fn aer<T: Real>(&self) -> T {
        T::one()
            - ratio_or(
                self.possible_hits + self.sure_hits,
                self.predicted + self.sure,
                T::one(),
            )
    }
}

fn ratio_or<T: Real>(num: usize, den: usize, empty: T) -> T {
    if den == 0 {
        empty
    } else {
        T::from_count(num) / T::from_count(den)
    }
}

pub fn precision<T: Real>(a: &LinkSet, p: &LinkSet) -> T {
    LinkCounts::from_sets(a, &LinkSet::new(), p).precision()
}

pub fn recall<T: Real>(a: &LinkSet, s: &LinkSet) -> T {
    LinkCounts::from_sets(a, s, &LinkSet::new()).recall()
}

pub fn aer<T: Real>(a: &LinkSet, s: &LinkSet, p: &LinkSet) -> T {
    LinkCounts::from_sets(a, s, p).aer()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport<T> {
    pub precision: T,
    pub recall: T,
    pub aer: T,
    /// Viterbi links differing from the sure-only restricted gold alignment.
    pub error_count: usize,
    pub pair_count: usize,
    pub counts: LinkCounts,
}

impl<T: Real> EvalReport<T> {
    pub fn from_counts(counts: LinkCounts, error_count: usize, pair_count: usize) -> Self {
        Self {
            precision: counts.precision(),
            recall: counts.recall(),
            aer: counts.aer(),
            error_count,
            pair_count,
            counts,
        }
    }

    /// `metric<TAB>value` lines.
    pub fn to_tsv(&self) -> String {
        let rows: [(&str, String); 9] = [
            ("precision", format!("{:.6}", self.precision)),
            ("recall", format!("{:.6}", self.recall)),
            ("aer", format!("{:.6}", self.aer)),
            ("error_count", self.error_count.to_string()),
            ("pair_count", self.pair_count.to_string()),
            ("link_count", self.counts.predicted.to_string()),
            ("sure_count", self.counts.sure.to_string()),
            ("possible_hits", self.counts.possible_hits.to_string()),
            ("sure_hits", self.counts.sure_hits.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect()
    }
}

impl<T: Real> fmt::Display for EvalReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>10}", "metric", "value")?;
        writeln!(f, "{:<12} {:>10.6}", "precision", self.precision)?;
        writeln!(f, "{:<12} {:>10.6}", "recall", self.recall)?;
        writeln!(f, "{:<12} {:>10.6}", "AER", self.aer)?;
        writeln!(f, "{:<12} {:>10}", "errors", self.error_count)?;
        writeln!(f, "{:<12} {:>10}", "pairs", self.pair_count)?;
        writeln!(f, "{:<12} {:>10}", "|A|", self.counts.predicted)?;
        write!(f, "{:<12} {:>10}", "|S|", self.counts.sure)
    }
}

/// Micro-averaged scores of `table`'s Viterbi alignments over `pair_subset`
/// (0-based indices into `corpus`). Every listed pair must be annotated.
pub fn evaluate_corpus<T: Real>(
    table: &TranslationTable<T>,
    corpus: &ParallelCorpus,
    annotation: &AnnotationSet,
    pair_subset: &[usize],
) -> Result<EvalReport<T>> {
    let mut counts = LinkCounts::default();
    let mut errors = 0;
    for &k in pair_subset {
        let gold = annotation
            .get(k)
            .ok_or_else(|| Error::argument(format!("pair {} has no annotation", k + 1)))?;
        let pair = corpus
            .pairs()
            .get(k)
            .ok_or_else(|| Error::argument(format!("pair {} is not in the corpus", k + 1)))?;
        table.check_pair(pair)?;
        let viterbi = table.viterbi(pair);
        let a = links_from_alignment(&viterbi, false);
        counts.add(LinkCounts::from_sets(&a, &gold.sure, &gold.possible));
        let restricted = adapt_annotation(gold, pair.target_len());
        errors += viterbi.iter().zip(restricted.iter()).filter(|(x, y)| x != y).count();
    }
    Ok(EvalReport::from_counts(counts, errors, pair_subset.len()))
}

/// AER improvement of `tuned` over `baseline`; positive means better.
pub fn decreasement<T: Real>(baseline_aer: T, tuned_aer: T) -> T {
    baseline_aer - tuned_aer
}
