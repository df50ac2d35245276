//! The word translation table `t(f|e)` and the IBM Model 1 quantities
//! derived from it: link posteriors, Viterbi alignments and sentence-pair
//! likelihoods.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::corpus::{read_text, RestrictedAlignment, SentencePair, Vocabulary, WordId, NULL_ID, NULL_WORD};
use crate::error::{Error, Result};
use crate::num::Real;

/// One source word's distribution over the target vocabulary.
///
/// Targets listed in `entries` take their stored value; every other target
/// takes `background`. Unsmoothed rows have a zero background, constant
/// smoothing produces a positive one, so dense rows are never materialized.
#[derive(Clone, Debug, PartialEq)]
pub struct Row<T> {
    background: T,
    entries: Vec<(WordId, T)>,
}

impl<T: Real> Row<T> {
    pub fn uniform(target_len: usize) -> Self {
        Self {
            background: T::one() / T::from_count(target_len),
            entries: Vec::new(),
        }
    }

    /// `entries` must be sorted by target id without duplicates.
    pub fn new(background: T, entries: Vec<(WordId, T)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Self { background, entries }
    }

    pub fn background(&self) -> T {
        self.background
    }

    pub fn entries(&self) -> &[(WordId, T)] {
        &self.entries
    }

    pub fn get(&self, f: WordId) -> T {
        match self.entries.binary_search_by_key(&f, |&(g, _)| g) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => self.background,
        }
    }

    /// Sum over a target vocabulary of `target_len` words.
    pub fn mass(&self, target_len: usize) -> T {
        let explicit: T = self.entries.iter().map(|&(_, p)| p).sum();
        let implicit = T::from_count(target_len.saturating_sub(self.entries.len()));
        explicit + self.background * implicit
    }
}

/// Sparse `t(f|e)` over a source vocabulary (NULL at id 0) and a target vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslationTable<T> {
    rows: Vec<Row<T>>,
    source_vocab: Arc<Vocabulary>,
    target_vocab: Arc<Vocabulary>,
    epsilon: T,
}

impl<T: Real> TranslationTable<T> {
    /// `t(f|e) = 1/|F|` for every source and target word.
    pub fn uniform(source_vocab: Arc<Vocabulary>, target_vocab: Arc<Vocabulary>) -> Result<Self> {
        if source_vocab.is_empty() || target_vocab.is_empty() {
            return Err(Error::argument("uniform initialization needs non-empty vocabularies"));
        }
        let row = Row::uniform(target_vocab.len());
        Ok(Self {
            rows: vec![row; source_vocab.len()],
            source_vocab,
            target_vocab,
            epsilon: T::one(),
        })
    }

    pub fn from_rows(
        rows: Vec<Row<T>>,
        source_vocab: Arc<Vocabulary>,
        target_vocab: Arc<Vocabulary>,
        epsilon: T,
    ) -> Result<Self> {
        if rows.len() != source_vocab.len() {
            return Err(Error::argument(format!(
                "{} rows for a source vocabulary of {} words",
                rows.len(),
                source_vocab.len()
            )));
        }
        if !(epsilon > T::zero()) {
            return Err(Error::argument("epsilon must be positive"));
        }
        let target_len = target_vocab.len();
        for row in &rows {
            let in_range = row.entries.iter().all(|&(f, _)| (f as usize) < target_len);
            let non_negative = row.background >= T::zero() && row.entries.iter().all(|&(_, p)| p >= T::zero());
            if !in_range || !non_negative {
                return Err(Error::argument("row with out-of-range target or negative probability"));
            }
        }
        Ok(Self {
            rows,
            source_vocab,
            target_vocab,
            epsilon,
        })
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::argument("epsilon must be positive"));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn source_vocab(&self) -> &Arc<Vocabulary> {
        &self.source_vocab
    }

    pub fn target_vocab(&self) -> &Arc<Vocabulary> {
        &self.target_vocab
    }

    pub fn source_len(&self) -> usize {
        self.rows.len()
    }

    pub fn target_len(&self) -> usize {
        self.target_vocab.len()
    }

    pub fn row(&self, e: WordId) -> Option<&Row<T>> {
        self.rows.get(e as usize)
    }

    pub fn rows(&self) -> &[Row<T>] {
        &self.rows
    }

    /// `t(f|e)`; zero for ids outside the table's vocabularies.
    pub fn prob(&self, e: WordId, f: WordId) -> T {
        if f as usize >= self.target_len() {
            return T::zero();
        }
        self.rows.get(e as usize).map_or(T::zero(), |row| row.get(f))
    }

    pub fn row_mass(&self, e: WordId) -> T {
        self.rows
            .get(e as usize)
            .map_or(T::zero(), |row| row.mass(self.target_len()))
    }

    /// Ensures every token of `pair` belongs to the table's vocabularies.
    pub fn check_pair(&self, pair: &SentencePair) -> Result<()> {
        if let Some(&e) = pair.source.iter().find(|&&e| e as usize >= self.source_len()) {
            return Err(Error::Lookup {
                side: "source",
                word: format!("id {e}"),
            });
        }
        if let Some(&f) = pair.target.iter().find(|&&f| f as usize >= self.target_len()) {
            return Err(Error::Lookup {
                side: "target",
                word: format!("id {f}"),
            });
        }
        Ok(())
    }

    /// Writes `t(f_j | e_i)` for `i in 0..=l` into `buf` and returns their sum.
    pub(crate) fn column_into(&self, pair: &SentencePair, f: WordId, buf: &mut Vec<T>) -> T {
        buf.clear();
        buf.extend(pair.source_with_null().map(|e| self.prob(e, f)));
        buf.iter().copied().sum()
    }

    /// Link posterior without vocabulary checks; unknown ids have zero probability.
    pub fn posterior(&self, pair: &SentencePair) -> LinkPosterior<T> {
        let mut rows = Vec::with_capacity(pair.target_len());
        let mut buf = Vec::with_capacity(pair.source_len() + 1);
        for &f in &pair.target {
            let total = self.column_into(pair, f, &mut buf);
            rows.push(normalize_column(&buf, total));
        }
        LinkPosterior { rows }
    }

    /// Viterbi alignment without vocabulary checks. Ties go to the smallest
    /// source position, so NULL wins any tie it takes part in.
    pub fn viterbi(&self, pair: &SentencePair) -> RestrictedAlignment {
        let mut buf = Vec::with_capacity(pair.source_len() + 1);
        pair.target
            .iter()
            .map(|&f| {
                self.column_into(pair, f, &mut buf);
                argmax(&buf)
            })
            .collect::<Vec<_>>()
            .into()
    }

    /// `ln ε − m ln(l+1) + Σ_j ln Σ_i t(f_j|e_i)`, or negative infinity if any inner sum is zero.
    pub fn log_likelihood(&self, pair: &SentencePair) -> T {
        let mut buf = Vec::with_capacity(pair.source_len() + 1);
        let mut inner = T::zero();
        for &f in &pair.target {
            let total = self.column_into(pair, f, &mut buf);
            if !(total > T::zero()) {
                return T::neg_infinity();
            }
            inner += total.ln();
        }
        self.epsilon.ln() - T::from_count(pair.target_len()) * T::from_count(pair.source_len() + 1).ln() + inner
    }

    /// Every entry with nonzero probability as `(e, f, t(f|e))`, ordered by `(e, f)`.
    pub fn nonzero_entries(&self) -> impl Iterator<Item = (WordId, WordId, T)> + '_ {
        let target_len = self.target_len() as WordId;
        self.rows.iter().enumerate().flat_map(move |(e, row)| {
            let e = e as WordId;
            let dense = row.background > T::zero();
            let items: Box<dyn Iterator<Item = (WordId, T)> + '_> = if dense {
                Box::new((0..target_len).map(move |f| (f, row.get(f))))
            } else {
                Box::new(row.entries.iter().copied())
            };
            items.filter(|&(_, p)| p > T::zero()).map(move |(f, p)| (e, f, p))
        })
    }
}

pub(crate) fn normalize_column<T: Real>(weights: &[T], total: T) -> Vec<T> {
    if total > T::zero() {
        weights.iter().map(|&w| w / total).collect()
    } else {
        vec![T::one() / T::from_count(weights.len()); weights.len()]
    }
}

/// Index of the first maximum.
pub(crate) fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn uniform_init<T: Real>(
    source_vocab: Arc<Vocabulary>,
    target_vocab: Arc<Vocabulary>,
) -> Result<TranslationTable<T>> {
    TranslationTable::uniform(source_vocab, target_vocab)
}

/// Posterior `p(a_j = i)` for each target position; `rows[j-1][i]`, `i in 0..=l`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkPosterior<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Real> LinkPosterior<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    /// Distribution for 1-based target position `j`.
    pub fn position(&self, j: usize) -> &[T] {
        &self.rows[j - 1]
    }

    pub fn argmax(&self) -> RestrictedAlignment {
        self.rows.iter().map(|r| argmax(r)).collect::<Vec<_>>().into()
    }
}

pub fn link_posterior<T: Real>(pair: &SentencePair, table: &TranslationTable<T>) -> Result<LinkPosterior<T>> {
    table.check_pair(pair)?;
    Ok(table.posterior(pair))
}

pub fn viterbi_align<T: Real>(pair: &SentencePair, table: &TranslationTable<T>) -> Result<RestrictedAlignment> {
    table.check_pair(pair)?;
    Ok(table.viterbi(pair))
}

pub fn pair_log_likelihood<T: Real>(pair: &SentencePair, table: &TranslationTable<T>) -> Result<T> {
    table.check_pair(pair)?;
    Ok(table.log_likelihood(pair))
}

/// Training provenance recorded in model file headers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelInfo {
    pub iterations: Option<usize>,
    pub strategy: Option<String>,
    pub lambda: Option<f64>,
}

/// Renders the table as TSV: `#`-prefixed metadata, then `e<TAB>f<TAB>prob`
/// for every nonzero entry with 17 significant digits.
pub fn model_to_tsv<T: Real>(table: &TranslationTable<T>, info: &ModelInfo) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# lexalign translation table");
    let _ = writeln!(out, "# source_vocab_size: {}", table.source_len());
    let _ = writeln!(out, "# target_vocab_size: {}", table.target_len());
    let _ = writeln!(out, "# epsilon: {:e}", table.epsilon().as_f64());
    if let Some(n) = info.iterations {
        let _ = writeln!(out, "# iterations: {n}");
    }
    if let Some(s) = &info.strategy {
        let _ = writeln!(out, "# strategy: {s}");
    }
    if let Some(l) = info.lambda {
        let _ = writeln!(out, "# lambda: {l:e}");
    }
    let sv = table.source_vocab();
    let tv = table.target_vocab();
    for (e, f, p) in table.nonzero_entries() {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.16e}",
            sv.word(e).unwrap_or(""),
            tv.word(f).unwrap_or(""),
            p.as_f64()
        );
    }
    out
}

/// Parses the TSV written by [`model_to_tsv`]. Vocabularies are rebuilt in
/// order of first appearance, with NULL at source id 0.
pub fn model_from_tsv<T: Real>(text: &str) -> Result<(TranslationTable<T>, ModelInfo)> {
    let mut info = ModelInfo::default();
    let mut epsilon = T::one();
    let mut source_vocab = Vocabulary::with_null();
    let mut target_vocab = Vocabulary::new();
    let mut cells: HashMap<WordId, Vec<(WordId, T)>> = HashMap::new();

    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if let Some(meta) = line.strip_prefix('#') {
            let Some((key, value)) = meta.split_once(':') else {
                continue;
            };
            let value = value.trim();
            let bad = || Error::format(format!("model line {line_no}: bad value for {}", key.trim()));
            match key.trim() {
                "epsilon" => epsilon = T::lit(value.parse::<f64>().map_err(|_| bad())?),
                "iterations" => info.iterations = Some(value.parse().map_err(|_| bad())?),
                "strategy" => info.strategy = Some(value.to_owned()),
                "lambda" => info.lambda = Some(value.parse().map_err(|_| bad())?),
                _ => {}
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::format(format!(
                "model line {line_no}: expected 3 tab-separated fields"
            )));
        }
        let p: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::format(format!("model line {line_no}: invalid probability")))?;
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::format(format!("model line {line_no}: probability out of range")));
        }
        let e = source_vocab.get_or_insert(fields[0]);
        let f = target_vocab.get_or_insert(fields[1]);
        cells.entry(e).or_default().push((f, T::lit(p)));
    }
    if target_vocab.is_empty() {
        return Err(Error::format("model file has no entries"));
    }
    debug_assert_eq!(source_vocab.id(NULL_WORD), Some(NULL_ID));

    let rows = (0..source_vocab.len() as WordId)
        .map(|e| {
            let mut entries = cells.remove(&e).unwrap_or_default();
            entries.sort_unstable_by_key(|&(f, _)| f);
            entries.dedup_by_key(|&mut (f, _)| f);
            Row::new(T::zero(), entries)
        })
        .collect();
    let table = TranslationTable::from_rows(rows, Arc::new(source_vocab), Arc::new(target_vocab), epsilon)?;
    Ok((table, info))
}

pub fn save_model<T: Real>(path: &Path, table: &TranslationTable<T>, info: &ModelInfo) -> Result<()> {
    fs::write(path, model_to_tsv(table, info)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Real>(path: &Path) -> Result<(TranslationTable<T>, ModelInfo)> {
    model_from_tsv(&read_text(path)?)
}
