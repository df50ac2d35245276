//! Parallel corpora, vocabularies, gold annotations and data splits.
//!
//! Source sentences never store the NULL word. Position 0 of every source
//! sentence is NULL by convention and maps to [`NULL_ID`] in the source
//! vocabulary; real tokens occupy positions `1..=l`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::ops::Deref;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type WordId = u32;

/// Id of the NULL word in every source vocabulary.
pub const NULL_ID: WordId = 0;
pub const NULL_WORD: &str = "NULL";

/// Bidirectional word/id map with dense ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Source-side vocabulary with NULL reserved at id 0.
    pub fn with_null() -> Self {
        let mut vocab = Self::new();
        vocab.get_or_insert(NULL_WORD);
        vocab
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn get_or_insert(&mut self, word: &str) -> WordId {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = WordId::try_from(self.words.len()).expect("vocabulary exceeds u32 ids");
        self.words.push(word.to_owned());
        self.index.insert(word.to_owned(), id);
        id
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &str)> {
        self.words.iter().enumerate().map(|(id, w)| (id as WordId, w.as_str()))
    }
}

/// One line-aligned sentence pair. `source` excludes the implicit NULL word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Vec<WordId>,
    pub target: Vec<WordId>,
}

impl SentencePair {
    /// Source length `l`, not counting NULL.
    pub fn source_len(&self) -> usize {
        self.source.len()
    }

    /// Target length `m`.
    pub fn target_len(&self) -> usize {
        self.target.len()
    }

    /// Source word at position `i` in `0..=l`; position 0 is NULL.
    pub fn source_at(&self, i: usize) -> WordId {
        if i == 0 {
            NULL_ID
        } else {
            self.source[i - 1]
        }
    }

    /// Source words at positions `0..=l`, NULL first.
    pub fn source_with_null(&self) -> impl Iterator<Item = WordId> + '_ {
        std::iter::once(NULL_ID).chain(self.source.iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
    source_vocab: Arc<Vocabulary>,
    target_vocab: Arc<Vocabulary>,
}

/// Incrementally encodes sentence pairs against (possibly pre-populated) vocabularies.
#[derive(Debug)]
pub struct CorpusBuilder {
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    pairs: Vec<SentencePair>,
    lowercase: bool,
    known_source: usize,
    known_target: usize,
    unknown_tokens: usize,
}

impl Default for CorpusBuilder {
    fn default() -> Self {
        Self::with_vocabularies(Vocabulary::with_null(), Vocabulary::new())
    }
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from existing vocabularies; words already present keep their ids
    /// and new words are appended after them.
    pub fn with_vocabularies(source_vocab: Vocabulary, target_vocab: Vocabulary) -> Self {
        let known_source = source_vocab.len();
        let known_target = target_vocab.len();
        Self {
            source_vocab,
            target_vocab,
            pairs: Vec::new(),
            lowercase: false,
            known_source,
            known_target,
            unknown_tokens: 0,
        }
    }

    pub fn lowercase(mut self, yes: bool) -> Self {
        self.lowercase = yes;
        self
    }

    /// Adds one pair of whitespace-tokenized lines. `line_no` is 1-based and
    /// only used in error messages.
    pub fn push(&mut self, line_no: usize, source: &str, target: &str) -> Result<()> {
        let src = self.tokens(source);
        let tgt = self.tokens(target);
        if src.is_empty() {
            return Err(Error::format(format!("empty source sentence at line {line_no}")));
        }
        if tgt.is_empty() {
            return Err(Error::format(format!("empty target sentence at line {line_no}")));
        }
        if src.iter().any(|w| w == NULL_WORD) {
            return Err(Error::format(format!(
                "source line {line_no} contains the reserved token {NULL_WORD}"
            )));
        }
        let mut unknown = 0;
        let source = src
            .iter()
            .map(|w| {
                let id = self.source_vocab.get_or_insert(w);
                unknown += usize::from(id as usize >= self.known_source);
                id
            })
            .collect();
        let target = tgt
            .iter()
            .map(|w| {
                let id = self.target_vocab.get_or_insert(w);
                unknown += usize::from(id as usize >= self.known_target);
                id
            })
            .collect();
        self.unknown_tokens += unknown;
        self.pairs.push(SentencePair { source, target });
        Ok(())
    }

    /// Parses two whole texts, one sentence per line.
    pub fn push_texts(&mut self, source: &str, target: &str) -> Result<()> {
        let src: Vec<&str> = source.lines().collect();
        let tgt: Vec<&str> = target.lines().collect();
        if src.len() != tgt.len() {
            return Err(Error::format(format!(
                "line count mismatch: source has {} lines, target has {}",
                src.len(),
                tgt.len()
            )));
        }
        for (k, (s, t)) in src.iter().zip(&tgt).enumerate() {
            self.push(k + 1, s, t)?;
        }
        Ok(())
    }

    /// Tokens that were not in the vocabularies passed to [`Self::with_vocabularies`].
    pub fn unknown_tokens(&self) -> usize {
        self.unknown_tokens
    }

    pub fn build(self) -> Result<ParallelCorpus> {
        if self.pairs.is_empty() {
            return Err(Error::format("corpus contains no sentence pairs"));
        }
        Ok(ParallelCorpus {
            pairs: self.pairs,
            source_vocab: Arc::new(self.source_vocab),
            target_vocab: Arc::new(self.target_vocab),
        })
    }

    fn tokens(&self, line: &str) -> Vec<String> {
        line.split_whitespace()
            .map(|w| if self.lowercase { w.to_lowercase() } else { w.to_owned() })
            .collect()
    }
}

impl ParallelCorpus {
    pub fn from_texts(source: &str, target: &str, lowercase: bool) -> Result<Self> {
        let mut builder = CorpusBuilder::new().lowercase(lowercase);
        builder.push_texts(source, target)?;
        builder.build()
    }

    /// Convenience constructor from in-memory sentence pairs.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self> {
        let mut builder = CorpusBuilder::new();
        for (k, (s, t)) in pairs.iter().enumerate() {
            builder.push(k + 1, s.as_ref(), t.as_ref())?;
        }
        builder.build()
    }

    pub fn load(source_path: &Path, target_path: &Path, lowercase: bool) -> Result<Self> {
        let source = read_text(source_path)?;
        let target = read_text(target_path)?;
        Self::from_texts(&source, &target, lowercase)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn pair(&self, k: usize) -> &SentencePair {
        &self.pairs[k]
    }

    pub fn source_vocab(&self) -> &Arc<Vocabulary> {
        &self.source_vocab
    }

    pub fn target_vocab(&self) -> &Arc<Vocabulary> {
        &self.target_vocab
    }

    /// Total number of target tokens over all pairs.
    pub fn target_token_count(&self) -> usize {
        self.pairs.iter().map(SentencePair::target_len).sum()
    }

    /// Pairs at `indices`, in the given order, sharing this corpus' vocabularies.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::argument("subset must contain at least one pair"));
        }
        let pairs = indices
            .iter()
            .map(|&k| {
                self.pairs
                    .get(k)
                    .cloned()
                    .ok_or_else(|| Error::argument(format!("pair index {k} out of range")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            pairs,
            source_vocab: Arc::clone(&self.source_vocab),
            target_vocab: Arc::clone(&self.target_vocab),
        })
    }

    pub fn source_sentence(&self, k: usize) -> String {
        join_words(&self.source_vocab, &self.pairs[k].source)
    }

    pub fn target_sentence(&self, k: usize) -> String {
        join_words(&self.target_vocab, &self.pairs[k].target)
    }

    /// Renders both sides back to one-sentence-per-line text.
    pub fn to_texts(&self) -> (String, String) {
        let mut src = String::new();
        let mut tgt = String::new();
        for k in 0..self.len() {
            src.push_str(&self.source_sentence(k));
            src.push('\n');
            tgt.push_str(&self.target_sentence(k));
            tgt.push('\n');
        }
        (src, tgt)
    }

    pub fn save(&self, source_path: &Path, target_path: &Path) -> Result<()> {
        let (src, tgt) = self.to_texts();
        fs::write(source_path, src).map_err(|e| Error::io(source_path, e))?;
        fs::write(target_path, tgt).map_err(|e| Error::io(target_path, e))?;
        Ok(())
    }

    /// Re-encodes the pairs at `indices` into fresh vocabularies containing
    /// only their words.
    fn reindexed(&self, indices: &[usize]) -> Result<Self> {
        let mut builder = CorpusBuilder::new();
        for &k in indices {
            builder.push(k + 1, &self.source_sentence(k), &self.target_sentence(k))?;
        }
        builder.build()
    }

    /// Re-encodes the pairs at `indices` against `base`'s vocabularies,
    /// appending unseen words after `base`'s ids.
    fn encoded_against(&self, base: &ParallelCorpus, indices: &[usize]) -> Result<Self> {
        let mut builder =
            CorpusBuilder::with_vocabularies(base.source_vocab.as_ref().clone(), base.target_vocab.as_ref().clone());
        for &k in indices {
            builder.push(k + 1, &self.source_sentence(k), &self.target_sentence(k))?;
        }
        builder.build()
    }
}

pub fn load_parallel_corpus(source_path: &Path, target_path: &Path) -> Result<ParallelCorpus> {
    ParallelCorpus::load(source_path, target_path, false)
}

fn join_words(vocab: &Vocabulary, ids: &[WordId]) -> String {
    let words: Vec<&str> = ids.iter().map(|&id| vocab.word(id).unwrap_or("")).collect();
    words.join(" ")
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Token counts and presence-based co-occurrence counts.
#[derive(Clone, Debug, PartialEq)]
pub struct OccurrenceStats {
    pair_count: usize,
    source_counts: Vec<u64>,
    target_counts: Vec<u64>,
    // per source id (NULL included), sorted by target id
    cooc: Vec<Vec<(WordId, u64)>>,
}

impl OccurrenceStats {
    pub fn from_corpus(corpus: &ParallelCorpus) -> Self {
        let mut source_counts = vec![0u64; corpus.source_vocab().len()];
        let mut target_counts = vec![0u64; corpus.target_vocab().len()];
        let mut cooc: Vec<HashMap<WordId, u64>> = vec![HashMap::new(); source_counts.len()];
        source_counts[NULL_ID as usize] = corpus.len() as u64;

        let mut src_types = BTreeSet::new();
        let mut tgt_types = BTreeSet::new();
        for pair in corpus.pairs() {
            for &e in &pair.source {
                source_counts[e as usize] += 1;
            }
            for &f in &pair.target {
                target_counts[f as usize] += 1;
            }
            src_types.clear();
            src_types.extend(pair.source_with_null());
            tgt_types.clear();
            tgt_types.extend(pair.target.iter().copied());
            for &e in &src_types {
                let row = &mut cooc[e as usize];
                for &f in &tgt_types {
                    *row.entry(f).or_insert(0) += 1;
                }
            }
        }

        let cooc = cooc
            .into_iter()
            .map(|row| {
                let mut row: Vec<_> = row.into_iter().collect();
                row.sort_unstable_by_key(|&(f, _)| f);
                row
            })
            .collect();
        Self {
            pair_count: corpus.len(),
            source_counts,
            target_counts,
            cooc,
        }
    }

    pub fn pair_count(&self) -> usize {
        self.pair_count
    }

    pub fn source_vocab_len(&self) -> usize {
        self.source_counts.len()
    }

    pub fn target_vocab_len(&self) -> usize {
        self.target_counts.len()
    }

    /// Token count of source word `e`; for NULL, the number of sentence pairs.
    pub fn source_count(&self, e: WordId) -> Option<u64> {
        self.source_counts.get(e as usize).copied()
    }

    pub fn target_count(&self, f: WordId) -> Option<u64> {
        self.target_counts.get(f as usize).copied()
    }

    /// Number of sentence pairs containing both `e` and `f`.
    pub fn cooc(&self, e: WordId, f: WordId) -> Option<u64> {
        let row = self.cooc.get(e as usize)?;
        if f as usize >= self.target_counts.len() {
            return None;
        }
        Some(match row.binary_search_by_key(&f, |&(g, _)| g) {
            Ok(pos) => row[pos].1,
            Err(_) => 0,
        })
    }

    /// Target words co-occurring with `e`, sorted by id, with their counts.
    pub fn cooc_row(&self, e: WordId) -> Option<&[(WordId, u64)]> {
        self.cooc.get(e as usize).map(Vec::as_slice)
    }
}

pub fn occurrence_stats(corpus: &ParallelCorpus) -> OccurrenceStats {
    OccurrenceStats::from_corpus(corpus)
}

/// A gold link `(i, j)`: source position `i` (0 = NULL) to target position `j`, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub source: usize,
    pub target: usize,
}

impl Link {
    pub fn new(source: usize, target: usize) -> Self {
        Self { source, target }
    }
}

pub type LinkSet = BTreeSet<Link>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairAnnotation {
    pub sure: LinkSet,
    pub possible: LinkSet,
}

/// Gold sure/possible links keyed by 0-based pair index. Sure links are
/// always members of the possible set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    entries: BTreeMap<usize, PairAnnotation>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `pair_index src_pos tgt_pos flag` records (1-based pair index).
    pub fn parse(text: &str, corpus: &ParallelCorpus) -> Result<Self> {
        let mut set = Self::new();
        for (n, line) in text.lines().enumerate() {
            let record = n + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::format(format!(
                    "annotation record {record}: expected 4 fields, found {}",
                    fields.len()
                )));
            }
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::format(format!("annotation record {record}: invalid number {s:?}")))
            };
            let pair_no = num(fields[0])?;
            let i = num(fields[1])?;
            let j = num(fields[2])?;
            if pair_no == 0 || pair_no > corpus.len() {
                return Err(Error::format(format!(
                    "annotation record {record}: pair index {pair_no} out of range 1..={}",
                    corpus.len()
                )));
            }
            let pair = corpus.pair(pair_no - 1);
            if i > pair.source_len() {
                return Err(Error::format(format!(
                    "annotation record {record}: source position {i} out of range 0..={}",
                    pair.source_len()
                )));
            }
            if j == 0 || j > pair.target_len() {
                return Err(Error::format(format!(
                    "annotation record {record}: target position {j} out of range 1..={}",
                    pair.target_len()
                )));
            }
            let sure = match fields[3] {
                "S" => true,
                "P" => false,
                other => {
                    return Err(Error::format(format!(
                        "annotation record {record}: unknown flag {other:?}"
                    )))
                }
            };
            set.insert(pair_no - 1, Link::new(i, j), sure);
        }
        Ok(set)
    }

    pub fn load(path: &Path, corpus: &ParallelCorpus) -> Result<Self> {
        Self::parse(&read_text(path)?, corpus)
    }

    /// Adds a link; sure links are added to the possible set as well.
    pub fn insert(&mut self, pair_index: usize, link: Link, sure: bool) {
        let entry = self.entries.entry(pair_index).or_default();
        if sure {
            entry.sure.insert(link);
        }
        entry.possible.insert(link);
    }

    /// Registers a pair as annotated even if it has no links.
    pub fn insert_empty(&mut self, pair_index: usize) {
        self.entries.entry(pair_index).or_default();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, pair_index: usize) -> Option<&PairAnnotation> {
        self.entries.get(&pair_index)
    }

    /// Annotated pair indices in ascending order.
    pub fn pair_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &PairAnnotation)> {
        self.entries.iter().map(|(&k, v)| (k, v))
    }

    fn restrict_to(&self, keys: &[usize]) -> Self {
        let entries = keys
            .iter()
            .filter_map(|k| self.entries.get(k).map(|v| (*k, v.clone())))
            .collect();
        Self { entries }
    }

    /// Serializes in the annotation file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, ann) in &self.entries {
            for link in &ann.possible {
                let flag = if ann.sure.contains(link) { 'S' } else { 'P' };
                let _ = writeln!(out, "{} {} {} {flag}", k + 1, link.source, link.target);
            }
        }
        out
    }
}

pub fn load_annotations(path: &Path, corpus: &ParallelCorpus) -> Result<AnnotationSet> {
    AnnotationSet::load(path, corpus)
}

/// One source position (0 = NULL) per target position; index `j - 1` holds `a_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictedAlignment(Vec<usize>);

impl RestrictedAlignment {
    pub fn new(positions: Vec<usize>) -> Self {
        Self(positions)
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for RestrictedAlignment {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for RestrictedAlignment {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Reduces sure links to one source position per target position.
///
/// Targets without a sure link go to NULL; targets with several sure links
/// take the smallest source position.
pub fn adapt_annotation(annotation: &PairAnnotation, m: usize) -> RestrictedAlignment {
    let mut a = vec![None; m];
    for link in &annotation.sure {
        if link.target == 0 || link.target > m {
            continue;
        }
        let slot = &mut a[link.target - 1];
        *slot = Some(slot.map_or(link.source, |i: usize| i.min(link.source)));
    }
    RestrictedAlignment(a.into_iter().map(|i| i.unwrap_or(0)).collect())
}

/// Seeded random split of the annotated pairs into `k` development pairs
/// and the remaining test pairs.
pub fn split_annotated(annotation: &AnnotationSet, k: usize, seed: u64) -> Result<(AnnotationSet, AnnotationSet)> {
    let n = annotation.len();
    if k == 0 || k >= n {
        return Err(Error::argument(format!(
            "development size {k} must lie strictly between 0 and {n} annotated pairs"
        )));
    }
    let mut keys: Vec<usize> = annotation.pair_indices().collect();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (dev, test) = keys.split_at_mut(k);
    dev.sort_unstable();
    test.sort_unstable();
    Ok((annotation.restrict_to(dev), annotation.restrict_to(test)))
}

/// Pair indices of a seeded two-way split of `n` items: `floor(n * fraction)` go to the second part.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::argument(format!(
            "split fraction {fraction} must lie strictly between 0 and 1"
        )));
    }
    let second = (n as f64 * fraction).floor() as usize;
    if second == 0 || second >= n {
        return Err(Error::argument(format!(
            "split fraction {fraction} on {n} pairs leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (b, a) = idx.split_at_mut(second);
    a.sort_unstable();
    b.sort_unstable();
    Ok((a.to_vec(), b.to_vec()))
}

/// Seeded split of an unannotated corpus into `(train, dev)`.
///
/// `train` gets its own vocabularies covering only its words. `dev` is
/// encoded against the train vocabularies, so a dev word id at or beyond the
/// train vocabulary size marks a word never seen in training.
pub fn split_unannotated(
    corpus: &ParallelCorpus,
    fraction: f64,
    seed: u64,
) -> Result<(ParallelCorpus, ParallelCorpus)> {
    let (train_idx, dev_idx) = split_indices(corpus.len(), fraction, seed)?;
    let train = corpus.reindexed(&train_idx)?;
    let dev = corpus.encoded_against(&train, &dev_idx)?;
    Ok((train, dev))
}
