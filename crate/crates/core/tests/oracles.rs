//! Library results checked against slow, independent reimplementations.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use lexalign::corpus::{occurrence_stats, AnnotationSet, Link, ParallelCorpus};
use lexalign::objectives::{obj_error_count, DevSet, ObjectiveKind};
use lexalign::smoothing::{AddingStrategy, StrategyKind};
use lexalign::trainer::{train, TrainConfig};
use lexalign::tuner::{tune, TuneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Table = BTreeMap<(String, String), f64>;

fn tokens(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

/// Model 1 EM over strings with dense tables, smoothed by `prior(e, f)`.
fn brute_force_em(
    pairs: &[(String, String)],
    iterations: usize,
    lambda: f64,
    prior: &dyn Fn(&str, &str) -> f64,
) -> Table {
    let sents: Vec<(Vec<String>, Vec<String>)> = pairs
        .iter()
        .map(|(s, t)| {
            let mut src = vec!["NULL".to_owned()];
            src.extend(tokens(s));
            (src, tokens(t))
        })
        .collect();
    let src_vocab: BTreeSet<String> = sents.iter().flat_map(|(s, _)| s.iter().cloned()).collect();
    let tgt_vocab: BTreeSet<String> = sents.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
    let mut t: Table = BTreeMap::new();
    for e in &src_vocab {
        for f in &tgt_vocab {
            t.insert((e.clone(), f.clone()), 1.0 / tgt_vocab.len() as f64);
        }
    }
    for _ in 0..iterations {
        let mut counts: Table = BTreeMap::new();
        for (src, tgt) in &sents {
            for f in tgt {
                let total: f64 = src.iter().map(|e| t[&(e.clone(), f.clone())]).sum();
                for e in src {
                    let share = if total > 0.0 {
                        t[&(e.clone(), f.clone())] / total
                    } else {
                        1.0 / src.len() as f64
                    };
                    *counts.entry((e.clone(), f.clone())).or_default() += share;
                }
            }
        }
        for e in &src_vocab {
            let denom: f64 = tgt_vocab
                .iter()
                .map(|f| counts.get(&(e.clone(), f.clone())).copied().unwrap_or(0.0) + lambda * prior(e, f))
                .sum();
            for f in &tgt_vocab {
                let c = counts.get(&(e.clone(), f.clone())).copied().unwrap_or(0.0);
                let value = if denom > 0.0 {
                    (c + lambda * prior(e, f)) / denom
                } else {
                    1.0 / tgt_vocab.len() as f64
                };
                t.insert((e.clone(), f.clone()), value);
            }
        }
    }
    t
}

/// Strategy values computed straight from the sentence strings.
fn brute_force_prior(pairs: &[(String, String)], kind: StrategyKind) -> impl Fn(&str, &str) -> f64 {
    let mut n_e: BTreeMap<String, f64> = BTreeMap::new();
    let mut n_f: BTreeMap<String, f64> = BTreeMap::new();
    let mut cooc: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (s, t) in pairs {
        let src = tokens(s);
        let tgt = tokens(t);
        *n_e.entry("NULL".into()).or_default() += 1.0;
        for e in &src {
            *n_e.entry(e.clone()).or_default() += 1.0;
        }
        for f in &tgt {
            *n_f.entry(f.clone()).or_default() += 1.0;
        }
        let src_set: BTreeSet<&String> = src.iter().collect();
        let tgt_set: BTreeSet<&String> = tgt.iter().collect();
        for f in &tgt_set {
            *cooc.entry(("NULL".into(), (*f).clone())).or_default() += 1.0;
            for e in &src_set {
                *cooc.entry(((*e).clone(), (*f).clone())).or_default() += 1.0;
            }
        }
    }
    move |e: &str, f: &str| match kind {
        StrategyKind::AddOne => 1.0,
        StrategyKind::AddSourceCount => n_e[e],
        StrategyKind::AddDice => {
            let c = cooc.get(&(e.to_owned(), f.to_owned())).copied().unwrap_or(0.0);
            if c == 0.0 {
                0.0
            } else {
                2.0 * c / (n_e[e] + n_f[f])
            }
        }
    }
}

fn assert_tables_match(corpus: &ParallelCorpus, got: &lexalign::model::TranslationTable<f64>, want: &Table, tol: f64) {
    for ((e, f), &p) in want {
        let q = got.prob(
            corpus.source_vocab().id(e).unwrap(),
            corpus.target_vocab().id(f).unwrap(),
        );
        assert!((p - q).abs() <= tol, "t({f}|{e}): library {q}, oracle {p}");
    }
}

fn random_pairs(seed: u64, n: usize) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let l = rng.gen_range(1..5);
            let m = rng.gen_range(1..5);
            let s: Vec<String> = (0..l).map(|_| format!("s{}", rng.gen_range(0..6))).collect();
            let t: Vec<String> = (0..m).map(|_| format!("t{}", rng.gen_range(0..6))).collect();
            (s.join(" "), t.join(" "))
        })
        .collect()
}

#[test]
fn t1_ten_iterations_match_brute_force() {
    let pairs = vec![
        ("das haus".to_owned(), "the house".to_owned()),
        ("das buch".to_owned(), "the book".to_owned()),
    ];
    let corpus = ParallelCorpus::from_pairs(&pairs).unwrap();
    let out = train(&corpus, &TrainConfig::<f64>::default()).unwrap();
    let oracle = brute_force_em(&pairs, 10, 0.0, &|_, _| 0.0);
    assert_tables_match(&corpus, &out.table, &oracle, 1e-12);
}

#[test]
fn smoothed_training_matches_brute_force() {
    for seed in 0..4 {
        let pairs = random_pairs(seed, 12);
        let corpus = ParallelCorpus::from_pairs(&pairs).unwrap();
        let stats = Arc::new(occurrence_stats(&corpus));
        for kind in StrategyKind::ALL {
            for lambda in [0.0, 0.3, 4.0] {
                let strategy = Arc::new(AddingStrategy::new(kind, Arc::clone(&stats)));
                let out = train(&corpus, &TrainConfig::smoothed(strategy, lambda)).unwrap();
                let prior = brute_force_prior(&pairs, kind);
                let oracle = brute_force_em(&pairs, 10, lambda, &prior);
                assert_tables_match(&corpus, &out.table, &oracle, 1e-12);
            }
        }
    }
}

#[test]
fn strategy_values_match_brute_force() {
    let pairs = random_pairs(9, 20);
    let corpus = ParallelCorpus::from_pairs(&pairs).unwrap();
    let stats = Arc::new(occurrence_stats(&corpus));
    for kind in StrategyKind::ALL {
        let strategy = AddingStrategy::<f64>::new(kind, Arc::clone(&stats));
        let prior = brute_force_prior(&pairs, kind);
        for (e, ew) in corpus.source_vocab().iter() {
            let mut sum = 0.0;
            for (f, fw) in corpus.target_vocab().iter() {
                let g = strategy.g(e, f).unwrap();
                assert!((g - prior(ew, fw)).abs() < 1e-15, "{kind} G({ew}, {fw})");
                sum += g;
            }
            assert!((strategy.row_sum(e).unwrap() - sum).abs() < 1e-12);
        }
    }
}

/// A frequent-word corpus with a single rare source word next to
/// loosely translated neighbours; dev is the rare pair plus 20 others.
fn rare_word_fixture() -> (ParallelCorpus, DevSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut texts = Vec::new();
    let mut gold = Vec::new();
    for _ in 0..150 {
        let l = rng.gen_range(3..6);
        let words: Vec<usize> = (0..l).map(|_| rng.gen_range(0..8)).collect();
        let src: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
        let tgt: Vec<String> = words.iter().map(|w| format!("v{w}{}", rng.gen_range(0..8))).collect();
        texts.push((src.join(" "), tgt.join(" ")));
        gold.push((1..=l).map(|i| (i, i)).collect::<Vec<_>>());
    }
    texts.push(("w1 w2 zorb w3".into(), "v10 v27 glim v35".into()));
    gold.push(vec![(1, 1), (2, 2), (3, 3), (4, 4)]);
    let corpus = ParallelCorpus::from_pairs(&texts).unwrap();
    let mut annotations = AnnotationSet::new();
    for k in (0..20).chain(std::iter::once(150)) {
        for &(i, j) in &gold[k] {
            annotations.insert(k, Link::new(i, j), true);
        }
    }
    let dev = DevSet::annotated(&corpus, &annotations).unwrap();
    (corpus, dev)
}

#[test]
fn rare_word_tuning_beats_unsmoothed() {
    let (corpus, dev) = rare_word_fixture();
    let strategy = Arc::new(AddingStrategy::new(
        StrategyKind::AddOne,
        Arc::new(occurrence_stats(&corpus)),
    ));
    let errors_at = |lambda: f64| {
        let table = train(&corpus, &TrainConfig::smoothed(Arc::clone(&strategy), lambda))
            .unwrap()
            .table;
        obj_error_count(&dev, &table).unwrap()
    };
    let at_zero = errors_at(0.0);

    // the fine grid establishes that some positive scale does strictly better
    let oracle_best = (1..=1000).map(|k| errors_at(k as f64 * 1e-3)).min().unwrap();
    assert!(
        oracle_best < at_zero,
        "fine grid best {oracle_best}, λ=0 gives {at_zero}"
    );

    let result = tune(
        &corpus,
        &dev,
        Arc::clone(&strategy),
        ObjectiveKind::ErrorCount,
        &TuneConfig::default(),
        &TrainConfig::default(),
    )
    .unwrap();
    assert!(result.lambda_star > 0.0);
    assert!(errors_at(result.lambda_star) < at_zero);
}

#[test]
fn tuning_is_deterministic() {
    let (corpus, dev) = rare_word_fixture();
    let strategy = Arc::new(AddingStrategy::<f64>::new(
        StrategyKind::AddDice,
        Arc::new(occurrence_stats(&corpus)),
    ));
    let run = || {
        tune(
            &corpus,
            &dev,
            Arc::clone(&strategy),
            ObjectiveKind::SmoothedErrorCount { alpha: 10.0 },
            &TuneConfig::default(),
            &TrainConfig::default(),
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn single_precision_tracks_double() {
    let pairs = random_pairs(21, 15);
    let corpus = ParallelCorpus::from_pairs(&pairs).unwrap();
    let stats = Arc::new(occurrence_stats(&corpus));
    let wide = train(
        &corpus,
        &TrainConfig::smoothed(
            Arc::new(AddingStrategy::<f64>::new(StrategyKind::AddDice, Arc::clone(&stats))),
            0.5,
        ),
    )
    .unwrap();
    let narrow = train(
        &corpus,
        &lexalign::TrainConfigF32::smoothed(
            Arc::new(lexalign::AddingStrategyF32::new(StrategyKind::AddDice, stats)),
            0.5,
        ),
    )
    .unwrap();
    for e in 0..corpus.source_vocab().len() as u32 {
        for f in 0..corpus.target_vocab().len() as u32 {
            let (a, b) = (wide.table.prob(e, f), narrow.table.prob(e, f) as f64);
            assert!((a - b).abs() < 1e-5, "t({f}|{e}): {a} vs {b}");
        }
    }
}
