//! IBM Model 1 word alignment with a tunable additive-smoothing M-step.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the command-line tool uses.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod num;
pub mod objectives;
pub mod smoothing;
pub mod trainer;
pub mod tuner;

pub use corpus::{
    AnnotationSet, Link, LinkSet, OccurrenceStats, ParallelCorpus, RestrictedAlignment, SentencePair, Vocabulary,
    WordId, NULL_ID, NULL_WORD,
};
pub use error::{Error, Result};
pub use num::Real;
pub use objectives::{DevSet, Direction, ObjectiveKind};
pub use smoothing::StrategyKind;

pub type TranslationTable = model::TranslationTable<f64>;
pub type TranslationTableF32 = model::TranslationTable<f32>;
pub type LinkPosterior = model::LinkPosterior<f64>;
pub type CountTable = trainer::CountTable<f64>;
pub type AddingStrategy = smoothing::AddingStrategy<f64>;
pub type AddingStrategyF32 = smoothing::AddingStrategy<f32>;
pub type TrainConfig = trainer::TrainConfig<f64>;
pub type TrainConfigF32 = trainer::TrainConfig<f32>;
pub type TrainOutput = trainer::TrainOutput<f64>;
pub type TuneConfig = tuner::TuneConfig<f64>;
pub type TuneResult = tuner::TuneResult<f64>;
pub type EvalReport = eval::EvalReport<f64>;
