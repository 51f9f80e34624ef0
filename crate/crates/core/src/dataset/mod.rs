//! Labeled examples, the word vocabulary and cross-validation folds.

mod annotate;
mod folds;
pub mod io;
mod templates;
mod vocab;

pub use annotate::{annotate, LabeledExample, Sampling};
pub use folds::{make_folds, Fold, FoldPlan, Grouping, Split, DEFAULT_FOLDS};
pub use templates::{failure_phrase, success_phrase, ExplanationClass, ExplanationStyle, PhraseBook};
pub use vocab::{tokenize, Vocab, EMPTY, EOS, PAD, SOS};
