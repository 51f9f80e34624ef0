use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::SCHEMA_VERSION;
use crate::dataset::{ExplanationClass, ExplanationStyle, FoldPlan, LabeledExample, PhraseBook, Vocab};
use crate::error::{Error, Result};
use crate::featurizer::{FeatureVector, MaskedInput, Standardizer};
use crate::neural::{Checkpoint, ModelParams};
use crate::sim::FailureType;

/// A trained model ready to turn features into a phrase.
#[derive(Debug, Clone)]
pub struct Explainer {
    pub params: ModelParams<f64>,
    pub standardizer: Standardizer,
    pub vocab: Vocab,
}

impl Explainer {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(Explainer {
            params: ck.params()?,
            standardizer: ck.standardizer.clone(),
            vocab: ck.vocab.clone(),
        })
    }

    pub fn explain(&self, features: &FeatureVector) -> Result<String> {
        let input = MaskedInput::from_features(features, Some(&self.standardizer))?;
        let ids = self.params.greedy_decode(&input, self.params.config.max_decode_len)?;
        Ok(self.vocab.decode(&ids))
    }
}

/// Class of a generated phrase by exact match against the canonical set, or
/// `None` when it matches nothing. When a phrase is shared by several
/// classes, `truth` wins if it is among them.
pub fn predict_class(book: &PhraseBook, phrase: &str, truth: Option<ExplanationClass>) -> Option<ExplanationClass> {
    let matches = book.classes_of(phrase);
    match truth {
        Some(t) if matches.contains(&t) => Some(t),
        _ => matches.first().copied(),
    }
}

/// Rows are true classes, columns predicted classes, both in
/// [`ExplanationClass::ALL`] order. Malformed predictions are kept out of the
/// grid and counted per true class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 7]; 7],
    pub malformed: [usize; 7],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: ExplanationClass, predicted: Option<ExplanationClass>) {
        match predicted {
            Some(p) => self.counts[truth.index()][p.index()] += 1,
            None => self.malformed[truth.index()] += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum::<usize>() + self.malformed_count()
    }

    pub fn malformed_count(&self) -> usize {
        self.malformed.iter().sum()
    }

    pub fn trace(&self) -> usize {
        (0..7).map(|i| self.counts[i][i]).sum()
    }

    /// Examples whose true class is `c`, malformed ones included.
    pub fn support(&self, c: ExplanationClass) -> usize {
        self.counts[c.index()].iter().sum::<usize>() + self.malformed[c.index()]
    }

    pub fn recall(&self, c: ExplanationClass) -> Option<f64> {
        ratio(self.counts[c.index()][c.index()], self.support(c))
    }

    pub fn precision(&self, c: ExplanationClass) -> Option<f64> {
        let col: usize = (0..7).map(|r| self.counts[r][c.index()]).sum();
        ratio(self.counts[c.index()][c.index()], col)
    }

    /// Trace over all examples; malformed predictions count as errors.
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.trace(), self.total())
    }

    /// How failing examples that were misclassified went wrong.
    pub fn within_type(&self) -> WithinType {
        let mut w = WithinType::default();
        for t in ExplanationClass::ALL.into_iter().filter(|c| c.is_failure()) {
            let i = t.index();
            let support = self.support(t);
            let wrong = support - self.counts[i][i];
            w.failing_examples += support;
            w.misclassified_failures += wrong;
            let scenario = t.scenario().expect("failing class");
            if matches!(
                scenario.failure_type(),
                Some(FailureType::Detection | FailureType::MotionPlanning)
            ) {
                let sib = ExplanationClass::of_scenario(scenario.sibling().expect("failing")).expect("failing");
                w.detection_motion_misclassified += wrong;
                w.detection_motion_to_sibling += self.counts[i][sib.index()];
            }
        }
        w.sibling_share = ratio(w.detection_motion_to_sibling, w.detection_motion_misclassified);
        w.misclassified_share = ratio(w.misclassified_failures, w.failing_examples);
        w
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WithinType {
    pub failing_examples: usize,
    pub misclassified_failures: usize,
    pub misclassified_share: Option<f64>,
    /// Misclassified detection and motion-planning failures.
    pub detection_motion_misclassified: usize,
    /// Of those, predicted as the other scenario of the same failure type.
    pub detection_motion_to_sibling: usize,
    pub sibling_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub fold: usize,
    pub target: String,
    pub prediction: String,
    pub true_class: ExplanationClass,
    pub predicted_class: Option<ExplanationClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub config_digest: String,
    pub style: ExplanationStyle,
    /// Trace of the class matrix over all examples.
    pub accuracy: Option<f64>,
    /// Share of examples whose phrase equals the target exactly.
    pub exact_match_accuracy: Option<f64>,
    pub total: usize,
    pub exact_matches: usize,
    pub malformed_count: usize,
    pub classes: Vec<ExplanationClass>,
    pub matrix: [[usize; 7]; 7],
    pub malformed_by_class: [usize; 7],
    pub per_class: BTreeMap<ExplanationClass, ClassStats>,
    pub within_type: WithinType,
    pub predictions: Vec<PredictionRecord>,
}

impl EvalReport {
    pub fn from_predictions(
        predictions: Vec<PredictionRecord>,
        style: ExplanationStyle,
        config_digest: &str,
    ) -> Self {
        let mut cm = ConfusionMatrix::default();
        let mut exact = 0;
        for p in &predictions {
            cm.record(p.true_class, p.predicted_class);
            exact += usize::from(p.prediction == p.target);
        }
        let per_class = ExplanationClass::ALL
            .into_iter()
            .map(|c| {
                let stats = ClassStats {
                    precision: cm.precision(c),
                    recall: cm.recall(c),
                    support: cm.support(c),
                };
                (c, stats)
            })
            .collect();
        EvalReport {
            schema_version: SCHEMA_VERSION,
            config_digest: config_digest.to_string(),
            style,
            accuracy: cm.accuracy(),
            exact_match_accuracy: ratio(exact, predictions.len()),
            total: cm.total(),
            exact_matches: exact,
            malformed_count: cm.malformed_count(),
            classes: ExplanationClass::ALL.to_vec(),
            matrix: cm.counts,
            malformed_by_class: cm.malformed,
            per_class,
            within_type: cm.within_type(),
            predictions,
        }
    }

    pub fn confusion(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            counts: self.matrix,
            malformed: self.malformed_by_class,
        }
    }

    /// Fixed-width rendering of the matrix and per-class figures.
    pub fn table(&self) -> String {
        let names: Vec<&str> = ExplanationClass::ALL.iter().map(|c| c.name()).collect();
        let w = names.iter().map(|n| n.len()).max().unwrap_or(0);
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.3}", x));
        let mut s = String::new();
        let _ = write!(s, "{:>w$}", "true \\ pred");
        for n in &names {
            let _ = write!(s, " {n:>w$}");
        }
        let _ = writeln!(s, " {:>w$}", "malformed");
        for (i, n) in names.iter().enumerate() {
            let _ = write!(s, "{n:>w$}");
            for j in 0..7 {
                let _ = write!(s, " {:>w$}", self.matrix[i][j]);
            }
            let _ = writeln!(s, " {:>w$}", self.malformed_by_class[i]);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>w$} {:>9} {:>9} {:>9}", "class", "precision", "recall", "support");
        for c in ExplanationClass::ALL {
            let st = &self.per_class[&c];
            let _ = writeln!(
                s,
                "{:>w$} {:>9} {:>9} {:>9}",
                c.name(),
                pct(st.precision),
                pct(st.recall),
                st.support
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "accuracy             {}", pct(self.accuracy));
        let _ = writeln!(s, "exact-match accuracy {}", pct(self.exact_match_accuracy));
        let _ = writeln!(s, "examples             {}", self.total);
        let _ = writeln!(s, "malformed            {}", self.malformed_count);
        s
    }
}

/// Predicts every example with the model of the fold that tests it.
pub fn evaluate(
    examples: &[LabeledExample],
    plan: &FoldPlan,
    checkpoints: &[Checkpoint],
    book: &PhraseBook,
    style: ExplanationStyle,
    config_digest: &str,
) -> Result<EvalReport> {
    if checkpoints.len() != plan.folds.len() {
        return Err(Error::Usage(format!(
            "{} folds planned but {} trained models supplied",
            plan.folds.len(),
            checkpoints.len()
        )));
    }
    let mut owner = vec![None; examples.len()];
    for fold in 0..plan.folds.len() {
        for i in plan.split(examples, fold)?.test {
            owner[i] = Some(fold);
        }
    }
    let explainers = checkpoints
        .iter()
        .map(Explainer::from_checkpoint)
        .collect::<Result<Vec<_>>>()?;
    let predictions = examples
        .par_iter()
        .zip(&owner)
        .map(|(ex, fold)| {
            let fold = fold.ok_or_else(|| Error::Usage(format!("example {} is in no test fold", ex.id())))?;
            let prediction = explainers[fold].explain(&ex.features)?;
            Ok(PredictionRecord {
                id: ex.id(),
                fold,
                predicted_class: predict_class(book, &prediction, Some(ex.class)),
                target: ex.target.clone(),
                prediction,
                true_class: ex.class,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_predictions(predictions, style, config_digest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::failure_phrase;
    use crate::sim::FailureScenario;
    use ExplanationClass::*;

    fn book(style: ExplanationStyle) -> PhraseBook {
        PhraseBook::new(style, ["dining table"]).unwrap()
    }

    #[test]
    fn exact_match_classification() {
        let b = book(ExplanationStyle::ContextBased);
        let occ = failure_phrase(ExplanationStyle::ContextBased, FailureScenario::Occluded).unwrap();
        assert_eq!(predict_class(&b, occ, None), Some(Occluded));
        assert_eq!(
            predict_class(&b, "robot has segmented objects in the scene", None),
            Some(Correct)
        );
        assert_eq!(predict_class(&b, "robot has segmented objects in the room", None), None);
    }

    #[test]
    fn shared_action_based_phrases_resolve_to_truth() {
        let b = book(ExplanationStyle::ActionBased);
        let p = failure_phrase(ExplanationStyle::ActionBased, FailureScenario::TooFarAway).unwrap();
        assert_eq!(predict_class(&b, p, Some(CloseTogether)), Some(CloseTogether));
        assert_eq!(predict_class(&b, p, Some(TooFar)), Some(TooFar));
        assert_eq!(predict_class(&b, p, Some(Occluded)), Some(TooFar));
    }

    fn rec(t: ExplanationClass, p: Option<ExplanationClass>) -> PredictionRecord {
        PredictionRecord {
            id: String::new(),
            fold: 0,
            target: t.name().into(),
            prediction: p.map_or("garbage".into(), |c| c.name().into()),
            true_class: t,
            predicted_class: p,
        }
    }

    #[test]
    fn perfect_predictor_is_diagonal() {
        let preds = ExplanationClass::ALL.iter().flat_map(|&c| vec![rec(c, Some(c)); 3]).collect();
        let r = EvalReport::from_predictions(preds, ExplanationStyle::ContextBased, "d");
        assert_eq!(r.accuracy, Some(1.0));
        assert_eq!(r.exact_match_accuracy, Some(1.0));
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(r.matrix[i][j], if i == j { 3 } else { 0 });
            }
        }
    }

    #[test]
    fn constant_correct_predictor_scores_the_correct_share() {
        let mut preds: Vec<_> = (0..13).map(|_| rec(Correct, Some(Correct))).collect();
        preds.extend((0..7).map(|_| rec(Occluded, Some(Correct))));
        let r = EvalReport::from_predictions(preds, ExplanationStyle::ContextBased, "d");
        assert_eq!(r.accuracy, Some(13.0 / 20.0));
        assert_eq!(r.per_class[&Occluded].recall, Some(0.0));
        assert_eq!(r.per_class[&Occluded].precision, None);
        assert_eq!(r.per_class[&Correct].precision, Some(13.0 / 20.0));
    }

    #[test]
    fn bookkeeping_with_malformed_and_siblings() {
        let preds = vec![
            rec(TooFar, Some(TooFar)),
            rec(TooFar, Some(CloseTogether)),
            rec(NotPresent, Some(Occluded)),
            rec(Occluded, None),
            rec(Controller, Some(Correct)),
            rec(Correct, Some(Correct)),
        ];
        let r = EvalReport::from_predictions(preds, ExplanationStyle::ContextBased, "d");
        let cm = r.confusion();
        assert_eq!(r.total, 6);
        assert_eq!(r.malformed_count, 1);
        assert_eq!(cm.trace(), 2);
        assert_eq!(r.accuracy, Some(2.0 / 6.0));
        for c in ExplanationClass::ALL {
            assert_eq!(
                r.matrix[c.index()].iter().sum::<usize>() + r.malformed_by_class[c.index()],
                r.per_class[&c].support
            );
        }
        let w = &r.within_type;
        assert_eq!(w.failing_examples, 5);
        assert_eq!(w.misclassified_failures, 4);
        assert_eq!(w.detection_motion_misclassified, 3);
        assert_eq!(w.detection_motion_to_sibling, 2);
        assert!(r.table().contains("malformed"));
    }
}
