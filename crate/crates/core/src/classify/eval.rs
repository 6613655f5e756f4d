//! Stratified cross-validation and accuracy reporting.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svm::train_ovr;
use crate::data::Label;
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FOLDS: usize = 10;

/// One clip's final feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedClip {
    pub clip_id: String,
    pub label: Label,
    #[serde(with = "values_as_seq")]
    pub values: Array1<f64>,
}

mod values_as_seq {
    use ndarray::Array1;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
        Vec::<f64>::deserialize(d).map(Array1::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Vectors were encoded once with shared codebooks (fast, not leakage-free).
    PreEncoded,
    /// Reductions and codebooks were refit on every training fold.
    RefitPerFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDescriptor {
    pub folds: usize,
    pub seed: u64,
    pub mode: SplitMode,
    pub cost: f64,
    pub test_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub method: String,
    /// Class ids indexing the rows and columns of `confusion`.
    pub classes: Vec<Label>,
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub split: SplitDescriptor,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Assigns every sample to one of `folds` folds, stratified by label.
///
/// Within each class (ascending id) the samples are shuffled and dealt
/// round-robin, continuing from where the previous class stopped so fold
/// sizes stay within one of each other.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::validation("cross-validation needs at least 2 folds"));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::validation(format!(
                "class {class} has {} clips, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for m in members {
            assignment[m] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Runs `fit_predict(train, test)` for every fold and assembles the report.
/// `fit_predict` returns one predicted label per test index, in order.
pub fn cross_validate_with<F>(
    method: &str,
    labels: &[Label],
    folds: usize,
    seed: u64,
    cost: f64,
    mode: SplitMode,
    fit_predict: F,
) -> Result<EvalReport>
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<Label>> + Sync,
{
    let assignment = stratified_folds(labels, folds, seed)?;
    let per_fold: Vec<(Vec<usize>, Vec<Label>)> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignment[i] == f);
            let predicted = fit_predict(&train, &test)?;
            if predicted.len() != test.len() {
                return Err(Error::validation("one prediction per test clip required"));
            }
            Ok((test, predicted))
        })
        .collect::<Result<_>>()?;

    let mut predictions = vec![0; labels.len()];
    let mut test_sizes = Vec::with_capacity(folds);
    for (test, predicted) in per_fold {
        test_sizes.push(test.len());
        for (i, p) in test.into_iter().zip(predicted) {
            predictions[i] = p;
        }
    }
    let mut report = build_report(method, labels, &predictions)?;
    report.split = SplitDescriptor {
        folds,
        seed,
        mode,
        cost,
        test_sizes,
        config_hash: None,
    };
    Ok(report)
}

/// Cross-validates pre-encoded vectors with one-vs-rest linear SVMs.
pub fn cross_validate(dataset: &[EncodedClip], folds: usize, seed: u64, cost: f64) -> Result<EvalReport> {
    let dim = dataset.first().map_or(0, |c| c.values.len());
    if dataset.iter().any(|c| c.values.len() != dim) {
        return Err(Error::validation("encoded clips differ in length"));
    }
    let labels: Vec<Label> = dataset.iter().map(|c| c.label).collect();
    cross_validate_with("pre-encoded", &labels, folds, seed, cost, SplitMode::PreEncoded, |train, test| {
        let x = stack(dataset, train);
        let y: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
        let model = train_ovr(x.view(), &y, cost, seed)?;
        test.iter()
            .map(|&i| model.predict(dataset[i].values.view()).map(|(l, _)| l))
            .collect()
    })
}

fn stack(dataset: &[EncodedClip], idx: &[usize]) -> Array2<f64> {
    let dim = dataset.first().map_or(0, |c| c.values.len());
    let mut x = Array2::zeros((idx.len(), dim));
    for (mut row, &i) in x.rows_mut().into_iter().zip(idx) {
        row.assign(&dataset[i].values);
    }
    x
}

/// Confusion matrix and accuracies for a full set of predictions.
pub fn build_report(method: &str, truth: &[Label], predicted: &[Label]) -> Result<EvalReport> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::validation("need one prediction per clip"));
    }
    let mut classes: Vec<Label> = truth.iter().chain(predicted).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let index = |l: Label| classes.binary_search(&l).expect("collected above");
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[index(t)][index(p)] += 1;
    }
    let correct: usize = (0..classes.len()).map(|i| confusion[i][i]).sum();
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                0.0
            } else {
                row[i] as f64 / total as f64
            }
        })
        .collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        method: method.to_owned(),
        classes,
        overall_accuracy: correct as f64 / truth.len() as f64,
        per_class_accuracy,
        confusion,
        split: SplitDescriptor {
            folds: 0,
            seed: 0,
            mode: SplitMode::PreEncoded,
            cost: 0.0,
            test_sizes: Vec::new(),
            config_hash: None,
        },
        notes: Vec::new(),
    })
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            let _ = write!(out, "{c}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Method name and accuracy (percent, two decimals), one line per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<width$}  Accuracy\n", "Method");
    for r in reports {
        let _ = writeln!(out, "{:<width$}  {:>7.2}%", r.method, 100.0 * r.overall_accuracy);
    }
    out
}
