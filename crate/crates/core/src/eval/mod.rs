//! Classification metrics and annotation agreement.

mod agreement;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{LabelMap, Prediction};

pub use agreement::{
    average_observed_agreement, band, fleiss_kappa, parse_annotations, AgreementBand, AgreementReport, AgreementTable,
};

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: LabelMap,
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl ConfusionMatrix {
    pub fn new(labels: LabelMap) -> Self {
        let k = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; k]; k],
            n: 0,
        }
    }

    pub fn add(&mut self, gold: usize, predicted: usize) {
        self.counts[gold][predicted] += 1;
        self.n += 1;
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Gold count of class `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Number of times class `c` was predicted.
    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Published or otherwise expected headline numbers to compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub name: String,
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

impl EvalReport {
    /// Appends one note per headline metric whose 3-decimal value differs
    /// from the reference by more than `tolerance`. Returns the number of
    /// notes added.
    pub fn compare_with(&mut self, reference: &ReferenceRow, tolerance: f64) -> usize {
        let pairs = [
            ("accuracy", self.accuracy, reference.accuracy),
            ("weighted_precision", self.weighted_precision, reference.weighted_precision),
            ("weighted_recall", self.weighted_recall, reference.weighted_recall),
            ("weighted_f1", self.weighted_f1, reference.weighted_f1),
        ];
        let before = self.notes.len();
        for (name, ours, theirs) in pairs {
            if (ours - theirs).abs() > tolerance {
                self.notes.push(format!(
                    "{name}: computed {} but {} reports {} (difference {:+.3})",
                    fmt3(ours),
                    reference.name,
                    fmt3(theirs),
                    ours - theirs
                ));
            }
        }
        self.notes.len() - before
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>6} {:>6} {:>6} {:>6}", "", "Acc", "P", "R", "F1")?;
        writeln!(
            f,
            "{:<10} {:>6} {:>6} {:>6} {:>6}",
            "weighted",
            fmt3(self.accuracy),
            fmt3(self.weighted_precision),
            fmt3(self.weighted_recall),
            fmt3(self.weighted_f1)
        )?;
        writeln!(f)?;
        let width = self.per_class.iter().map(|c| c.label.len()).max().unwrap_or(0).max(5);
        writeln!(f, "{:<width$} {:>6} {:>6} {:>6} {:>8}", "class", "P", "R", "F1", "support")?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<width$} {:>6} {:>6} {:>6} {:>8}",
                c.label,
                fmt3(c.precision),
                fmt3(c.recall),
                fmt3(c.f1),
                c.support
            )?;
        }
        writeln!(f)?;
        writeln!(f, "confusion (rows = gold, columns = predicted)")?;
        let names = self.confusion.labels.names();
        let cell = self
            .confusion
            .counts
            .iter()
            .flatten()
            .map(|c| c.to_string().len())
            .chain(names.iter().map(String::len))
            .max()
            .unwrap_or(1);
        write!(f, "{:<width$}", "")?;
        for name in names {
            write!(f, " {name:>cell$}")?;
        }
        writeln!(f)?;
        for (name, row) in names.iter().zip(&self.confusion.counts) {
            write!(f, "{name:<width$}")?;
            for c in row {
                write!(f, " {c:>cell$}")?;
            }
            writeln!(f)?;
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}

/// Rounds to `decimals` places, sending exact ties to the even neighbour.
/// A value within 1e-9 (relative to the scaled magnitude) of a tie counts
/// as a tie, so decimal inputs like 0.0625 behave as written.
pub fn round_half_even(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x * scale;
    let floor = scaled.floor();
    let diff = scaled - floor;
    let eps = 1e-9 * scaled.abs().max(1.0);
    let rounded = if (diff - 0.5).abs() <= eps {
        if floor % 2.0 == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    rounded / scale
}

/// Three decimals, round-half-even.
pub fn fmt3(x: f64) -> String {
    format!("{:.3}", round_half_even(x, 3))
}

/// Scores class-index predictions against gold class indices.
///
/// Precision of a class that is never predicted, and recall of a class with
/// no support, are 0; so is F1 when precision and recall are both 0.
/// Weighted metrics average per-class values by gold support.
pub fn evaluate(gold: &[usize], predicted: &[usize], labels: &LabelMap) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::Empty("nothing to evaluate".into()));
    }
    let k = labels.len();
    let mut confusion = ConfusionMatrix::new(labels.clone());
    for (&g, &p) in gold.iter().zip(predicted) {
        if g >= k || p >= k {
            return Err(Error::UnknownLabel(format!("class index {} for {k} classes", g.max(p))));
        }
        confusion.add(g, p);
    }

    let n = confusion.n as f64;
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut per_class = Vec::with_capacity(k);
    let (mut wp, mut wf) = (0.0, 0.0);
    for c in 0..k {
        let tp = confusion.counts[c][c];
        let support = confusion.support(c);
        let precision = ratio(tp, confusion.predicted(c));
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let share = support as f64 / n;
        wp += share * precision;
        wf += share * f1;
        per_class.push(ClassMetrics {
            label: labels.name(c).to_string(),
            precision,
            recall,
            f1,
            support,
        });
    }
    // (support_c / n) * (tp_c / support_c) summed over classes is trace / n;
    // computing it that way keeps weighted recall exactly equal to accuracy.
    let accuracy = confusion.trace() as f64 / n;
    Ok(EvalReport {
        accuracy,
        weighted_precision: wp,
        weighted_recall: accuracy,
        weighted_f1: wf,
        per_class,
        confusion,
        notes: Vec::new(),
    })
}

/// [`evaluate`] over [`Prediction`]s, whose label names must belong to
/// `labels`.
pub fn evaluate_predictions(gold: &[usize], predictions: &[Prediction], labels: &LabelMap) -> Result<EvalReport> {
    let predicted = predictions
        .iter()
        .map(|p| labels.require(&p.label))
        .collect::<Result<Vec<_>>>()?;
    evaluate(gold, &predicted, labels)
}

/// Records whose gold class is in one set and whose prediction is a given
/// class, e.g. rumors and offensive posts predicted as hate speech.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSlice {
    pub from: Vec<String>,
    pub to: String,
    pub count: usize,
    pub ids: Vec<String>,
}

pub fn error_slice(
    ids: &[String],
    gold: &[usize],
    predicted: &[usize],
    labels: &LabelMap,
    from: &[&str],
    to: &str,
) -> Result<ErrorSlice> {
    if gold.len() != predicted.len() || ids.len() != gold.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let from_idx = from.iter().map(|name| labels.require(name)).collect::<Result<Vec<_>>>()?;
    let to_idx = labels.require(to)?;
    let ids: Vec<String> = ids
        .iter()
        .zip(gold.iter().zip(predicted))
        .filter(|(_, (g, p))| from_idx.contains(g) && **p == to_idx)
        .map(|(id, _)| id.clone())
        .collect();
    Ok(ErrorSlice {
        from: from.iter().map(|s| s.to_string()).collect(),
        to: to.to_string(),
        count: ids.len(),
        ids,
    })
}
