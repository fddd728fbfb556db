//! Classification metrics and confusion matrices over class codes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub n: usize,
}

fn check_lengths(y_true: &[u8], y_pred: &[u8]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(HarError::ShapeMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(HarError::EmptyInput("no predictions".into()));
    }
    Ok(())
}

/// Sorted union of the codes in both sequences.
pub fn class_union(y_true: &[u8], y_pred: &[u8]) -> Vec<u8> {
    let mut c: Vec<u8> = y_true.iter().chain(y_pred).copied().collect();
    c.sort_unstable();
    c.dedup();
    c
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// One-vs-rest precision, recall, F1 and support for every class seen in
/// either sequence. Zero denominators give 0.
pub fn classification_report(y_true: &[u8], y_pred: &[u8]) -> Result<ClassificationReport> {
    check_lengths(y_true, y_pred)?;
    let classes = class_union(y_true, y_pred);
    let n = y_true.len();
    let per_class: Vec<ClassMetrics> = classes
        .iter()
        .map(|&c| {
            let tp = y_true.iter().zip(y_pred).filter(|(t, p)| **t == c && **p == c).count();
            let predicted = y_pred.iter().filter(|&&p| p == c).count();
            let support = y_true.iter().filter(|&&t| t == c).count();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: c,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let correct = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    let m = per_class.len() as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / m,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / m,
        f1: per_class.iter().map(|c| c.f1).sum::<f64>() / m,
    };
    let w = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / n as f64;
    let weighted_avg = Averages {
        precision: w(|c| c.precision),
        recall: w(|c| c.recall),
        f1: w(|c| c.f1),
    };
    Ok(ClassificationReport {
        per_class,
        accuracy: correct as f64 / n as f64,
        macro_avg,
        weighted_avg,
        n,
    })
}

impl ClassificationReport {
    /// CSV `class,name,precision,recall,f1,support`.
    pub fn write_csv<W: Write>(&self, mut w: W, name: impl Fn(u8) -> String) -> std::io::Result<()> {
        writeln!(w, "class,name,precision,recall,f1,support")?;
        for c in &self.per_class {
            writeln!(w, "{},{},{},{},{},{}", c.class, name(c.class), c.precision, c.recall, c.f1, c.support)?;
        }
        Ok(())
    }
}

/// Counts and row percentages; `zero_support[i]` marks rows with no true
/// samples, whose percentages are all zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u8>,
    pub counts: Vec<Vec<usize>>,
    pub percent: Vec<Vec<f64>>,
    pub zero_support: Vec<bool>,
}

/// Entry `(i, j)` counts true class `i` predicted as `j`. `classes` fixes
/// the row order; when `None` the sorted union of codes is used.
pub fn confusion_matrix(y_true: &[u8], y_pred: &[u8], classes: Option<&[u8]>) -> Result<ConfusionMatrix> {
    check_lengths(y_true, y_pred)?;
    let classes = match classes {
        Some(c) => c.to_vec(),
        None => class_union(y_true, y_pred),
    };
    let index = |c: u8| {
        classes
            .iter()
            .position(|&k| k == c)
            .ok_or_else(|| HarError::InvalidParameter(format!("class {c} missing from confusion classes")))
    };
    let k = classes.len();
    let mut counts = vec![vec![0usize; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[index(t)?][index(p)?] += 1;
    }
    let zero_support: Vec<bool> = counts.iter().map(|r| r.iter().sum::<usize>() == 0).collect();
    let percent = counts
        .iter()
        .map(|r| {
            let s: usize = r.iter().sum();
            r.iter().map(|&v| 100.0 * ratio(v, s)).collect()
        })
        .collect();
    Ok(ConfusionMatrix {
        classes,
        counts,
        percent,
        zero_support,
    })
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Trace over total.
    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        ratio(diag, self.total())
    }

    /// Column index of the largest off-diagonal percentage in row `i`; ties
    /// go to the lowest index.
    pub fn top_confusion(&self, i: usize) -> Option<usize> {
        let row = &self.percent[i];
        (0..row.len())
            .filter(|&j| j != i)
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if row[b] >= row[j] => Some(b),
                _ => Some(j),
            })
    }

    /// Long-form CSV `true_class,true_name,pred_class,pred_name,count,percent`
    /// followed by a footnote line for zero-support rows.
    pub fn write_csv<W: Write>(&self, mut w: W, name: impl Fn(u8) -> String) -> std::io::Result<()> {
        writeln!(w, "true_class,true_name,pred_class,pred_name,count,percent")?;
        for (i, &t) in self.classes.iter().enumerate() {
            for (j, &p) in self.classes.iter().enumerate() {
                writeln!(w, "{},{},{},{},{},{}", t, name(t), p, name(p), self.counts[i][j], self.percent[i][j])?;
            }
        }
        let empty: Vec<String> = self
            .classes
            .iter()
            .zip(&self.zero_support)
            .filter(|(_, z)| **z)
            .map(|(c, _)| name(*c))
            .collect();
        if !empty.is_empty() {
            writeln!(w, "# rows with zero support shown as 0: {}", empty.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let y = [0u8, 1, 2, 2, 5];
        let r = classification_report(&y, &y).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for c in &r.per_class {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        let cm = confusion_matrix(&y, &y, None).unwrap();
        for i in 0..cm.classes.len() {
            for j in 0..cm.classes.len() {
                assert_eq!(cm.percent[i][j], if i == j { 100.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn row_normalisation_example() {
        let cm = confusion_matrix(&[0, 0, 1, 1], &[0, 1, 1, 1], None).unwrap();
        assert_eq!(cm.percent, vec![vec![50.0, 50.0], vec![0.0, 100.0]]);
        assert_eq!(cm.percent[0][0] + cm.percent[1][0], 50.0);
        assert_eq!(cm.accuracy(), 0.75);
        assert_eq!(cm.top_confusion(0), Some(1));
    }

    #[test]
    fn absent_prediction_zero_division() {
        let r = classification_report(&[0, 1, 1], &[1, 1, 1]).unwrap();
        let c0 = &r.per_class[0];
        assert_eq!((c0.precision, c0.recall, c0.f1, c0.support), (0.0, 0.0, 0.0, 1));
    }

    #[test]
    fn equal_precision_recall_gives_f1() {
        // class 0: tp 2, fp 1, fn 1
        let r = classification_report(&[0, 0, 0, 1, 1], &[0, 0, 1, 0, 1]).unwrap();
        let c0 = &r.per_class[0];
        assert!((c0.precision - 2.0 / 3.0).abs() < 1e-15 && (c0.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((c0.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_support_rows_flagged() {
        let cm = confusion_matrix(&[0, 0], &[0, 1], Some(&[0, 1, 2])).unwrap();
        assert_eq!(cm.zero_support, vec![false, true, true]);
        assert_eq!(cm.percent[1], vec![0.0; 3]);
        let mut out = Vec::new();
        cm.write_csv(&mut out, |c| format!("c{c}")).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("# rows with zero support shown as 0: c1 c2"));
        assert!(confusion_matrix(&[0, 3], &[0, 0], Some(&[0, 1])).is_err());
    }

    #[test]
    fn length_mismatch() {
        assert!(classification_report(&[0, 1], &[0]).is_err());
        assert!(confusion_matrix(&[0], &[], None).is_err());
        assert!(classification_report(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn identities(pairs in prop::collection::vec((0u8..5, 0u8..5), 1..300)) {
            let (t, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let r = classification_report(&t, &p).unwrap();
            let cm = confusion_matrix(&t, &p, None).unwrap();
            prop_assert_eq!(r.per_class.iter().map(|c| c.support).sum::<usize>(), t.len());
            prop_assert!((r.accuracy - cm.accuracy()).abs() < 1e-15);
            for (i, row) in cm.percent.iter().enumerate() {
                if !cm.zero_support[i] {
                    prop_assert!((row.iter().sum::<f64>() - 100.0).abs() < 0.1);
                }
            }
            let wf1 = r.per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / t.len() as f64;
            prop_assert!((r.weighted_avg.f1 - wf1).abs() < 1e-12);
            prop_assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-12);
            for c in &r.per_class {
                prop_assert!(c.f1 <= c.precision.max(c.recall) + 1e-15);
                prop_assert!(c.f1 >= c.precision.min(c.recall) - 1e-15);
            }
        }
    }
}
