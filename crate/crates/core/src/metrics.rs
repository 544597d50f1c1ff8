use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold: usize,
    pub predicted: usize,
    /// Neither gold nor predicted occurrences; the row is reported as all
    /// ones by convention.
    pub vacuous: bool,
}

/// Per-class precision/recall/F1 and their macro means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<ClassMetrics>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest metrics for every class in `classes`.
pub fn evaluate_metrics<S: AsRef<str>>(predicted: &[S], gold: &[S], classes: &[String]) -> Result<MetricsTable> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let lookup = |s: &str| index.get(s).copied().ok_or_else(|| Error::UnknownClass(s.to_string()));
    let n = classes.len();
    let (mut tp, mut n_pred, mut n_gold) = (vec![0usize; n], vec![0usize; n], vec![0usize; n]);
    for (p, g) in predicted.iter().zip(gold) {
        let (p, g) = (lookup(p.as_ref())?, lookup(g.as_ref())?);
        n_pred[p] += 1;
        n_gold[g] += 1;
        if p == g {
            tp[p] += 1;
        }
    }
    let rows: Vec<ClassMetrics> = classes
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let vacuous = n_gold[c] == 0 && n_pred[c] == 0;
            let (precision, recall, f1) = if vacuous {
                (1.0, 1.0, 1.0)
            } else {
                let p = ratio(tp[c], n_pred[c]);
                let r = ratio(tp[c], n_gold[c]);
                let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
                (p, r, f)
            };
            if vacuous {
                log::debug!("class {name} absent from gold and predictions; scored 1 by convention");
            }
            ClassMetrics {
                class: name.clone(),
                precision,
                recall,
                f1,
                gold: n_gold[c],
                predicted: n_pred[c],
                vacuous,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| -> f64 {
        if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(f).sum::<f64>() / rows.len() as f64
        }
    };
    Ok(MetricsTable {
        mean_precision: mean(|r| r.precision),
        mean_recall: mean(|r| r.recall),
        mean_f1: mean(|r| r.f1),
        rows,
    })
}

impl MetricsTable {
    pub fn row(&self, class: &str) -> Option<&ClassMetrics> {
        self.rows.iter().find(|r| r.class == class)
    }

    /// Rows = classes then `mean`; columns = precision, recall, f1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "precision", "recall", "f1"])?;
        for r in &self.rows {
            w.write_record([r.class.clone(), fmt(r.precision), fmt(r.recall), fmt(r.f1)])?;
        }
        w.write_record([
            "mean".to_string(),
            fmt(self.mean_precision),
            fmt(self.mean_recall),
            fmt(self.mean_f1),
        ])?;
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classes() -> Vec<String> {
        vec!["Name".into(), "Age".into(), "Other".into()]
    }

    #[test]
    fn identical_labels_give_all_ones() {
        let g = ["Name", "Age", "Other", "Other"];
        let m = evaluate_metrics(&g, &g, &classes()).unwrap();
        assert!(m.rows.iter().all(|r| r.precision == 1.0 && r.recall == 1.0 && r.f1 == 1.0));
        assert_eq!(m.mean_f1, 1.0);
    }

    #[test]
    fn definition_arithmetic() {
        // Name: TP=1, FP=1, FN=0
        let pred = ["Name", "Name", "Age"];
        let gold = ["Name", "Age", "Age"];
        let m = evaluate_metrics(&pred, &gold, &classes()).unwrap();
        let r = m.row("Name").unwrap();
        assert_eq!((r.precision, r.recall), (0.5, 1.0));
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        let other = m.row("Other").unwrap();
        assert!(other.vacuous && other.f1 == 1.0);
        // macro mean of (2/3, 2/3, 1)
        assert!((m.mean_f1 - (2.0 / 3.0 + 2.0 / 3.0 + 1.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn macro_mean_is_arithmetic() {
        let rows = vec![("A", 0.8), ("B", 0.6)];
        let mean = rows.iter().map(|r| r.1).sum::<f64>() / 2.0;
        assert!((mean - 0.7).abs() < 1e-12);
        // and the same through the evaluator: A has P=1,R=2/3 -> 0.8; B has P=3/7, R=1 -> 0.6
        let pred = ["A", "A", "B", "B", "B", "B", "B", "B", "B"];
        let gold = ["A", "A", "A", "B", "B", "B", "C", "C", "C"];
        let cls: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        assert!(evaluate_metrics(&pred, &gold, &cls).is_err());
        let cls3: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let m = evaluate_metrics(&pred, &gold, &cls3).unwrap();
        assert!((m.row("A").unwrap().f1 - 0.8).abs() < 1e-12);
        assert!((m.row("B").unwrap().f1 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            evaluate_metrics(&["Name"], &[], &classes()),
            Err(Error::LengthMismatch { left: 1, right: 0 })
        ));
    }

    #[test]
    fn csv_layout() {
        let g = ["Name", "Other"];
        let m = evaluate_metrics(&g, &g, &classes()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "class,precision,recall,f1");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("mean,"));
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_bounded(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40)) {
            let cls = classes();
            let pred: Vec<&str> = pairs.iter().map(|p| cls[p.0].as_str()).collect();
            let gold: Vec<&str> = pairs.iter().map(|p| cls[p.1].as_str()).collect();
            let m = evaluate_metrics(&pred, &gold, &cls).unwrap();
            let (mut rp, mut rg) = (pred.clone(), gold.clone());
            rp.reverse();
            rg.reverse();
            prop_assert_eq!(&m, &evaluate_metrics(&rp, &rg, &cls).unwrap());
            for r in &m.rows {
                prop_assert!((0.0..=1.0).contains(&r.f1));
                if r.precision + r.recall > 0.0 && !r.vacuous {
                    prop_assert!((r.f1 - 2.0 * r.precision * r.recall / (r.precision + r.recall)).abs() < 1e-12);
                }
            }
        }
    }
}
