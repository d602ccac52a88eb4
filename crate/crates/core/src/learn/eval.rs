use serde::Serialize;

use super::dataset::Dataset;
use super::ensemble::{EnsembleModel, Predictions};
use crate::error::{Error, Result};

/// Test-set summary. Confusion rows are true classes, columns predictions,
/// both in class-index order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub per_class_support: Vec<usize>,
    /// Coefficient of determination; regressors only.
    pub r_squared: Option<f64>,
}

impl EvalReport {
    pub fn from_predictions(class_names: Vec<String>, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::InvalidArgument("truth and prediction lengths differ".into()));
        }
        if truth.is_empty() {
            return Err(Error::Data("cannot evaluate on an empty test set".into()));
        }
        let k = class_names.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let per_class_support = confusion.iter().map(|row| row.iter().sum()).collect();
        let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
        Ok(EvalReport {
            class_names,
            accuracy: trace as f64 / truth.len() as f64,
            confusion,
            per_class_support,
            r_squared: None,
        })
    }

    pub fn total(&self) -> usize {
        self.per_class_support.iter().sum()
    }

    /// Confusion matrix as CSV with class names on both axes.
    pub fn confusion_csv(&self) -> String {
        let mut out = format!("true\\predicted,{}\n", self.class_names.join(","));
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            out.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        out
    }

    /// Count of windows confused between classes `a` and `b`, both ways.
    pub fn confusion_between(&self, a: usize, b: usize) -> usize {
        self.confusion[a][b] + self.confusion[b][a]
    }

    /// Element-wise sum of two reports over the same classes.
    pub fn merge(&self, other: &EvalReport) -> Result<EvalReport> {
        if self.class_names != other.class_names {
            return Err(Error::Data("cannot merge reports over different class sets".into()));
        }
        let confusion: Vec<Vec<usize>> = self
            .confusion
            .iter()
            .zip(&other.confusion)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        let per_class_support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
        let total: usize = per_class_support.iter().sum();
        let trace: usize = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        Ok(EvalReport {
            class_names: self.class_names.clone(),
            accuracy: trace as f64 / total as f64,
            confusion,
            per_class_support,
            r_squared: None,
        })
    }
}

/// `1 - SS_res / SS_tot`. A constant truth scores 1 when matched exactly and
/// 0 otherwise.
pub fn r_squared(truth: &[f64], predicted: &[f64]) -> f64 {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = truth.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

pub fn evaluate(model: &EnsembleModel, test: &Dataset) -> Result<EvalReport> {
    let predicted = model.predict_classes(&test.x)?;
    let mut report = EvalReport::from_predictions(test.classes.names.clone(), &test.labels, &predicted)?;
    if let Predictions::Values(values) = model.predict(&test.x)? {
        report.r_squared = Some(r_squared(&test.targets(), &values));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        crate::datamodel::Task::Speed.class_names()
    }

    #[test]
    fn perfect_predictions() {
        let truth = [0, 1, 2, 3, 3];
        let r = EvalReport::from_predictions(names(), &truth, &truth).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion[3][3], 2);
        assert_eq!(r.per_class_support, vec![1, 1, 1, 2]);
        assert_eq!(r_squared(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]), 1.0);
    }

    #[test]
    fn mean_predictor_has_zero_r_squared() {
        let y = [1.0, 2.0, 3.0, 6.0];
        assert!(r_squared(&y, &[3.0; 4]).abs() < 1e-15);
        assert!(r_squared(&y, &[10.0; 4]) < 0.0);
    }

    #[test]
    fn accuracy_is_trace_over_sum() {
        let truth = [0, 0, 1, 1, 2, 3, 3, 3];
        let pred = [0, 1, 1, 2, 2, 3, 2, 0];
        let r = EvalReport::from_predictions(names(), &truth, &pred).unwrap();
        let trace: usize = (0..4).map(|i| r.confusion[i][i]).sum();
        assert_eq!(r.accuracy, trace as f64 / 8.0);
        assert_eq!(r.confusion_between(1, 2), 1);
        assert_eq!(r.confusion_between(2, 3), 1);
    }

    #[test]
    fn confusion_csv_uses_class_headers() {
        let r = EvalReport::from_predictions(names(), &[0, 1], &[0, 1]).unwrap();
        let csv = r.confusion_csv();
        assert_eq!(csv.lines().next().unwrap(), "true\\predicted,0 m/s,1 m/s,2 m/s,3 m/s");
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().nth(2).unwrap(), "1 m/s,0,1,0,0");
    }

    #[test]
    fn merged_reports_add_counts() {
        let a = EvalReport::from_predictions(names(), &[0, 1], &[0, 0]).unwrap();
        let b = EvalReport::from_predictions(names(), &[1, 2], &[1, 2]).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.total(), 4);
        assert_eq!(m.accuracy, 0.75);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        assert!(EvalReport::from_predictions(names(), &[], &[]).is_err());
    }
}
