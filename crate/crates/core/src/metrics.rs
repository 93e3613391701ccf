//! Argmax prediction, accuracy and confusion matrices.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("confusion matrix is empty")]
    Empty,
    #[error("class index {index} out of range for {n_classes} classes")]
    ClassOutOfRange { index: usize, n_classes: usize },
    #[error("cannot merge matrices with different label sets")]
    LabelMismatch,
}

/// Index of the largest value; ties go to the lowest index. Returns 0 for
/// an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Prediction counts with rows = true class and columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![0; n * n],
        }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Option<Self> {
        let n = labels.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Self {
            labels,
            counts: counts.into_iter().flatten().collect(),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn count(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.n_classes() + predicted]
    }

    pub fn row(&self, actual: usize) -> &[u64] {
        let n = self.n_classes();
        &self.counts[actual * n..(actual + 1) * n]
    }

    pub fn record(&mut self, actual: usize, predicted: usize) -> Result<(), EvalError> {
        let n = self.n_classes();
        for index in [actual, predicted] {
            if index >= n {
                return Err(EvalError::ClassOutOfRange { index, n_classes: n });
            }
        }
        self.counts[actual * n + predicted] += 1;
        Ok(())
    }

    /// Elementwise sum of two matrices over the same labels.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), EvalError> {
        if self.labels != other.labels {
            return Err(EvalError::LabelMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.count(i, i)).sum()
    }

    pub fn row_sum(&self, actual: usize) -> u64 {
        self.row(actual).iter().sum()
    }

    /// `trace / total`.
    pub fn accuracy(&self) -> Result<f64, EvalError> {
        match self.total() {
            0 => Err(EvalError::Empty),
            total => Ok(self.trace() as f64 / total as f64),
        }
    }

    /// Diagonal over row sum per class; `None` for classes with no
    /// evaluated items.
    pub fn per_class_accuracy(&self) -> Vec<(String, Option<f64>)> {
        (0..self.n_classes())
            .map(|i| {
                let row = self.row_sum(i);
                let acc = (row > 0).then(|| self.count(i, i) as f64 / row as f64);
                (self.labels[i].clone(), acc)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("l{i}")).collect()
    }

    #[test]
    fn argmax_rules() {
        assert_eq!(argmax(&[0.1, 0.9]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[-3.0, 7.0, 7.0, 2.0]), 1);
    }

    #[test]
    fn accuracy_cases() {
        let cm = ConfusionMatrix::from_counts(labels(2), vec![vec![3, 1], vec![1, 3]]).unwrap();
        assert_eq!(cm.accuracy(), Ok(0.75));
        let cm = ConfusionMatrix::from_counts(labels(2), vec![vec![5, 0], vec![0, 2]]).unwrap();
        assert_eq!(cm.accuracy(), Ok(1.0));
        let cm = ConfusionMatrix::from_counts(labels(2), vec![vec![0, 4], vec![2, 0]]).unwrap();
        assert_eq!(cm.accuracy(), Ok(0.0));
        assert_eq!(ConfusionMatrix::new(labels(3)).accuracy(), Err(EvalError::Empty));
    }

    #[test]
    fn per_class_rules() {
        let cm = ConfusionMatrix::from_counts(labels(3), vec![vec![8, 2, 0], vec![0, 4, 0], vec![0, 0, 0]]).unwrap();
        let per = cm.per_class_accuracy();
        assert_eq!(per[0], ("l0".to_string(), Some(0.8)));
        assert_eq!(per[1].1, Some(1.0));
        assert_eq!(per[2].1, None);
    }

    #[test]
    fn record_and_merge() {
        let mut a = ConfusionMatrix::new(labels(2));
        a.record(0, 1).unwrap();
        assert_eq!(a.record(2, 0), Err(EvalError::ClassOutOfRange { index: 2, n_classes: 2 }));
        let mut b = ConfusionMatrix::new(labels(2));
        b.record(1, 1).unwrap();
        a.merge(&b).unwrap();
        assert_eq!((a.count(0, 1), a.count(1, 1), a.total()), (1, 1, 2));
        assert_eq!(a.merge(&ConfusionMatrix::new(labels(3))), Err(EvalError::LabelMismatch));
    }
}
