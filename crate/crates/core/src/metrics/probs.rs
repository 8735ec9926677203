use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Clamp applied inside every logarithm of a KL term.
pub const KL_EPS: f64 = 1e-12;

const ROW_SUM_TOL: f64 = 1e-9;

/// Row-stochastic `p(y|x)` table with cached argmax labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassProbMatrix {
    rows: usize,
    classes: usize,
    probs: Vec<f64>,
    predicted: Vec<usize>,
}

impl ClassProbMatrix {
    pub fn new(rows: usize, classes: usize, probs: Vec<f64>) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Config(
                "probability table needs at least one class".into(),
            ));
        }
        if probs.len() != rows * classes {
            return Err(Error::Length(format!(
                "{} probabilities for a {rows}x{classes} table",
                probs.len()
            )));
        }
        let mut predicted = Vec::with_capacity(rows);
        for (r, row) in probs.chunks(classes).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::Domain(format!(
                    "row {r} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Domain(format!("row {r} sums to {s}, not 1")));
            }
            predicted.push(argmax(row));
        }
        Ok(Self {
            rows,
            classes,
            probs,
            predicted,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::Length("ragged probability rows".into()));
        }
        Self::new(rows.len(), c, rows.concat())
    }

    pub fn from_tensor<F: Scalar>(t: &Tensor<F>) -> Result<Self> {
        if !t.is_matrix() {
            return Err(Error::Dimension {
                op: "class_probs",
                lhs: t.shape().to_vec(),
                rhs: vec![],
            });
        }
        Self::new(t.rows(), t.cols(), t.to_f64_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.probs[r * self.classes..(r + 1) * self.classes]
    }

    pub fn predicted(&self) -> &[usize] {
        &self.predicted
    }

    /// Column means over `rows`, the marginal `p(y)` of that subset.
    ///
    /// Accumulated as offsets from the first row, so a block of identical
    /// rows yields that row exactly.
    pub fn marginal(&self, rows: std::ops::Range<usize>) -> Vec<f64> {
        let n = rows.len() as f64;
        let base = self.row(rows.start).to_vec();
        let mut dev = vec![0.0; self.classes];
        for r in rows {
            for ((acc, &p), &b) in dev.iter_mut().zip(self.row(r)).zip(&base) {
                *acc += p - b;
            }
        }
        base.iter().zip(dev).map(|(&b, d)| b + d / n).collect()
    }
}

/// First index of the maximum.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `KL(p ‖ q) = Σ p·(ln p − ln q)` with both logs clamped at [`KL_EPS`].
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| a * (a.max(KL_EPS).ln() - b.max(KL_EPS).ln()))
        .sum()
}
