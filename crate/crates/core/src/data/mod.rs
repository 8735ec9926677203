//! Training data: synthetic 2-D Gaussian mixtures, MNIST in IDX format,
//! class-balanced subsets and a CSV interchange format.

mod idx;
mod toy;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::index;
use rand::Rng as _;

pub use idx::{
    load_mnist_idx, read_idx_images, read_idx_labels, to_pixel, write_idx_images, write_idx_labels,
    IdxImages,
};
pub use toy::{sample_toy, Mode, ToySpec};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    pub samples: Tensor<F>,
    pub labels: Option<Vec<usize>>,
    pub source: String,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(
        samples: Tensor<F>,
        labels: Option<Vec<usize>>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if !samples.is_matrix() {
            return Err(Error::Data(format!(
                "samples must be a matrix, got {:?}",
                samples.shape()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != samples.rows() {
                return Err(Error::Length(format!(
                    "{} labels for {} samples",
                    l.len(),
                    samples.rows()
                )));
            }
        }
        Ok(Self {
            samples,
            labels,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.shape()[1]
    }

    /// Rows drawn uniformly with replacement.
    pub fn sample_batch(&self, batch: usize, rng: &mut Rng) -> Tensor<F> {
        let idx: Vec<usize> = (0..batch)
            .map(|_| rng.random_range(0..self.len()))
            .collect();
        self.samples.select_rows(&idx)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            samples: self.samples.select_rows(idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            source: self.source.clone(),
        }
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.labels.iter().flatten().copied().collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Header `x0..x{D-1}` plus `label` when labels are present.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.dim();
        let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut row: Vec<String> = self
                .samples
                .row(r)
                .iter()
                .map(|v| v.as_f64().to_string())
                .collect();
            if let Some(l) = &self.labels {
                row.push(l[r].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv); a trailing `label` column is optional.
    pub fn read_csv<R: Read>(input: R, source: impl Into<String>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let has_label = header.iter().next_back() == Some("label");
        let d = header.len() - usize::from(has_label);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Format(format!(
                    "row {} has {} fields, expected {}",
                    line + 2,
                    rec.len(),
                    header.len()
                )));
            }
            for field in rec.iter().take(d) {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Format(format!("row {}: bad number `{field}`", line + 2))
                })?;
                data.push(F::cst(v));
            }
            if has_label {
                let f = &rec[d];
                labels.push(
                    f.trim()
                        .parse()
                        .map_err(|_| Error::Format(format!("row {}: bad label `{f}`", line + 2)))?,
                );
            }
        }
        let rows = data.len().checked_div(d).unwrap_or(labels.len());
        Self::new(
            Tensor::matrix(rows, d, data)?,
            has_label.then_some(labels),
            source,
        )
    }
}

/// Picks `per_class` members of every class uniformly without replacement.
/// Output keeps the original row order.
pub fn subset_balanced<F: Scalar>(
    d: &Dataset<F>,
    per_class: usize,
    rng: &mut Rng,
) -> Result<Dataset<F>> {
    let labels = d
        .labels
        .as_ref()
        .ok_or_else(|| Error::Data("balanced subset needs labels".into()))?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut chosen = Vec::with_capacity(per_class * by_class.len());
    for (class, members) in &by_class {
        if members.len() < per_class {
            return Err(Error::Data(format!(
                "class {class} has {} members, need {per_class}",
                members.len()
            )));
        }
        chosen.extend(
            index::sample(rng, members.len(), per_class)
                .iter()
                .map(|j| members[j]),
        );
    }
    chosen.sort_unstable();
    let mut out = d.select(&chosen);
    out.source = format!("{} [balanced {per_class}/class]", d.source);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn labeled(counts: &[usize]) -> Dataset<f64> {
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            labels.extend(std::iter::repeat_n(c, n));
        }
        let samples = Tensor::matrix(
            labels.len(),
            1,
            (0..labels.len()).map(|i| i as f64).collect(),
        )
        .unwrap();
        Dataset::new(samples, Some(labels), "fixture").unwrap()
    }

    #[test]
    fn balanced_subset_is_exactly_uniform() {
        let d = labeled(&[80, 55, 120, 50]);
        let s = subset_balanced(&d, 50, &mut seeded(1)).unwrap();
        assert_eq!(s.len(), 200);
        for c in 0..4 {
            assert_eq!(
                s.labels
                    .as_ref()
                    .unwrap()
                    .iter()
                    .filter(|&&l| l == c)
                    .count(),
                50
            );
        }
        // rows keep their labels
        for (r, &l) in s.labels.as_ref().unwrap().iter().enumerate() {
            assert_eq!(d.labels.as_ref().unwrap()[s.samples.get(r, 0) as usize], l);
        }
    }

    #[test]
    fn balanced_subset_edge_cases() {
        let d = labeled(&[10, 10]);
        let empty = subset_balanced(&d, 0, &mut seeded(1)).unwrap();
        assert!(empty.is_empty());
        assert!(matches!(
            subset_balanced(&d, 11, &mut seeded(1)),
            Err(Error::Data(_))
        ));
        let a = subset_balanced(&d, 4, &mut seeded(9)).unwrap();
        let b = subset_balanced(&d, 4, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
        let unlabeled = Dataset::new(d.samples.clone(), None, "x").unwrap();
        assert!(subset_balanced(&unlabeled, 1, &mut seeded(1)).is_err());
    }

    #[test]
    fn csv_round_trip_with_and_without_labels() {
        let d = Dataset::new(
            Tensor::<f64>::from_rows(&[vec![0.1, -2.5], vec![1e-17, 3.0]]).unwrap(),
            Some(vec![1, 0]),
            "t",
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x0,x1,label\n"));
        let back = Dataset::<f64>::read_csv(&buf[..], "t").unwrap();
        assert_eq!(back, d);

        let u = Dataset::new(d.samples.clone(), None, "t").unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::<f64>::read_csv(&buf[..], "t").unwrap(), u);
    }

    #[test]
    fn mismatched_labels_rejected() {
        let t = Tensor::<f64>::zeros(&[3, 2]);
        assert!(matches!(
            Dataset::new(t, Some(vec![0, 1]), "x"),
            Err(Error::Length(_))
        ));
    }
}
