use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub mean: [f64; 2],
    /// Diagonal of the covariance (variances, not standard deviations).
    pub cov_diag: [f64; 2],
    pub weight: f64,
}

/// Weighted mixture of axis-aligned 2-D Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub modes: Vec<Mode>,
}

impl ToySpec {
    /// One mode at the origin with variance 0.25 per axis.
    pub fn unimodal() -> Self {
        Self {
            modes: vec![Mode {
                mean: [0.0, 0.0],
                cov_diag: [0.25, 0.25],
                weight: 1.0,
            }],
        }
    }

    /// Two equally weighted modes at `(±3, 0)`, variance 0.25 per axis:
    /// the means sit 12 standard deviations apart.
    pub fn bimodal() -> Self {
        let mode = |x: f64| Mode {
            mean: [x, 0.0],
            cov_diag: [0.25, 0.25],
            weight: 0.5,
        };
        Self {
            modes: vec![mode(-3.0), mode(3.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config("toy spec has no modes".into()));
        }
        let mut total = 0.0;
        for (i, m) in self.modes.iter().enumerate() {
            if !(m.weight > 0.0) {
                return Err(Error::Config(format!("mode {i}: weight must be positive")));
            }
            if m.cov_diag.iter().any(|&c| !(c > 0.0)) {
                return Err(Error::Config(format!(
                    "mode {i}: covariance entries must be positive"
                )));
            }
            if m.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("mode {i}: mean must be finite")));
            }
            total += m.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "mode weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Draws `n` labeled points; the label is the index of the generating mode.
pub fn sample_toy<F: Scalar>(spec: &ToySpec, n: usize, rng: &mut Rng) -> Result<Dataset<F>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("toy sample count must be at least 1".into()));
    }
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = spec.modes.len() - 1;
        for (i, m) in spec.modes.iter().enumerate() {
            acc += m.weight;
            if u < acc {
                pick = i;
                break;
            }
        }
        let m = &spec.modes[pick];
        for j in 0..2 {
            let e: f64 = StandardNormal.sample(rng);
            data.push(F::cst(m.mean[j] + m.cov_diag[j].sqrt() * e));
        }
        labels.push(pick);
    }
    Dataset::new(Tensor::matrix(n, 2, data)?, Some(labels), "toy")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn unimodal_mean_near_origin() {
        let d: Dataset<f64> = sample_toy(&ToySpec::unimodal(), 10_000, &mut seeded(1)).unwrap();
        for j in 0..2 {
            let m = (0..d.len()).map(|r| d.samples.get(r, j)).sum::<f64>() / d.len() as f64;
            assert!(m.abs() < 0.05, "{m}");
        }
    }

    #[test]
    fn bimodal_label_counts_are_binomial() {
        let n = 10_000usize;
        let d: Dataset<f64> = sample_toy(&ToySpec::bimodal(), n, &mut seeded(2)).unwrap();
        let ones = d
            .labels
            .as_ref()
            .unwrap()
            .iter()
            .filter(|&&l| l == 1)
            .count() as f64;
        let sd = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() <= 3.0 * sd);
        // points sit on the side of their mode
        for r in 0..n {
            let left = d.labels.as_ref().unwrap()[r] == 0;
            assert_eq!(d.samples.get(r, 0) < 0.0, left);
        }
    }

    #[test]
    fn single_row_and_reproducibility() {
        let d: Dataset<f64> = sample_toy(&ToySpec::bimodal(), 1, &mut seeded(3)).unwrap();
        assert_eq!(d.len(), 1);
        let a: Dataset<f64> = sample_toy(&ToySpec::bimodal(), 100, &mut seeded(4)).unwrap();
        let b: Dataset<f64> = sample_toy(&ToySpec::bimodal(), 100, &mut seeded(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = ToySpec::bimodal();
        s.modes[0].weight = 0.9;
        assert!(sample_toy::<f64>(&s, 10, &mut seeded(1)).is_err());
        let mut s = ToySpec::unimodal();
        s.modes[0].cov_diag[1] = 0.0;
        assert!(s.validate().is_err());
        assert!(ToySpec { modes: vec![] }.validate().is_err());
    }
}
