use serde::Serialize;

use crate::autodiff::Tensor;
use crate::data::ToySpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A mode counts as covered once it holds this share of the samples.
pub const COVERED_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coverage {
    pub per_mode_fraction: Vec<f64>,
    pub covered_modes: usize,
    pub void_fraction: f64,
}

/// Assigns each sample to the nearest mode (diagonal Mahalanobis distance)
/// lying within `radius_sigmas`; samples near no mode count as void.
pub fn mode_coverage<F: Scalar>(
    samples: &Tensor<F>,
    spec: &ToySpec,
    radius_sigmas: f64,
) -> Result<Coverage> {
    if !(radius_sigmas > 0.0) {
        return Err(Error::Config(format!(
            "radius_sigmas must be > 0, got {radius_sigmas}"
        )));
    }
    if samples.shape().len() != 2 || samples.cols() != 2 {
        return Err(Error::Dimension {
            op: "mode_coverage",
            lhs: samples.shape().to_vec(),
            rhs: vec![usize::MAX, 2],
        });
    }
    spec.validate()?;
    let m = samples.rows();
    let mut counts = vec![0usize; spec.modes.len()];
    let r2 = radius_sigmas * radius_sigmas;
    for i in 0..m {
        let x = samples.row(i);
        let mut best: Option<(f64, usize)> = None;
        for (k, mode) in spec.modes.iter().enumerate() {
            let d2: f64 = (0..2)
                .map(|j| (x[j].as_f64() - mode.mean[j]).powi(2) / mode.cov_diag[j])
                .sum();
            if d2 <= r2 && best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, k));
            }
        }
        if let Some((_, k)) = best {
            counts[k] += 1;
        }
    }
    let denom = m.max(1) as f64;
    let per_mode_fraction: Vec<f64> = counts.iter().map(|&c| c as f64 / denom).collect();
    let assigned: usize = counts.iter().sum();
    Ok(Coverage {
        covered_modes: per_mode_fraction
            .iter()
            .filter(|&&f| f >= COVERED_FRACTION)
            .count(),
        void_fraction: if m == 0 {
            0.0
        } else {
            (m - assigned) as f64 / denom
        },
        per_mode_fraction,
    })
}
