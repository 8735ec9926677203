use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbors {
    /// `indices[g]` lists the `k` nearest training rows of query `g`.
    pub indices: Vec<Vec<usize>>,
    /// Matching Euclidean distances.
    pub distances: Vec<Vec<f64>>,
}

/// Exact k-nearest neighbours under L2; equal distances go to the lower index.
pub fn nearest_neighbors<F: Scalar>(
    queries: &Tensor<F>,
    train: &Tensor<F>,
    k: usize,
) -> Result<Neighbors> {
    if !queries.is_matrix() || !train.is_matrix() || queries.cols() != train.cols() {
        return Err(Error::Dimension {
            op: "nearest_neighbors",
            lhs: queries.shape().to_vec(),
            rhs: train.shape().to_vec(),
        });
    }
    let m = train.rows();
    if k == 0 || k > m {
        return Err(Error::Config(format!("k must lie in 1..={m}, got {k}")));
    }
    let mut indices = Vec::with_capacity(queries.rows());
    let mut distances = Vec::with_capacity(queries.rows());
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(m);
    for g in 0..queries.rows() {
        let q = queries.row(g);
        order.clear();
        order.extend((0..m).map(|i| {
            let d2: f64 = q
                .iter()
                .zip(train.row(i))
                .map(|(&a, &b)| (a.as_f64() - b.as_f64()).powi(2))
                .sum();
            (d2, i)
        }));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < m {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_by(cmp);
        indices.push(order.iter().map(|&(_, i)| i).collect());
        distances.push(order.iter().map(|&(d2, _)| d2.sqrt()).collect());
    }
    Ok(Neighbors { indices, distances })
}
