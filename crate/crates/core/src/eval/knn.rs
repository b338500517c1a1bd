use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Neighbour vote fractions per class for every test row.
///
/// Distances are Euclidean; equal distances keep training order.
pub fn knn_votes(train: &FeatureMatrix, labels: &[usize], test: &FeatureMatrix, k: usize, n_classes: usize) -> Result<Vec<Vec<f64>>> {
    if train.n_rows() == 0 || k == 0 {
        return Err(Error::InvalidInput("kNN needs k > 0 and training rows".into()));
    }
    if train.n_cols() != test.n_cols() {
        return Err(Error::WidthMismatch {
            expected: train.n_cols(),
            got: test.n_cols(),
        });
    }
    let k = k.min(train.n_rows());
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(train.n_rows());
    test.rows()
        .map(|q| {
            dist.clear();
            dist.extend(train.rows().enumerate().map(|(i, r)| {
                let d: f64 = r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            }));
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0.0; n_classes];
            for &(_, i) in &dist[..k] {
                votes[labels[i]] += 1.0 / k as f64;
            }
            Ok(votes)
        })
        .collect()
}

/// Majority vote of the `k` nearest training rows; ties → lowest class index.
pub fn knn_baseline(train: &FeatureMatrix, labels: &[usize], test: &FeatureMatrix, k: usize) -> Result<Vec<usize>> {
    let n_classes = labels.iter().max().map_or(1, |m| m + 1);
    let votes = knn_votes(train, labels, test, k, n_classes)?;
    Ok(votes
        .iter()
        .map(|v| {
            let mut best = 0;
            for (c, &x) in v.iter().enumerate() {
                if x > v[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}
