//! Inductive nearest-prototype classifiers: Euclidean nearest class mean and
//! cosine nearest prototype. Both break ties toward the lowest class index.

use crate::decomposition::EpisodeMatrices;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    /// p x N, column `n` is the mean support embedding of class `n`.
    pub prototypes: Matrix,
}

impl PrototypeSet {
    pub fn n_classes(&self) -> usize {
        self.prototypes.cols()
    }

    fn check_query(&self, op: &'static str, query: &Matrix) -> Result<()> {
        if query.rows() != self.prototypes.rows() {
            return Err(Error::DimensionMismatch {
                op,
                lhs: self.prototypes.shape(),
                rhs: query.shape(),
            });
        }
        Ok(())
    }
}

pub fn fit_prototypes(ep: &EpisodeMatrices) -> Result<PrototypeSet> {
    let h = ep.embeddings();
    let mut prototypes = Matrix::zeros(ep.dim(), ep.n_classes());
    let mut counts = vec![0usize; ep.n_classes()];
    for (j, &label) in ep.support_labels().iter().enumerate() {
        counts[label] += 1;
        for i in 0..ep.dim() {
            prototypes[(i, label)] += h[(i, j)];
        }
    }
    for (n, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyClass { class: n });
        }
        for i in 0..ep.dim() {
            prototypes[(i, n)] /= count as f64;
        }
    }
    Ok(PrototypeSet { prototypes })
}

fn argbest(scores: impl Iterator<Item = f64>, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    let mut best_score = f64::NAN;
    for (n, s) in scores.enumerate() {
        if n == 0 || better(s, best_score) {
            best = n;
            best_score = s;
        }
    }
    best
}

/// Nearest prototype by squared Euclidean distance.
pub fn predict_euclidean(ps: &PrototypeSet, query: &Matrix) -> Result<Vec<usize>> {
    ps.check_query("predict_euclidean", query)?;
    let p = query.rows();
    Ok((0..query.cols())
        .map(|j| {
            let dists = (0..ps.n_classes()).map(|n| {
                (0..p)
                    .map(|i| {
                        let d = query[(i, j)] - ps.prototypes[(i, n)];
                        d * d
                    })
                    .sum::<f64>()
            });
            argbest(dists, |a, b| a < b)
        })
        .collect())
}

/// Prototype with the largest cosine similarity. A zero-norm query column
/// maps to class 0; a zero-norm prototype is an error.
pub fn predict_cosine(ps: &PrototypeSet, query: &Matrix) -> Result<Vec<usize>> {
    ps.check_query("predict_cosine", query)?;
    let p = query.rows();
    let norms: Vec<f64> = (0..ps.n_classes())
        .map(|n| {
            (0..p)
                .map(|i| ps.prototypes[(i, n)].powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    if let Some(class) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroNormPrototype { class });
    }
    Ok((0..query.cols())
        .map(|j| {
            let q_norm = (0..p).map(|i| query[(i, j)].powi(2)).sum::<f64>().sqrt();
            if q_norm == 0.0 {
                return 0;
            }
            let sims = (0..ps.n_classes()).map(|n| {
                let dot: f64 = (0..p).map(|i| query[(i, j)] * ps.prototypes[(i, n)]).sum();
                dot / (norms[n] * q_norm)
            });
            argbest(sims, |a, b| a > b)
        })
        .collect())
}
