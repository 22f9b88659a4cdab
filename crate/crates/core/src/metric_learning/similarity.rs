//! Cosine similarities between embeddings.

use super::MetricLearningError;

/// In-batch cosine similarity matrix with the identity label of each row.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub m: usize,
    /// Row-major m × m; symmetric with unit diagonal.
    s: Vec<f64>,
    pub labels: Vec<usize>,
}

impl SimilarityMatrix {
    pub fn from_parts(s: Vec<f64>, labels: Vec<usize>) -> Self {
        let m = labels.len();
        assert_eq!(s.len(), m * m, "similarity matrix shape mismatch");
        Self { m, s, labels }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.s[i * self.m..(i + 1) * self.m]
    }

    /// Returns a copy reordered by `perm` (row/column/label permutation).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.m);
        let mut s = vec![0.0; self.m * self.m];
        for (i, &pi) in perm.iter().enumerate() {
            for (j, &pj) in perm.iter().enumerate() {
                s[i * self.m + j] = self.get(pi, pj);
            }
        }
        let labels = perm.iter().map(|&p| self.labels[p]).collect();
        Self { m: self.m, s, labels }
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, MetricLearningError> {
    if u.len() != v.len() {
        return Err(MetricLearningError::LengthMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(MetricLearningError::ZeroVector);
    }
    Ok(dot / (nu * nv))
}

/// Builds the batch similarity matrix from unit-length embeddings by plain
/// dot products. Rejects inputs whose norm strays more than 1e-6 from 1.
/// The diagonal is pinned to exactly 1 and the matrix is exactly symmetric.
pub fn pairwise_similarity(
    embeddings: &[Vec<f64>],
    labels: &[usize],
) -> Result<SimilarityMatrix, MetricLearningError> {
    let m = embeddings.len();
    assert_eq!(labels.len(), m, "one label per embedding");
    for (index, e) in embeddings.iter().enumerate() {
        if e.len() != embeddings[0].len() {
            return Err(MetricLearningError::LengthMismatch(embeddings[0].len(), e.len()));
        }
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(MetricLearningError::NonUnitInput { index, norm });
        }
    }
    let mut s = vec![0.0; m * m];
    for i in 0..m {
        s[i * m + i] = 1.0;
        for j in (i + 1)..m {
            let dot: f64 = embeddings[i].iter().zip(&embeddings[j]).map(|(a, b)| a * b).sum();
            s[i * m + j] = dot;
            s[j * m + i] = dot;
        }
    }
    Ok(SimilarityMatrix::from_parts(s, labels.to_vec()))
}
