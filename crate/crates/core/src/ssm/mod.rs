//! Semantic similarity matrix: soft image-to-label targets from pairwise
//! text-embedding cosines, max-pooled over each image's label block.

mod dump;
mod provider;

use std::collections::HashMap;
use std::ops::Range;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dump::{read_ssm_dump, write_ssm_dump};
pub use provider::{
    EmbeddingProvider, HashUnitProvider, HashedBagOfWords, ProviderKind, SimilarityConfig, TableProvider,
};

use crate::error::{Error, Result};
use crate::knowledge::StructuredLabel;

/// Cosine similarity; identical inputs give exactly 1.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("cosine of lengths {} and {}", u.len(), v.len())));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    if u == v {
        return Ok(1.0);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Label texts grouped per image. Flattened order is group-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedLabels {
    groups: Vec<Vec<String>>,
}

impl GroupedLabels {
    pub fn new(groups: Vec<Vec<String>>) -> Result<Self> {
        if let Some(i) = groups.iter().position(Vec::is_empty) {
            return Err(Error::Shape(format!("image {i} has no labels")));
        }
        Ok(Self { groups })
    }

    pub fn from_labels(groups: &[Vec<StructuredLabel>]) -> Result<Self> {
        Self::new(
            groups
                .iter()
                .map(|g| g.iter().map(|l| l.text.clone()).collect())
                .collect(),
        )
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }

    pub fn n(&self) -> usize {
        self.groups.len()
    }

    pub fn m(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn row_counts(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn flattened(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().flatten().map(String::as_str)
    }

    /// Column range of image `i`'s own labels.
    pub fn block(&self, i: usize) -> Range<usize> {
        let start: usize = self.groups[..i].iter().map(Vec::len).sum();
        start..start + self.groups[i].len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: Array2<f64>,
    pub row_counts: Vec<usize>,
}

impl SimilarityMatrix {
    pub fn new(values: Array2<f64>, row_counts: Vec<usize>) -> Result<Self> {
        if values.nrows() != row_counts.len() || values.ncols() != row_counts.iter().sum::<usize>() {
            return Err(Error::Shape(format!(
                "{}x{} matrix with row counts {:?}",
                values.nrows(),
                values.ncols(),
                row_counts
            )));
        }
        Ok(Self { values, row_counts })
    }

    /// 0/1 block membership, used when similarity supervision is off.
    pub fn block_membership(row_counts: &[usize]) -> Self {
        let m = row_counts.iter().sum();
        let mut values = Array2::zeros((row_counts.len(), m));
        let mut start = 0;
        for (i, &c) in row_counts.iter().enumerate() {
            values.row_mut(i).slice_mut(ndarray::s![start..start + c]).fill(1.0);
            start += c;
        }
        Self {
            values,
            row_counts: row_counts.to_vec(),
        }
    }
}

fn provider_error(text: &str, message: String) -> Error {
    Error::Provider {
        text: text.to_string(),
        message,
    }
}

fn embed_checked(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f64>> {
    let v = provider.embed(text).map_err(|m| provider_error(text, m))?;
    if v.len() != provider.dim() {
        return Err(provider_error(text, format!("returned {} dims, expected {}", v.len(), provider.dim())));
    }
    if v.iter().all(|x| *x == 0.0) {
        return Err(provider_error(text, "zero embedding".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(provider_error(text, "non-finite embedding".into()));
    }
    Ok(v)
}

/// `s_ij = clamp(max_{t in block(i)} cos(e_t, e_j), 0, 1)`, embedding each
/// distinct text once.
pub fn compute_ssm(labels: &GroupedLabels, provider: &dyn EmbeddingProvider) -> Result<SimilarityMatrix> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut distinct: Vec<&str> = Vec::new();
    let column_ids: Vec<usize> = labels
        .flattened()
        .map(|t| {
            *index.entry(t).or_insert_with(|| {
                distinct.push(t);
                distinct.len() - 1
            })
        })
        .collect();

    let embeddings: Vec<Vec<f64>> = if provider.concurrent() {
        distinct.par_iter().map(|t| embed_checked(provider, t)).collect::<Result<_>>()?
    } else {
        distinct.iter().map(|t| embed_checked(provider, t)).collect::<Result<_>>()?
    };

    let k = distinct.len();
    let mut unit = Array2::<f64>::zeros((k, provider.dim()));
    for (mut row, e) in unit.axis_iter_mut(Axis(0)).zip(&embeddings) {
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter_mut().zip(e).for_each(|(r, x)| *r = x / norm);
    }
    let mut gram = unit.dot(&unit.t());
    gram.mapv_inplace(|c| c.clamp(-1.0, 1.0));
    gram.diag_mut().fill(1.0);

    let n = labels.n();
    let m = column_ids.len();
    let mut values = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        let block = &column_ids[labels.block(i)];
        for (j, &cj) in column_ids.iter().enumerate() {
            let best = block.iter().map(|&ct| gram[[ct, cj]]).fold(f64::NEG_INFINITY, f64::max);
            values[[i, j]] = best.clamp(0.0, 1.0);
        }
    }
    SimilarityMatrix::new(values, labels.row_counts())
}

/// Reference implementation: full M×M cosine matrix with no caching, then
/// per-block column maxima.
pub fn brute_force_ssm(labels: &GroupedLabels, provider: &dyn EmbeddingProvider) -> Result<SimilarityMatrix> {
    let texts: Vec<&str> = labels.flattened().collect();
    let m = texts.len();
    let mut full = vec![vec![0.0; m]; m];
    for t in 0..m {
        for j in 0..m {
            let a = embed_checked(provider, texts[t])?;
            let b = embed_checked(provider, texts[j])?;
            full[t][j] = cosine(&a, &b)?;
        }
    }
    let mut values = Array2::<f64>::zeros((labels.n(), m));
    for i in 0..labels.n() {
        for j in 0..m {
            let mut best = f64::NEG_INFINITY;
            for t in labels.block(i) {
                if full[t][j] > best {
                    best = full[t][j];
                }
            }
            values[[i, j]] = best.clamp(0.0, 1.0);
        }
    }
    SimilarityMatrix::new(values, labels.row_counts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn groups(g: &[&[&str]]) -> GroupedLabels {
        GroupedLabels::new(g.iter().map(|b| b.iter().map(|s| s.to_string()).collect()).collect()).unwrap()
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 1.0);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        let x = [0.2, -0.5, 0.9];
        let y = [1.0, 0.1, 0.3];
        let x3: Vec<f64> = x.iter().map(|v| v * 3.0).collect();
        assert!((cosine(&x3, &y).unwrap() - cosine(&x, &y).unwrap()).abs() < 1e-12);
    }

    /// Vectors in R^3 with cos(A,B)=0.4, cos(A,C)=0.2, cos(B,C)=0.6.
    fn abc_table() -> TableProvider {
        let b1 = 0.4;
        let b2 = (1.0f64 - b1 * b1).sqrt();
        let c1 = 0.2;
        let c2 = (0.6 - b1 * c1) / b2;
        let c3 = (1.0 - c1 * c1 - c2 * c2).sqrt();
        TableProvider::new([
            ("A".to_string(), vec![1.0, 0.0, 0.0]),
            ("B".to_string(), vec![b1, b2, 0.0]),
            ("C".to_string(), vec![c1, c2, c3]),
        ])
    }

    #[test]
    fn worked_example() {
        let s = compute_ssm(&groups(&[&["A", "B"], &["C"]]), &abc_table()).unwrap();
        let expected = array![[1.0, 1.0, 0.6], [0.2, 0.6, 1.0]];
        for (a, b) in s.values.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12, "{}", s.values);
        }
        assert_eq!(s.row_counts, vec![2, 1]);
    }

    #[test]
    fn identical_and_orthogonal() {
        let p = TableProvider::new([("A".to_string(), vec![1.0, 0.0]), ("B".to_string(), vec![0.0, 1.0])]);
        assert_eq!(compute_ssm(&groups(&[&["A"], &["A"]]), &p).unwrap().values, array![[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(compute_ssm(&groups(&[&["A"], &["B"]]), &p).unwrap().values, array![[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(brute_force_ssm(&groups(&[&["A"]]), &p).unwrap().values, array![[1.0]]);
    }

    #[test]
    fn negative_cosines_clamp_to_zero() {
        let p = TableProvider::new([("A".to_string(), vec![1.0, 0.0]), ("B".to_string(), vec![-1.0, 0.1])]);
        let s = compute_ssm(&groups(&[&["A"], &["B"]]), &p).unwrap();
        assert_eq!(s.values[[0, 1]], 0.0);
    }

    #[test]
    fn provider_failure_names_text() {
        let err = compute_ssm(&groups(&[&["A"], &["Z"]]), &abc_table()).unwrap_err();
        assert!(matches!(err, Error::Provider { ref text, .. } if text == "Z"));
    }

    #[test]
    fn empty_group_rejected() {
        assert!(GroupedLabels::new(vec![vec!["A".into()], vec![]]).is_err());
    }

    #[test]
    fn block_membership_matrix() {
        let s = SimilarityMatrix::block_membership(&[1, 2]);
        assert_eq!(s.values, array![[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]]);
    }
}
