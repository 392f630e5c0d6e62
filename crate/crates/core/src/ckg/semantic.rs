//! Corpus-trained document vectors: L2-normalized TF-IDF, optionally
//! projected onto the top-r right singular vectors of the doc-term matrix.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::corpus::Article;
use crate::text::{sparse_dot, Analyzer, SparseVec, TfIdf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticVectors {
    pub vectorizer: TfIdf,
    pub doc_vectors: BTreeMap<String, SparseVec>,
    /// r × V basis rows when rank reduction is enabled.
    projection: Option<Vec<Vec<f64>>>,
}

fn normalize(v: &mut SparseVec) {
    let n = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|(_, x)| *x /= n);
    } else {
        v.clear();
    }
}

impl SemanticVectors {
    pub fn build(articles: &[Article], analyzer: &Analyzer, rank: Option<usize>) -> Self {
        let tokens: Vec<(String, Vec<String>)> = articles
            .iter()
            .map(|a| (a.doc_id.clone(), analyzer.tokenize(&a.full_text())))
            .collect();
        let vectorizer = TfIdf::fit(tokens.iter().map(|(_, t)| t.as_slice()));
        let mut doc_vectors: BTreeMap<String, SparseVec> = tokens
            .iter()
            .map(|(id, t)| (id.clone(), vectorizer.transform(t)))
            .collect();
        let projection = rank
            .filter(|&r| r > 0 && !doc_vectors.is_empty())
            .map(|r| Self::fit_projection(&doc_vectors, vectorizer.vocab_len(), r));
        if let Some(basis) = &projection {
            for v in doc_vectors.values_mut() {
                *v = project(basis, v);
            }
        }
        Self {
            vectorizer,
            doc_vectors,
            projection,
        }
    }

    /// Top-r right singular vectors via the eigendecomposition of X·Xᵀ:
    /// v_i = Xᵀ u_i / σ_i.
    fn fit_projection(docs: &BTreeMap<String, SparseVec>, vocab: usize, rank: usize) -> Vec<Vec<f64>> {
        let rows: Vec<&SparseVec> = docs.values().collect();
        let n = rows.len();
        let gram = DMatrix::from_fn(n, n, |i, j| sparse_dot(rows[i], rows[j]));
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        order
            .into_iter()
            .take(rank)
            .filter(|&i| eig.eigenvalues[i] > 1e-12)
            .map(|i| {
                let sigma = eig.eigenvalues[i].sqrt();
                let mut basis = vec![0.0; vocab];
                for (d, row) in rows.iter().enumerate() {
                    let u = eig.eigenvectors[(d, i)];
                    for &(t, x) in row.iter() {
                        basis[t as usize] += u * x / sigma;
                    }
                }
                basis
            })
            .collect()
    }

    pub fn rank(&self) -> Option<usize> {
        self.projection.as_ref().map(Vec::len)
    }

    pub fn doc(&self, doc_id: &str) -> Option<&SparseVec> {
        self.doc_vectors.get(doc_id)
    }

    /// Embed already-analyzed tokens into the same space as the documents.
    pub fn embed_tokens(&self, tokens: &[String]) -> SparseVec {
        let v = self.vectorizer.transform(tokens);
        match &self.projection {
            Some(basis) => project(basis, &v),
            None => v,
        }
    }

    pub fn cosine(&self, a: &str, b: &str) -> f64 {
        match (self.doc(a), self.doc(b)) {
            (Some(x), Some(y)) => sparse_dot(x, y),
            _ => 0.0,
        }
    }
}

fn project(basis: &[Vec<f64>], v: &SparseVec) -> SparseVec {
    let mut out: SparseVec = basis
        .iter()
        .enumerate()
        .map(|(i, b)| (i as u32, v.iter().map(|&(t, x)| b[t as usize] * x).sum()))
        .collect();
    normalize(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn art(id: &str, title: &str) -> Article {
        Article {
            doc_id: id.into(),
            title: title.into(),
            abstract_text: String::new(),
            body: String::new(),
            authors: vec![],
            institutions: vec![],
            cited_doc_ids: vec![],
            publish_date: None,
            source: String::new(),
        }
    }

    #[test]
    fn vectors_are_unit_or_empty() {
        let arts = vec![art("a", "covid vaccine trial"), art("b", "the of and"), art("c", "influenza vaccine")];
        let sv = SemanticVectors::build(&arts, &Analyzer::default(), None);
        for (id, v) in &sv.doc_vectors {
            let n = sparse_dot(v, v);
            if id == "b" {
                assert!(v.is_empty());
            } else {
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reduced_vectors_keep_identical_docs_identical() {
        let arts = vec![
            art("a", "covid vaccine trial"),
            art("b", "covid vaccine trial"),
            art("c", "influenza season surveillance"),
            art("d", "hospital capacity planning"),
        ];
        let sv = SemanticVectors::build(&arts, &Analyzer::default(), Some(2));
        assert_eq!(sv.rank(), Some(2));
        assert!((sv.cosine("a", "b") - 1.0).abs() < 1e-9);
        let q = sv.embed_tokens(&["covid".into(), "vaccine".into(), "trial".into()]);
        assert!((sparse_dot(&q, sv.doc("a").unwrap()) - 1.0).abs() < 1e-9);
    }
}
