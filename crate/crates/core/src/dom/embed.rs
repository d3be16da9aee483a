use serde::{Deserialize, Serialize};

use super::simplify::REMOVED_COUNT_ATTR;
use super::{Node, SimplifiedDom, ROOT_TAG};
use crate::error::{contract, Result};
use crate::hashing::{hash_token, normalize};

/// Fixed-dimension page abstraction plus its exact-state identity key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEmbedding {
    pub vector: Vec<f32>,
    pub hash: u64,
}

impl StateEmbedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn norm(&self) -> f64 {
        self.vector.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt()
    }
}

/// Maps a simplified page to a state vector. Implementations must be
/// deterministic.
pub trait StateEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, sdom: &SimplifiedDom) -> StateEmbedding;
}

/// Signed feature hashing over structural tokens: tag unigrams, parent/child
/// tag bigrams, attribute keys and bucketed removed-sibling counts. Text and
/// attribute values are ignored.
#[derive(Clone, Debug)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    fn tokens(node: &Node, parent: &str, out: &mut Vec<String>) {
        if node.tag != ROOT_TAG {
            out.push(format!("t:{}", node.tag));
            out.push(format!("b:{parent}>{}", node.tag));
            for (k, v) in &node.attrs {
                out.push(format!("a:{k}"));
                if k == REMOVED_COUNT_ATTR {
                    let bucket = count_bucket(v.parse().unwrap_or(0));
                    out.push(format!("c:{}:{bucket}", node.tag));
                }
            }
        }
        for c in &node.children {
            Self::tokens(c, &node.tag, out);
        }
    }
}

/// Exact for small counts, logarithmic beyond.
fn count_bucket(n: u64) -> u64 {
    if n <= 4 {
        n
    } else {
        3 + u64::from(64 - n.leading_zeros())
    }
}

impl StateEmbedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sdom: &SimplifiedDom) -> StateEmbedding {
        let mut tokens = Vec::new();
        Self::tokens(&sdom.root, "", &mut tokens);
        let mut acc = vec![0.0; self.dim];
        for t in &tokens {
            hash_token(&mut acc, t);
        }
        StateEmbedding { vector: normalize(&acc), hash: sdom.digest() }
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(contract(format!("cosine of vectors with dims {} and {}", a.len(), b.len())));
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::{parse_document, simplify};

    fn embed(html: &str) -> StateEmbedding {
        HashingEmbedder::new(256).embed(&simplify(&parse_document(html)))
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let a = embed("<div><a href=x>go</a><p>t</p></div>");
        let b = embed("<div><a href=x>go</a><p>t</p></div>");
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_document_is_zero() {
        let e = embed("");
        assert_eq!(e.vector, vec![0.0; 256]);
        assert_eq!(e.norm(), 0.0);
    }

    #[test]
    fn text_changes_do_not_move_embedding() {
        assert_eq!(embed("<p>one</p><b>x</b>").vector, embed("<p>two words</p><b>y</b>").vector);
    }

    #[test]
    fn cosine_basics() {
        let a = [1.0f32, 0.0, 0.0];
        let b = [0.0f32, 1.0, 0.0];
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
        assert!((cosine(&[0.3, -0.2, 0.9], &[0.3, -0.2, 0.9]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(cosine(&a, &[1.0]).is_err());
    }

    #[test]
    fn buckets_monotone() {
        let b: Vec<u64> = [0, 1, 4, 5, 8, 16, 1000].iter().map(|&n| count_bucket(n)).collect();
        assert!(b.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(count_bucket(3), 3);
    }
}
