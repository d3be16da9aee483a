use serde::{Deserialize, Serialize};

use crate::hashing::{hash_token, normalize};
use crate::dom::Node;

/// Hashed description of one DOM element (tag, attribute keys and values,
/// ancestor tags), L2-normalised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementEmbedding {
    pub vector: Vec<f32>,
}

pub fn encode_element(node: &Node, ancestors: &[&Node], dim: usize) -> ElementEmbedding {
    let mut acc = vec![0.0; dim];
    hash_token(&mut acc, &format!("tag:{}", node.tag));
    for (k, v) in &node.attrs {
        hash_token(&mut acc, &format!("key:{k}"));
        if k == "class" {
            for c in v.split_whitespace() {
                hash_token(&mut acc, &format!("class:{c}"));
            }
        } else if !v.is_empty() {
            hash_token(&mut acc, &format!("val:{k}={v}"));
        }
    }
    if let Some(parent) = ancestors.last() {
        hash_token(&mut acc, &format!("parent:{}", parent.tag));
        for c in parent.classes() {
            hash_token(&mut acc, &format!("parent-class:{c}"));
        }
    }
    for a in ancestors {
        hash_token(&mut acc, &format!("anc:{}", a.tag));
    }
    ElementEmbedding { vector: normalize(&acc) }
}
