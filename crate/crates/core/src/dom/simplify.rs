use xxhash_rust::xxh3::Xxh3;

use super::{DomTree, Node};

/// Attribute recording how many duplicate siblings a survivor replaced.
pub const REMOVED_COUNT_ATTR: &str = "data-removed-count";

/// Elements that never render as page content.
const REMOVED_TAGS: &[&str] = &["link", "style", "meta", "title", "script"];

/// A document after resource removal and sibling deduplication.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplifiedDom {
    pub root: Node,
}

impl SimplifiedDom {
    pub fn to_html(&self) -> String {
        self.root.to_html()
    }

    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    /// Exact-state identity key: structure plus removed-sibling counts.
    pub fn digest(&self) -> u64 {
        state_digest(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        self.root.children.is_empty()
    }
}

/// Drops resource/script elements, then, bottom-up, collapses any element
/// whose children (two or more) all share one structure signature down to
/// its first child. The survivor's subtree text is blanked and it carries
/// [`REMOVED_COUNT_ATTR`]. Idempotent.
pub fn simplify(tree: &DomTree) -> SimplifiedDom {
    SimplifiedDom { root: simplify_node(&tree.root) }
}

fn simplify_node(node: &Node) -> Node {
    let mut children: Vec<Node> = node
        .children
        .iter()
        .filter(|c| !REMOVED_TAGS.contains(&c.tag.as_str()))
        .map(simplify_node)
        .collect();
    if children.len() >= 2 {
        let first = structure_signature(&children[0]);
        if children[1..].iter().all(|c| structure_signature(c) == first) {
            let removed = children.len() - 1;
            children.truncate(1);
            let survivor = &mut children[0];
            mask_text(survivor);
            survivor.set_attr(REMOVED_COUNT_ATTR, removed.to_string());
        }
    }
    Node {
        tag: node.tag.clone(),
        attrs: node.attrs.clone(),
        text: node.text.clone(),
        children,
        span: node.span,
    }
}

fn mask_text(node: &mut Node) {
    node.text.clear();
    node.children.iter_mut().for_each(mask_text);
}

/// Digest over tag, sorted attribute keys and child signatures. Attribute
/// values and text do not contribute, so structurally identical subtrees
/// collide by construction.
pub fn structure_signature(node: &Node) -> u64 {
    digest(node, false)
}

/// Like [`structure_signature`] but also folds in removed-sibling counts.
pub fn state_digest(node: &Node) -> u64 {
    digest(node, true)
}

fn digest(node: &Node, with_counts: bool) -> u64 {
    let mut h = Xxh3::new();
    h.update(b"<");
    h.update(node.tag.as_bytes());
    let mut keys: Vec<&str> = node.attrs.iter().map(|(k, _)| k.as_str()).collect();
    keys.sort_unstable();
    for k in keys {
        h.update(b" ");
        h.update(k.as_bytes());
        if with_counts && k == REMOVED_COUNT_ATTR {
            h.update(b"=");
            h.update(node.get_attr(k).unwrap_or("").as_bytes());
        }
    }
    h.update(b">");
    h.update(&(node.children.len() as u64).to_le_bytes());
    for c in &node.children {
        h.update(&digest(c, with_counts).to_le_bytes());
    }
    h.update(b"/");
    h.digest()
}
