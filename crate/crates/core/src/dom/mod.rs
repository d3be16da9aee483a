//! Page model: lenient HTML parsing, simplification and state embedding.

mod embed;
mod parse;
mod simplify;

pub use embed::{cosine, HashingEmbedder, StateEmbedder, StateEmbedding};
pub use parse::{parse_bytes, parse_document};
pub use simplify::{simplify, state_digest, structure_signature, SimplifiedDom, REMOVED_COUNT_ATTR};

/// Tag of the synthetic node that holds a document's top-level elements.
pub const ROOT_TAG: &str = "#root";

const VOID_TAGS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track", "wbr",
];

pub(crate) fn is_void(tag: &str) -> bool {
    VOID_TAGS.contains(&tag)
}

pub(crate) fn is_raw_text(tag: &str) -> bool {
    matches!(tag, "script" | "style")
}

/// One element. Direct text content is concatenated into `text`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Node {
    pub tag: String,
    pub attrs: Vec<(String, String)>,
    pub text: String,
    pub children: Vec<Node>,
    /// Byte range in the source document (diagnostics only).
    pub span: (usize, usize),
}

impl Node {
    pub fn new(tag: impl Into<String>) -> Self {
        Self { tag: tag.into().to_ascii_lowercase(), ..Default::default() }
    }

    pub fn attr(mut self, key: &str, value: impl Into<String>) -> Self {
        self.set_attr(key, value);
        self
    }

    pub fn text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    pub fn child(mut self, child: Node) -> Self {
        self.children.push(child);
        self
    }

    pub fn children(mut self, children: impl IntoIterator<Item = Node>) -> Self {
        self.children.extend(children);
        self
    }

    pub fn get_attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn has_attr(&self, key: &str) -> bool {
        self.attrs.iter().any(|(k, _)| k == key)
    }

    pub fn set_attr(&mut self, key: &str, value: impl Into<String>) {
        let key = key.to_ascii_lowercase();
        let value = value.into();
        match self.attrs.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.attrs.push((key, value)),
        }
    }

    /// Class list split on whitespace.
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.get_attr("class").unwrap_or("").split_whitespace()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(Node::count).sum::<usize>()
    }

    /// Text of this node and every descendant, space separated.
    pub fn deep_text(&self) -> String {
        let mut parts = Vec::new();
        fn collect<'a>(n: &'a Node, parts: &mut Vec<&'a str>) {
            if !n.text.is_empty() {
                parts.push(&n.text);
            }
            n.children.iter().for_each(|c| collect(c, parts));
        }
        collect(self, &mut parts);
        parts.join(" ")
    }

    /// Canonical HTML for this subtree: attributes in stored order, text
    /// before children.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        self.write_html(&mut out);
        out
    }

    fn write_html(&self, out: &mut String) {
        if self.tag == ROOT_TAG {
            self.children.iter().for_each(|c| c.write_html(out));
            return;
        }
        out.push('<');
        out.push_str(&self.tag);
        for (k, v) in &self.attrs {
            out.push(' ');
            out.push_str(k);
            out.push_str("=\"");
            out.push_str(&escape(v, true));
            out.push('"');
        }
        out.push('>');
        if is_void(&self.tag) {
            return;
        }
        if is_raw_text(&self.tag) {
            out.push_str(&self.text);
        } else {
            out.push_str(&escape(&self.text, false));
        }
        self.children.iter().for_each(|c| c.write_html(out));
        out.push_str("</");
        out.push_str(&self.tag);
        out.push('>');
    }

    /// Copy of the subtree with source spans zeroed, for structural comparison.
    pub fn without_spans(&self) -> Node {
        Node {
            tag: self.tag.clone(),
            attrs: self.attrs.clone(),
            text: self.text.clone(),
            children: self.children.iter().map(Node::without_spans).collect(),
            span: (0, 0),
        }
    }
}

fn escape(s: &str, attr: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

/// An element together with its absolute locator and ancestor chain.
#[derive(Clone, Debug)]
pub struct ElementRef<'a> {
    pub locator: String,
    pub node: &'a Node,
    /// Ancestors from the outermost element down to the direct parent.
    pub ancestors: Vec<&'a Node>,
}

/// Parsed document rooted at a synthetic [`ROOT_TAG`] node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomTree {
    pub root: Node,
}

impl DomTree {
    pub fn new(top_level: Vec<Node>) -> Self {
        Self { root: Node::new(ROOT_TAG).children(top_level) }
    }

    pub fn to_html(&self) -> String {
        self.root.to_html()
    }

    /// Every element in document order with its locator: an absolute XPath of
    /// the form `/html[1]/body[1]/div[2]`, indices counting same-tag siblings.
    pub fn elements(&self) -> Vec<ElementRef<'_>> {
        let mut out = Vec::new();
        let mut ancestors = Vec::new();
        walk(&self.root, "", &mut ancestors, &mut out);
        out
    }

    pub fn find(&self, locator: &str) -> Option<&Node> {
        let mut node = &self.root;
        for step in locator.split('/').filter(|s| !s.is_empty()) {
            let (tag, idx) = parse_step(step)?;
            node = node.children.iter().filter(|c| c.tag == tag).nth(idx.checked_sub(1)?)?;
        }
        (node.tag != ROOT_TAG).then_some(node)
    }

    /// Element plus ancestors for a locator.
    pub fn resolve(&self, locator: &str) -> Option<ElementRef<'_>> {
        let mut node = &self.root;
        let mut ancestors = Vec::new();
        for step in locator.split('/').filter(|s| !s.is_empty()) {
            let (tag, idx) = parse_step(step)?;
            if node.tag != ROOT_TAG {
                ancestors.push(node);
            }
            node = node.children.iter().filter(|c| c.tag == tag).nth(idx.checked_sub(1)?)?;
        }
        (node.tag != ROOT_TAG).then(|| ElementRef { locator: locator.to_string(), node, ancestors })
    }
}

fn parse_step(step: &str) -> Option<(&str, usize)> {
    let open = step.find('[')?;
    let idx = step[open + 1..].strip_suffix(']')?.parse().ok()?;
    Some((&step[..open], idx))
}

fn walk<'a>(node: &'a Node, prefix: &str, ancestors: &mut Vec<&'a Node>, out: &mut Vec<ElementRef<'a>>) {
    let mut seen: Vec<(&str, usize)> = Vec::new();
    let is_root = node.tag == ROOT_TAG;
    if !is_root {
        ancestors.push(node);
    }
    for child in &node.children {
        let n = match seen.iter_mut().find(|(t, _)| *t == child.tag) {
            Some(entry) => {
                entry.1 += 1;
                entry.1
            }
            None => {
                seen.push((&child.tag, 1));
                1
            }
        };
        let locator = format!("{prefix}/{}[{n}]", child.tag);
        out.push(ElementRef { locator: locator.clone(), node: child, ancestors: ancestors.clone() });
        walk(child, &locator, ancestors, out);
    }
    if !is_root {
        ancestors.pop();
    }
}
