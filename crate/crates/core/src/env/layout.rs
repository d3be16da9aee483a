//! Deterministic box layout for server-rendered fixture pages. Block
//! elements stack, inline widgets flow in wrapped rows, and
//! `position:absolute` boxes are placed from their inline style without
//! disturbing the flow.

use crate::actions::Geometry;
use crate::dom::{DomTree, Node, ROOT_TAG};
use crate::geom::BBox;

/// Layout width and minimum page height.
pub const VIEWPORT: (f64, f64) = (1000.0, 800.0);

const PAD: f64 = 10.0;
const GAP: f64 = 20.0;
const LINE: f64 = 30.0;

const HIDDEN: &[&str] = &["head", "script", "style", "link", "meta", "title", "template", "option", "optgroup"];
const BLOCK: &[&str] = &[
    "html", "body", "div", "section", "article", "nav", "header", "footer", "main", "aside", "ul", "ol", "li", "p",
    "h1", "h2", "h3", "h4", "h5", "h6", "form", "fieldset", "table", "tbody", "tr", "dl", "dt", "dd", "pre",
    "blockquote", "figure",
];

fn inline_size(node: &Node) -> (f64, f64) {
    match node.tag.as_str() {
        "a" | "button" => (160.0, 50.0),
        "input" => match node.get_attr("type").unwrap_or("text") {
            "checkbox" | "radio" => (30.0, 30.0),
            "submit" | "button" | "reset" | "image" => (160.0, 50.0),
            _ => (200.0, 40.0),
        },
        "select" => (200.0, 40.0),
        "textarea" => (300.0, 80.0),
        "img" => (100.0, 80.0),
        "td" | "th" => (180.0, 40.0),
        "br" | "hr" => (0.0, 0.0),
        _ => {
            let chars = node.deep_text().chars().count() as f64;
            ((chars * 9.0 + 20.0).clamp(60.0, 300.0), LINE)
        }
    }
}

fn style_px(style: &str, key: &str) -> Option<f64> {
    style.split(';').find_map(|decl| {
        let (k, v) = decl.split_once(':')?;
        (k.trim() == key).then(|| v.trim().trim_end_matches("px").trim().parse().ok()).flatten()
    })
}

fn absolute_box(node: &Node) -> Option<BBox> {
    let style = node.get_attr("style")?;
    let compact: String = style.chars().filter(|c| !c.is_whitespace()).collect();
    if !compact.contains("position:absolute") {
        return None;
    }
    Some(BBox::new(
        style_px(style, "left").unwrap_or(0.0),
        style_px(style, "top").unwrap_or(0.0),
        style_px(style, "width").unwrap_or(200.0),
        style_px(style, "height").unwrap_or(LINE),
    ))
}

struct Engine {
    geometry: Geometry,
    bottom: f64,
}

impl Engine {
    fn record(&mut self, locator: &str, bbox: BBox) {
        if bbox.has_area() {
            self.bottom = self.bottom.max(bbox.y + bbox.h);
            self.geometry.insert(locator.to_string(), bbox);
        }
    }

    /// Lays out `node`'s children inside a content box starting at (x, y)
    /// with width `w`. Returns the content height used.
    fn children(&mut self, node: &Node, locator: &str, x: f64, y: f64, w: f64) -> f64 {
        let mut counts: Vec<(&str, usize)> = Vec::new();
        let mut cy = y;
        let mut line_x = x;
        let mut line_h = 0.0f64;
        if !node.text.trim().is_empty() && node.tag != ROOT_TAG {
            line_x = x + (node.text.chars().count() as f64 * 9.0).min(w / 2.0) + GAP;
            line_h = LINE;
        }
        for child in &node.children {
            let idx = match counts.iter_mut().find(|(t, _)| *t == child.tag) {
                Some(e) => {
                    e.1 += 1;
                    e.1
                }
                None => {
                    counts.push((&child.tag, 1));
                    1
                }
            };
            let loc = format!("{locator}/{}[{idx}]", child.tag);
            if HIDDEN.contains(&child.tag.as_str()) {
                continue;
            }
            if let Some(b) = absolute_box(child) {
                self.record(&loc, b);
                self.children(child, &loc, b.x + PAD, b.y + PAD, (b.w - 2.0 * PAD).max(0.0));
                continue;
            }
            if BLOCK.contains(&child.tag.as_str()) {
                if line_h > 0.0 {
                    cy += line_h + PAD;
                    line_x = x;
                    line_h = 0.0;
                }
                let h = self.block(child, &loc, x, cy, w);
                cy += h + PAD;
            } else {
                let (iw, ih) = inline_size(child);
                let iw = iw.min(w);
                if line_x > x && line_x + iw > x + w {
                    cy += line_h + PAD;
                    line_x = x;
                    line_h = 0.0;
                }
                let b = BBox::new(line_x, cy, iw, ih);
                self.record(&loc, b);
                self.children(child, &loc, b.x + 2.0, b.y + 2.0, (b.w - 4.0).max(0.0));
                line_x += iw + GAP;
                line_h = line_h.max(ih);
            }
        }
        if line_h > 0.0 {
            cy += line_h;
        }
        (cy - y).max(0.0)
    }

    fn block(&mut self, node: &Node, locator: &str, x: f64, y: f64, w: f64) -> f64 {
        let inner = self.children(node, locator, x + PAD, y + PAD, (w - 2.0 * PAD).max(0.0));
        let content = if inner > 0.0 {
            inner
        } else if node.text.trim().is_empty() {
            0.0
        } else {
            LINE
        };
        let h = if content > 0.0 { content + 2.0 * PAD } else { 0.0 };
        self.record(locator, BBox::new(x, y, w, h));
        h
    }
}

/// Geometry for every rendered element, plus the page size (viewport width,
/// height grown to fit content).
pub fn layout(tree: &DomTree) -> (Geometry, (f64, f64)) {
    let mut engine = Engine { geometry: Geometry::new(), bottom: 0.0 };
    engine.children(&tree.root, "", 0.0, 0.0, VIEWPORT.0);
    let height = VIEWPORT.1.max((engine.bottom + PAD).ceil());
    (engine.geometry, (VIEWPORT.0, height))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_document;

    #[test]
    fn buttons_flow_in_a_row() {
        let tree = parse_document("<html><body><div><button>a</button><button>b</button></div></body></html>");
        let (geo, page) = layout(&tree);
        let a = geo["/html[1]/body[1]/div[1]/button[1]"];
        let b = geo["/html[1]/body[1]/div[1]/button[2]"];
        assert_eq!(a.y, b.y);
        assert_eq!(b.x, a.x + a.w + GAP);
        assert_eq!(page, VIEWPORT);
    }

    #[test]
    fn absolute_boxes_do_not_shift_flow() {
        let plain = parse_document("<body><div><a>x</a></div></body>");
        let banner = parse_document(
            r#"<body><div style="position:absolute;left:600px;top:300px;width:300px;height:80px"><a>d</a></div><div><a>x</a></div></body>"#,
        );
        let (g1, _) = layout(&plain);
        let (g2, _) = layout(&banner);
        assert_eq!(g1["/body[1]/div[1]/a[1]"], g2["/body[1]/div[2]/a[1]"]);
        assert_eq!(g2["/body[1]/div[1]"], BBox::new(600.0, 300.0, 300.0, 80.0));
    }

    #[test]
    fn head_has_no_geometry() {
        let tree = parse_document("<html><head><title>t</title></head><body><p>x</p></body></html>");
        let (geo, _) = layout(&tree);
        assert!(geo.keys().all(|k| !k.contains("head")));
        assert!(geo.contains_key("/html[1]/body[1]/p[1]"));
    }

    #[test]
    fn tall_pages_grow() {
        let html = format!("<body>{}</body>", "<p>line</p>".repeat(40));
        let (_, page) = layout(&parse_document(&html));
        assert!(page.1 > VIEWPORT.1);
    }
}
