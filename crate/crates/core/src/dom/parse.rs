use super::{is_raw_text, is_void, DomTree, Node, ROOT_TAG};
use crate::error::{Error, Result};

/// Tags whose start implicitly closes an open `<p>`.
const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "div", "dl", "fieldset", "footer", "form", "h1", "h2",
    "h3", "h4", "h5", "h6", "header", "hr", "main", "nav", "ol", "p", "pre", "section", "table", "ul",
];

/// Parses UTF-8 bytes, rejecting invalid encodings.
pub fn parse_bytes(bytes: &[u8]) -> Result<DomTree> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Decode(format!("invalid UTF-8: {e}")))?;
    Ok(parse_document(text))
}

/// Lenient HTML parse. Never fails: unclosed tags are closed at the nearest
/// matching ancestor end tag (or at end of input), stray end tags are
/// dropped, unknown tags are kept.
pub fn parse_document(html: &str) -> DomTree {
    let mut p = Parser { src: html, pos: 0, stack: vec![Node::new(ROOT_TAG)] };
    p.stack[0].span = (0, html.len());
    p.run();
    while p.stack.len() > 1 {
        p.pop(html.len());
    }
    let mut root = p.stack.pop().expect("root");
    root.span = (0, html.len());
    DomTree { root }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    stack: Vec<Node>,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn run(&mut self) {
        while self.pos < self.src.len() {
            let rest = self.rest();
            if let Some(after) = rest.strip_prefix("<!--") {
                self.pos += 4 + after.find("-->").map(|i| i + 3).unwrap_or(after.len());
            } else if rest.starts_with("<!") || rest.starts_with("<?") {
                self.pos += rest.find('>').map(|i| i + 1).unwrap_or(rest.len());
            } else if rest.starts_with("</") {
                self.end_tag();
            } else if rest.starts_with('<') && rest[1..].starts_with(|c: char| c.is_ascii_alphabetic()) {
                self.start_tag();
            } else {
                let first = rest.chars().next().map_or(1, char::len_utf8);
                let len = rest[first..].find('<').map(|i| i + first).unwrap_or(rest.len());
                self.push_text(&rest[..len]);
                self.pos += len;
            }
        }
    }

    fn push_text(&mut self, raw: &str) {
        let decoded = decode_entities(raw);
        let collapsed = decoded.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            return;
        }
        let top = self.stack.last_mut().expect("stack never empty");
        if !top.text.is_empty() {
            top.text.push(' ');
        }
        top.text.push_str(&collapsed);
    }

    fn pop(&mut self, end: usize) {
        let mut node = self.stack.pop().expect("pop above root");
        node.span.1 = end;
        self.stack.last_mut().expect("parent").children.push(node);
    }

    fn open_index(&self, tag: &str, stop_at: &[&str]) -> Option<usize> {
        for i in (1..self.stack.len()).rev() {
            let t = self.stack[i].tag.as_str();
            if t == tag {
                return Some(i);
            }
            if stop_at.contains(&t) {
                return None;
            }
        }
        None
    }

    fn close_through(&mut self, idx: usize, end: usize) {
        while self.stack.len() > idx {
            self.pop(end);
        }
    }

    fn end_tag(&mut self) {
        let start = self.pos;
        let rest = &self.rest()[2..];
        let close = rest.find('>').map(|i| i + 1).unwrap_or(rest.len());
        let name: String = rest[..close]
            .trim_end_matches('>')
            .trim()
            .chars()
            .take_while(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        self.pos = start + 2 + close;
        if let Some(idx) = self.open_index(&name, &[]) {
            self.close_through(idx, self.pos);
        }
    }

    fn implicit_closes(&mut self, tag: &str, at: usize) {
        let target = match tag {
            "li" => Some(("li", &["ul", "ol"][..])),
            "option" => Some(("option", &["select", "datalist"][..])),
            "tr" => Some(("tr", &["table", "tbody", "thead", "tfoot"][..])),
            "td" | "th" => {
                if let Some(i) = self.open_index("td", &["tr", "table"]) {
                    self.close_through(i, at);
                }
                Some(("th", &["tr", "table"][..]))
            }
            _ => None,
        };
        if let Some((open, stops)) = target {
            if let Some(i) = self.open_index(open, stops) {
                self.close_through(i, at);
            }
        }
        if CLOSES_P.contains(&tag) && self.stack.last().map(|n| n.tag.as_str()) == Some("p") {
            self.pop(at);
        }
    }

    fn start_tag(&mut self) {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos + 1;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' && bytes[i] != b'/' {
            i += 1;
        }
        let tag = self.src[self.pos + 1..i].to_ascii_lowercase();
        let mut node = Node::new(tag.clone());
        node.span.0 = start;
        let mut self_closing = false;

        loop {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i >= bytes.len() {
                break;
            }
            match bytes[i] {
                b'>' => {
                    i += 1;
                    break;
                }
                b'/' => {
                    i += 1;
                    if bytes.get(i) == Some(&b'>') {
                        self_closing = true;
                        i += 1;
                        break;
                    }
                }
                _ => {
                    let key_start = i;
                    while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'=' | b'>' | b'/') {
                        i += 1;
                    }
                    let key = self.src[key_start..i].to_ascii_lowercase();
                    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                        i += 1;
                    }
                    let mut value = String::new();
                    if bytes.get(i) == Some(&b'=') {
                        i += 1;
                        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                            i += 1;
                        }
                        match bytes.get(i) {
                            Some(&q @ (b'"' | b'\'')) => {
                                let v_start = i + 1;
                                let v_end = self.src[v_start..].find(q as char).map(|e| v_start + e).unwrap_or(bytes.len());
                                value = decode_entities(&self.src[v_start..v_end]);
                                i = (v_end + 1).min(bytes.len());
                            }
                            _ => {
                                let v_start = i;
                                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' {
                                    i += 1;
                                }
                                value = decode_entities(&self.src[v_start..i]);
                            }
                        }
                    }
                    if !key.is_empty() && !node.has_attr(&key) {
                        node.attrs.push((key, value));
                    }
                }
            }
        }
        self.pos = i;
        self.implicit_closes(&tag, start);

        if is_void(&tag) || self_closing {
            node.span.1 = self.pos;
            self.stack.last_mut().expect("parent").children.push(node);
            return;
        }
        if is_raw_text(&tag) || tag == "textarea" || tag == "title" {
            let rest = self.rest();
            let lower = rest.to_ascii_lowercase();
            let close = format!("</{tag}");
            let (content, skip) = match lower.find(&close) {
                Some(e) => {
                    let after = rest[e..].find('>').map(|g| e + g + 1).unwrap_or(rest.len());
                    (&rest[..e], after)
                }
                None => (rest, rest.len()),
            };
            node.text = if is_raw_text(&tag) {
                content.trim().to_string()
            } else {
                decode_entities(content).split_whitespace().collect::<Vec<_>>().join(" ")
            };
            self.pos += skip;
            node.span.1 = self.pos;
            self.stack.last_mut().expect("parent").children.push(node);
            return;
        }
        self.stack.push(node);
    }
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let semi = rest.as_bytes().iter().take(12).position(|&b| b == b';');
        let decoded = semi.and_then(|e| {
            let name = &rest[1..e];
            let c = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" | "#39" => Some('\''),
                "nbsp" => Some('\u{a0}'),
                _ if name.starts_with("#x") || name.starts_with("#X") => {
                    u32::from_str_radix(&name[2..], 16).ok().and_then(char::from_u32)
                }
                _ if name.starts_with('#') => name[1..].parse().ok().and_then(char::from_u32),
                _ => None,
            };
            c.map(|c| (c, e + 1))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: &Node) -> String {
        let inner: Vec<String> = n.children.iter().map(shape).collect();
        if inner.is_empty() {
            format!("{}({})", n.tag, n.text)
        } else {
            format!("{}({})[{}]", n.tag, n.text, inner.join(","))
        }
    }

    #[test]
    fn unclosed_p_is_closed_by_parent_end() {
        let t = parse_document("<div><p>hi</div>");
        assert_eq!(shape(&t.root), "#root()[div()[p(hi)]]");
    }

    #[test]
    fn empty_input_gives_empty_root() {
        let t = parse_document("");
        assert_eq!(t.root.tag, ROOT_TAG);
        assert!(t.root.children.is_empty());
    }

    #[test]
    fn attributes_quoting_and_case() {
        let t = parse_document(r#"<INPUT Type=text name='user' disabled value="a &amp; b" type="x">"#);
        let input = &t.root.children[0];
        assert_eq!(input.tag, "input");
        assert_eq!(
            input.attrs,
            vec![
                ("type".to_string(), "text".to_string()),
                ("name".to_string(), "user".to_string()),
                ("disabled".to_string(), String::new()),
                ("value".to_string(), "a & b".to_string()),
            ]
        );
    }

    #[test]
    fn raw_text_and_comments() {
        let t = parse_document("<!DOCTYPE html><!-- c <b> --><script>if (a < b) { x(); }</script><b>k</b>");
        assert_eq!(shape(&t.root), "#root()[script(if (a < b) { x(); }),b(k)]");
    }

    #[test]
    fn list_items_and_options_close_implicitly() {
        let t = parse_document("<ul><li>a<li>b</ul><select><option>x<option>y</select>");
        assert_eq!(shape(&t.root), "#root()[ul()[li(a),li(b)],select()[option(x),option(y)]]");
    }

    #[test]
    fn stray_end_tags_ignored_and_unknown_tags_kept() {
        let t = parse_document("</span><my-widget>z</my-widget></div>");
        assert_eq!(shape(&t.root), "#root()[my-widget(z)]");
    }

    #[test]
    fn invalid_utf8_rejected() {
        assert!(matches!(parse_bytes(&[0x3c, 0xff, 0xfe]), Err(Error::Decode(_))));
        assert!(parse_bytes(b"<p>ok</p>").is_ok());
    }

    #[test]
    fn spans_cover_source() {
        let src = "<div><p>hi</p></div>";
        let t = parse_document(src);
        let div = &t.root.children[0];
        assert_eq!(div.span, (0, src.len()));
        assert_eq!(&src[div.children[0].span.0..div.children[0].span.1], "<p>hi</p>");
    }

    #[test]
    fn entities_decoded() {
        assert_eq!(decode_entities("a&lt;b&#65;&#x42;&bogus;&"), "a<bAB&bogus;&");
    }
}
