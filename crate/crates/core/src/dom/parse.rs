//! Tolerant HTML tree builder.
//!
//! Handles unclosed cells and rows, stray end tags, void elements, comments,
//! doctype and processing instructions, and raw-text elements. Unlike a full
//! HTML5 tree builder it never synthesizes elements (no implicit `tbody`,
//! `html` or `body`), so child-index paths refer to the markup as written.

use std::collections::BTreeMap;

use super::tagger::{RuleTagger, Tagger};
use super::{DomNode, DomTree};
use crate::error::{Error, Result};

const VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source", "track", "wbr",
];
const RAW_TEXT: &[&str] = &["script", "style"];

/// Tag used for the synthetic root when a fragment has several top-level
/// elements.
pub const DOCUMENT: &str = "#document";

#[derive(Debug)]
struct Builder {
    nodes: Vec<Proto>,
    stack: Vec<usize>,
    top: Vec<usize>,
}

#[derive(Debug)]
struct Proto {
    tag: String,
    attrs: BTreeMap<String, String>,
    text: String,
    children: Vec<usize>,
}

impl Builder {
    fn open(&mut self, tag: &str, attrs: BTreeMap<String, String>, void: bool) {
        let id = self.nodes.len();
        self.nodes.push(Proto {
            tag: tag.to_string(),
            attrs,
            text: String::new(),
            children: Vec::new(),
        });
        match self.stack.last() {
            Some(&p) => self.nodes[p].children.push(id),
            None => self.top.push(id),
        }
        if !void {
            self.stack.push(id);
        }
    }

    fn top_tag(&self) -> Option<&str> {
        self.stack.last().map(|&i| self.nodes[i].tag.as_str())
    }

    /// Pops while the top is one of `closable`, stopping at any of `barrier`.
    fn close_implied(&mut self, closable: &[&str], barrier: &[&str]) {
        while let Some(t) = self.top_tag() {
            if barrier.contains(&t) || !closable.contains(&t) {
                break;
            }
            self.stack.pop();
        }
    }

    fn close(&mut self, tag: &str) {
        // Stray end tags inside a table must not close elements outside it.
        for pos in (0..self.stack.len()).rev() {
            let t = self.nodes[self.stack[pos]].tag.as_str();
            if t == tag {
                self.stack.truncate(pos);
                return;
            }
            if t == "table" && tag != "table" {
                return;
            }
        }
    }

    fn text(&mut self, raw: &str) {
        let decoded = decode_entities(raw);
        let collapsed = decoded.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            return;
        }
        if let Some(&i) = self.stack.last() {
            let t = &mut self.nodes[i].text;
            if !t.is_empty() {
                t.push(' ');
            }
            t.push_str(&collapsed);
        }
    }

    fn start(&mut self, tag: &str, attrs: BTreeMap<String, String>, self_closing: bool) {
        match tag {
            "tr" => self.close_implied(&["td", "th", "tr"], &["table", "thead", "tbody", "tfoot"]),
            "td" | "th" => self.close_implied(&["td", "th"], &["tr", "table"]),
            "thead" | "tbody" | "tfoot" => {
                self.close_implied(&["td", "th", "tr", "thead", "tbody", "tfoot"], &["table"])
            }
            "p" => self.close_implied(&["p"], &[]),
            "li" => self.close_implied(&["li"], &["ul", "ol"]),
            "option" => self.close_implied(&["option"], &["select"]),
            _ => {}
        }
        let void = self_closing || VOID.contains(&tag);
        self.open(tag, attrs, void);
    }

    fn finish(self, tagger: &dyn Tagger) -> Result<DomTree> {
        if self.top.is_empty() {
            return Err(Error::UnparsableHtml);
        }
        fn build(b: &Builder, i: usize, tagger: &dyn Tagger) -> DomNode {
            let p = &b.nodes[i];
            let (tokens, pos_tags) = tagger.tag(&p.text);
            DomNode {
                node_id: 0,
                tag: p.tag.clone(),
                text: p.text.clone(),
                tokens,
                pos_tags,
                attrs: p.attrs.clone(),
                children: p.children.iter().map(|&c| build(b, c, tagger)).collect(),
                gold_label: None,
            }
        }
        let root = if self.top.len() == 1 {
            build(&self, self.top[0], tagger)
        } else {
            let mut r = DomNode::new(0, DOCUMENT);
            r.children = self.top.iter().map(|&c| build(&self, c, tagger)).collect();
            r
        };
        let mut tree = DomTree::new(root);
        tree.renumber();
        Ok(tree)
    }
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let end = rest[1..].find(|c: char| c == ';' || c == '&' || c.is_whitespace()).map(|e| e + 1);
        let decoded = match end {
            Some(e) if rest.as_bytes()[e] == b';' => {
                let name = &rest[1..e];
                let ch = match name {
                    "amp" => Some('&'),
                    "lt" => Some('<'),
                    "gt" => Some('>'),
                    "quot" => Some('"'),
                    "apos" => Some('\''),
                    "nbsp" => Some(' '),
                    _ if name.starts_with("#x") || name.starts_with("#X") => {
                        u32::from_str_radix(&name[2..], 16).ok().and_then(char::from_u32)
                    }
                    _ if name.starts_with('#') => name[1..].parse().ok().and_then(char::from_u32),
                    _ => None,
                };
                ch.map(|c| (c, e + 1))
            }
            _ => None,
        };
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

fn parse_attrs(s: &str) -> BTreeMap<String, String> {
    let mut attrs = BTreeMap::new();
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b'/') {
            i += 1;
        }
        let start = i;
        while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'=' && b[i] != b'/' {
            i += 1;
        }
        if start == i {
            break;
        }
        let name = s[start..i].to_ascii_lowercase();
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < b.len() && b[i] == b'=' {
            i += 1;
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < b.len() && (b[i] == b'"' || b[i] == b'\'') {
                let q = b[i];
                i += 1;
                let vs = i;
                while i < b.len() && b[i] != q {
                    i += 1;
                }
                value = decode_entities(&s[vs..i]);
                i = (i + 1).min(b.len());
            } else {
                let vs = i;
                while i < b.len() && !b[i].is_ascii_whitespace() {
                    i += 1;
                }
                value = decode_entities(&s[vs..i]);
            }
        }
        attrs.entry(name).or_insert(value);
    }
    attrs
}

/// Parses HTML with the built-in rule tagger.
pub fn parse_html(html: &str) -> Result<DomTree> {
    parse_html_with(html, &RuleTagger)
}

/// Parses HTML into a [`DomTree`]: tags lowercased, direct text attached to
/// its element, script/style/comment content dropped.
pub fn parse_html_with(html: &str, tagger: &dyn Tagger) -> Result<DomTree> {
    let mut b = Builder {
        nodes: Vec::new(),
        stack: Vec::new(),
        top: Vec::new(),
    };
    let src = html;
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut text_start = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let next = bytes.get(i + 1).copied();
        let is_markup = matches!(next, Some(c) if c.is_ascii_alphabetic() || c == b'/' || c == b'!' || c == b'?');
        if !is_markup {
            i += 1;
            continue;
        }
        b.text(&src[text_start..i]);
        if src[i..].starts_with("<!--") {
            i = src[i + 4..].find("-->").map_or(bytes.len(), |e| i + 4 + e + 3);
            text_start = i;
            continue;
        }
        if next == Some(b'!') || next == Some(b'?') {
            i = src[i..].find('>').map_or(bytes.len(), |e| i + e + 1);
            text_start = i;
            continue;
        }
        let close = src[i..].find('>').map(|e| i + e);
        let Some(close) = close else {
            // unterminated tag: the rest is text
            text_start = i;
            break;
        };
        let inner = &src[i + 1..close];
        i = close + 1;
        text_start = i;
        if let Some(end) = inner.strip_prefix('/') {
            let name: String = end
                .trim()
                .chars()
                .take_while(|c| !c.is_whitespace())
                .collect::<String>()
                .to_ascii_lowercase();
            if !name.is_empty() {
                b.close(&name);
            }
            continue;
        }
        let name_len = inner
            .find(|c: char| c.is_whitespace() || c == '/')
            .unwrap_or(inner.len());
        let name = inner[..name_len].to_ascii_lowercase();
        let self_closing = inner.trim_end().ends_with('/');
        let attrs = parse_attrs(&inner[name_len..]);
        if RAW_TEXT.contains(&name.as_str()) {
            // skip raw content through the matching end tag
            let needle = format!("</{name}");
            let lower = src[i..].to_ascii_lowercase();
            i = match lower.find(&needle) {
                Some(e) => src[i + e..].find('>').map_or(bytes.len(), |g| i + e + g + 1),
                None => bytes.len(),
            };
            text_start = i;
            continue;
        }
        if !name.is_empty() {
            b.start(&name, attrs, self_closing);
        }
    }
    if text_start < bytes.len() {
        b.text(&src[text_start..]);
    }
    b.finish(tagger)
}

/// Maximal subtrees rooted at `table`, in document order. Nested tables stay
/// inside their outermost table.
pub fn extract_table_subtrees(tree: &DomTree) -> Vec<DomTree> {
    fn walk(n: &DomNode, out: &mut Vec<DomTree>) {
        if n.tag == "table" {
            out.push(DomTree::new(n.clone()));
            return;
        }
        for c in &n.children {
            walk(c, out);
        }
    }
    let mut out = Vec::new();
    walk(&tree.root, &mut out);
    out
}
