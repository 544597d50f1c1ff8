//! HTML ingestion: parsing, tokenization, attribute-name unification,
//! post-order clipping, binarization and row/column augmentation.

mod augment;
mod binary;
mod clip;
mod corpus;
mod dump;
mod parse;
mod random;
mod synonyms;
mod tagger;

pub use augment::{augment_table, augment_tree};
pub use binary::{binarize, unbinarize, BinaryNode, BinaryTree};
pub use clip::clip_postorder;
pub use corpus::{read_corpus, write_corpus, CorpusRecord, LabelRecord, LabeledTable};
pub use dump::dump_tree;
pub use parse::{extract_table_subtrees, parse_html, parse_html_with};
pub use random::random_tree;
pub use synonyms::{normalize_attribute_names, SynonymDictionary};
pub use tagger::{tokenize_and_tag, RuleTagger, Tagger, TaggerRegistry, NUM, PUNCT, WORD};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Label for nodes that carry no target attribute.
pub const OTHER: &str = "Other";

/// One element of a parsed page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomNode {
    pub node_id: usize,
    pub tag: String,
    /// Text directly owned by the element, whitespace-collapsed.
    pub text: String,
    pub tokens: Vec<String>,
    pub pos_tags: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, String>,
    pub children: Vec<DomNode>,
    #[serde(default)]
    pub gold_label: Option<String>,
}

impl DomNode {
    pub fn new(node_id: usize, tag: &str) -> Self {
        Self {
            node_id,
            tag: tag.to_string(),
            text: String::new(),
            tokens: Vec::new(),
            pos_tags: Vec::new(),
            attrs: BTreeMap::new(),
            children: Vec::new(),
            gold_label: None,
        }
    }

    pub fn joined_tokens(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(DomNode::count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(DomNode::depth).max().unwrap_or(0)
    }

    pub fn visit_preorder<'a>(&'a self, f: &mut impl FnMut(&'a DomNode)) {
        f(self);
        for c in &self.children {
            c.visit_preorder(f);
        }
    }

    pub fn visit_preorder_mut(&mut self, f: &mut impl FnMut(&mut DomNode)) {
        f(self);
        for c in &mut self.children {
            c.visit_preorder_mut(f);
        }
    }

    pub fn visit_postorder<'a>(&'a self, f: &mut impl FnMut(&'a DomNode)) {
        for c in &self.children {
            c.visit_postorder(f);
        }
        f(self);
    }

    /// Copy of this node without its children.
    pub fn shallow(&self) -> DomNode {
        DomNode {
            children: Vec::new(),
            ..self.clone()
        }
    }
}

/// Ordered parse tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomTree {
    pub root: DomNode,
}

impl DomTree {
    pub fn new(root: DomNode) -> Self {
        Self { root }
    }

    pub fn len(&self) -> usize {
        self.root.count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn preorder(&self) -> Vec<&DomNode> {
        let mut out = Vec::new();
        self.root.visit_preorder(&mut |n| out.push(n));
        out
    }

    pub fn postorder(&self) -> Vec<&DomNode> {
        let mut out = Vec::new();
        self.root.visit_postorder(&mut |n| out.push(n));
        out
    }

    pub fn node_at(&self, path: &[usize]) -> Option<&DomNode> {
        let mut n = &self.root;
        for &i in path {
            n = n.children.get(i)?;
        }
        Some(n)
    }

    pub fn node_at_mut(&mut self, path: &[usize]) -> Option<&mut DomNode> {
        let mut n = &mut self.root;
        for &i in path {
            n = n.children.get_mut(i)?;
        }
        Some(n)
    }

    /// Child-index paths of every node, in pre-order.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        fn walk(n: &DomNode, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(cur.clone());
            for (i, c) in n.children.iter().enumerate() {
                cur.push(i);
                walk(c, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Reassigns node ids 0.. in pre-order.
    pub fn renumber(&mut self) {
        let mut next = 0;
        self.root.visit_preorder_mut(&mut |n| {
            n.node_id = next;
            next += 1;
        });
    }

    pub fn fill_missing_labels(&mut self, label: &str) {
        self.root.visit_preorder_mut(&mut |n| {
            if n.gold_label.is_none() {
                n.gold_label = Some(label.to_string());
            }
        });
    }

    /// Deterministic serialization used for byte-level comparisons.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("DomTree serialization is infallible")
    }

    /// Sorted `(tag, tokens, label)` triples of every node.
    pub fn triples(&self) -> Vec<(String, Vec<String>, Option<String>)> {
        let mut out: Vec<_> = self
            .preorder()
            .into_iter()
            .map(|n| (n.tag.clone(), n.tokens.clone(), n.gold_label.clone()))
            .collect();
        out.sort();
        out
    }

    /// Checks the structural invariants: unique ids and aligned tokens/tags.
    pub fn validate(&self) -> bool {
        let mut ids = std::collections::HashSet::new();
        self.preorder()
            .into_iter()
            .all(|n| n.tokens.len() == n.pos_tags.len() && ids.insert(n.node_id))
    }
}
