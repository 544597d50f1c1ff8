//! Left-child/right-sibling view of an ordered tree.

use super::{DomNode, DomTree};

/// One node of a [`BinaryTree`]; `left` is the first child and `right` the
/// next sibling of `payload` in the source tree.
#[derive(Debug, Clone, Copy)]
pub struct BinaryNode<'a> {
    pub payload: &'a DomNode,
    pub left: Option<usize>,
    pub right: Option<usize>,
}

/// Arena of binary nodes in pre-order (which is also the source pre-order).
#[derive(Debug, Clone)]
pub struct BinaryTree<'a> {
    pub nodes: Vec<BinaryNode<'a>>,
    pub root: usize,
}

impl<'a> BinaryTree<'a> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

pub fn binarize(tree: &DomTree) -> BinaryTree<'_> {
    fn push<'a>(n: &'a DomNode, nodes: &mut Vec<BinaryNode<'a>>) -> usize {
        let me = nodes.len();
        nodes.push(BinaryNode {
            payload: n,
            left: None,
            right: None,
        });
        let mut prev: Option<usize> = None;
        for c in &n.children {
            let ci = push(c, nodes);
            match prev {
                None => nodes[me].left = Some(ci),
                Some(p) => nodes[p].right = Some(ci),
            }
            prev = Some(ci);
        }
        me
    }
    let mut nodes = Vec::with_capacity(tree.len());
    let root = push(&tree.root, &mut nodes);
    BinaryTree { nodes, root }
}

pub fn unbinarize(btree: &BinaryTree<'_>) -> DomTree {
    fn build(bt: &BinaryTree<'_>, i: usize) -> DomNode {
        let mut n = bt.nodes[i].payload.shallow();
        let mut child = bt.nodes[i].left;
        while let Some(c) = child {
            n.children.push(build(bt, c));
            child = bt.nodes[c].right;
        }
        n
    }
    DomTree::new(build(btree, btree.root))
}
