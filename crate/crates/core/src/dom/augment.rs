use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DomNode, DomTree};
use crate::seed::derive_seed;

fn row_paths(tree: &DomTree) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for (i, c) in tree.root.children.iter().enumerate() {
        match c.tag.as_str() {
            "tr" => out.push(vec![i]),
            "thead" | "tbody" | "tfoot" => {
                for (j, r) in c.children.iter().enumerate() {
                    if r.tag == "tr" {
                        out.push(vec![i, j]);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn spans(n: &DomNode) -> bool {
    ["colspan", "rowspan"]
        .iter()
        .any(|k| n.attrs.get(*k).is_some_and(|v| v.trim() != "1"))
}

/// Column count when every row is made of plain, non-spanning cells of equal
/// number.
fn rectangular_width(tree: &DomTree, rows: &[Vec<usize>]) -> Option<usize> {
    let mut width = None;
    for p in rows {
        let row = tree.node_at(p)?;
        if row.children.iter().any(|c| !(c.tag == "td" || c.tag == "th") || spans(c)) {
            return None;
        }
        match width {
            None => width = Some(row.children.len()),
            Some(w) if w != row.children.len() => return None,
            _ => {}
        }
    }
    width
}

/// Randomly swaps pairs of rows and, for rectangular tables, pairs of columns.
///
/// Every unordered pair is visited once in lexicographic order and swapped
/// with probability `p`. Nodes keep their ids and labels, so the node multiset
/// is unchanged. Trees whose root is not a table are returned as-is.
pub fn augment_table(tree: &DomTree, seed: u64, p: f64) -> DomTree {
    let mut out = tree.clone();
    if out.root.tag != "table" {
        log::warn!("augment_table called on a `{}` root; left unchanged", out.root.tag);
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = row_paths(&out);

    let mut order: Vec<usize> = (0..rows.len()).collect();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            if rng.gen::<f64>() < p {
                order.swap(i, j);
            }
        }
    }
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        let originals: Vec<DomNode> = rows
            .iter()
            .map(|p| tree.node_at(p).expect("row path").clone())
            .collect();
        for (slot, &src) in rows.iter().zip(&order) {
            *out.node_at_mut(slot).expect("row path") = originals[src].clone();
        }
    }

    match rectangular_width(&out, &rows) {
        Some(width) => {
            for a in 0..width {
                for b in a + 1..width {
                    if rng.gen::<f64>() < p {
                        for path in &rows {
                            out.node_at_mut(path).expect("row path").children.swap(a, b);
                        }
                    }
                }
            }
        }
        None => log::debug!("table is not rectangular; column swaps skipped"),
    }
    out
}

/// Applies [`augment_table`] to every outermost `table` subtree of `tree`,
/// each with its own seed derived from `seed` and its pre-order rank.
pub fn augment_tree(tree: &DomTree, seed: u64, p: f64) -> DomTree {
    fn walk(n: &mut DomNode, seed: u64, p: f64, k: &mut u64) {
        if n.tag == "table" {
            let sub = DomTree::new(std::mem::replace(n, DomNode::new(0, "")));
            *n = augment_table(&sub, derive_seed(seed, &[*k]), p).root;
            *k += 1;
            return;
        }
        for c in &mut n.children {
            walk(c, seed, p, k);
        }
    }
    let mut out = tree.clone();
    walk(&mut out.root, seed, p, &mut 0);
    out
}
