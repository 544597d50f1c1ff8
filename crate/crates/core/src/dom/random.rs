use rand::Rng;

use super::{DomNode, DomTree};


/// Random ordered tree with exactly `n` nodes, random tags and tokens, and
/// about 30% of nodes labeled `Name`; ids are pre-order.
pub fn random_tree(rng: &mut impl Rng, n: usize) -> DomTree {
    assert!(n >= 1);
    let tags = ["table", "tr", "td", "th", "span", "b", "div"];
    let words = ["alpha", "12", ":", "beta", "-", "gamma"];
    // parent[i] < i gives a random recursive tree in pre-order-compatible form
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let p = rng.gen_range(0..i);
        kids[p].push(i);
    }
    fn build(i: usize, kids: &[Vec<usize>], rng: &mut impl Rng, tags: &[&str], words: &[&str]) -> DomNode {
        let mut node = DomNode::new(i, tags[rng.gen_range(0..tags.len())]);
        let k = rng.gen_range(0..3);
        for _ in 0..k {
            let w = words[rng.gen_range(0..words.len())];
            node.tokens.push(w.to_string());
            node.pos_tags.push("WORD".to_string());
        }
        node.text = node.tokens.join(" ");
        if rng.gen_bool(0.3) {
            node.gold_label = Some("Name".into());
        }
        node.children = kids[i].iter().map(|&c| build(c, kids, rng, tags, words)).collect();
        node
    }
    let mut t = DomTree::new(build(0, &kids, rng, &tags, &words));
    t.renumber();
    t
}
