use super::{DomNode, DomTree};

/// Keeps nodes whose 1-based post-order index is at most `limit`, plus every
/// ancestor of a kept node so the result stays a single rooted tree.
pub fn clip_postorder(tree: &DomTree, limit: usize) -> DomTree {
    fn walk(n: &DomNode, counter: &mut usize, limit: usize) -> Option<DomNode> {
        let kids: Vec<DomNode> = n.children.iter().filter_map(|c| walk(c, counter, limit)).collect();
        *counter += 1;
        if *counter <= limit || !kids.is_empty() {
            let mut out = n.shallow();
            out.children = kids;
            Some(out)
        } else {
            None
        }
    }
    let mut counter = 0;
    let root = walk(&tree.root, &mut counter, limit.max(1)).expect("root is kept when limit >= 1");
    DomTree::new(root)
}

#[cfg(test)]
mod tests {
    use super::super::random_tree;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rab() -> DomTree {
        let mut r = DomNode::new(0, "r");
        r.children = vec![DomNode::new(1, "a"), DomNode::new(2, "b")];
        DomTree::new(r)
    }

    fn tags(t: &DomTree) -> Vec<String> {
        t.preorder().iter().map(|n| n.tag.clone()).collect()
    }

    #[test]
    fn hand_examples() {
        assert_eq!(tags(&clip_postorder(&rab(), 2)), ["r", "a", "b"]);
        assert_eq!(tags(&clip_postorder(&rab(), 1)), ["r", "a"]);
        assert_eq!(clip_postorder(&rab(), 3), rab());
        assert_eq!(clip_postorder(&rab(), 50), rab());
    }

    #[test]
    fn size_bound_and_connectivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 5, 40, 150, 260] {
            let t = random_tree(&mut rng, n);
            let c = clip_postorder(&t, 100);
            assert!(c.len() <= 100 + t.depth());
            assert!(c.len() >= n.min(100));
            let kept: std::collections::HashSet<usize> = c.preorder().iter().map(|n| n.node_id).collect();
            for (i, node) in t.postorder().iter().enumerate() {
                if i < 100 {
                    assert!(kept.contains(&node.node_id));
                }
            }
        }
    }
}
