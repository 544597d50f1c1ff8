use std::fmt::Write;

use super::{DomNode, DomTree};

/// Indented text dump, one node per line:
/// `postorder_idx tag "joined tokens" [label]`.
pub fn dump_tree(tree: &DomTree) -> String {
    fn post_indices(n: &DomNode, counter: &mut usize, out: &mut Vec<usize>) {
        let me = out.len();
        out.push(0);
        for c in &n.children {
            post_indices(c, counter, out);
        }
        *counter += 1;
        out[me] = *counter;
    }
    fn write(n: &DomNode, depth: usize, post: &[usize], next: &mut usize, s: &mut String) {
        let idx = post[*next];
        *next += 1;
        let _ = write!(s, "{}{} {} {:?}", "  ".repeat(depth), idx, n.tag, n.joined_tokens());
        if let Some(l) = &n.gold_label {
            let _ = write!(s, " [{l}]");
        }
        s.push('\n');
        for c in &n.children {
            write(c, depth + 1, post, next, s);
        }
    }
    let mut post = Vec::new();
    post_indices(&tree.root, &mut 0, &mut post);
    let mut s = String::new();
    write(&tree.root, 0, &post, &mut 0, &mut s);
    s
}
