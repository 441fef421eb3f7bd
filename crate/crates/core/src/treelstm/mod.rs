//! Tree-structured LSTM encoder. ASTs are first binarized left-child /
//! right-sibling, then folded bottom-up: each node combines its label
//! embedding with the hidden and cell states of its two children through
//! gated units, using a separate forget gate per child so left and right
//! context stay distinguishable. The root hidden vector is the function
//! encoding.

mod encode;
mod params;

pub use encode::{encode_node, encode_tree, NodeState, TreeForward};
pub use params::EncoderParams;

use crate::corpus::{AstNode, NodeLabel};

/// Binary tree in left-child right-sibling form: `left` is the first child
/// of the original node, `right` is the next sibling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinTree {
    pub label: NodeLabel,
    pub left: Option<Box<BinTree>>,
    pub right: Option<Box<BinTree>>,
}

impl BinTree {
    pub fn node_count(&self) -> usize {
        // iterative: right-sibling chains can be long
        let mut count = 0;
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            count += 1;
            if let Some(l) = &n.left {
                stack.push(l);
            }
            if let Some(r) = &n.right {
                stack.push(r);
            }
        }
        count
    }
}

/// Left-child right-sibling binarization. Node count is preserved; an
/// n-ary node's children become a chain hanging off its `left` edge.
pub fn binarize(ast: &AstNode) -> BinTree {
    // recursion depth equals AST depth; sibling chains are built by loop
    let mut chain: Option<Box<BinTree>> = None;
    for child in ast.children.iter().rev() {
        let mut bt = binarize(child);
        debug_assert!(bt.right.is_none());
        bt.right = chain.take();
        chain = Some(Box::new(bt));
    }
    BinTree {
        label: ast.label,
        left: chain,
        right: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(id: u16) -> NodeLabel {
        NodeLabel::new(id).unwrap()
    }

    #[test]
    fn binarize_preserves_node_count_and_root() {
        let ast = AstNode::new(
            label(2),
            vec![
                AstNode::new(label(10), vec![AstNode::leaf(label(36)), AstNode::leaf(label(37))]),
                AstNode::leaf(label(6)),
                AstNode::leaf(label(9)),
            ],
        );
        let bt = binarize(&ast);
        assert_eq!(bt.node_count(), ast.node_count());
        assert_eq!(bt.label.id(), 2);
        assert!(bt.right.is_none(), "root has no siblings");
    }

    #[test]
    fn children_become_left_chain() {
        // block(a, b, c) => block.left = a, a.right = b, b.right = c
        let ast = AstNode::new(
            label(2),
            vec![AstNode::leaf(label(36)), AstNode::leaf(label(37)), AstNode::leaf(label(39))],
        );
        let bt = binarize(&ast);
        let a = bt.left.as_ref().unwrap();
        assert_eq!(a.label.id(), 36);
        assert!(a.left.is_none());
        let b = a.right.as_ref().unwrap();
        assert_eq!(b.label.id(), 37);
        let c = b.right.as_ref().unwrap();
        assert_eq!(c.label.id(), 39);
        assert!(c.right.is_none());
    }

    #[test]
    fn nested_first_child_keeps_its_subtree() {
        let ast = AstNode::new(
            label(1),
            vec![
                AstNode::new(label(18), vec![AstNode::leaf(label(36))]),
                AstNode::leaf(label(6)),
            ],
        );
        let bt = binarize(&ast);
        let cmp = bt.left.as_ref().unwrap();
        assert_eq!(cmp.label.id(), 18);
        // the comparison's own child hangs left, its sibling hangs right
        assert_eq!(cmp.left.as_ref().unwrap().label.id(), 36);
        assert_eq!(cmp.right.as_ref().unwrap().label.id(), 6);
    }

    #[test]
    fn wide_nodes_do_not_overflow_the_stack() {
        let ast = AstNode::new(
            label(2),
            (0..10_000).map(|_| AstNode::leaf(label(37))).collect(),
        );
        let bt = binarize(&ast);
        assert_eq!(bt.node_count(), 10_001);
    }
}
