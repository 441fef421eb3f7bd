//! AST node type and its wire form: nested `[label_id, [children...]]`
//! arrays. Child order is preserved exactly as exported; it carries the
//! statement order the encoder depends on.

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::vocab::NodeLabel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub label: NodeLabel,
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn new(label: NodeLabel, children: Vec<AstNode>) -> Self {
        AstNode { label, children }
    }

    pub fn leaf(label: NodeLabel) -> Self {
        AstNode {
            label,
            children: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        let mut count = 0;
        self.visit_preorder(|_| count += 1);
        count
    }

    /// Labels in preorder (node before its children, children left to right).
    pub fn preorder_labels(&self) -> Vec<NodeLabel> {
        let mut out = Vec::new();
        self.visit_preorder(|n| out.push(n.label));
        out
    }

    /// (label id, occurrence count) pairs sorted by id.
    pub fn label_cluster(&self) -> Vec<(u16, u32)> {
        let mut counts = std::collections::BTreeMap::new();
        self.visit_preorder(|n| *counts.entry(n.label.id()).or_insert(0u32) += 1);
        counts.into_iter().collect()
    }

    /// Iterative preorder walk; explicit stack so tree depth never limits us.
    pub fn visit_preorder<'a>(&'a self, mut f: impl FnMut(&'a AstNode)) {
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            f(node);
            // push right-to-left so children pop in original order
            for child in node.children.iter().rev() {
                stack.push(child);
            }
        }
    }
}

impl Serialize for AstNode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(2)?;
        tup.serialize_element(&self.label.id())?;
        tup.serialize_element(&self.children)?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for AstNode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct NodeVisitor;

        impl<'de> Visitor<'de> for NodeVisitor {
            type Value = AstNode;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("an AST node of the form [label_id, [children...]]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<AstNode, A::Error> {
                let id: u16 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let label = NodeLabel::new(id).map_err(de::Error::custom)?;
                let children: Vec<AstNode> = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<serde::de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(AstNode::new(label, children))
            }
        }

        deserializer.deserialize_seq(NodeVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(id: u16) -> NodeLabel {
        NodeLabel::new(id).unwrap()
    }

    #[test]
    fn parses_return_of_number() {
        // return(num): a 2-node AST
        let node: AstNode = serde_json::from_str("[6,[[37,[]]]]").unwrap();
        assert_eq!(node.label.name(), "return");
        assert_eq!(node.children.len(), 1);
        assert_eq!(node.children[0].label.name(), "num");
        assert_eq!(node.node_count(), 2);
    }

    #[test]
    fn rejects_unknown_label() {
        let err = serde_json::from_str::<AstNode>("[9999,[]]").unwrap_err();
        assert!(err.to_string().contains("9999"), "{err}");
    }

    #[test]
    fn rejects_extra_elements() {
        assert!(serde_json::from_str::<AstNode>("[6,[],\"x\"]").is_err());
        assert!(serde_json::from_str::<AstNode>("[6]").is_err());
    }

    #[test]
    fn roundtrip_preserves_structure() {
        let tree = AstNode::new(
            label(2),
            vec![
                AstNode::new(label(10), vec![AstNode::leaf(label(36)), AstNode::leaf(label(37))]),
                AstNode::new(label(6), vec![AstNode::leaf(label(36))]),
            ],
        );
        let text = serde_json::to_string(&tree).unwrap();
        let back: AstNode = serde_json::from_str(&text).unwrap();
        assert_eq!(tree, back);
    }

    #[test]
    fn preorder_keeps_child_order() {
        let tree = AstNode::new(
            label(1),
            vec![AstNode::leaf(label(18)), AstNode::leaf(label(2)), AstNode::leaf(label(6))],
        );
        let ids: Vec<u16> = tree.preorder_labels().iter().map(|l| l.id()).collect();
        assert_eq!(ids, vec![1, 18, 2, 6]);
    }

    #[test]
    fn label_cluster_counts_and_sorts() {
        let tree = AstNode::new(
            label(2),
            vec![AstNode::leaf(label(36)), AstNode::leaf(label(36)), AstNode::leaf(label(37))],
        );
        assert_eq!(tree.label_cluster(), vec![(2, 1), (36, 2), (37, 1)]);
    }
}
