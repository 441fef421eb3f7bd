//! Fixed node-label vocabulary for decompiled-function ASTs.
//!
//! Ids 1..=9 are statements, 10..=43 expressions (assignments, comparisons,
//! arithmetic, and a catch-all "other" group: indexing, variable, number,
//! call, string, inline asm, cast, address-of, dereference). The table can
//! be extended by appending ids; every id maps to exactly one kind.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a node is a statement or an expression. Label substitution in the
/// synthetic generator only swaps labels within one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Statement,
    Expression,
}

/// A validated AST node label. Construction checks vocabulary membership, so
/// a `NodeLabel` always has a name and a kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeLabel(u16);

const STATEMENTS: [&str; 9] = [
    "if", "block", "for", "while", "switch", "return", "goto", "continue", "break",
];

const EXPRESSIONS: [&str; 34] = [
    // assignments, ids 10..=17
    "asg", "asg_or", "asg_xor", "asg_and", "asg_add", "asg_sub", "asg_mul", "asg_div",
    // comparisons, ids 18..=23
    "eq", "ne", "gt", "lt", "ge", "le",
    // arithmetic, ids 24..=34
    "or", "xor", "add", "sub", "mul", "div", "not", "post_inc", "post_dec", "pre_inc", "pre_dec",
    // other, ids 35..=43
    "idx", "var", "num", "call", "str", "asm", "cast", "addr", "deref",
];

pub const MIN_LABEL_ID: u16 = 1;
pub const MAX_LABEL_ID: u16 = (STATEMENTS.len() + EXPRESSIONS.len()) as u16;

/// Number of distinct labels; the encoder's embedding table has one row per
/// label.
pub const VOCAB_SIZE: usize = MAX_LABEL_ID as usize;

impl NodeLabel {
    pub fn new(id: u16) -> Result<Self> {
        if (MIN_LABEL_ID..=MAX_LABEL_ID).contains(&id) {
            Ok(NodeLabel(id))
        } else {
            Err(Error::UnknownLabel(id))
        }
    }

    pub fn id(self) -> u16 {
        self.0
    }

    /// Row of this label in the embedding table (ids are 1-based).
    pub fn row(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn kind(self) -> NodeKind {
        if self.0 <= STATEMENTS.len() as u16 {
            NodeKind::Statement
        } else {
            NodeKind::Expression
        }
    }

    pub fn name(self) -> &'static str {
        let idx = (self.0 - 1) as usize;
        if idx < STATEMENTS.len() {
            STATEMENTS[idx]
        } else {
            EXPRESSIONS[idx - STATEMENTS.len()]
        }
    }

    pub fn all() -> impl Iterator<Item = NodeLabel> {
        (MIN_LABEL_ID..=MAX_LABEL_ID).map(NodeLabel)
    }
}

impl std::fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({})", self.name(), self.0)
    }
}
