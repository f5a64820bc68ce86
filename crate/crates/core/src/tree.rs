//! Full binary trees and the serialized model format.
//!
//! Model file layout, little-endian throughout:
//!
//! ```text
//! magic "SXGB" | version u16 | num_trees u32 | max_depth u16 | num_features u32
//! per tree, 2^(D+1) - 1 nodes in level order:
//!     kind u8 | split_feature u32 | threshold f64 | leaf_weight f64
//! ```

use crate::error::{Error, Result};
use crate::oblivious::{Cond, Select};
use crate::params::MAX_DEPTH_LIMIT;

pub const MODEL_MAGIC: &[u8; 4] = b"SXGB";
pub const MODEL_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 2 + 4;
const NODE_LEN: usize = 1 + 4 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum NodeKind {
    Split = 0,
    Leaf = 1,
    Dummy = 2,
}

impl NodeKind {
    pub fn from_u8(v: u8) -> Option<NodeKind> {
        match v {
            0 => Some(NodeKind::Split),
            1 => Some(NodeKind::Leaf),
            2 => Some(NodeKind::Dummy),
            _ => None,
        }
    }
}

/// One tree node. The kind is kept as a raw word so nodes can be selected
/// obliviously; see [`Node::kind`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub kind: u64,
    pub split_feature: u64,
    pub threshold: f64,
    pub leaf_weight: f64,
}

impl Node {
    pub fn split(feature: usize, threshold: f64) -> Node {
        Node { kind: NodeKind::Split as u64, split_feature: feature as u64, threshold, leaf_weight: 0.0 }
    }

    pub fn leaf(weight: f64) -> Node {
        Node { kind: NodeKind::Leaf as u64, split_feature: 0, threshold: 0.0, leaf_weight: weight }
    }

    pub fn dummy(weight: f64) -> Node {
        Node { kind: NodeKind::Dummy as u64, split_feature: 0, threshold: 0.0, leaf_weight: weight }
    }

    pub fn kind(&self) -> NodeKind {
        NodeKind::from_u8(self.kind as u8).expect("node kind is always valid")
    }
}

impl Select for Node {
    #[inline]
    fn select(c: Cond, t: &Self, f: &Self) -> Self {
        Node {
            kind: u64::select(c, &t.kind, &f.kind),
            split_feature: u64::select(c, &t.split_feature, &f.split_feature),
            threshold: f64::select(c, &t.threshold, &f.threshold),
            leaf_weight: f64::select(c, &t.leaf_weight, &f.leaf_weight),
        }
    }
}

/// A tree of exactly `2^(D+1) − 1` nodes stored level by level: level `ℓ`
/// occupies indices `2^ℓ − 1 .. 2^(ℓ+1) − 1`, and the children of the node at
/// offset `i` within level `ℓ` sit at offsets `2i` and `2i + 1` of level
/// `ℓ + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FullBinaryTree {
    pub max_depth: usize,
    pub nodes: Vec<Node>,
}

impl FullBinaryTree {
    pub fn node_count(max_depth: usize) -> usize {
        (1 << (max_depth + 1)) - 1
    }

    pub fn from_levels(levels: Vec<Vec<Node>>) -> Self {
        let max_depth = levels.len() - 1;
        debug_assert!(levels.iter().enumerate().all(|(l, v)| v.len() == 1 << l));
        FullBinaryTree { max_depth, nodes: levels.concat() }
    }

    /// A tree whose root is a leaf of weight `w`.
    pub fn constant(max_depth: usize, w: f64) -> Self {
        let mut nodes = vec![Node::dummy(w); Self::node_count(max_depth)];
        nodes[0] = Node::leaf(w);
        FullBinaryTree { max_depth, nodes }
    }

    pub fn level(&self, level: usize) -> &[Node] {
        &self.nodes[(1 << level) - 1..(1 << (level + 1)) - 1]
    }

    pub fn levels(&self) -> impl Iterator<Item = &[Node]> {
        (0..=self.max_depth).map(|l| self.level(l))
    }

    /// Checks the structural invariants: leaves only have dummy descendants,
    /// dummies carry their leaf ancestor's weight, and the bottom level holds
    /// no splits.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.nodes.len() != Self::node_count(self.max_depth) {
            return Err(format!("{} nodes for depth {}", self.nodes.len(), self.max_depth));
        }
        for level in 1..=self.max_depth {
            for (i, node) in self.level(level).iter().enumerate() {
                let parent = self.level(level - 1)[i / 2];
                match parent.kind() {
                    NodeKind::Split => {
                        if node.kind() == NodeKind::Dummy {
                            return Err(format!("dummy child of a split at level {level} offset {i}"));
                        }
                    }
                    NodeKind::Leaf | NodeKind::Dummy => {
                        if node.kind() != NodeKind::Dummy || node.leaf_weight != parent.leaf_weight {
                            return Err(format!("bad descendant of a leaf at level {level} offset {i}"));
                        }
                    }
                }
            }
        }
        if self.level(self.max_depth).iter().any(|n| n.kind() == NodeKind::Split) {
            return Err("split on the bottom level".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub max_depth: usize,
    pub num_features: usize,
    pub trees: Vec<FullBinaryTree>,
}

impl Model {
    pub fn new(max_depth: usize, num_features: usize) -> Self {
        Model { max_depth, num_features, trees: Vec::new() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.trees.len() * self.nodes_per_tree() * NODE_LEN);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.trees.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.max_depth as u16).to_le_bytes());
        out.extend_from_slice(&(self.num_features as u32).to_le_bytes());
        for tree in &self.trees {
            for n in &tree.nodes {
                out.push(n.kind as u8);
                out.extend_from_slice(&(n.split_feature as u32).to_le_bytes());
                out.extend_from_slice(&n.threshold.to_le_bytes());
                out.extend_from_slice(&n.leaf_weight.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let err = |m: String| Error::Format(m);
        if bytes.len() < HEADER_LEN {
            return Err(err(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != MODEL_MAGIC {
            return Err(err("bad magic".into()));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u16_at(4);
        if version != MODEL_VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let num_trees = u32_at(6) as usize;
        let max_depth = u16_at(10) as usize;
        let num_features = u32_at(12) as usize;
        if max_depth == 0 || max_depth > MAX_DEPTH_LIMIT {
            return Err(err(format!("depth {max_depth} out of range")));
        }
        let per_tree = FullBinaryTree::node_count(max_depth);
        let expected = num_trees
            .checked_mul(per_tree * NODE_LEN)
            .and_then(|b| b.checked_add(HEADER_LEN))
            .ok_or_else(|| err("size overflow".into()))?;
        if bytes.len() != expected {
            return Err(err(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let mut trees = Vec::with_capacity(num_trees);
        let mut o = HEADER_LEN;
        for t in 0..num_trees {
            let mut nodes = Vec::with_capacity(per_tree);
            for _ in 0..per_tree {
                let kind = NodeKind::from_u8(bytes[o]).ok_or_else(|| err(format!("bad node kind {}", bytes[o])))?;
                let split_feature = u32_at(o + 1) as u64;
                if kind == NodeKind::Split && split_feature as usize >= num_features {
                    return Err(err(format!("split feature {split_feature} out of range")));
                }
                nodes.push(Node {
                    kind: kind as u64,
                    split_feature,
                    threshold: f64_at(o + 5),
                    leaf_weight: f64_at(o + 13),
                });
                o += NODE_LEN;
            }
            let tree = FullBinaryTree { max_depth, nodes };
            tree.check().map_err(|e| err(format!("tree {t}: {e}")))?;
            trees.push(tree);
        }
        Ok(Model { max_depth, num_features, trees })
    }

    fn nodes_per_tree(&self) -> usize {
        FullBinaryTree::node_count(self.max_depth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> FullBinaryTree {
        FullBinaryTree::from_levels(vec![vec![Node::split(1, 0.5)], vec![Node::leaf(-1.0), Node::leaf(1.0)]])
    }

    #[test]
    fn shape() {
        assert_eq!(FullBinaryTree::node_count(1), 3);
        assert_eq!(FullBinaryTree::node_count(3), 15);
        let t = FullBinaryTree::constant(3, 0.7);
        assert_eq!(t.nodes.len(), 15);
        assert_eq!(t.level(3).len(), 8);
        t.check().unwrap();
        stump().check().unwrap();
    }

    #[test]
    fn check_catches_broken_dummies() {
        let mut t = FullBinaryTree::constant(2, 0.7);
        t.nodes[4].leaf_weight = 0.1;
        assert!(t.check().is_err());
        let mut t = stump();
        t.nodes[2] = Node::split(0, 1.0);
        assert!(t.check().is_err());
    }

    #[test]
    fn serialization_layout() {
        let model = Model { max_depth: 1, num_features: 2, trees: vec![stump()] };
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"SXGB");
        assert_eq!(bytes.len(), 16 + 3 * 21);
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 1);
        assert_eq!(u16::from_le_bytes([bytes[10], bytes[11]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(bytes[16], 0);
        assert_eq!(u32::from_le_bytes(bytes[17..21].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(bytes[21..29].try_into().unwrap()), 0.5);
        assert_eq!(Model::from_bytes(&bytes).unwrap(), model);
    }

    #[test]
    fn rejects_corrupt_models() {
        let model = Model { max_depth: 1, num_features: 2, trees: vec![stump()] };
        let bytes = model.to_bytes();
        assert!(Model::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Model::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[16] = 7;
        assert!(Model::from_bytes(&bad).is_err());
        let mut bad = bytes;
        bad[17] = 9;
        assert!(Model::from_bytes(&bad).is_err());
    }
}
