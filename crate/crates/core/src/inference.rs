//! Oblivious model evaluation.
//!
//! Each tree is held as one array per level. A prediction walks all `D`
//! levels unconditionally: it fetches the current node with an oaccess over
//! the level, fetches the split feature's value with an oaccess over the
//! sample, and moves to child `2i + [x ≥ t]`. Dummy nodes replicate their leaf
//! ancestor's weight, so the walk can always finish on the bottom level.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::objective::sigmoid;
use crate::oblivious::{oaccess_read, oless, TracedArray};
use crate::par;
use crate::tree::{FullBinaryTree, Model, Node};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Output {
    Margin,
    Probability,
}

/// One tree as per-level node arrays; level `ℓ` has `2^ℓ` entries.
pub struct LayerArrays {
    layers: Vec<TracedArray<Node>>,
}

impl LayerArrays {
    pub fn new(tree: &FullBinaryTree) -> Self {
        LayerArrays { layers: tree.levels().map(|l| TracedArray::new(l.to_vec())).collect() }
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }
}

pub fn predict_tree(tree: &LayerArrays, sample: &TracedArray<f64>) -> f64 {
    let mut index = 0usize;
    for layer in &tree.layers[..tree.depth()] {
        let node = oaccess_read(layer, index);
        let x = oaccess_read(sample, node.split_feature as usize);
        let go_right = !oless(x, node.threshold);
        index = 2 * index + go_right.bit() as usize;
    }
    oaccess_read(&tree.layers[tree.depth()], index).leaf_weight
}

/// A model prepared for repeated oblivious evaluation.
pub struct ObliviousModel {
    num_features: usize,
    trees: Vec<LayerArrays>,
}

impl ObliviousModel {
    pub fn new(model: &Model) -> Self {
        ObliviousModel { num_features: model.num_features, trees: model.trees.iter().map(LayerArrays::new).collect() }
    }

    pub fn predict_row(&self, x: &[f64], output: Output) -> Result<f64> {
        if x.len() != self.num_features {
            return Err(Error::DimensionMismatch { expected: self.num_features, got: x.len() });
        }
        let sample = TracedArray::new(x.to_vec());
        let margin = self.trees.iter().fold(0.0, |m, t| m + predict_tree(t, &sample));
        Ok(match output {
            Output::Margin => margin,
            Output::Probability => sigmoid(margin),
        })
    }
}

/// Scores every row of `data`; rows are evaluated in parallel when enabled.
pub fn predict(model: &Model, data: &Dataset, output: Output) -> Result<Vec<f64>> {
    if model.trees.is_empty() {
        return Err(Error::Format("model has no trees".into()));
    }
    if data.num_features() != model.num_features {
        return Err(Error::DimensionMismatch { expected: model.num_features, got: data.num_features() });
    }
    let om = ObliviousModel::new(model);
    let rows: Vec<&[f64]> = data.rows().collect();
    par::map(&rows, |row| om.predict_row(row, output)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Model {
        let tree = FullBinaryTree::from_levels(vec![vec![Node::split(0, 5.0)], vec![Node::leaf(-1.0), Node::leaf(1.0)]]);
        Model { max_depth: 1, num_features: 1, trees: vec![tree] }
    }

    #[test]
    fn stump_examples() {
        let om = ObliviousModel::new(&stump());
        assert_eq!(om.predict_row(&[3.0], Output::Margin).unwrap(), -1.0);
        assert_eq!(om.predict_row(&[5.0], Output::Margin).unwrap(), 1.0);
        assert!(om.predict_row(&[1.0, 2.0], Output::Margin).is_err());
    }

    #[test]
    fn constant_tree() {
        let m = Model { max_depth: 3, num_features: 2, trees: vec![FullBinaryTree::constant(3, 0.75)] };
        let data = Dataset::from_rows(&[vec![-1.0, 9.0], vec![100.0, 0.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(predict(&m, &data, Output::Margin).unwrap(), vec![0.75, 0.75]);
    }

    #[test]
    fn zero_leaf_model() {
        let m = Model { max_depth: 1, num_features: 1, trees: vec![FullBinaryTree::constant(1, 0.0)] };
        let data = Dataset::from_rows(&[vec![4.0]], vec![0.0]).unwrap();
        assert_eq!(predict(&m, &data, Output::Margin).unwrap(), vec![0.0]);
        assert_eq!(predict(&m, &data, Output::Probability).unwrap(), vec![0.5]);
        let empty = Model::new(1, 1);
        assert!(predict(&empty, &data, Output::Margin).is_err());
    }
}
