//! Plain (non-oblivious) trainer and evaluator implementing the same rules as
//! the oblivious path: same bin edges, same fixed-point sums, same gain and
//! tie rule. Used as a correctness oracle and as the baseline for timing.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fixed::Fixed;
use crate::histogram::{FixedGrad, HistBin};
use crate::objective::{gradient, sigmoid, Objective};
use crate::params::TrainParams;
use crate::quantile::BinEdges;
use crate::split::{leaf_weight, split_gain};
use crate::tree::{FullBinaryTree, Model, Node, NodeKind};

struct Split {
    feature: usize,
    threshold: f64,
}

fn find_split(data: &Dataset, rows: &[usize], grads: &[FixedGrad], edges: &BinEdges, params: &TrainParams) -> (Option<Split>, HistBin) {
    let b = edges.budget();
    let mut total = HistBin::ZERO;
    for &r in rows {
        total = total.add(HistBin::from_grad(grads[r]));
    }
    let (g, h) = (total.g.to_f64(), total.h.to_f64());
    let mut best: Option<(f64, Split)> = None;
    for (f, cuts) in edges.features.iter().enumerate() {
        let mut hist = vec![HistBin::ZERO; b];
        for &r in rows {
            let bin = cuts.bin_of(data.row(r)[f]);
            hist[bin] = hist[bin].add(HistBin::from_grad(grads[r]));
        }
        let mut left = HistBin::ZERO;
        for c in 0..b.saturating_sub(1) {
            left = left.add(hist[c]);
            if !cuts.is_cut(c) {
                break;
            }
            let right = total.sub(left);
            let (hl, hr) = (left.h.to_f64(), right.h.to_f64());
            if hl <= 0.0 || hr <= 0.0 {
                continue;
            }
            let gain = split_gain(left.g.to_f64(), hl, right.g.to_f64(), hr, g, h, params);
            if best.as_ref().is_none_or(|(bg, _)| gain > *bg) {
                best = Some((gain, Split { feature: f, threshold: cuts.threshold(c) }));
            }
        }
    }
    let split = best.filter(|(gain, _)| *gain > 0.0).map(|(_, s)| s);
    (split, total)
}

/// Grows one tree depth-first, then lays it out as a full binary tree.
fn grow(data: &Dataset, grads: &[FixedGrad], edges: &BinEdges, params: &TrainParams) -> FullBinaryTree {
    let depth = params.max_depth;
    let mut levels: Vec<Vec<Option<Node>>> = (0..=depth).map(|l| vec![None; 1 << l]).collect();
    let all: Vec<usize> = (0..data.len()).collect();
    let mut stack = vec![(0usize, 0usize, all)];
    while let Some((level, index, rows)) = stack.pop() {
        let (split, total) = if level < depth {
            find_split(data, &rows, grads, edges, params)
        } else {
            let t = rows.iter().fold(HistBin::ZERO, |a, &r| a.add(HistBin::from_grad(grads[r])));
            (None, t)
        };
        match split {
            Some(s) => {
                let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| data.row(r)[s.feature] < s.threshold);
                levels[level][index] = Some(Node::split(s.feature, s.threshold));
                stack.push((level + 1, 2 * index + 1, right));
                stack.push((level + 1, 2 * index, left));
            }
            None => {
                let w = leaf_weight(total.g.to_f64(), total.h.to_f64(), params);
                levels[level][index] = Some(Node::leaf(w));
            }
        }
    }
    // Fill the unreached positions with dummies carrying the leaf weight above.
    for level in 1..=depth {
        for i in 0..1 << level {
            if levels[level][i].is_none() {
                let parent = levels[level - 1][i / 2].expect("parent filled first");
                levels[level][i] = Some(Node::dummy(parent.leaf_weight));
            }
        }
    }
    FullBinaryTree::from_levels(levels.into_iter().map(|l| l.into_iter().map(Option::unwrap).collect()).collect())
}

/// Trains on `data` as a single partition with the given bin edges.
pub fn reference_train(data: &Dataset, edges: &BinEdges, params: &TrainParams) -> Result<Model> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::Data("no training rows".into()));
    }
    if edges.num_features() != data.num_features() {
        return Err(Error::DimensionMismatch { expected: data.num_features(), got: edges.num_features() });
    }
    let mut margins = vec![0.0; data.len()];
    let mut model = Model::new(params.max_depth, data.num_features());
    for _ in 0..params.num_rounds {
        let grads: Vec<FixedGrad> =
            margins.iter().zip(data.labels()).map(|(&m, &y)| gradient(m, y, params.objective).into()).collect();
        let tree = grow(data, &grads, edges, params);
        for (m, row) in margins.iter_mut().zip(data.rows()) {
            *m += reference_predict_tree(&tree, row);
        }
        model.trees.push(tree);
    }
    Ok(model)
}

/// Root-to-leaf walk over the logical tree, ignoring dummies.
pub fn reference_predict_tree(tree: &FullBinaryTree, x: &[f64]) -> f64 {
    let mut index = 0;
    for level in 0..=tree.max_depth {
        let node = tree.level(level)[index];
        match node.kind() {
            NodeKind::Split => {
                index = 2 * index + usize::from(x[node.split_feature as usize] >= node.threshold);
            }
            NodeKind::Leaf => return node.leaf_weight,
            NodeKind::Dummy => unreachable!("walk reached a dummy node"),
        }
    }
    unreachable!("bottom level holds only leaves and dummies")
}

pub fn reference_predict(model: &Model, data: &Dataset, objective: Option<Objective>) -> Vec<f64> {
    data.rows()
        .map(|row| {
            let margin: f64 = model.trees.iter().map(|t| reference_predict_tree(t, row)).sum();
            match objective {
                Some(Objective::BinaryLogistic) => sigmoid(margin),
                _ => margin,
            }
        })
        .collect()
}

/// Sum of all gradient statistics, handy for conservation checks.
pub fn total_of(grads: &[FixedGrad]) -> (Fixed, Fixed) {
    grads.iter().fold((Fixed::ZERO, Fixed::ZERO), |(g, h), x| (g + x.g, h + x.h))
}
