//! Level-wise oblivious training over data partitioned across workers.
//!
//! Each boosting round builds one full binary tree. For every level the
//! workers scan their samples once to fill per-node histograms, the
//! histograms are summed through a [`Collective`], every node of the level
//! picks its split from the sums, and the workers move each sample's node
//! marker to a child. Nodes below a leaf are dummies that inherit the leaf's
//! weight, so all trees of a given depth have the same shape and the same
//! access trace.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::histogram::{aggregate_histograms, build_level_histograms, build_level_totals, FixedGrad, HistBin, LevelHistograms};
use crate::objective::{gradient, Objective};
use crate::oblivious::{oaccess_read, oless, oselect_index, Cond, Select, TracedArray};
use crate::par;
use crate::params::TrainParams;
use crate::quantile::{boundaries, global_summary, prune_summary, summarize_column, BinEdges, QuantileSummary, SummaryEntry};
use crate::split::{best_split, leaf_weight};
use crate::tree::{FullBinaryTree, Model, Node};

/// Exchange of per-worker state between workers. Implementations decide how
/// the data travels; the result must not depend on anything but the inputs
/// and the worker order.
pub trait Collective {
    /// Elementwise sum of one histogram set per worker, delivered to all.
    fn allreduce_histograms(&mut self, per_worker: Vec<Vec<HistBin>>) -> Result<Vec<HistBin>>;

    /// Broadcasts every worker's per-feature summaries to all workers.
    /// Returns the summaries indexed `[worker][feature]`.
    fn allgather_summaries(&mut self, per_worker: Vec<Vec<Vec<SummaryEntry>>>) -> Result<Vec<Vec<Vec<SummaryEntry>>>>;
}

/// All workers in one address space.
#[derive(Clone, Copy, Debug, Default)]
pub struct LocalCollective;

impl Collective for LocalCollective {
    fn allreduce_histograms(&mut self, per_worker: Vec<Vec<HistBin>>) -> Result<Vec<HistBin>> {
        aggregate_histograms(&per_worker)
    }

    fn allgather_summaries(&mut self, per_worker: Vec<Vec<Vec<SummaryEntry>>>) -> Result<Vec<Vec<Vec<SummaryEntry>>>> {
        Ok(per_worker)
    }
}

/// One worker's partition and per-sample training state.
struct Worker {
    num_features: usize,
    features: TracedArray<f64>,
    labels: TracedArray<f64>,
    margins: TracedArray<f64>,
    grads: TracedArray<FixedGrad>,
    markers: TracedArray<u64>,
}

impl Worker {
    fn new(data: &Dataset) -> Self {
        let n = data.len();
        Worker {
            num_features: data.num_features(),
            features: TracedArray::new(data.features().to_vec()),
            labels: TracedArray::new(data.labels().to_vec()),
            margins: TracedArray::filled(n, 0.0),
            grads: TracedArray::filled(n, FixedGrad::default()),
            markers: TracedArray::filled(n, 0),
        }
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn start_round(&mut self, objective: Objective) {
        for i in 0..self.len() {
            let gp = gradient(self.margins.read(i), self.labels.read(i), objective);
            self.grads.write(i, gp.into());
            self.markers.write(i, 0);
        }
    }

    /// Sends every sample to the child chosen by its node's split:
    /// `marker ← 2·marker + [x(feature) ≥ threshold]`.
    fn partition_level(&mut self, level_nodes: &TracedArray<Node>) {
        let d = self.num_features;
        for i in 0..self.len() {
            let marker = self.markers.read(i);
            let node = oaccess_read(level_nodes, marker as usize);
            let row = self.features.read_range(i * d..(i + 1) * d);
            let x = oselect_index(row, node.split_feature as usize);
            let go_right = !oless(x, node.threshold);
            self.markers.write(i, 2 * marker + go_right.bit());
        }
    }

    fn apply_leaves(&mut self, bottom: &TracedArray<Node>) {
        for i in 0..self.len() {
            let leaf = oaccess_read(bottom, self.markers.read(i) as usize);
            let m = self.margins.read(i);
            self.margins.write(i, m + leaf.leaf_weight);
        }
    }

    /// Per-feature summaries weighted by the hessians at the base margin,
    /// pruned to the bin budget.
    fn local_summaries(&self, objective: Objective, b: usize) -> Vec<QuantileSummary> {
        let n = self.len();
        let d = self.num_features;
        let weights: Vec<f64> = (0..n).map(|i| gradient(0.0, self.labels.read(i), objective).h).collect();
        let columns: Vec<Vec<f64>> = (0..d).map(|f| (0..n).map(|i| self.features.read(i * d + f)).collect()).collect();
        par::map_range(d, |f| prune_summary(&summarize_column(f, &columns[f], &weights), b))
    }
}

/// Split state handed from a level to the next.
#[derive(Clone, Copy)]
struct Lineage {
    /// The parent split, so this node is a real node.
    active: Cond,
    /// Leaf weight to replicate when the node is a dummy.
    inherited: f64,
}

/// Decides every node of an inner level from its aggregated histograms.
fn decide_inner_level(hist: &LevelHistograms, lineage: &[Lineage], edges: &BinEdges, params: &TrainParams) -> (Vec<Node>, Vec<Lineage>) {
    let mut nodes = Vec::with_capacity(lineage.len());
    let mut children = Vec::with_capacity(lineage.len() * 2);
    for (i, lin) in lineage.iter().enumerate() {
        let choice = best_split(hist.node(i), edges, params);
        let is_split = lin.active & choice.splittable;
        let is_leaf = lin.active & !choice.splittable;
        let weight = leaf_weight(choice.total.g.to_f64(), choice.total.h.to_f64(), params);
        let split = Node::split(0, 0.0);
        let split = Node { split_feature: choice.feature, threshold: choice.threshold, ..split };
        let node = Node::select(is_split, &split, &Node::select(is_leaf, &Node::leaf(weight), &Node::dummy(lin.inherited)));
        let child = Lineage { active: is_split, inherited: node.leaf_weight };
        nodes.push(node);
        children.push(child);
        children.push(child);
    }
    (nodes, children)
}

fn decide_bottom_level(totals: &LevelHistograms, lineage: &[Lineage], params: &TrainParams) -> Vec<Node> {
    lineage
        .iter()
        .enumerate()
        .map(|(i, lin)| {
            let t = totals.node(i)[0];
            let weight = leaf_weight(t.g.to_f64(), t.h.to_f64(), params);
            Node::select(lin.active, &Node::leaf(weight), &Node::dummy(lin.inherited))
        })
        .collect()
}

fn check_partitions(partitions: &[Dataset]) -> Result<usize> {
    let first = partitions.first().ok_or_else(|| Error::Data("no partitions".into()))?;
    let d = first.num_features();
    if let Some(p) = partitions.iter().find(|p| p.num_features() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.num_features() });
    }
    if partitions.iter().all(Dataset::is_empty) {
        return Err(Error::Data("no training rows".into()));
    }
    Ok(d)
}

/// Computes the global bin edges: every worker summarizes and prunes its
/// columns, the summaries are exchanged, and each feature's summaries are
/// folded in worker order.
pub fn sketch_edges(partitions: &[Dataset], params: &TrainParams, collective: &mut dyn Collective) -> Result<BinEdges> {
    params.validate()?;
    let d = check_partitions(partitions)?;
    let b = params.num_bins;
    let workers: Vec<Worker> = partitions.iter().map(Worker::new).collect();
    let local: Vec<Vec<Vec<SummaryEntry>>> = par::map(&workers, |w| {
        w.local_summaries(params.objective, b).into_iter().map(|s| s.entries.into_vec()).collect()
    });
    let gathered = collective.allgather_summaries(local)?;
    let per_feature = par::map_range(d, |f| {
        let summaries: Vec<QuantileSummary> = gathered
            .iter()
            .map(|w| QuantileSummary { feature_id: f, entries: TracedArray::new(w[f].clone()) })
            .collect();
        global_summary(summaries.iter(), b).map(|g| boundaries(&g)).unwrap_or_default()
    });
    Ok(BinEdges::new(per_feature, b))
}

/// Trains `params.num_rounds` trees on fixed global bin edges.
pub fn train(partitions: &[Dataset], edges: &BinEdges, params: &TrainParams, collective: &mut dyn Collective) -> Result<Model> {
    params.validate()?;
    let d = check_partitions(partitions)?;
    if edges.num_features() != d {
        return Err(Error::DimensionMismatch { expected: d, got: edges.num_features() });
    }
    if edges.budget() != params.num_bins {
        return Err(Error::InvalidParams(format!(
            "bin edges were built for {} bins, parameters ask for {}",
            edges.budget(),
            params.num_bins
        )));
    }
    let depth = params.max_depth;
    let mut workers: Vec<Worker> = partitions.iter().map(Worker::new).collect();
    let mut model = Model::new(depth, d);

    for _round in 0..params.num_rounds {
        par::map_mut(&mut workers, |w| w.start_round(params.objective));
        let mut lineage = vec![Lineage { active: Cond::TRUE, inherited: 0.0 }];
        let mut levels: Vec<TracedArray<Node>> = Vec::with_capacity(depth + 1);

        for level in 0..depth {
            let local = par::map(&workers, |w| {
                build_level_histograms(&w.features, d, &w.grads, &w.markers, level, edges).data.into_vec()
            });
            let global = collective.allreduce_histograms(local)?;
            let hist = LevelHistograms::from_vec(1 << level, d, edges.budget(), global);
            let (nodes, next) = decide_inner_level(&hist, &lineage, edges, params);
            let nodes = TracedArray::new(nodes);
            par::map_mut(&mut workers, |w| w.partition_level(&nodes));
            levels.push(nodes);
            lineage = next;
        }

        let local = par::map(&workers, |w| build_level_totals(&w.grads, &w.markers, depth).data.into_vec());
        let global = collective.allreduce_histograms(local)?;
        let totals = LevelHistograms::from_vec(1 << depth, 1, 1, global);
        let bottom = TracedArray::new(decide_bottom_level(&totals, &lineage, params));
        par::map_mut(&mut workers, |w| w.apply_leaves(&bottom));
        levels.push(bottom);

        let tree = FullBinaryTree::from_levels(levels.into_iter().map(TracedArray::into_vec).collect());
        debug_assert!(tree.check().is_ok());
        model.trees.push(tree);
    }
    Ok(model)
}

/// Sketches the bin edges and trains on them.
pub fn train_with_sketch(partitions: &[Dataset], params: &TrainParams, collective: &mut dyn Collective) -> Result<(BinEdges, Model)> {
    let edges = sketch_edges(partitions, params, collective)?;
    let model = train(partitions, &edges, params, collective)?;
    Ok((edges, model))
}

/// Single-worker training with locally sketched edges.
pub fn train_local(data: &Dataset, params: &TrainParams) -> Result<Model> {
    train_with_sketch(std::slice::from_ref(data), params, &mut LocalCollective).map(|(_, m)| m)
}

/// Counts the nodes of each kind, for reporting.
pub fn kind_counts(tree: &FullBinaryTree) -> [usize; 3] {
    let mut out = [0; 3];
    for n in &tree.nodes {
        out[n.kind() as usize] += 1;
    }
    out
}
