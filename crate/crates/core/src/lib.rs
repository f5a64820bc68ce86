//! Data-oblivious gradient boosted decision trees.
//!
//! Training and inference follow XGBoost's histogram algorithm, rewritten so
//! that the sequence of memory accesses depends only on public sizes (number
//! of samples, features, bins, tree depth and rounds) and never on the data.
//!
//! * [`oblivious`]: branch-free comparison and selection, oblivious array
//!   access, a bitonic sorting network, and the trace recorder used to check
//!   obliviousness in tests.
//! * [`quantile`]: oblivious summaries that fix the histogram bin edges.
//! * [`trainer`]: level-wise construction of full binary trees.
//! * [`inference`]: oblivious layer-by-layer prediction.
//! * [`reference`]: a plain trainer and evaluator with identical rules, used
//!   as an oracle and timing baseline.
//!
//! ```
//! use sxgb_core::{train_local, predict, Dataset, Output, TrainParams};
//!
//! let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 7) as f64]).collect();
//! let labels = (0..40).map(|i| if i >= 20 { 1.0 } else { 0.0 }).collect();
//! let data = Dataset::from_rows(&rows, labels)?;
//! let params = TrainParams { max_depth: 2, num_rounds: 3, num_bins: 8, ..TrainParams::default() };
//! let model = train_local(&data, &params)?;
//! let p = predict(&model, &data, Output::Probability)?;
//! assert!(p[0] < 0.5 && p[39] > 0.5);
//! # Ok::<(), sxgb_core::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod fixed;
pub mod histogram;
pub mod inference;
pub mod objective;
pub mod oblivious;
pub mod par;
pub mod params;
pub mod quantile;
pub mod reference;
pub mod split;
pub mod synth;
pub mod trainer;
pub mod tree;

pub use data::Dataset;
pub use error::{Error, Result};
pub use inference::{predict, ObliviousModel, Output};
pub use objective::{compute_gradients, GradPair, Objective};
pub use params::TrainParams;
pub use quantile::BinEdges;
pub use trainer::{sketch_edges, train, train_local, train_with_sketch, Collective, LocalCollective};
pub use tree::{FullBinaryTree, Model, Node, NodeKind};
