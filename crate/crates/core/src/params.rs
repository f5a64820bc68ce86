use crate::error::{Error, Result};
use crate::objective::Objective;

/// Largest supported tree depth; a depth-20 tree already has two million
/// nodes per level-wise histogram pass.
pub const MAX_DEPTH_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainParams {
    pub objective: Objective,
    pub num_rounds: usize,
    pub max_depth: usize,
    pub num_bins: usize,
    /// Minimum loss reduction for a split.
    pub gamma: f64,
    /// L2 regularization on leaf weights.
    pub lambda: f64,
    /// Learning rate.
    pub eta: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            objective: Objective::BinaryLogistic,
            num_rounds: 10,
            max_depth: 6,
            num_bins: 32,
            gamma: 0.0,
            lambda: 1.0,
            eta: 0.3,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.num_rounds == 0 {
            return bad("num_rounds must be positive");
        }
        if self.max_depth == 0 || self.max_depth > MAX_DEPTH_LIMIT {
            return bad("max_depth must be in 1..=20");
        }
        if self.num_bins == 0 {
            return bad("num_bins must be positive");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be finite and >= 0");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must be in (0, 1]");
        }
        Ok(())
    }

    /// Applies one `key = value` setting using the usual XGBoost names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidParams(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "objective" => self.objective = value.parse()?,
            "num_rounds" | "num_boost_round" => self.num_rounds = num(key, value)?,
            "max_depth" => self.max_depth = num(key, value)?,
            "num_bins" | "max_bin" => self.num_bins = num(key, value)?,
            "gamma" | "min_split_loss" => self.gamma = num(key, value)?,
            "lambda" | "reg_lambda" => self.lambda = num(key, value)?,
            "eta" | "learning_rate" => self.eta = num(key, value)?,
            other => return Err(Error::InvalidParams(format!("unknown parameter {other:?}"))),
        }
        Ok(())
    }

    /// Nodes in one full tree: `2^(D+1) − 1`.
    pub fn nodes_per_tree(&self) -> usize {
        (1 << (self.max_depth + 1)) - 1
    }
}
