use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    BinaryLogistic,
    SquaredError,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::BinaryLogistic => "binary:logistic",
            Objective::SquaredError => "reg:squarederror",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "binary:logistic" => Ok(Objective::BinaryLogistic),
            "reg:squarederror" => Ok(Objective::SquaredError),
            other => Err(Error::InvalidParams(format!("unknown objective {other:?}"))),
        }
    }
}

/// First and second derivative of the loss with respect to the margin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradPair {
    pub g: f64,
    pub h: f64,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-sample gradient pairs of the objective at the current margins.
///
/// Logistic: `g = σ(m) − y`, `h = σ(m)(1 − σ(m))`. Squared error:
/// `g = m − y`, `h = 1`.
pub fn compute_gradients(margins: &[f64], labels: &[f64], objective: Objective) -> Vec<GradPair> {
    assert_eq!(margins.len(), labels.len(), "margins and labels differ in length");
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| gradient(m, y, objective))
        .collect()
}

#[inline]
pub fn gradient(margin: f64, label: f64, objective: Objective) -> GradPair {
    match objective {
        Objective::BinaryLogistic => {
            let p = sigmoid(margin);
            GradPair { g: p - label, h: p * (1.0 - p) }
        }
        Objective::SquaredError => GradPair { g: margin - label, h: 1.0 },
    }
}
