use crate::error::{Error, Result};

/// Dense row-major feature matrix with one label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    num_features: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    /// Values must be finite. Negative zero is folded onto positive zero.
    pub fn new(num_features: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::Data("at least one feature is required".into()));
        }
        if features.len() != labels.len() * num_features {
            return Err(Error::Data(format!(
                "{} feature values do not form {} rows of {num_features}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(i) = features.iter().chain(&labels).position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at position {i}")));
        }
        let features = features.into_iter().map(|v| v + 0.0).collect();
        Ok(Dataset { num_features, features, labels })
    }

    pub fn empty(num_features: usize) -> Self {
        Dataset { num_features, features: Vec::new(), labels: Vec::new() }
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        Self::new(d, rows.concat(), labels)
    }

    /// Parses one `label,f1,...,fd` line.
    pub fn parse_row(line: &str) -> Result<(f64, Vec<f64>)> {
        let mut fields = line.trim().split(',').map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Data(format!("bad number {s:?}: {e}")))
        });
        let label = fields.next().ok_or_else(|| Error::Data("empty row".into()))??;
        let feats = fields.collect::<Result<Vec<_>>>()?;
        if feats.is_empty() {
            return Err(Error::Data("row has no features".into()));
        }
        Ok((label, feats))
    }

    pub fn format_row(label: f64, features: &[f64]) -> String {
        let mut s = label.to_string();
        for f in features {
            s.push(',');
            s.push_str(&f.to_string());
        }
        s
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.num_features)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Column `j` as a fresh vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn push_row(&mut self, label: f64, features: &[f64]) -> Result<()> {
        if features.len() != self.num_features {
            return Err(Error::DimensionMismatch { expected: self.num_features, got: features.len() });
        }
        if !label.is_finite() || features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value".into()));
        }
        self.labels.push(label);
        self.features.extend(features.iter().map(|v| v + 0.0));
        Ok(())
    }

    /// Splits rows round-robin: row `i` goes to partition `i % k`.
    pub fn split_round_robin(&self, k: usize) -> Vec<Dataset> {
        assert!(k > 0, "need at least one partition");
        let mut parts = vec![Dataset::empty(self.num_features); k];
        for (i, row) in self.rows().enumerate() {
            let p = &mut parts[i % k];
            p.labels.push(self.labels[i]);
            p.features.extend_from_slice(row);
        }
        parts
    }

    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let d = parts.first().map_or(1, |p| p.num_features);
        let mut out = Dataset::empty(d);
        for p in parts {
            if p.num_features != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.num_features });
            }
            out.features.extend_from_slice(&p.features);
            out.labels.extend_from_slice(&p.labels);
        }
        Ok(out)
    }
}
