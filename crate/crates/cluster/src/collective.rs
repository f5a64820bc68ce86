//! Training collectives carried over the cluster's sealed channels.

use sxgb_core::histogram::{aggregate_histograms, HistBin};
use sxgb_core::quantile::SummaryEntry;
use sxgb_core::{Collective, Error};

use crate::cluster::Cluster;
use crate::codec::{decode_histograms, decode_summaries, encode_histograms, encode_summaries, SummarySet};
use crate::error::ClusterError;

/// Worker `i` runs on node `i`.
pub struct ClusterCollective<'a> {
    pub cluster: &'a Cluster,
}

fn lift(e: ClusterError) -> Error {
    match e {
        ClusterError::Core(e) => e,
        e => Error::Collective(e.to_string()),
    }
}

impl Collective for ClusterCollective<'_> {
    fn allreduce_histograms(&mut self, per_worker: Vec<Vec<HistBin>>) -> sxgb_core::Result<Vec<HistBin>> {
        let sums = self
            .cluster
            .allreduce(per_worker, encode_histograms, decode_histograms, |a, b| Ok(aggregate_histograms(&[a, b])?))
            .map_err(lift)?;
        Ok(sums.into_iter().next().unwrap())
    }

    fn allgather_summaries(&mut self, per_worker: Vec<Vec<Vec<SummaryEntry>>>) -> sxgb_core::Result<Vec<Vec<Vec<SummaryEntry>>>> {
        let n = per_worker.len();
        let singles: Vec<SummarySet> = per_worker.into_iter().enumerate().map(|(w, s)| SummarySet::from([(w, s)])).collect();
        let all = self
            .cluster
            .allreduce(singles, encode_summaries, decode_summaries, |mut a, b| {
                a.extend(b);
                Ok(a)
            })
            .map_err(lift)?;
        let gathered = all.into_iter().next().unwrap();
        if gathered.len() != n {
            return Err(Error::Collective(format!("gathered {} of {n} summaries", gathered.len())));
        }
        Ok(gathered.into_values().collect())
    }
}
