//! Byte encodings of the values exchanged during training.

use std::collections::BTreeMap;

use sxgb_core::fixed::Fixed;
use sxgb_core::histogram::HistBin;
use sxgb_core::quantile::SummaryEntry;

use crate::error::{ClusterError, Result};

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.0.len() < N {
            return Err(ClusterError::Transport("truncated payload".into()));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }

    fn done(&self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ClusterError::Transport("trailing bytes".into()))
        }
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_histograms(h: &Vec<HistBin>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + h.len() * 40);
    put_u32(&mut out, h.len());
    for b in h {
        out.extend_from_slice(&b.g.0.to_le_bytes());
        out.extend_from_slice(&b.h.0.to_le_bytes());
        out.extend_from_slice(&b.count.to_le_bytes());
    }
    out
}

pub fn decode_histograms(bytes: &[u8]) -> Result<Vec<HistBin>> {
    let mut r = Reader(bytes);
    let n = r.u32()?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let g = Fixed(i128::from_le_bytes(r.take()?));
        let h = Fixed(i128::from_le_bytes(r.take()?));
        out.push(HistBin { g, h, count: i64::from_le_bytes(r.take()?) });
    }
    r.done()?;
    Ok(out)
}

/// Summaries keyed by worker, each `[feature][entry]`.
pub type SummarySet = BTreeMap<usize, Vec<Vec<SummaryEntry>>>;

pub fn encode_summaries(s: &SummarySet) -> Vec<u8> {
    let mut out = Vec::new();
    put_u32(&mut out, s.len());
    for (&w, features) in s {
        put_u32(&mut out, w);
        put_u32(&mut out, features.len());
        for f in features {
            put_u32(&mut out, f.len());
            for e in f {
                out.extend_from_slice(&e.value.to_le_bytes());
                out.extend_from_slice(&e.weight.to_le_bytes());
                out.extend_from_slice(&e.valid.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_summaries(bytes: &[u8]) -> Result<SummarySet> {
    let mut r = Reader(bytes);
    let mut out = SummarySet::new();
    for _ in 0..r.u32()? {
        let w = r.u32()?;
        let nf = r.u32()?;
        let mut features = Vec::with_capacity(nf);
        for _ in 0..nf {
            let ne = r.u32()?;
            let mut entries = Vec::with_capacity(ne);
            for _ in 0..ne {
                let value = f64::from_le_bytes(r.take()?);
                let weight = f64::from_le_bytes(r.take()?);
                entries.push(SummaryEntry { value, weight, valid: u64::from_le_bytes(r.take()?) });
            }
            features.push(entries);
        }
        out.insert(w, features);
    }
    r.done()?;
    Ok(out)
}

pub fn encode_indices(v: &Vec<u32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * v.len());
    put_u32(&mut out, v.len());
    v.iter().for_each(|j| out.extend_from_slice(&j.to_le_bytes()));
    out
}

pub fn decode_indices(bytes: &[u8]) -> Result<Vec<u32>> {
    let mut r = Reader(bytes);
    let n = r.u32()?;
    let out = (0..n).map(|_| r.take().map(u32::from_le_bytes)).collect::<Result<_>>()?;
    r.done()?;
    Ok(out)
}
