//! Tree of enclave nodes rooted at the master, node 0.

use crate::error::{ClusterError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl Topology {
    /// `parents[0]` must be `None`; every other node names its parent.
    pub fn new(parents: Vec<Option<usize>>) -> Result<Self> {
        let n = parents.len();
        if n == 0 || parents[0].is_some() {
            return Err(ClusterError::Topology("node 0 must be the root".into()));
        }
        let mut children = vec![Vec::new(); n];
        for (i, p) in parents.iter().enumerate().skip(1) {
            match *p {
                Some(p) if p < n && p != i => children[p].push(i),
                _ => return Err(ClusterError::Topology(format!("node {i} has no valid parent"))),
            }
        }
        let t = Topology { parents, children };
        if t.bfs().len() != n {
            return Err(ClusterError::Topology("parent map has a cycle".into()));
        }
        Ok(t)
    }

    /// Node `i > 0` hangs under `(i - 1) / 2`.
    pub fn binary(n: usize) -> Self {
        Topology::new((0..n).map(|i| i.checked_sub(1).map(|j| j / 2)).collect()).expect("binary tree")
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parents[node]
    }

    /// Ascending node id.
    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents.iter().enumerate().filter_map(|(c, p)| p.map(|p| (p, c)))
    }

    /// Root first; children in ascending id order.
    pub fn bfs(&self) -> Vec<usize> {
        let mut order = vec![0];
        let mut i = 0;
        while i < order.len() && order.len() <= self.len() {
            order.extend_from_slice(&self.children[order[i]]);
            i += 1;
        }
        order
    }

    /// `"-,0,0,1"` style parent list.
    pub fn parse(text: &str) -> Result<Self> {
        let parents = text
            .split(',')
            .map(|s| match s.trim() {
                "-" => Ok(None),
                s => s.parse().map(Some).map_err(|_| ClusterError::Topology(format!("bad parent {s:?}"))),
            })
            .collect::<Result<_>>()?;
        Topology::new(parents)
    }
}
