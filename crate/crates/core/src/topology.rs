//! Directed communication graph with `n` followers and one leader.
//!
//! Agents are indexed `0..=n`; index `n` is the leader. `a[i][j] = 1` means
//! follower `i` receives (one bit per step) from agent `j`, i.e. `j ∈ N_i`.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Follower `i` observes agent `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub observer: usize,
    pub observed: usize,
}

/// Edges ordered by ascending observer, then ascending observed agent.
///
/// This ordering fixes the layout of the estimation error vector and of the
/// `M` and `W` selection matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeIndex {
    edges: Vec<Edge>,
    /// `offsets[i]..offsets[i + 1]` are the positions of follower `i`'s edges.
    offsets: Vec<usize>,
}

impl EdgeIndex {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn get(&self, pos: usize) -> Option<Edge> {
        self.edges.get(pos).copied()
    }

    /// Position of `(observer, observed)` in the ordering.
    pub fn position(&self, observer: usize, observed: usize) -> Option<usize> {
        let range = self.range_of(observer)?;
        self.edges[range.clone()]
            .binary_search_by_key(&observed, |e| e.observed)
            .ok()
            .map(|p| range.start + p)
    }

    /// Positions of follower `i`'s edges.
    pub fn range_of(&self, observer: usize) -> Option<std::ops::Range<usize>> {
        if observer + 1 >= self.offsets.len() {
            return None;
        }
        Some(self.offsets[observer]..self.offsets[observer + 1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n_followers: usize,
    adjacency: Vec<Vec<u8>>,
    neighbors: Vec<Vec<usize>>,
    edge_index: EdgeIndex,
}

impl Topology {
    /// Validates a `(n+1) x (n+1)` 0/1 adjacency matrix whose last row is the leader.
    pub fn from_adjacency(adjacency: Vec<Vec<u8>>) -> Result<Self> {
        let size = adjacency.len();
        if size < 2 {
            return Err(Error::config(
                "topology.adjacency",
                "need at least one follower and the leader (2x2 or larger)",
            ));
        }
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != size {
                return Err(Error::config(
                    format!("topology.adjacency[{i}]"),
                    format!("row has {} entries, expected {size}", row.len()),
                ));
            }
            for (j, &a) in row.iter().enumerate() {
                if a > 1 {
                    return Err(Error::config(
                        format!("topology.adjacency[{i}][{j}]"),
                        format!("entry {a} is not 0 or 1"),
                    ));
                }
            }
            if row[i] != 0 {
                return Err(Error::config(
                    format!("topology.adjacency[{i}][{i}]"),
                    "self-loops are not allowed",
                ));
            }
        }
        let n = size - 1;
        if let Some(j) = adjacency[n].iter().position(|&a| a != 0) {
            return Err(Error::config(
                format!("topology.adjacency[{n}][{j}]"),
                "leader row must be zero: the leader cannot receive feedback from followers",
            ));
        }

        let neighbors: Vec<Vec<usize>> = adjacency
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &a)| a == 1).map(|(j, _)| j).collect())
            .collect();
        let mut edges = Vec::new();
        let mut offsets = vec![0];
        for (i, nbrs) in neighbors.iter().enumerate().take(n) {
            edges.extend(nbrs.iter().map(|&j| Edge { observer: i, observed: j }));
            offsets.push(edges.len());
        }
        Ok(Self { n_followers: n, adjacency, neighbors, edge_index: EdgeIndex { edges, offsets } })
    }

    /// Builds the adjacency from follower neighbor lists (`neighbors[i]` for follower `i`).
    pub fn from_neighbor_lists(neighbors: &[Vec<usize>]) -> Result<Self> {
        let n = neighbors.len();
        let mut adjacency = vec![vec![0u8; n + 1]; n + 1];
        for (i, nbrs) in neighbors.iter().enumerate() {
            for &j in nbrs {
                if j > n {
                    return Err(Error::config(
                        format!("topology.neighbors[{i}]"),
                        format!("agent {j} out of range 0..={n}"),
                    ));
                }
                adjacency[i][j] = 1;
            }
        }
        Self::from_adjacency(adjacency)
    }

    pub fn n_followers(&self) -> usize {
        self.n_followers
    }

    pub fn n_agents(&self) -> usize {
        self.n_followers + 1
    }

    pub fn leader(&self) -> usize {
        self.n_followers
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edge_index(&self) -> &EdgeIndex {
        &self.edge_index
    }

    /// Integer Laplacian `D - A`; every row sums to exactly zero.
    pub fn laplacian_int(&self) -> Vec<Vec<i64>> {
        let size = self.n_agents();
        (0..size)
            .map(|i| {
                (0..size)
                    .map(|j| {
                        let d = if i == j { self.degree(i) as i64 } else { 0 };
                        d - self.adjacency[i][j] as i64
                    })
                    .collect()
            })
            .collect()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let l = self.laplacian_int();
        let size = self.n_agents();
        DMatrix::from_fn(size, size, |i, j| l[i][j] as f64)
    }

    /// True iff every follower is reachable from the leader along `j -> i` links.
    pub fn has_spanning_tree_rooted_at_leader(&self) -> bool {
        let size = self.n_agents();
        let mut seen = vec![false; size];
        let mut queue = VecDeque::from([self.leader()]);
        seen[self.leader()] = true;
        while let Some(j) = queue.pop_front() {
            for i in 0..self.n_followers {
                if self.adjacency[i][j] == 1 && !seen[i] {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// `d* = max_i d_i` over followers.
    pub fn max_degree(&self) -> usize {
        (0..self.n_followers).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// `(n+1) x E` matrix whose column for edge `(i, j)` is `e_i`.
    pub fn build_m(&self, idx: &EdgeIndex) -> Result<DMatrix<f64>> {
        self.check_index(idx)?;
        let mut m = DMatrix::zeros(self.n_agents(), idx.len());
        for (c, e) in idx.edges().iter().enumerate() {
            m[(e.observer, c)] = 1.0;
        }
        Ok(m)
    }

    /// `E x (n+1)` matrix whose row for edge `(i, j)` is `e_j^T`.
    pub fn build_w(&self, idx: &EdgeIndex) -> Result<DMatrix<f64>> {
        self.check_index(idx)?;
        let mut w = DMatrix::zeros(idx.len(), self.n_agents());
        for (r, e) in idx.edges().iter().enumerate() {
            w[(r, e.observed)] = 1.0;
        }
        Ok(w)
    }

    fn check_index(&self, idx: &EdgeIndex) -> Result<()> {
        if idx != &self.edge_index {
            return Err(Error::config(
                "topology",
                "edge index was not derived from this topology",
            ));
        }
        Ok(())
    }
}
