use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::CommsError;

/// Directed communication graph. `a_ij = 1` iff robot `i` receives from
/// robot `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommGraph {
    n: usize,
    adjacency: Vec<Vec<bool>>,
}

impl CommGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i).and_then(|row| row.get(j)).copied().unwrap_or(false)
    }

    /// Robots that `i` receives from, in index order.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().enumerate().filter(|(_, a)| **a).map(|(j, _)| j)
    }

    /// `Σ_j a_ij`
    pub fn in_degree(&self, i: usize) -> usize {
        self.adjacency[i].iter().filter(|a| **a).count()
    }

    /// `Σ_j a_ji`: how many robots listen to `i`.
    pub fn out_degree(&self, i: usize) -> usize {
        self.adjacency.iter().filter(|row| row[i]).count()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.adjacency[i].iter().map(|a| if *a { 1.0 } else { 0.0 }).collect()
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if self.adjacency[i][j] { 1.0 } else { 0.0 })
    }

    pub fn degree(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if i == j { self.in_degree(i) as f64 } else { 0.0 })
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        self.degree() - self.adjacency()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.in_degree(i)).sum()
    }

    pub fn complete(n: usize) -> Result<Self, CommsError> {
        build_graph(&(0..n).map(|i| (0..n).map(|j| u8::from(i != j)).collect()).collect::<Vec<_>>())
    }

    /// Each robot receives from its predecessor.
    pub fn directed_ring(n: usize) -> Result<Self, CommsError> {
        Self::circulant(n, &[1])
    }

    /// Robot `i` receives from `i - s (mod n)` for every shift `s`.
    pub fn circulant(n: usize, shifts: &[usize]) -> Result<Self, CommsError> {
        let mut rows = vec![vec![0u8; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            for s in shifts {
                if n > 0 && s % n != 0 {
                    row[(i + n - s % n) % n] = 1;
                }
            }
        }
        build_graph(&rows)
    }
}

/// Validates an adjacency matrix and checks that every robot has at least
/// one in-neighbour.
pub fn build_graph(adjacency: &[Vec<u8>]) -> Result<CommGraph, CommsError> {
    let n = adjacency.len();
    if n == 0 {
        return Err(CommsError::EmptyGraph);
    }
    let mut rows = Vec::with_capacity(n);
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != n {
            return Err(CommsError::NotSquare { row: i, len: row.len(), n });
        }
        let mut out = Vec::with_capacity(n);
        for (j, a) in row.iter().enumerate() {
            match a {
                0 => out.push(false),
                1 if i == j => return Err(CommsError::SelfLoop(i)),
                1 => out.push(true),
                other => return Err(CommsError::NonBinary { i, j, value: *other }),
            }
        }
        rows.push(out);
    }
    let graph = CommGraph { n, adjacency: rows };
    if let Some(isolated) = (0..n).find(|&i| graph.in_degree(i) == 0) {
        return Err(CommsError::IsolatedRobot(isolated));
    }
    Ok(graph)
}

/// Topology as written in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Adjacency { matrix: Vec<Vec<u8>> },
    Complete,
    DirectedRing,
    Circulant { shifts: Vec<usize> },
}

impl GraphSpec {
    pub fn build(&self, n: usize) -> Result<CommGraph, CommsError> {
        let graph = match self {
            GraphSpec::Adjacency { matrix } => build_graph(matrix)?,
            GraphSpec::Complete => CommGraph::complete(n)?,
            GraphSpec::DirectedRing => CommGraph::directed_ring(n)?,
            GraphSpec::Circulant { shifts } => CommGraph::circulant(n, shifts)?,
        };
        if graph.n() != n {
            return Err(CommsError::SizeMismatch { expected: n, got: graph.n() });
        }
        Ok(graph)
    }
}
