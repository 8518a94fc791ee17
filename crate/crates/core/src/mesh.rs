//! Spatial meshes for collocation.

use crate::error::{Error, Result};

/// Default cap on the number of mesh nodes.
pub const DEFAULT_MAX_NODES: usize = 20_000;

/// A strictly increasing grid of collocation nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    max_nodes: usize,
}

impl Mesh {
    pub fn new(nodes: Vec<f64>, max_nodes: usize) -> Result<Self> {
        if nodes.len() < 5 {
            return Err(Error::InvalidMesh(format!(
                "need at least 5 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.len() > max_nodes {
            return Err(Error::MeshOverflow {
                needed: nodes.len(),
                cap: max_nodes,
            });
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidMesh(format!(
                    "nodes must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMesh("non-finite node".into()));
        }
        Ok(Mesh { nodes, max_nodes })
    }

    /// Uniform mesh of `n` nodes on `[a, b]`.
    pub fn uniform(a: f64, b: f64, n: usize, max_nodes: usize) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidMesh(format!("degenerate interval [{a}, {b}]")));
        }
        let nodes = (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect();
        Mesh::new(nodes, max_nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_nodes(&self) -> usize {
        self.max_nodes
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_meshes() {
        assert!(Mesh::new(vec![0.0, 1.0, 2.0], 100).is_err()); // too short
        assert!(Mesh::new(vec![0.0, 1.0, 1.0, 2.0, 3.0], 100).is_err()); // not increasing
        assert!(matches!(
            Mesh::new((0..10).map(|i| i as f64).collect(), 8),
            Err(Error::MeshOverflow { .. })
        ));
    }

    #[test]
    fn uniform_covers_interval() {
        let m = Mesh::uniform(0.0, 2.0, 9, 100).unwrap();
        assert_eq!(m.len(), 9);
        assert_eq!(m.first(), 0.0);
        assert_eq!(m.last(), 2.0);
    }
}
