use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Symmetry tolerance used when validating matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Undirected graph over modality nodes, plus a static edge mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityGraph {
    adjacency: Tensor,
    mask: Tensor,
}

impl ModalityGraph {
    /// Validates a 0/1 symmetric adjacency with zero diagonal. The mask
    /// defaults to all-ones.
    pub fn from_adjacency(adjacency: Tensor) -> Result<Self> {
        let (r, c) = adjacency.dims2()?;
        if r != c {
            return Err(Error::InvalidShape {
                shape: adjacency.shape().to_vec(),
                reason: "adjacency must be square".into(),
            });
        }
        for i in 0..r {
            if adjacency.get(i, i) != 0.0 {
                return Err(Error::invalid(format!("adjacency has a self-loop at node {i}")));
            }
            for j in 0..r {
                let v = adjacency.get(i, j);
                if v != 0.0 && v != 1.0 {
                    return Err(Error::invalid(format!("adjacency[{i}][{j}] = {v} is not 0/1")));
                }
                if v != adjacency.get(j, i) {
                    return Err(Error::NotSymmetric(1.0));
                }
            }
        }
        let mask = Tensor::full(&[r, r], 1.0);
        Ok(ModalityGraph { adjacency, mask })
    }

    /// Replaces the mask. It must match the adjacency shape, be nonnegative and
    /// symmetric.
    pub fn with_mask(mut self, mask: Tensor) -> Result<Self> {
        if mask.shape() != self.adjacency.shape() {
            return Err(Error::ShapeMismatch {
                op: "with_mask",
                left: self.adjacency.shape().to_vec(),
                right: mask.shape().to_vec(),
            });
        }
        if mask.data().iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid("mask entries must be finite and nonnegative"));
        }
        let asym = mask.asymmetry()?;
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        self.mask = mask;
        Ok(self)
    }

    pub fn complete(n: usize) -> Self {
        Self::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// Ring over `n >= 3` nodes (2-regular).
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 nodes");
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    /// G(n, p) with a seeded generator; edges are drawn in row-major order of
    /// the upper triangle.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, edges)
    }

    fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        assert!(n >= 1, "graph needs at least one node");
        let mut a = Tensor::zeros(&[n, n]);
        for (i, j) in edges {
            if i != j {
                a.set(i, j, 1.0);
                a.set(j, i, 1.0);
            }
        }
        let mask = Tensor::full(&[n, n], 1.0);
        ModalityGraph { adjacency: a, mask }
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Tensor {
        &self.adjacency
    }

    pub fn mask(&self) -> &Tensor {
        &self.mask
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .map(|i| self.adjacency.row(i).iter().filter(|&&v| v != 0.0).count())
            .collect()
    }

    /// `Some(p)` when every node has degree `p`.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.degrees();
        let first = *d.first()?;
        d.iter().all(|&x| x == first).then_some(first)
    }

    /// `Ã ⊙ M`.
    pub fn masked_adjacency(&self) -> Tensor {
        normalize_adjacency(self)
            .hadamard(&self.mask)
            .expect("mask shape validated at construction")
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalize_adjacency(g: &ModalityGraph) -> Tensor {
    let n = g.n_nodes();
    let a = g.adjacency();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / (a.row(i).iter().sum::<f64>() + 1.0).sqrt())
        .collect();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let aij = a.get(i, j) + if i == j { 1.0 } else { 0.0 };
            out.set(i, j, inv_sqrt[i] * aij * inv_sqrt[j]);
        }
    }
    out
}

/// `I - Ã`. Rejects asymmetric input.
pub fn laplacian(normalized: &Tensor) -> Result<Tensor> {
    let asym = normalized.asymmetry()?;
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    Tensor::identity(normalized.rows()).sub(normalized)
}

/// `I - D^{-1/2} A D^{-1/2}` of the graph without self-loops; isolated
/// nodes get a zero row. Its spectrum lies in `[0, 2]` and is the frequency
/// axis of the regular-graph GCN profile.
pub fn normalized_laplacian(g: &ModalityGraph) -> Tensor {
    let n = g.n_nodes();
    let a = g.adjacency();
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            if i == j && deg[i] > 0.0 {
                v = 1.0;
            }
            if deg[i] > 0.0 && deg[j] > 0.0 {
                v -= a.get(i, j) / (deg[i] * deg[j]).sqrt();
            }
            out.set(i, j, v);
        }
    }
    out
}
