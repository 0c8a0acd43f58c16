use crate::error::{Error, Result};
use crate::spectral::graph::SYMMETRY_TOL;
use crate::tensor::Tensor;

/// Off-diagonal magnitude at which the Jacobi sweep stops.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub eigenvectors: Tensor,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U diag(λ) Uᵀ`.
    pub fn reconstruct(&self) -> Tensor {
        let u = &self.eigenvectors;
        let scaled = u
            .matmul(&Tensor::diag(&self.eigenvalues))
            .expect("square factors");
        scaled.matmul(&u.transpose().expect("matrix")).expect("square factors")
    }

    /// `max |U Uᵀ - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let u = &self.eigenvectors;
        let uut = u.matmul(&u.transpose().expect("matrix")).expect("square factors");
        uut.max_abs_diff(&Tensor::identity(self.n()))
    }
}

/// Cyclic Jacobi diagonalization of a symmetric matrix.
///
/// Sweeps every `(p, q)` pair in row order until all off-diagonal entries are
/// below [`OFF_DIAGONAL_TOL`]; gives up after `100 n²` sweeps.
pub fn eigendecompose(s: &Tensor) -> Result<SpectralDecomposition> {
    let (n, c) = s.dims2()?;
    if n != c {
        return Err(Error::InvalidShape {
            shape: s.shape().to_vec(),
            reason: "expected a square matrix".into(),
        });
    }
    let asym = s.asymmetry()?;
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }

    // symmetrize so rounding noise below the tolerance does not bias the result
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (s.get(i, j) + s.get(j, i));
        }
    }
    let mut v = Tensor::identity(n).into_data();

    let max_sweeps = 100 * n * n;
    let mut converged = off_diagonal_max(&a, n) < OFF_DIAGONAL_TOL;
    let mut sweeps = 0;
    while !converged && sweeps < max_sweeps {
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                rotate(&mut a, &mut v, n, p, q, cs, sn);
            }
        }
        sweeps += 1;
        converged = off_diagonal_max(&a, n) < OFF_DIAGONAL_TOL;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vecs[r * n + new_col] = v[r * n + old_col];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: Tensor::matrix(n, n, vecs)?,
    })
}

/// `A <- Jᵀ A J`, `V <- V J` for the plane rotation in `(p, q)`.
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        let (akp, akq) = (a[k * n + p], a[k * n + q]);
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[p * n + k], a[q * n + k]);
        a[p * n + k] = c * apk - s * aqk;
        a[q * n + k] = s * apk + c * aqk;
    }
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for k in 0..n {
        let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

fn off_diagonal_max(a: &[f64], n: usize) -> f64 {
    let mut m = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m = m.max(a[i * n + j].abs());
            }
        }
    }
    m
}
