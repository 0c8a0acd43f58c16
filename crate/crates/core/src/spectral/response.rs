use crate::error::{Error, Result};
use crate::spectral::eigen::SpectralDecomposition;
use crate::spectral::graph::SYMMETRY_TOL;
use crate::tensor::Tensor;

/// Per-eigenpair gain of a kernel, `diag(Uᵀ C U)`.
#[derive(Clone, Debug)]
pub struct FrequencyResponse {
    pub eigenvalues: Vec<f64>,
    pub response: Vec<f64>,
    /// Largest off-diagonal magnitude of `Uᵀ C U`; near zero when the kernel
    /// is diagonal in the analysed basis.
    pub off_diagonal: f64,
}

impl FrequencyResponse {
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.eigenvalues.iter().copied().zip(self.response.iter().copied())
    }
}

pub fn frequency_response(kernel: &Tensor, decomp: &SpectralDecomposition) -> Result<FrequencyResponse> {
    let asym = kernel.asymmetry()?;
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let u = &decomp.eigenvectors;
    if kernel.shape() != u.shape() {
        return Err(Error::ShapeMismatch {
            op: "frequency_response",
            left: kernel.shape().to_vec(),
            right: u.shape().to_vec(),
        });
    }
    let projected = u.transpose()?.matmul(kernel)?.matmul(u)?;
    let n = decomp.n();
    let mut response = Vec::with_capacity(n);
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                response.push(projected.get(i, i));
            } else {
                off = off.max(projected.get(i, j).abs());
            }
        }
    }
    Ok(FrequencyResponse {
        eigenvalues: decomp.eigenvalues.clone(),
        response,
        off_diagonal: off,
    })
}

/// GCN frequency profile on a `p`-regular graph, `1 - p/(p+1) λ`, where `λ`
/// is an eigenvalue of the self-loop-free normalized Laplacian.
pub fn gcn_profile(p: usize, lambda: f64) -> f64 {
    let p = p as f64;
    1.0 - p / (p + 1.0) * lambda
}

/// Polynomial `Σ cᵢ xⁱ` with coefficients in ascending powers.
pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `Σ cᵢ Ãⁱ`.
pub fn poly_kernel(adjacency: &Tensor, coeffs: &[f64]) -> Result<Tensor> {
    let n = adjacency.dims2()?.0;
    let mut out = Tensor::zeros(&[n, n]);
    let mut power = Tensor::identity(n);
    for (i, &c) in coeffs.iter().enumerate() {
        if i > 0 {
            power = power.matmul(adjacency)?;
        }
        out = out.add(&power.scale(c))?;
    }
    Ok(out)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")));
    }
    Ok(())
}

/// Coefficients (ascending powers of `Ã`) of the activation-free two-layer
/// low-frequency kernel `Ã² - (1-φ)Ã`.
pub fn low_kernel_coeffs(phi: f64) -> [f64; 3] {
    [0.0, -(1.0 - phi), 1.0]
}

/// Coefficients of the two-layer high-frequency kernel `Ã² - φÃ + (1-φ)I`.
pub fn high_kernel_coeffs(phi: f64) -> [f64; 3] {
    [1.0 - phi, -phi, 1.0]
}

/// Coefficients of `φ K_low + (1-φ) K_high`.
pub fn combined_kernel_coeffs(phi: f64) -> [f64; 3] {
    let (l, h) = (low_kernel_coeffs(phi), high_kernel_coeffs(phi));
    [0, 1, 2].map(|i| phi * l[i] + (1.0 - phi) * h[i])
}

/// `(1-λ)² - (1-φ)(1-λ)`.
pub fn low_kernel_response(lambda: f64, phi: f64) -> f64 {
    eval_poly(&low_kernel_coeffs(phi), 1.0 - lambda)
}

/// `(1-λ)² - φ(1-λ) + (1-φ)`.
pub fn high_kernel_response(lambda: f64, phi: f64) -> f64 {
    eval_poly(&high_kernel_coeffs(phi), 1.0 - lambda)
}

pub fn combined_kernel_response(lambda: f64, phi: f64) -> f64 {
    eval_poly(&combined_kernel_coeffs(phi), 1.0 - lambda)
}

/// Closed form `2λ² - φλ + (1+φ)` quoted for the combined two-layer response.
///
/// It is not `φ F_low + (1-φ) F_high` of the kernels above; it is kept so the
/// gap can be measured.
pub fn quoted_combined_response(lambda: f64, phi: f64) -> f64 {
    2.0 * lambda * lambda - phi * lambda + (1.0 + phi)
}

/// The two-layer kernels of the filter bank in the linear regime.
#[derive(Clone, Debug)]
pub struct TheoremKernels {
    pub low: Tensor,
    pub high: Tensor,
    pub combined: Tensor,
}

/// Builds the activation-free two-layer kernels from the normalized
/// adjacency. `a` is validated but does not enter these expansions; see
/// [`block_kernel`] for the kernel that does depend on it.
pub fn mffbm_kernels(adjacency: &Tensor, phi: f64, a: f64) -> Result<TheoremKernels> {
    check_unit("phi", phi)?;
    check_unit("a", a)?;
    let low = poly_kernel(adjacency, &low_kernel_coeffs(phi))?;
    let high = poly_kernel(adjacency, &high_kernel_coeffs(phi))?;
    let combined = low.scale(phi).add(&high.scale(1.0 - phi))?;
    Ok(TheoremKernels { low, high, combined })
}

/// Sign convention of the high-pass kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HighPassSign {
    /// `aÃ - (1-a)I`, the form the layer computes.
    AsComputed,
    /// `-aÃ + (1-a)I`.
    Negated,
}

pub fn highpass_kernel(adjacency: &Tensor, a: f64, sign: HighPassSign) -> Result<Tensor> {
    check_unit("a", a)?;
    let k = poly_kernel(adjacency, &[-(1.0 - a), a])?;
    Ok(match sign {
        HighPassSign::AsComputed => k,
        HighPassSign::Negated => k.scale(-1.0),
    })
}

/// Single filter-bank block with identity weights and no activation:
/// `φÃ + (1-φ)(aÃ - (1-a)I)`.
pub fn block_kernel(adjacency: &Tensor, phi: f64, a: f64) -> Result<Tensor> {
    check_unit("phi", phi)?;
    check_unit("a", a)?;
    poly_kernel(adjacency, &block_kernel_coeffs(phi, a))
}

pub fn block_kernel_coeffs(phi: f64, a: f64) -> [f64; 2] {
    [-(1.0 - phi) * (1.0 - a), phi + (1.0 - phi) * a]
}
