//! Numeric versus analytic frequency responses as a CSV table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    combined_kernel_coeffs, eigendecompose, eval_poly, frequency_response, gcn_profile, high_kernel_coeffs,
    laplacian, low_kernel_coeffs, normalize_adjacency, normalized_laplacian, poly_kernel,
    quoted_combined_response, ModalityGraph,
};

pub const MAX_NODES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum GraphFamily {
    Complete,
    Cycle,
    Path,
    ErdosRenyi { p: f64, seed: u64 },
}

impl GraphFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GraphFamily::Complete => "complete",
            GraphFamily::Cycle => "cycle",
            GraphFamily::Path => "path",
            GraphFamily::ErdosRenyi { .. } => "erdos_renyi",
        }
    }

    /// `complete`, `cycle`, `path` or `erdos_renyi` (which needs `p`).
    pub fn parse(name: &str, p: Option<f64>, seed: u64) -> Result<Self> {
        match name {
            "complete" => Ok(GraphFamily::Complete),
            "cycle" => Ok(GraphFamily::Cycle),
            "path" => Ok(GraphFamily::Path),
            "erdos_renyi" => {
                let p = p.ok_or_else(|| Error::Config("erdos_renyi needs an edge probability".into()))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
                }
                Ok(GraphFamily::ErdosRenyi { p, seed })
            }
            other => Err(Error::Config(format!("unknown graph family {other:?}"))),
        }
    }

    pub fn build(&self, n: usize) -> Result<ModalityGraph> {
        if n == 0 || n > MAX_NODES {
            return Err(Error::Config(format!("graph size {n} outside 1..={MAX_NODES}")));
        }
        Ok(match *self {
            GraphFamily::Complete => ModalityGraph::complete(n),
            GraphFamily::Cycle => ModalityGraph::cycle(n),
            GraphFamily::Path => ModalityGraph::path(n),
            GraphFamily::ErdosRenyi { p, seed } => ModalityGraph::erdos_renyi(n, p, seed),
        })
    }
}

/// Kernels the table can report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKernel {
    /// `I`, response 1.
    Identity,
    /// `Ã`, response `1 - λ`.
    Adjacency,
    /// `Ã` in the self-loop-free Laplacian basis against `1 - p/(p+1) λ`;
    /// regular graphs only.
    GcnProfile,
    /// Two-layer low-frequency kernel.
    Low,
    /// Two-layer high-frequency kernel.
    High,
    /// `φ Low + (1-φ) High`.
    Combined,
    /// `Combined` against the closed form `2λ² - φλ + (1+φ)`; the errors
    /// show how far that form is from the kernel.
    CombinedQuoted,
}

impl SpectrumKernel {
    pub const ALL: [SpectrumKernel; 7] = [
        SpectrumKernel::Identity,
        SpectrumKernel::Adjacency,
        SpectrumKernel::GcnProfile,
        SpectrumKernel::Low,
        SpectrumKernel::High,
        SpectrumKernel::Combined,
        SpectrumKernel::CombinedQuoted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpectrumKernel::Identity => "identity",
            SpectrumKernel::Adjacency => "adjacency",
            SpectrumKernel::GcnProfile => "gcn_profile",
            SpectrumKernel::Low => "low",
            SpectrumKernel::High => "high",
            SpectrumKernel::Combined => "combined",
            SpectrumKernel::CombinedQuoted => "combined_quoted",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown kernel {name:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub family: String,
    pub n: usize,
    pub lambda: f64,
    pub kernel: String,
    pub numeric_response: f64,
    pub analytic_response: f64,
    pub abs_error: f64,
}

/// One row per (kernel, eigenvalue). `GcnProfile` is skipped on graphs that
/// are not regular.
pub fn analyze_spectrum(
    family: GraphFamily,
    n: usize,
    kernels: &[SpectrumKernel],
    phi: f64,
    a: f64,
) -> Result<Vec<SpectrumRow>> {
    for (name, v) in [("phi", phi), ("a", a)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")));
        }
    }
    let g = family.build(n)?;
    let adj = normalize_adjacency(&g);
    let decomp = eigendecompose(&laplacian(&adj)?)?;
    let mut rows = Vec::new();
    for &k in kernels {
        let (coeffs, analytic): (Vec<f64>, Box<dyn Fn(f64) -> f64>) = match k {
            SpectrumKernel::Identity => (vec![1.0], Box::new(|_| 1.0)),
            SpectrumKernel::Adjacency => (vec![0.0, 1.0], Box::new(|l| 1.0 - l)),
            SpectrumKernel::Low => {
                let c = low_kernel_coeffs(phi).to_vec();
                let cc = c.clone();
                (c, Box::new(move |l| eval_poly(&cc, 1.0 - l)))
            }
            SpectrumKernel::High => {
                let c = high_kernel_coeffs(phi).to_vec();
                let cc = c.clone();
                (c, Box::new(move |l| eval_poly(&cc, 1.0 - l)))
            }
            SpectrumKernel::Combined => {
                let c = combined_kernel_coeffs(phi).to_vec();
                let cc = c.clone();
                (c, Box::new(move |l| eval_poly(&cc, 1.0 - l)))
            }
            SpectrumKernel::CombinedQuoted => {
                (combined_kernel_coeffs(phi).to_vec(), Box::new(move |l| quoted_combined_response(l, phi)))
            }
            SpectrumKernel::GcnProfile => {
                let Some(p) = g.regular_degree() else { continue };
                let plain = eigendecompose(&normalized_laplacian(&g))?;
                let r = frequency_response(&adj, &plain)?;
                for (lambda, numeric) in r.pairs() {
                    let analytic = gcn_profile(p, lambda);
                    rows.push(row(family, n, k, lambda, numeric, analytic));
                }
                continue;
            }
        };
        let r = frequency_response(&poly_kernel(&adj, &coeffs)?, &decomp)?;
        for (lambda, numeric) in r.pairs() {
            rows.push(row(family, n, k, lambda, numeric, analytic(lambda)));
        }
    }
    Ok(rows)
}

fn row(family: GraphFamily, n: usize, k: SpectrumKernel, lambda: f64, numeric: f64, analytic: f64) -> SpectrumRow {
    SpectrumRow {
        family: family.name().to_string(),
        n,
        lambda,
        kernel: k.name().to_string(),
        numeric_response: numeric,
        analytic_response: analytic,
        abs_error: (numeric - analytic).abs(),
    }
}

pub fn spectrum_csv(rows: &[SpectrumRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)
        .map_err(|e| Error::invalid(e.to_string()))
}

pub fn parse_spectrum_csv(text: &str) -> Result<Vec<SpectrumRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
