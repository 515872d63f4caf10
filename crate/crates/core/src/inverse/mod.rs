//! Spectral data sets, the stability metrics between them, conversion from
//! spectra to weight numbers and the reconstruction of the potentials.

mod convert;
mod reconstruct;
mod stability;

pub use convert::{hybrid_last_weights, ip1_to_ip2, ip1_to_ip2_with_hint};
pub use reconstruct::{reconstruct, reconstruct_ip1, IterationRecord, ReconstructConfig, Reconstruction, StopReason};
pub use stability::{stability_experiment, PairRow, StabilityConfig, StabilityReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::rho_of;
use crate::spectral::{AuxSpectrum, Spectrum, WeightMatrix};

/// Eigenvalues and weight numbers, indexed `(n − 1)m + (k − 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDataIP2 {
    pub edges: usize,
    pub shells: usize,
    pub lambda: Vec<f64>,
    /// `beta[(n − 1)m + k − 1][j − 1]`.
    pub beta: Vec<Vec<f64>>,
}

impl SpectralDataIP2 {
    pub fn from_forward(spectrum: &Spectrum, weights: &WeightMatrix) -> Self {
        SpectralDataIP2 {
            edges: spectrum.edges,
            shells: spectrum.shells,
            lambda: spectrum.eigenvalues.iter().map(|e| e.lambda).collect(),
            beta: weights.beta.clone(),
        }
    }

    pub fn lambda_at(&self, n: usize, k: usize) -> f64 {
        self.lambda[(n - 1) * self.edges + k - 1]
    }

    pub fn beta_at(&self, n: usize, k: usize, j: usize) -> f64 {
        self.beta[(n - 1) * self.edges + k - 1][j - 1]
    }

    /// Keeps only the first `shells` shells.
    pub fn truncated(&self, shells: usize) -> Result<Self> {
        if shells == 0 || shells > self.shells {
            return Err(Error::InvalidInput(format!(
                "cannot truncate {} shells to {shells}",
                self.shells
            )));
        }
        let len = shells * self.edges;
        Ok(SpectralDataIP2 {
            edges: self.edges,
            shells,
            lambda: self.lambda[..len].to_vec(),
            beta: self.beta[..len].to_vec(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.edges * self.shells;
        if self.edges < 2 || self.shells == 0 {
            return Err(Error::InvalidInput("spectral data needs m >= 2 and N >= 1".into()));
        }
        if self.lambda.len() != len || self.beta.len() != len || self.beta.iter().any(|b| b.len() != self.edges) {
            return Err(Error::InvalidInput(format!(
                "spectral data shape does not match m = {}, N = {}",
                self.edges, self.shells
            )));
        }
        if self
            .lambda
            .iter()
            .chain(self.beta.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidInput("spectral data contains non-finite values".into()));
        }
        if let Some(b) = self.beta.iter().flatten().find(|&&b| b < -1e-10) {
            return Err(Error::InvalidInput(format!("negative weight number {b}")));
        }
        for k in 1..=self.edges {
            for n in 2..=self.shells {
                if self.lambda_at(n, k) < self.lambda_at(n - 1, k) {
                    return Err(Error::InvalidInput(format!("branch {k} is not increasing at n = {n}")));
                }
            }
        }
        Ok(())
    }
}

/// The main spectrum and the spectra `Λ_j`, `j = 1..m−1`, same indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDataIP1 {
    pub edges: usize,
    pub shells: usize,
    pub main: Vec<f64>,
    pub aux: Vec<Vec<f64>>,
}

impl SpectralDataIP1 {
    pub fn from_forward(spectrum: &Spectrum, aux: &[AuxSpectrum]) -> Self {
        SpectralDataIP1 {
            edges: spectrum.edges,
            shells: spectrum.shells,
            main: spectrum.eigenvalues.iter().map(|e| e.lambda).collect(),
            aux: aux
                .iter()
                .map(|a| a.spectrum.eigenvalues.iter().map(|e| e.lambda).collect())
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.edges * self.shells;
        if self.edges < 2 || self.shells == 0 || self.main.len() != len {
            return Err(Error::InvalidInput("main spectrum does not match m·N".into()));
        }
        if self.aux.len() != self.edges - 1 || self.aux.iter().any(|a| a.len() != len) {
            return Err(Error::InvalidInput(
                "expected m − 1 auxiliary spectra of m·N values".into(),
            ));
        }
        if self
            .main
            .iter()
            .chain(self.aux.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidInput("spectra contain non-finite values".into()));
        }
        Ok(())
    }
}

/// Truncated distances between two spectral data sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMetrics {
    pub shells: usize,
    /// `(Σ|n Δρ_nk|² + Σ|n Δθ_nkj|²)^{1/2}` for spectra data.
    pub delta: Option<f64>,
    /// `(Σ (n δ_nk)²)^{1/2}`, `δ_nk = |Δρ_nk| + n^{−2} Σ_j |Δβ_nkj|`.
    pub delta_tilde: Option<f64>,
    /// Squared contribution of each shell to the reported metric.
    pub per_n: Vec<f64>,
}

fn rho_gap(a: f64, b: f64) -> f64 {
    (rho_of(Complex64::new(a, 0.0)) - rho_of(Complex64::new(b, 0.0))).norm()
}

/// `δ̃` between two weight-number data sets.
///
/// ```
/// use stargraph::inverse::{metrics_ip2, SpectralDataIP2};
///
/// let a = SpectralDataIP2 { edges: 2, shells: 1, lambda: vec![1.0, 0.25], beta: vec![vec![0.1, 0.1]; 2] };
/// let mut b = a.clone();
/// b.beta[0][0] += 1e-2;
/// let d = metrics_ip2(&a, &b).unwrap();
/// assert!((d.delta_tilde.unwrap() - 1e-2).abs() < 1e-15);
/// ```
pub fn metrics_ip2(a: &SpectralDataIP2, b: &SpectralDataIP2) -> Result<StabilityMetrics> {
    if a.edges != b.edges || a.shells != b.shells {
        return Err(Error::InvalidInput("spectral data sets have different shapes".into()));
    }
    a.validate()?;
    b.validate()?;
    let m = a.edges;
    let per_n: Vec<f64> = (1..=a.shells)
        .map(|n| {
            let nf = n as f64;
            (1..=m)
                .map(|k| {
                    let dbeta: f64 = (1..=m).map(|j| (a.beta_at(n, k, j) - b.beta_at(n, k, j)).abs()).sum();
                    let d = rho_gap(a.lambda_at(n, k), b.lambda_at(n, k)) + dbeta / (nf * nf);
                    (nf * d).powi(2)
                })
                .sum()
        })
        .collect();
    Ok(StabilityMetrics {
        shells: a.shells,
        delta: None,
        delta_tilde: Some(per_n.iter().sum::<f64>().sqrt()),
        per_n,
    })
}

/// `δ` between two spectra data sets.
pub fn metrics_ip1(a: &SpectralDataIP1, b: &SpectralDataIP1) -> Result<StabilityMetrics> {
    if a.edges != b.edges || a.shells != b.shells {
        return Err(Error::InvalidInput("spectral data sets have different shapes".into()));
    }
    a.validate()?;
    b.validate()?;
    let m = a.edges;
    let per_n: Vec<f64> = (1..=a.shells)
        .map(|n| {
            let nf = n as f64;
            let range = (n - 1) * m..n * m;
            let main: f64 = range
                .clone()
                .map(|i| (nf * rho_gap(a.main[i], b.main[i])).powi(2))
                .sum();
            let aux: f64 = a
                .aux
                .iter()
                .zip(&b.aux)
                .map(|(x, y)| range.clone().map(|i| (nf * rho_gap(x[i], y[i])).powi(2)).sum::<f64>())
                .sum();
            main + aux
        })
        .collect();
    Ok(StabilityMetrics {
        shells: a.shells,
        delta: Some(per_n.iter().sum::<f64>().sqrt()),
        delta_tilde: None,
        per_n,
    })
}
