use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{AuxSpectrum, Spectrum, WeightMatrix};

/// A remainder sequence indexed by `n = 1..`, with its running l2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderSeries {
    /// `kappa`, `xi`, `varkappa0` or `varkappa1`.
    pub label: String,
    pub branch: Option<usize>,
    pub vertex: Option<usize>,
    pub values: Vec<f64>,
    pub cumulative_l2: Vec<f64>,
}

impl RemainderSeries {
    pub fn new(label: &str, branch: Option<usize>, vertex: Option<usize>, values: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative_l2 = values
            .iter()
            .map(|v| {
                acc += v * v;
                acc.sqrt()
            })
            .collect();
        RemainderSeries {
            label: label.to_string(),
            branch,
            vertex,
            values,
            cumulative_l2,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.cumulative_l2.last().copied().unwrap_or(0.0)
    }

    /// l2 norm of the entries with `n ≥ from`, relative to the full norm.
    pub fn tail_fraction(&self, from: usize) -> f64 {
        let total = self.l2_norm();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = self.values.iter().skip(from.saturating_sub(1)).map(|v| v * v).sum();
        tail.sqrt() / total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub series: Vec<RemainderSeries>,
}

impl AsymptoticReport {
    pub fn with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a RemainderSeries> + 'a {
        self.series.iter().filter(move |s| s.label == label)
    }

    /// Largest l2 norm over all sequences.
    pub fn max_norm(&self) -> f64 {
        self.series.iter().map(RemainderSeries::l2_norm).fold(0.0, f64::max)
    }
}

fn branch_series(label: &str, s: &Spectrum, vertex: Option<usize>) -> Vec<RemainderSeries> {
    (1..=s.edges)
        .map(|k| {
            let values = (1..=s.shells).map(|n| s.get(n, k).remainder).collect();
            RemainderSeries::new(label, Some(k), vertex, values)
        })
        .collect()
}

/// `ϰ⁰_nj = n(Σ_{k<m} β_nkj·mπ/(2n²) − (m − 1))`, `ϰ¹_nj = n(β_nmj·mπ/(n − 1/2)² − 2)`.
fn weight_series(w: &WeightMatrix) -> Vec<RemainderSeries> {
    let m = w.edges;
    let mf = m as f64;
    let mut out = Vec::new();
    for j in 1..=m {
        let zero = (1..=w.shells)
            .map(|n| {
                let nf = n as f64;
                let sum: f64 = (1..m).map(|k| w.beta(n, k, j)).sum();
                nf * (sum * mf * PI / (2.0 * nf * nf) - (mf - 1.0))
            })
            .collect();
        let one = (1..=w.shells)
            .map(|n| {
                let nf = n as f64;
                nf * (w.beta(n, m, j) * mf * PI / (nf - 0.5).powi(2) - 2.0)
            })
            .collect();
        out.push(RemainderSeries::new("varkappa0", None, Some(j), zero));
        out.push(RemainderSeries::new("varkappa1", None, Some(j), one));
    }
    out
}

/// Remainder sequences of the eigenvalues, the auxiliary eigenvalues and
/// the weight numbers relative to their leading asymptotics.
pub fn asymptotic_report(
    spectrum: Option<&Spectrum>,
    aux: &[AuxSpectrum],
    weights: Option<&WeightMatrix>,
) -> AsymptoticReport {
    let mut series = Vec::new();
    if let Some(s) = spectrum {
        series.extend(branch_series("kappa", s, None));
    }
    for a in aux {
        series.extend(branch_series("xi", &a.spectrum, Some(a.j)));
    }
    if let Some(w) = weights {
        series.extend(weight_series(w));
    }
    AsymptoticReport { series }
}
