use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Spectrum, GROUP_TOL};
use crate::error::{Error, Result};
use crate::graph::PotentialVector;
use crate::numeric::{rho_of, richardson_derivative};
use crate::ode::{char_delta, char_delta_real};

/// Trapezoid nodes on a circle; the error is about `2^−n` when the nearest
/// other pole lies at twice the radius.
const CONTOUR_POINTS: usize = 32;

/// Residues below this, relative to `max(1, Σ_j |α_j|)`, are a genuine sign
/// violation.
const NEGATIVE_TOL: f64 = -1e-8;

/// Relative gap below which a simple eigenvalue is treated by contour.
const NEAR_PAIR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightOptions {
    /// Confirm each simple-pole residue with a contour integral.
    pub cross_check: bool,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions { cross_check: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitRule {
    Equal,
    /// Closest to a reference matrix in the stability metric.
    Reference,
}

/// How the residue of a multiple eigenvalue was shared among its indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSplit {
    pub members: Vec<(usize, usize)>,
    pub lambda: f64,
    /// Cluster residue per vertex `j = 1..m`.
    pub residue: Vec<f64>,
    pub rule: SplitRule,
}

/// Residues `α_nkj` and split weights `β_nkj`, `j = 1..m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub edges: usize,
    pub shells: usize,
    /// Eigenvalue for each `(n, k)`, flattened as `(n − 1)m + k − 1`.
    pub lambda: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub clusters: Vec<ClusterSplit>,
}

impl WeightMatrix {
    fn idx(&self, n: usize, k: usize) -> usize {
        (n - 1) * self.edges + (k - 1)
    }

    pub fn beta(&self, n: usize, k: usize, j: usize) -> f64 {
        self.beta[self.idx(n, k)][j - 1]
    }

    pub fn alpha(&self, n: usize, k: usize, j: usize) -> f64 {
        self.alpha[self.idx(n, k)][j - 1]
    }

    pub fn lambda(&self, n: usize, k: usize) -> f64 {
        self.lambda[self.idx(n, k)]
    }

    /// `(n, k, j, α, β)` rows in index order.
    pub fn rows(&self) -> Vec<(usize, usize, usize, f64, f64)> {
        let mut out = Vec::with_capacity(self.lambda.len() * self.edges);
        for n in 1..=self.shells {
            for k in 1..=self.edges {
                for j in 1..=self.edges {
                    out.push((n, k, j, self.alpha(n, k, j), self.beta(n, k, j)));
                }
            }
        }
        out
    }

    pub fn min_beta(&self) -> f64 {
        self.beta.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `(1/2πi) ∮ f dλ` on a circle for a vector-valued `f`, real parts only.
pub(crate) fn contour_residues_of<F>(center: f64, radius: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>> + Sync,
{
    let samples: Vec<Vec<Complex64>> = (0..CONTOUR_POINTS)
        .into_par_iter()
        .map(|i| {
            let unit = Complex64::from_polar(1.0, std::f64::consts::TAU * i as f64 / CONTOUR_POINTS as f64);
            Ok(f(Complex64::new(center, 0.0) + unit * radius)?
                .into_iter()
                .map(|v| v * unit * radius)
                .collect())
        })
        .collect::<Result<_>>()?;
    let width = samples.first().map_or(0, Vec::len);
    Ok((0..width)
        .map(|j| samples.iter().map(|s| s[j]).sum::<Complex64>().re / CONTOUR_POINTS as f64)
        .collect())
}

/// `(1/2πi) ∮ Δ_j/Δ dλ` for every `j` on a circle.
pub(crate) fn contour_residues(v: &PotentialVector, center: f64, radius: f64) -> Result<Vec<f64>> {
    contour_residues_of(center, radius, |z| {
        let cv = char_delta(v, z)?;
        Ok(cv.delta_j.iter().map(|d| d / cv.delta).collect())
    })
}

/// A group of numerically coincident eigenvalues and the radius of a
/// circle around it that excludes every other eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Group {
    pub members: Vec<usize>,
    pub center: f64,
    pub gap: f64,
}

/// Groups `lambda` into clusters; `ceiling` bounds the unknown next value.
pub(crate) fn isolating_groups(lambda: &[f64], ceiling: f64) -> Result<Vec<Group>> {
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    order.sort_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
    let mut raw: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let l = lambda[i];
        match raw.last_mut() {
            Some(g) if (l - lambda[*g.last().unwrap()]).abs() <= GROUP_TOL * l.abs().max(1.0) => g.push(i),
            _ => raw.push(vec![i]),
        }
    }
    let count = raw.len();
    (0..count)
        .map(|gi| {
            let g = &raw[gi];
            let center = g.iter().map(|&i| lambda[i]).sum::<f64>() / g.len() as f64;
            let below = if gi > 0 {
                center - lambda[*raw[gi - 1].last().unwrap()]
            } else {
                f64::INFINITY
            };
            let above = if gi + 1 < count {
                lambda[raw[gi + 1][0]] - center
            } else {
                (ceiling - center).max(0.0)
            };
            let mut gap = below.min(above);
            if !gap.is_finite() {
                gap = 1.0;
            }
            if gap <= 0.0 {
                return Err(Error::NumericalFailure(format!("no isolating circle around {center}")));
            }
            Ok(Group {
                members: g.clone(),
                center,
                gap,
            })
        })
        .collect()
}

/// `Δ_j(λ₀)/Δ′(λ₀)` with a fourth-order difference for `Δ′`.
fn simple_residues(v: &PotentialVector, lambda: f64, gap: f64) -> Result<Vec<f64>> {
    let h = (1e-3 * lambda.abs().sqrt().max(1.0)).min(gap / 8.0);
    let mut f = |x: f64| char_delta_real(v, x).map(|c| c.delta);
    let dd = richardson_derivative(&mut f, lambda, h)?;
    let cv = char_delta_real(v, lambda)?;
    Ok(cv.delta_j.iter().map(|d| d / dd).collect())
}

fn check_cross(derivative: &[f64], contour: &[f64], lambda: f64) -> Result<()> {
    let scale: f64 = contour.iter().map(|a| a.abs()).sum::<f64>().max(1e-12);
    for (a, b) in derivative.iter().zip(contour) {
        if (a - b).abs() > 1e-6 * scale {
            return Err(Error::NumericalFailure(format!(
                "residue at lambda = {lambda}: difference quotient {a} vs contour {b}"
            )));
        }
    }
    Ok(())
}

/// Weight numbers for every indexed eigenvalue, equal splitting in clusters.
///
/// ```
/// use stargraph::{graph::{PotentialVector, StarGraphConfig}, spectral::{locate_spectrum, weight_numbers}};
///
/// let v = PotentialVector::zero(StarGraphConfig::new(3, 400).unwrap()).unwrap();
/// let w = weight_numbers(&v, &locate_spectrum(&v, 1).unwrap()).unwrap();
/// let pi = std::f64::consts::PI;
/// assert!((w.beta(1, 3, 1) - 1.0 / (6.0 * pi)).abs() < 1e-8);
/// assert!((w.beta(1, 1, 1) - 2.0 / (3.0 * pi)).abs() < 1e-8);
/// ```
pub fn weight_numbers(v: &PotentialVector, spectrum: &Spectrum) -> Result<WeightMatrix> {
    weight_numbers_with(v, spectrum, &WeightOptions::default(), None)
}

/// As [`weight_numbers`]; with a `reference` the cluster residues are split
/// to stay closest to it.
pub fn weight_numbers_with(
    v: &PotentialVector,
    spectrum: &Spectrum,
    opts: &WeightOptions,
    reference: Option<&WeightMatrix>,
) -> Result<WeightMatrix> {
    let m = spectrum.edges;
    let total = spectrum.eigenvalues.len();
    let lambdas: Vec<f64> = spectrum.eigenvalues.iter().map(|e| e.lambda).collect();
    // The next eigenvalue above the indexed range is beyond the last window.
    let ceiling = (spectrum.shells as f64 + 0.25).powi(2);
    let found = isolating_groups(&lambdas, ceiling)?;
    let residues: Vec<Vec<f64>> = found
        .par_iter()
        .map(|g| {
            // Difference quotients lose accuracy once the step must shrink with the gap.
            let isolated = g.gap > NEAR_PAIR * g.center.abs().max(1.0);
            let res = if g.members.len() == 1 && isolated {
                let r = simple_residues(v, g.center, g.gap)?;
                if opts.cross_check {
                    check_cross(&r, &contour_residues(v, g.center, 0.5 * g.gap)?, g.center)?;
                }
                r
            } else {
                contour_residues(v, g.center, 0.5 * g.gap)?
            };
            let scale = res.iter().map(|a| a.abs()).sum::<f64>().max(1.0);
            if let Some(bad) = res.iter().find(|&&a| a < NEGATIVE_TOL * scale) {
                return Err(Error::NumericalFailure(format!(
                    "negative residue {bad:e} at lambda = {}",
                    g.center
                )));
            }
            Ok(res)
        })
        .collect::<Result<_>>()?;
    let groups: Vec<Vec<usize>> = found.into_iter().map(|g| g.members).collect();
    let lam = |i: usize| lambdas[i];

    let mut alpha = vec![vec![0.0; m]; total];
    let mut beta = vec![vec![0.0; m]; total];
    let mut clusters = Vec::new();
    for (g, res) in groups.iter().zip(&residues) {
        for &i in g {
            alpha[i] = res.clone();
        }
        // Residues inside the tolerance band are rounding of an exact zero.
        let pos: Vec<f64> = res.iter().map(|a| a.max(0.0)).collect();
        if g.len() == 1 {
            beta[g[0]] = pos;
            continue;
        }
        let equal: Vec<Vec<f64>> = g
            .iter()
            .map(|_| pos.iter().map(|a| a / g.len() as f64).collect())
            .collect();
        let (chosen, rule) = match reference {
            Some(r) => choose_split(spectrum, g, &pos, equal, r),
            None => (equal, SplitRule::Equal),
        };
        for (&i, b) in g.iter().zip(chosen) {
            beta[i] = b;
        }
        clusters.push(ClusterSplit {
            members: g
                .iter()
                .map(|&i| (spectrum.eigenvalues[i].n, spectrum.eigenvalues[i].k))
                .collect(),
            lambda: lam(g[0]),
            residue: res.clone(),
            rule,
        });
    }
    Ok(WeightMatrix {
        edges: m,
        shells: spectrum.shells,
        lambda: spectrum.eigenvalues.iter().map(|e| e.lambda).collect(),
        alpha,
        beta,
        clusters,
    })
}

/// Non-negative shares of `total` closest in l1 to `target`.
fn l1_allocation(total: f64, target: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = target.iter().map(|t| t.max(0.0)).collect();
    let sum: f64 = x.iter().sum();
    if sum <= total {
        let largest = (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
        x[largest] += total - sum;
    } else {
        let mut excess = sum - total;
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[b].total_cmp(&x[a]));
        for i in idx {
            let cut = excess.min(x[i]);
            x[i] -= cut;
            excess -= cut;
        }
    }
    x
}

fn choose_split(
    spectrum: &Spectrum,
    g: &[usize],
    res: &[f64],
    equal: Vec<Vec<f64>>,
    reference: &WeightMatrix,
) -> (Vec<Vec<f64>>, SplitRule) {
    let m = res.len();
    let covered = g.iter().all(|&i| {
        let e = &spectrum.eigenvalues[i];
        e.n <= reference.shells && reference.edges == m
    });
    if !covered {
        return (equal, SplitRule::Equal);
    }
    let mut greedy = vec![vec![0.0; m]; g.len()];
    for j in 0..m {
        let target: Vec<f64> = g
            .iter()
            .map(|&i| {
                let e = &spectrum.eigenvalues[i];
                reference.beta(e.n, e.k, j + 1)
            })
            .collect();
        for (row, x) in greedy.iter_mut().zip(l1_allocation(res[j], &target)) {
            row[j] = x;
        }
    }
    let cost = |split: &[Vec<f64>]| -> f64 {
        g.iter()
            .zip(split)
            .map(|(&i, b)| {
                let e = &spectrum.eigenvalues[i];
                let n = e.n as f64;
                let drho = (rho_of(Complex64::new(e.lambda, 0.0))
                    - rho_of(Complex64::new(reference.lambda(e.n, e.k), 0.0)))
                .norm();
                let dbeta: f64 = (0..m).map(|j| (b[j] - reference.beta(e.n, e.k, j + 1)).abs()).sum();
                (n * (drho + dbeta / (n * n))).powi(2)
            })
            .sum()
    };
    if cost(&greedy) < cost(&equal) {
        (greedy, SplitRule::Reference)
    } else {
        (equal, SplitRule::Equal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_in_ball, StarGraphConfig};
    use crate::numeric::simpson;
    use crate::ode::dirichlet_trace;
    use crate::spectral::{locate_spectrum, locate_spectrum_with, SpectrumOptions};
    use std::f64::consts::PI;

    #[test]
    fn zero_potential_weights_m3() {
        let v = PotentialVector::zero(StarGraphConfig::new(3, 400).unwrap()).unwrap();
        let s = locate_spectrum(&v, 4).unwrap();
        let w = weight_numbers(&v, &s).unwrap();
        for j in 1..=3 {
            assert!((w.alpha(1, 3, j) - 1.0 / (6.0 * PI)).abs() < 1e-8);
            assert!((w.alpha(1, 1, j) - 4.0 / (3.0 * PI)).abs() < 1e-8);
            assert!((w.beta(1, 2, j) - 2.0 / (3.0 * PI)).abs() < 1e-8);
            for n in 1..=4 {
                let nf = n as f64;
                let sum = w.beta(n, 1, j) + w.beta(n, 2, j);
                assert!((sum - 2.0 * nf * nf * 2.0 / (3.0 * PI)).abs() < 1e-7 * nf * nf);
                let last = (nf - 0.5).powi(2) * 2.0 / (3.0 * PI);
                assert!((w.beta(n, 3, j) - last).abs() < 1e-7 * nf * nf);
            }
        }
        assert_eq!(w.clusters.len(), 4);
        for c in &w.clusters {
            let members: f64 = c.members.iter().map(|&(n, k)| w.beta(n, k, 1)).sum();
            assert!((members - c.residue[0]).abs() < 1e-12);
        }
    }

    /// Independent route: the eigenfunction equals `S_l(x)/S_l(π)` on every
    /// edge, so `α_j = 1/(S_j(π)² Σ_l ‖S_l‖²/S_l(π)²)`.
    #[test]
    fn residues_match_eigenfunction_norms() {
        let v = random_in_ball(&StarGraphConfig::new(3, 1000).unwrap(), 1.0, 17).unwrap();
        let s = locate_spectrum(&v, 3).unwrap();
        let w = weight_numbers(&v, &s).unwrap();
        for e in &s.eigenvalues {
            let traces: Vec<(Vec<f64>, Vec<f64>)> = v
                .potentials()
                .iter()
                .map(|q| dirichlet_trace(q, e.lambda, 1e4).unwrap())
                .collect();
            let h = v.config().step();
            let sum: f64 = traces
                .iter()
                .map(|(s, _)| {
                    let sq: Vec<f64> = s.iter().map(|x| x * x).collect();
                    simpson(&sq, h) / s.last().unwrap().powi(2)
                })
                .sum();
            for j in 1..=3 {
                let end = traces[j - 1].0.last().unwrap();
                let expected = 1.0 / (end * end * sum);
                let got = w.alpha(e.n, e.k, j);
                assert!(
                    (got - expected).abs() < 1e-6 * expected.max(1e-3),
                    "{} {} {j}: {got} {expected}",
                    e.n,
                    e.k
                );
            }
        }
    }

    #[test]
    fn weights_are_nonnegative_on_an_ensemble() {
        for seed in 0..6 {
            let v = random_in_ball(&StarGraphConfig::new(3, 500).unwrap(), 1.0, seed).unwrap();
            let s = locate_spectrum_with(&v, 5, &SpectrumOptions { verify_winding: false }).unwrap();
            let w = weight_numbers(&v, &s).unwrap();
            assert!(w.min_beta() >= -1e-10);
        }
    }

    #[test]
    fn reference_split_is_never_worse() {
        let v = PotentialVector::zero(StarGraphConfig::new(3, 400).unwrap()).unwrap();
        let s = locate_spectrum(&v, 2).unwrap();
        let mut reference = weight_numbers(&v, &s).unwrap();
        let i = 3; // shell 2, k = 1
        reference.beta[i][0] *= 1.3;
        reference.beta[i + 1][0] *= 0.6;
        let w = weight_numbers_with(&v, &s, &WeightOptions::default(), Some(&reference)).unwrap();
        let c = w.clusters.iter().find(|c| c.members.contains(&(2, 1))).unwrap();
        assert_eq!(c.rule, SplitRule::Reference);
        let total = w.beta(2, 1, 1) + w.beta(2, 2, 1);
        assert!((total - c.residue[0]).abs() < 1e-12);
        assert!(w.beta(2, 1, 1) > w.beta(2, 2, 1));
    }

    #[test]
    fn l1_allocation_examples() {
        assert_eq!(l1_allocation(1.0, &[0.2, 0.3]), vec![0.2, 0.8]);
        assert_eq!(l1_allocation(1.0, &[0.9, 0.6]), vec![0.4, 0.6]);
        assert_eq!(l1_allocation(1.0, &[-0.5, 0.25]), vec![0.0, 1.0]);
    }
}
