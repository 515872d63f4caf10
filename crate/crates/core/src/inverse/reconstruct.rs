use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::convert::Converter;
use super::{metrics_ip2, SpectralDataIP1, SpectralDataIP2};
use crate::error::{Error, Result};
use crate::graph::{normalize_mean_zero, Potential, PotentialVector, StarGraphConfig};
use crate::ode::dirichlet_trace;
use crate::spectral::{locate_spectrum_with, weight_numbers_with, SpectrumOptions, WeightOptions};

/// A growth streak that ends above this multiple of the smallest update so
/// far counts as divergence; below it the iteration has hit its noise floor.
const DIVERGENCE_FACTOR: f64 = 2.0;

/// Consecutive growing updates that stop the iteration.
const GROWTH_LIMIT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructConfig {
    pub graph: StarGraphConfig,
    pub max_iters: usize,
    /// Bound on the L₂ norm of the applied update.
    pub tol: f64,
    /// Multiplies every update, in `(0, 1]`.
    pub damping: f64,
    /// Every term of the update vanishes at the pendant vertex, so the
    /// truncated series cannot resolve `q(x)` for `x < π/(2N)`. With this set
    /// the samples there are extrapolated from the adjacent interior.
    pub boundary_repair: bool,
}

impl ReconstructConfig {
    pub fn new(graph: StarGraphConfig) -> Self {
        ReconstructConfig {
            graph,
            max_iters: 30,
            tol: 1e-8,
            damping: 1.0,
            boundary_repair: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    /// Updates kept growing at the noise floor.
    Stagnated,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `(Σ_j ‖Δq_j‖²)^{1/2}` of the applied update.
    pub update_norm: f64,
    /// `δ̃` between the data of the iterate and the target before the update.
    pub data_residual: f64,
    /// Bound on `N Σ_k δ_Nk` over the last retained shell, a proxy for the dropped tail.
    pub tail_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub potentials: PotentialVector,
    pub trace: Vec<IterationRecord>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// `δ̃` between the data of the returned potentials and the target.
    pub final_residual: f64,
}

fn forward(v: &PotentialVector, shells: usize) -> Result<SpectralDataIP2> {
    let s = locate_spectrum_with(v, shells, &SpectrumOptions { verify_winding: false })?;
    let w = weight_numbers_with(v, &s, &WeightOptions { cross_check: false }, None)?;
    Ok(SpectralDataIP2::from_forward(&s, &w))
}

/// `4 Σ_{n,k} [β S S′(·, λ)]` over the current data minus the same sum over
/// the target, with `S` always the solution for the current potential.
fn born_update(v: &PotentialVector, current: &SpectralDataIP2, target: &SpectralDataIP2) -> Result<Vec<Vec<f64>>> {
    let m = v.edges();
    let len = v.config().grid_points + 1;
    let max = v.config().lambda_max;
    (0..m)
        .into_par_iter()
        .map(|j| {
            let q = v.edge(j);
            let terms: Vec<Vec<f64>> = (0..target.lambda.len())
                .into_par_iter()
                .map(|i| {
                    let mut acc = vec![0.0; len];
                    for (data, sign) in [(current, 1.0), (target, -1.0)] {
                        let (s, sp) = dirichlet_trace(q, data.lambda[i], max)?;
                        let b = sign * 4.0 * data.beta[i][j];
                        for ((a, y), yp) in acc.iter_mut().zip(&s).zip(&sp) {
                            *a += b * y * yp;
                        }
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
            let mut sum = vec![0.0; len];
            for t in terms {
                for (s, x) in sum.iter_mut().zip(t) {
                    *s += x;
                }
            }
            Ok(sum)
        })
        .collect()
}

/// Replaces samples on `[0, w)` by the least-squares quadratic on `[w, 3w]`.
fn repair_left(q: &Potential, w: f64) -> Result<Potential> {
    let h = q.step();
    let s = q.samples();
    let lo = (w / h).ceil() as usize;
    let hi = ((3.0 * w) / h).floor() as usize;
    if lo == 0 || hi < lo + 2 || hi >= s.len() {
        return Ok(q.clone());
    }
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vector3::<f64>::zeros();
    for i in lo..=hi {
        let x = i as f64 * h;
        let phi = Vector3::new(1.0, x, x * x);
        a += phi * phi.transpose();
        b += phi * s[i];
    }
    let c = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NumericalFailure("singular boundary fit".into()))?;
    let mut out = s.to_vec();
    for (i, v) in out.iter_mut().enumerate().take(lo) {
        let x = i as f64 * h;
        *v = c[0] + c[1] * x + c[2] * x * x;
    }
    Potential::new(out)
}

fn tail_estimate(current: &SpectralDataIP2, target: &SpectralDataIP2) -> Result<f64> {
    let metric = metrics_ip2(current, target)?;
    let last = metric.per_n.last().copied().unwrap_or(0.0);
    // per_n holds Σ_k (N δ_Nk)²; Cauchy–Schwarz turns its root into a bound on the sum.
    Ok(last.sqrt() * (current.edges as f64).sqrt())
}

fn iterate<T>(cfg: &ReconstructConfig, edges: usize, shells: usize, mut target_for: T) -> Result<Reconstruction>
where
    T: FnMut(&PotentialVector, &SpectralDataIP2) -> Result<SpectralDataIP2>,
{
    cfg.validate()?;
    if cfg.graph.edges != edges {
        return Err(Error::InvalidInput(format!(
            "data has {edges} edges but the graph has {}",
            cfg.graph.edges
        )));
    }
    let mut v = PotentialVector::zero(cfg.graph)?;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut growth = 0;
    let mut smallest = f64::INFINITY;
    let mut stop = StopReason::MaxIterations;
    for iteration in 1..=cfg.max_iters {
        let current = forward(&v, shells)?;
        let target = target_for(&v, &current)?;
        let data_residual = metrics_ip2(&current, &target)?.delta_tilde.unwrap_or(0.0);
        let update = born_update(&v, &current, &target)?;
        let mut edges_new = Vec::with_capacity(edges);
        let mut norm_sq = 0.0;
        for (q, du) in v.potentials().iter().zip(update) {
            let du = Potential::new(du.iter().map(|x| cfg.damping * x).collect())?;
            norm_sq += du.l2_norm().powi(2);
            let mut next = q.axpy(1.0, &du)?;
            if cfg.boundary_repair {
                next = repair_left(&next, 0.5 * PI / shells as f64)?;
            }
            let (p, _) = normalize_mean_zero(&next)?;
            edges_new.push(p);
        }
        v = PotentialVector::new(cfg.graph, edges_new)?;
        let update_norm = norm_sq.sqrt();
        trace.push(IterationRecord {
            iteration,
            update_norm,
            data_residual,
            tail_estimate: tail_estimate(&current, &target)?,
        });
        if !update_norm.is_finite() {
            return Err(Error::NoConvergence {
                reason: "update is not finite".into(),
                trace: trace.iter().map(|r| r.update_norm).collect(),
            });
        }
        if update_norm <= cfg.tol {
            stop = StopReason::Converged;
            break;
        }
        let grew = trace.len() >= 2 && update_norm > trace[trace.len() - 2].update_norm;
        growth = if grew { growth + 1 } else { 0 };
        smallest = smallest.min(update_norm);
        if growth >= GROWTH_LIMIT {
            if update_norm > DIVERGENCE_FACTOR * smallest {
                return Err(Error::NoConvergence {
                    reason: format!("update norm grew {GROWTH_LIMIT} times in a row"),
                    trace: trace.iter().map(|r| r.update_norm).collect(),
                });
            }
            stop = StopReason::Stagnated;
            break;
        }
    }
    let current = forward(&v, shells)?;
    let target = target_for(&v, &current)?;
    let final_residual = metrics_ip2(&current, &target)?.delta_tilde.unwrap_or(0.0);
    Ok(Reconstruction {
        potentials: v,
        iterations: trace.len(),
        trace,
        stop_reason: stop,
        final_residual,
    })
}

/// Potentials whose first `N` shells of eigenvalues and weight numbers match
/// `data`, by successive approximation from `q ≡ 0`.
pub fn reconstruct(data: &SpectralDataIP2, cfg: &ReconstructConfig) -> Result<Reconstruction> {
    data.validate()?;
    iterate(cfg, data.edges, data.shells, |_, _| Ok(data.clone()))
}

/// As [`reconstruct`] from the main and auxiliary spectra. The weight numbers
/// of the last vertex are re-derived from every iterate.
pub fn reconstruct_ip1(data: &SpectralDataIP1, cfg: &ReconstructConfig) -> Result<Reconstruction> {
    let converter = Converter::new(data)?;
    let m = data.edges;
    iterate(cfg, m, data.shells, |v, current| {
        let own: Vec<f64> = current.beta.iter().map(|row| row[m - 1]).collect();
        converter.convert(v, Some(&own), false)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{locate_spectrum, weight_numbers};

    fn data_of(v: &PotentialVector, shells: usize) -> SpectralDataIP2 {
        let s = locate_spectrum(v, shells).unwrap();
        SpectralDataIP2::from_forward(&s, &weight_numbers(v, &s).unwrap())
    }

    fn cos2(cfg: StarGraphConfig, a: &[f64]) -> PotentialVector {
        let edges = a
            .iter()
            .map(|&c| Potential::from_fn(cfg.grid_points, |x| c * (2.0 * x).cos()).unwrap())
            .collect();
        PotentialVector::new(cfg, edges).unwrap()
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let cfg = StarGraphConfig::new(3, 200).unwrap();
        let data = data_of(&PotentialVector::zero(cfg).unwrap(), 8);
        let rec = reconstruct(&data, &ReconstructConfig::new(cfg)).unwrap();
        assert_eq!(rec.iterations, 1);
        assert_eq!(rec.stop_reason, StopReason::Converged);
        assert!(rec.potentials.total_norm() < 1e-12);
    }

    #[test]
    fn round_trip_cos2x() {
        let cfg = StarGraphConfig::new(3, 400).unwrap();
        let truth = cos2(cfg, &[0.1, -0.05, 0.02]);
        let data = data_of(&truth, 30);
        let rec = reconstruct(&data, &ReconstructConfig::new(cfg)).unwrap();
        for j in 0..3 {
            let err = rec.potentials.edge(j).l2_distance(truth.edge(j)).unwrap();
            assert!(err <= 1e-2, "edge {j}: {err} after {:?}", rec.trace);
        }
        assert!(rec.iterations <= 30);
    }

    #[test]
    fn halving_a_perturbation_halves_the_response() {
        let cfg = StarGraphConfig::new(3, 400).unwrap();
        let truth = cos2(cfg, &[0.1, -0.05, 0.02]);
        let data = data_of(&truth, 30);
        let rc = ReconstructConfig::new(cfg);
        let base = reconstruct(&data, &rc).unwrap().potentials;
        let shifted = |eps: f64| {
            let mut d = data.clone();
            d.lambda[0] = (d.lambda[0].sqrt() + eps).powi(2);
            reconstruct(&d, &rc).unwrap().potentials.distance(&base).unwrap()
        };
        let ratio = shifted(1e-3) / shifted(5e-4);
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn boundary_fit_reproduces_quadratics() {
        let q = Potential::from_fn(200, |x| 0.3 - x + 0.5 * x * x).unwrap();
        let mut damaged = q.samples().to_vec();
        for v in damaged.iter_mut().take(5) {
            *v = 0.0;
        }
        let fixed = repair_left(&Potential::new(damaged).unwrap(), 0.1).unwrap();
        for (a, b) in fixed.samples().iter().zip(q.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let cfg = StarGraphConfig::new(3, 200).unwrap();
        let data = data_of(&PotentialVector::zero(cfg).unwrap(), 2);
        let mut rc = ReconstructConfig::new(cfg);
        rc.damping = 1.5;
        assert!(reconstruct(&data, &rc).unwrap_err().is_input_error());
        let other = StarGraphConfig::new(2, 200).unwrap();
        assert!(reconstruct(&data, &ReconstructConfig::new(other))
            .unwrap_err()
            .is_input_error());
    }
}
