//! Star-graph domain types: the grid, edge potentials and the a-priori ball.
//!
//! Every edge has length π and is parameterized by `x ∈ [0, π]`, with `x = 0`
//! at the boundary vertex and `x = π` at the shared center. A potential is
//! stored as its samples on the uniform grid `x_i = iπ/M`, `i = 0..=M`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::trapezoid;

/// Default bound on |λ| accepted by the integrator.
pub const DEFAULT_LAMBDA_MAX: f64 = 1.0e4;

/// Number of cosine modes used by [`random_in_ball`].
pub const DEFAULT_RANDOM_MODES: usize = 6;

/// Shape of the discretized star graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarGraphConfig {
    /// Number of edges `m`.
    pub edges: usize,
    /// Number of uniform subintervals `M` per edge.
    pub grid_points: usize,
    /// Largest |λ| the integrator will accept.
    pub lambda_max: f64,
}

impl StarGraphConfig {
    pub fn new(edges: usize, grid_points: usize) -> Result<Self> {
        let cfg = StarGraphConfig {
            edges,
            grid_points,
            lambda_max: DEFAULT_LAMBDA_MAX,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_lambda_max(mut self, lambda_max: f64) -> Result<Self> {
        self.lambda_max = lambda_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges < 2 {
            // A single edge has no auxiliary spectra at all.
            return Err(Error::invalid(format!(
                "star graph needs at least 2 edges (got {}); m = 1 is unsupported",
                self.edges
            )));
        }
        if self.grid_points < 16 {
            return Err(Error::invalid(format!(
                "grid needs at least 16 subintervals (got {})",
                self.grid_points
            )));
        }
        if !(self.lambda_max.is_finite() && self.lambda_max > 0.0) {
            return Err(Error::invalid("lambda_max must be positive and finite"));
        }
        Ok(())
    }

    /// Grid step π/M.
    pub fn step(&self) -> f64 {
        PI / self.grid_points as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        grid_nodes(self.grid_points)
    }
}

pub(crate) fn grid_nodes(grid_points: usize) -> Vec<f64> {
    let h = PI / grid_points as f64;
    (0..=grid_points).map(|i| i as f64 * h).collect()
}

/// Potential values at the two Gauss–Legendre points of one grid interval,
/// stored as their mean and their difference (first minus second).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GaussPair {
    pub mean: f64,
    pub diff: f64,
}

/// One edge potential sampled on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    samples: Vec<f64>,
    l2_norm: f64,
    gauss: Vec<GaussPair>,
}

impl Potential {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 17 {
            return Err(Error::invalid(format!(
                "potential needs at least 17 samples (M >= 16), got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("potential sample {i} is not finite")));
        }
        let grid_points = samples.len() - 1;
        let h = PI / grid_points as f64;
        let squares: Vec<f64> = samples.iter().map(|v| v * v).collect();
        let l2_norm = trapezoid(&squares, h).sqrt();
        let gauss = gauss_table(&samples);
        Ok(Potential {
            samples,
            l2_norm,
            gauss,
        })
    }

    pub fn zero(grid_points: usize) -> Result<Self> {
        Potential::new(vec![0.0; grid_points + 1])
    }

    pub fn constant(grid_points: usize, value: f64) -> Result<Self> {
        Potential::new(vec![value; grid_points + 1])
    }

    /// Samples `f` on the grid with `grid_points` subintervals.
    pub fn from_fn(grid_points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Potential::new(grid_nodes(grid_points).into_iter().map(f).collect())
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn grid_points(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn step(&self) -> f64 {
        PI / self.grid_points() as f64
    }

    /// L₂(0, π) norm by the composite trapezoid rule.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    /// Trapezoid approximation of ∫₀^π q dx.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.samples, self.step())
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_mean_zero(&self) -> bool {
        self.integral().abs() <= 1e-10 * (1.0 + self.l2_norm)
    }

    pub(crate) fn gauss(&self) -> &[GaussPair] {
        &self.gauss
    }

    /// L₂ distance to another potential on the same grid.
    pub fn l2_distance(&self, other: &Potential) -> Result<f64> {
        if other.samples.len() != self.samples.len() {
            return Err(Error::invalid("potentials live on different grids"));
        }
        let sq: Vec<f64> = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        Ok(trapezoid(&sq, self.step()).sqrt())
    }

    /// Pointwise linear combination `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &Potential) -> Result<Potential> {
        if other.samples.len() != self.samples.len() {
            return Err(Error::invalid("potentials live on different grids"));
        }
        Potential::new(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    pub fn scaled(&self, factor: f64) -> Result<Potential> {
        Potential::new(self.samples.iter().map(|v| v * factor).collect())
    }

    /// Cubic interpolation onto a grid with `grid_points` subintervals.
    pub fn resample(&self, grid_points: usize) -> Result<Potential> {
        let old = self.grid_points() as f64;
        let scale = old / grid_points as f64;
        Potential::new(
            (0..=grid_points)
                .map(|i| cubic_at(&self.samples, i as f64 * scale))
                .collect(),
        )
    }
}

/// Cubic Lagrange interpolation at fractional node index `u`.
fn cubic_at(samples: &[f64], u: f64) -> f64 {
    let last = samples.len() - 1;
    let base = (u.floor() as isize - 1).clamp(0, last as isize - 3) as usize;
    let t = u - base as f64;
    let mut acc = 0.0;
    for k in 0..4 {
        let mut w = 1.0;
        for l in 0..4 {
            if l != k {
                w *= (t - l as f64) / (k as f64 - l as f64);
            }
        }
        acc += w * samples[base + k];
    }
    acc
}

fn gauss_table(samples: &[f64]) -> Vec<GaussPair> {
    let offset = 3f64.sqrt() / 6.0;
    (0..samples.len() - 1)
        .map(|i| {
            let q1 = cubic_at(samples, i as f64 + 0.5 - offset);
            let q2 = cubic_at(samples, i as f64 + 0.5 + offset);
            GaussPair {
                mean: 0.5 * (q1 + q2),
                diff: q1 - q2,
            }
        })
        .collect()
}

/// Removes the mean of `p`, returning the projected potential and the removed
/// constant `shift = (1/π)∫q`. All eigenvalues move by exactly `shift`.
pub fn normalize_mean_zero(p: &Potential) -> Result<(Potential, f64)> {
    let shift = p.integral() / PI;
    let projected = Potential::new(p.samples.iter().map(|v| v - shift).collect())?;
    Ok((projected, shift))
}

/// The potentials on all `m` edges.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVector {
    config: StarGraphConfig,
    potentials: Vec<Potential>,
    ball_radius: Option<f64>,
}

impl PotentialVector {
    pub fn new(config: StarGraphConfig, potentials: Vec<Potential>) -> Result<Self> {
        config.validate()?;
        if potentials.len() != config.edges {
            return Err(Error::invalid(format!(
                "expected {} edge potentials, got {}",
                config.edges,
                potentials.len()
            )));
        }
        if let Some(p) = potentials.iter().find(|p| p.grid_points() != config.grid_points) {
            return Err(Error::invalid(format!(
                "edge potential has M = {}, config says {}",
                p.grid_points(),
                config.grid_points
            )));
        }
        Ok(PotentialVector {
            config,
            potentials,
            ball_radius: None,
        })
    }

    pub fn zero(config: StarGraphConfig) -> Result<Self> {
        let p = Potential::zero(config.grid_points)?;
        PotentialVector::new(config, vec![p; config.edges])
    }

    /// Attaches the ball radius `Q`, checking membership in `P_Q`.
    pub fn with_ball_radius(mut self, q: f64) -> Result<Self> {
        let (inside, margin) = ball_membership(&self, q)?;
        if !inside && margin < -1e-9 {
            return Err(Error::invalid(format!(
                "sum of edge norms {} exceeds Q = {q}",
                self.total_norm()
            )));
        }
        self.ball_radius = Some(q);
        Ok(self)
    }

    pub fn config(&self) -> &StarGraphConfig {
        &self.config
    }

    pub fn edges(&self) -> usize {
        self.config.edges
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    pub fn edge(&self, j: usize) -> &Potential {
        &self.potentials[j]
    }

    pub fn ball_radius(&self) -> Option<f64> {
        self.ball_radius
    }

    /// Σ_j ‖q_j‖.
    pub fn total_norm(&self) -> f64 {
        self.potentials.iter().map(Potential::l2_norm).sum()
    }

    pub fn min_value(&self) -> f64 {
        self.potentials.iter().map(Potential::min).fold(f64::INFINITY, f64::min)
    }

    pub fn is_mean_zero(&self) -> bool {
        self.potentials.iter().all(Potential::is_mean_zero)
    }

    /// Projects every edge to mean zero; returns the per-edge shifts.
    pub fn normalized(&self) -> Result<(PotentialVector, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.edges());
        let mut shifts = Vec::with_capacity(self.edges());
        for p in &self.potentials {
            let (q, s) = normalize_mean_zero(p)?;
            out.push(q);
            shifts.push(s);
        }
        let mut v = PotentialVector::new(self.config, out)?;
        v.ball_radius = self.ball_radius;
        Ok((v, shifts))
    }

    /// Σ_j ‖q_j − p_j‖, the left-hand side of the stability estimates.
    pub fn distance(&self, other: &PotentialVector) -> Result<f64> {
        if other.edges() != self.edges() {
            return Err(Error::invalid("potential vectors have different edge counts"));
        }
        self.potentials
            .iter()
            .zip(&other.potentials)
            .map(|(a, b)| a.l2_distance(b))
            .sum()
    }

    /// Same potentials on a grid with `grid_points` subintervals.
    pub fn resample(&self, grid_points: usize) -> Result<PotentialVector> {
        let config = StarGraphConfig {
            grid_points,
            ..self.config
        };
        let potentials = self
            .potentials
            .iter()
            .map(|p| p.resample(grid_points))
            .collect::<Result<Vec<_>>>()?;
        PotentialVector::new(config, potentials)
    }

    /// Replaces the edge at `j`.
    pub fn with_edge(&self, j: usize, p: Potential) -> Result<PotentialVector> {
        let mut potentials = self.potentials.clone();
        potentials[j] = p;
        let mut v = PotentialVector::new(self.config, potentials)?;
        v.ball_radius = self.ball_radius;
        Ok(v)
    }

    /// Writes `edge_1.csv … edge_m.csv` and `meta.json` into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (j, p) in self.potentials.iter().enumerate() {
            let path = dir.join(format!("edge_{}.csv", j + 1));
            fs::write(&path, potential_csv(p)).map_err(|e| Error::io(&path, e))?;
        }
        let meta = PotentialMeta {
            m: self.config.edges,
            grid_points: self.config.grid_points,
            q: self.ball_radius,
        };
        let path = dir.join("meta.json");
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Reads a directory written by [`PotentialVector::save_dir`].
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<PotentialVector> {
        let dir = dir.as_ref();
        let meta_path = dir.join("meta.json");
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: PotentialMeta = serde_json::from_str(&text).map_err(|e| Error::format(&meta_path, e))?;
        let config = StarGraphConfig::new(meta.m, meta.grid_points)?;
        let potentials = (1..=meta.m)
            .map(|j| read_potential_csv(dir.join(format!("edge_{j}.csv"))))
            .collect::<Result<Vec<_>>>()?;
        let v = PotentialVector::new(config, potentials)?;
        match meta.q {
            Some(q) => v.with_ball_radius(q),
            None => Ok(v),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PotentialMeta {
    m: usize,
    #[serde(rename = "M")]
    grid_points: usize,
    #[serde(rename = "Q")]
    q: Option<f64>,
}

/// CSV text with header `x,q` and one row per grid node.
pub fn potential_csv(p: &Potential) -> String {
    let mut out = String::from("x,q\n");
    for (x, q) in grid_nodes(p.grid_points()).iter().zip(p.samples()) {
        out.push_str(&format!("{x},{q}\n"));
    }
    out
}

pub fn read_potential_csv(path: impl AsRef<Path>) -> Result<Potential> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("x,q") => {}
        other => return Err(Error::format(path, format!("expected header `x,q`, got {other:?}"))),
    }
    let mut xs = Vec::new();
    let mut qs = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.map(str::trim)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::format(path, format!("bad row {}: {line:?}", i + 2)))
        };
        xs.push(parse(parts.next())?);
        qs.push(parse(parts.next())?);
    }
    if qs.len() < 17 {
        return Err(Error::format(path, "need at least 17 rows"));
    }
    let grid_points = qs.len() - 1;
    let h = PI / grid_points as f64;
    if let Some(i) = xs.iter().enumerate().position(|(i, x)| (x - i as f64 * h).abs() > 1e-9) {
        return Err(Error::format(
            path,
            format!("row {} is off the uniform grid on [0, pi]", i + 2),
        ));
    }
    Potential::new(qs)
}

/// Membership in `P_Q = {q : Σ‖q_j‖ ≤ Q}` and the margin `Q − Σ‖q_j‖`.
pub fn ball_membership(v: &PotentialVector, q: f64) -> Result<(bool, f64)> {
    if !(q > 0.0) {
        return Err(Error::invalid(format!("ball radius must be positive, got {q}")));
    }
    let margin = q - v.total_norm();
    Ok((margin >= 0.0, margin))
}

/// Random potential vector in `P_Q`, deterministic in `seed`.
///
/// Each edge is a cosine series `Σ_{l=1..L} c_l cos(lx)` with
/// `c_l ~ N(0, 1)/l` (automatically mean zero); the whole vector is then
/// rescaled so that `Σ_j ‖q_j‖` equals a total drawn uniformly from `[0, Q]`.
/// The generator is xoshiro256++ seeded through its SplitMix64 seeding, so a
/// seed reproduces bit-identical samples on every platform.
pub fn random_in_ball(config: &StarGraphConfig, q: f64, seed: u64) -> Result<PotentialVector> {
    random_in_ball_with_modes(config, q, seed, DEFAULT_RANDOM_MODES)
}

pub fn random_in_ball_with_modes(config: &StarGraphConfig, q: f64, seed: u64, modes: usize) -> Result<PotentialVector> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!("ball radius must be positive, got {q}")));
    }
    if modes == 0 {
        return Err(Error::invalid("need at least one cosine mode"));
    }
    config.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let coefficients: Vec<Vec<f64>> = (0..config.edges)
        .map(|_| {
            (1..=modes)
                .map(|l| rng.sample::<f64, _>(StandardNormal) / l as f64)
                .collect()
        })
        .collect();
    let total: f64 = q * rng.gen::<f64>();

    let raw = coefficients
        .iter()
        .map(|c| {
            let p = Potential::from_fn(config.grid_points, |x| {
                c.iter().enumerate().map(|(l, a)| a * ((l + 1) as f64 * x).cos()).sum()
            })?;
            Ok(normalize_mean_zero(&p)?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let norm: f64 = raw.iter().map(Potential::l2_norm).sum();
    let factor = if norm > 0.0 { total / norm } else { 0.0 };
    let scaled = raw.iter().map(|p| p.scaled(factor)).collect::<Result<Vec<_>>>()?;
    let mut v = PotentialVector::new(*config, scaled)?;
    // Rounding can leave the sum a hair above Q when the draw lands near 1.
    if v.total_norm() > q {
        let shrink = q / v.total_norm();
        let shrunk = v
            .potentials
            .iter()
            .map(|p| p.scaled(shrink))
            .collect::<Result<Vec<_>>>()?;
        v = PotentialVector::new(*config, shrunk)?;
    }
    v.with_ball_radius(q)
}
