use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{metrics_ip1, metrics_ip2, reconstruct, ReconstructConfig, SpectralDataIP1, SpectralDataIP2};
use crate::error::{Error, Result};
use crate::graph::{random_in_ball_with_modes, PotentialVector, StarGraphConfig, DEFAULT_RANDOM_MODES};
use crate::spectral::{locate_all, weight_numbers_with, SpectrumOptions, WeightMatrix, WeightOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub graph: StarGraphConfig,
    /// Radius `Q` of the ball the potentials are drawn from.
    pub q_ball: f64,
    pub pairs: usize,
    pub shells: usize,
    pub seed: u64,
    pub modes: usize,
    pub max_iters: usize,
}

impl StabilityConfig {
    pub fn new(graph: StarGraphConfig, q_ball: f64, pairs: usize, shells: usize, seed: u64) -> Self {
        StabilityConfig {
            graph,
            q_ball,
            pairs,
            shells,
            seed,
            modes: DEFAULT_RANDOM_MODES,
            max_iters: 15,
        }
    }

    fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        if !(self.q_ball > 0.0 && self.q_ball.is_finite()) {
            return Err(Error::InvalidInput(format!("Q must be positive, got {}", self.q_ball)));
        }
        if self.pairs == 0 || self.shells == 0 || self.modes == 0 || self.max_iters == 0 {
            return Err(Error::InvalidInput(
                "pairs, shells, modes and max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Both sides of the stability estimate for one pair of potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub pair: usize,
    pub seeds: [u64; 2],
    pub delta: Option<f64>,
    pub delta_tilde: Option<f64>,
    /// `Σ_j ‖q̂¹_j − q̂²_j‖` for the reconstructed potentials.
    pub lhs: Option<f64>,
    /// `Σ_j ‖q¹_j − q²_j‖` for the potentials the data came from.
    pub lhs_true: Option<f64>,
    /// `lhs / δ̃`.
    pub ratio: Option<f64>,
    /// `lhs / δ`.
    pub ratio_ip1: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: StabilityConfig,
    pub rows: Vec<PairRow>,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub max_ratio_ip1: Option<f64>,
    pub median_ratio_ip1: Option<f64>,
    pub failures: usize,
}

fn max_median(values: impl Iterator<Item = f64>) -> (Option<f64>, Option<f64>) {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (None, None);
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    let median = if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    };
    (v.last().copied(), Some(median))
}

struct Forward {
    ip1: SpectralDataIP1,
    ip2: SpectralDataIP2,
    weights: WeightMatrix,
}

fn forward(v: &PotentialVector, shells: usize, reference: Option<&WeightMatrix>) -> Result<Forward> {
    let (s, aux) = locate_all(v, shells, &SpectrumOptions { verify_winding: false })?;
    let weights = weight_numbers_with(v, &s, &WeightOptions { cross_check: false }, reference)?;
    Ok(Forward {
        ip1: SpectralDataIP1::from_forward(&s, &aux),
        ip2: SpectralDataIP2::from_forward(&s, &weights),
        weights,
    })
}

fn run_pair(cfg: &StabilityConfig, pair: usize, seeds: [u64; 2]) -> PairRow {
    let mut row = PairRow {
        pair,
        seeds,
        delta: None,
        delta_tilde: None,
        lhs: None,
        lhs_true: None,
        ratio: None,
        ratio_ip1: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let q1 = random_in_ball_with_modes(&cfg.graph, cfg.q_ball, seeds[0], cfg.modes)?;
        let q2 = random_in_ball_with_modes(&cfg.graph, cfg.q_ball, seeds[1], cfg.modes)?;
        row.lhs_true = Some(q1.distance(&q2)?);
        let f1 = forward(&q1, cfg.shells, None)?;
        let f2 = forward(&q2, cfg.shells, Some(&f1.weights))?;
        let delta_tilde = metrics_ip2(&f1.ip2, &f2.ip2)?.delta_tilde.unwrap_or(0.0);
        let delta = metrics_ip1(&f1.ip1, &f2.ip1)?.delta.unwrap_or(0.0);
        row.delta_tilde = Some(delta_tilde);
        row.delta = Some(delta);
        let mut rc = ReconstructConfig::new(cfg.graph);
        rc.max_iters = cfg.max_iters;
        let r1 = reconstruct(&f1.ip2, &rc)?;
        let r2 = reconstruct(&f2.ip2, &rc)?;
        let lhs = r1.potentials.distance(&r2.potentials)?;
        row.lhs = Some(lhs);
        row.ratio = Some(lhs / delta_tilde);
        row.ratio_ip1 = Some(lhs / delta);
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Estimates `Σ_j ‖q¹_j − q²_j‖ / δ̃` and `/ δ` over random pairs in the ball
/// of radius `Q`. Failures of single pairs are recorded in their rows.
pub fn stability_experiment(cfg: &StabilityConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let seeds: Vec<[u64; 2]> = (0..cfg.pairs)
        .map(|_| {
            let a: u64 = rng.gen();
            let mut b: u64 = rng.gen();
            while b == a {
                b = rng.gen();
            }
            [a, b]
        })
        .collect();
    let rows: Vec<PairRow> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| run_pair(cfg, i + 1, s))
        .collect();
    let (max_ratio, median_ratio) = max_median(rows.iter().filter_map(|r| r.ratio));
    let (max_ratio_ip1, median_ratio_ip1) = max_median(rows.iter().filter_map(|r| r.ratio_ip1));
    Ok(StabilityReport {
        config: *cfg,
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        rows,
        max_ratio,
        median_ratio,
        max_ratio_ip1,
        median_ratio_ip1,
    })
}
