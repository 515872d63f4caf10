//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use stargraph::graph::{random_in_ball_with_modes, Potential, PotentialVector, StarGraphConfig};
use stargraph::{Error, Result};

/// Every accepted key with its default.
const KEYS: &[(&str, &str)] = &[
    ("m", "3"),
    ("grid_points", "400"),
    ("lambda_max", "10000"),
    ("shells", "10"),
    ("seed", "0"),
    // zero | random | cos2 | dir
    ("potential", "zero"),
    ("q_ball", "1"),
    ("modes", "6"),
    // one a_j per edge for `cos2`
    ("amplitudes", ""),
    ("potential_dir", ""),
    // spectral data JSON for `reconstruct` and `ip1-convert`; empty means
    // computed from the potential
    ("data", ""),
    ("verify_winding", "true"),
    ("cross_check", "true"),
    ("scan_min", "-10"),
    ("scan_max", "100"),
    ("scan_points", "221"),
    ("pw_radius", "40"),
    ("pw_samples", "400"),
    ("cauchy_alpha", "1"),
    ("cauchy_modes", "20"),
    ("oracle_grid", "2000"),
    ("oracle_count", "10"),
    ("neumann", "0"),
    ("max_iters", "30"),
    ("tol", "1e-8"),
    ("damping", "1"),
    ("boundary_repair", "true"),
    ("pairs", "20"),
    ("stability_iters", "15"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn defaults() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::defaults();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.to_string();
                Ok(())
            }
            None => Err(Error::InvalidInput(format!("unknown config key `{key}`"))),
        }
    }

    fn raw(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.raw(key)
            .parse()
            .map_err(|_| Error::InvalidInput(format!("`{key}` has a bad value `{}`", self.raw(key))))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parsed(key)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.parsed(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parsed(key)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidInput(format!("`{key}` must be finite")))
        }
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.parsed(key)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    /// Checks the type of every key and the graph configuration.
    pub fn validate(&self) -> Result<()> {
        for key in [
            "m",
            "grid_points",
            "shells",
            "modes",
            "scan_points",
            "pw_samples",
            "cauchy_modes",
        ] {
            self.usize(key)?;
        }
        for key in [
            "oracle_grid",
            "oracle_count",
            "neumann",
            "max_iters",
            "pairs",
            "stability_iters",
        ] {
            self.usize(key)?;
        }
        self.u64("seed")?;
        for key in [
            "lambda_max",
            "q_ball",
            "scan_min",
            "scan_max",
            "pw_radius",
            "cauchy_alpha",
            "tol",
            "damping",
        ] {
            self.f64(key)?;
        }
        for key in ["verify_winding", "cross_check", "boundary_repair"] {
            self.bool(key)?;
        }
        if !["zero", "random", "cos2", "dir"].contains(&self.raw("potential")) {
            return Err(Error::InvalidInput(format!(
                "unknown potential kind `{}`",
                self.raw("potential")
            )));
        }
        self.graph()?;
        self.amplitudes()?;
        Ok(())
    }

    pub fn graph(&self) -> Result<StarGraphConfig> {
        StarGraphConfig::new(self.usize("m")?, self.usize("grid_points")?)?.with_lambda_max(self.f64("lambda_max")?)
    }

    fn amplitudes(&self) -> Result<Vec<f64>> {
        let text = self.raw("amplitudes");
        if text.is_empty() {
            return Ok(Vec::new());
        }
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad amplitude `{}`", s.trim())))
            })
            .collect()
    }

    pub fn potential(&self) -> Result<PotentialVector> {
        let graph = self.graph()?;
        match self.raw("potential") {
            "zero" => PotentialVector::zero(graph),
            "random" => random_in_ball_with_modes(&graph, self.f64("q_ball")?, self.u64("seed")?, self.usize("modes")?),
            "cos2" => {
                let a = self.amplitudes()?;
                if a.len() != graph.edges {
                    return Err(Error::InvalidInput(format!(
                        "cos2 needs {} amplitudes, got {}",
                        graph.edges,
                        a.len()
                    )));
                }
                let edges = a
                    .iter()
                    .map(|&c| Potential::from_fn(graph.grid_points, |x| c * (2.0 * x).cos()))
                    .collect::<Result<_>>()?;
                PotentialVector::new(graph, edges)
            }
            _ => {
                let dir = self
                    .path("potential_dir")
                    .ok_or_else(|| Error::InvalidInput("potential = dir needs potential_dir".into()))?;
                PotentialVector::load_dir(dir)?.resample(graph.grid_points)
            }
        }
    }

    /// Canonical text: every key in sorted order, one `key=value` per line.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("m = 3\nshellz = 4\n").unwrap_err();
        assert!(err.to_string().contains("shellz"));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let cfg = RunConfig::parse("# run\n\nm = 4 # edges\nshells=7\n").unwrap();
        assert_eq!(cfg.usize("m").unwrap(), 4);
        assert_eq!(cfg.usize("shells").unwrap(), 7);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(RunConfig::parse("m = three").is_err());
        assert!(RunConfig::parse("m = 1").is_err());
        assert!(RunConfig::parse("potential = square").is_err());
        assert!(RunConfig::parse("amplitudes = 0.1, x").is_err());
        assert!(RunConfig::parse("tol = nan").is_err());
    }

    #[test]
    fn hash_follows_values_not_layout() {
        let a = RunConfig::parse("m = 3\nshells = 5").unwrap();
        let b = RunConfig::parse("shells=5\n\n  m=3").unwrap();
        let c = RunConfig::parse("shells=6").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn cos2_needs_one_amplitude_per_edge() {
        let cfg = RunConfig::parse("potential = cos2\namplitudes = 0.1, 0.2\ngrid_points = 64").unwrap();
        assert!(cfg.potential().is_err());
        let cfg = RunConfig::parse("potential = cos2\namplitudes = 0.1, 0.2, 0\ngrid_points = 64").unwrap();
        let v = cfg.potential().unwrap();
        assert!((v.edge(1).samples()[0] - 0.2).abs() < 1e-15);
    }
}
