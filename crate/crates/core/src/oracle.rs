//! Second-order finite differences for the whole star, used only to check the
//! shooting solver.
//!
//! Unknowns are the interior values of every edge plus one shared value at
//! the centre. The centre row comes from integrating the equation over the
//! half cells `[π − h/2, π]` of all edges, where the flux terms cancel by the
//! Kirchhoff condition; scaling the centre unknown by `√(m/2)` makes the
//! matrix symmetric.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PotentialVector;

/// Smallest grid accepted by [`oracle_eigenvalues`].
pub const MIN_ORACLE_GRID: usize = 200;

/// Largest dimension the dense solver is used for by [`FdMethod::Auto`].
const DENSE_LIMIT: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FdMethod {
    /// Dense for small systems, bisection otherwise.
    Auto,
    Dense,
    /// Sturm counts from an `LDLᵀ` sweep from the pendant ends to the centre.
    Bisection,
}

/// One edge of the discrete operator, ordered from the pendant end inwards.
#[derive(Debug, Clone, PartialEq)]
struct Chain {
    diag: Vec<f64>,
    /// `off[i]` couples node `i` and `i + 1`; the last entry couples the
    /// innermost node to the centre.
    off: Vec<f64>,
}

/// The assembled symmetric matrix in its star-of-chains form.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSystem {
    pub edges: usize,
    pub grid_points: usize,
    pub step: f64,
    /// Edge carrying `y′(0) = 0` instead of `y(0) = 0`, 1-based.
    pub neumann: Option<usize>,
    chains: Vec<Chain>,
    center: f64,
}

impl FdSystem {
    pub fn assemble(v: &PotentialVector, grid_points: usize, neumann: Option<usize>) -> Result<FdSystem> {
        let m = v.edges();
        if grid_points < 8 {
            return Err(Error::invalid(format!("oracle grid M = {grid_points} is below 8")));
        }
        if let Some(j) = neumann {
            if j == 0 || j > m {
                return Err(Error::invalid(format!("Neumann edge {j} is not in 1..={m}")));
            }
        }
        let h = std::f64::consts::PI / grid_points as f64;
        let inv = 1.0 / (h * h);
        let coupling = -inv * (2.0 / m as f64).sqrt();
        let mut center_q = 0.0;
        let chains = v
            .potentials()
            .iter()
            .enumerate()
            .map(|(j, q)| {
                let q = q.resample(grid_points)?;
                let s = q.samples();
                center_q += s[grid_points];
                let first = if neumann == Some(j + 1) { 0 } else { 1 };
                let diag: Vec<f64> = (first..grid_points).map(|i| 2.0 * inv + s[i]).collect();
                let mut off = vec![-inv; diag.len()];
                if first == 0 {
                    off[0] = -std::f64::consts::SQRT_2 * inv;
                }
                *off.last_mut().unwrap() = coupling;
                Ok(Chain { diag, off })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FdSystem {
            edges: m,
            grid_points,
            step: h,
            neumann,
            chains,
            center: 2.0 * inv + center_q / m as f64,
        })
    }

    pub fn dimension(&self) -> usize {
        self.chains.iter().map(|c| c.diag.len()).sum::<usize>() + 1
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut a = DMatrix::zeros(n, n);
        let c = n - 1;
        a[(c, c)] = self.center;
        let mut base = 0;
        for chain in &self.chains {
            let len = chain.diag.len();
            for i in 0..len {
                a[(base + i, base + i)] = chain.diag[i];
                let next = if i + 1 < len { base + i + 1 } else { c };
                a[(base + i, next)] = chain.off[i];
                a[(next, base + i)] = chain.off[i];
            }
            base += len;
        }
        a
    }

    /// Number of eigenvalues below `lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut negative = 0;
        let mut center = self.center - lambda;
        for chain in &self.chains {
            let mut d = 1.0;
            let mut prev_off = 0.0;
            for (a, b) in chain.diag.iter().zip(&chain.off) {
                d = pivot(a - lambda - prev_off * prev_off / d);
                if d < 0.0 {
                    negative += 1;
                }
                prev_off = *b;
            }
            center -= prev_off * prev_off / d;
        }
        if pivot(center) < 0.0 {
            negative += 1;
        }
        negative
    }

    fn gershgorin(&self) -> (f64, f64) {
        let mut lo = self.center;
        let mut hi = self.center;
        let center_radius: f64 = self.chains.iter().map(|c| c.off.last().unwrap().abs()).sum();
        lo = lo.min(self.center - center_radius);
        hi = hi.max(self.center + center_radius);
        for chain in &self.chains {
            for i in 0..chain.diag.len() {
                let r = chain.off[i].abs() + if i > 0 { chain.off[i - 1].abs() } else { 0.0 };
                lo = lo.min(chain.diag[i] - r);
                hi = hi.max(chain.diag[i] + r);
            }
        }
        (lo, hi)
    }

    /// The `count` lowest eigenvalues in ascending order.
    pub fn lowest(&self, count: usize, method: FdMethod) -> Result<Vec<f64>> {
        let n = self.dimension();
        if count == 0 || count > n {
            return Err(Error::invalid(format!(
                "cannot take {count} eigenvalues of a {n}-dimensional system"
            )));
        }
        let dense = match method {
            FdMethod::Auto => n <= DENSE_LIMIT,
            FdMethod::Dense => true,
            FdMethod::Bisection => false,
        };
        if dense {
            let eig = SymmetricEigen::try_new(self.to_dense(), f64::EPSILON, 10_000)
                .ok_or_else(|| Error::OracleFailure("dense eigensolver did not converge".into()))?;
            let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            values.sort_by(f64::total_cmp);
            values.truncate(count);
            return Ok(values);
        }
        let (lo, hi) = self.gershgorin();
        (0..count).map(|k| self.bisect(k, lo, hi)).collect()
    }

    /// The `k`-th eigenvalue (0-based): the smallest `λ` with more than `k`
    /// eigenvalues at or below it.
    fn bisect(&self, k: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
                return Ok(0.5 * (lo + hi));
            }
        }
        Err(Error::OracleFailure(format!(
            "bisection for eigenvalue {} did not settle",
            k + 1
        )))
    }
}

/// Keeps the sweep finite when a pivot lands exactly on zero.
fn pivot(d: f64) -> f64 {
    if d == 0.0 {
        -f64::MIN_POSITIVE.sqrt()
    } else {
        d
    }
}

/// Lowest `count` eigenvalues of the discrete operator on `M = grid_points`
/// cells per edge. Each is within `O(h²λ²)` of the continuum value for
/// smooth potentials.
pub fn oracle_eigenvalues(v: &PotentialVector, grid_points: usize, count: usize) -> Result<Vec<f64>> {
    oracle_with(v, grid_points, count, None, FdMethod::Auto)
}

/// As [`oracle_eigenvalues`] with `y′_j(0) = 0` on edge `j` (1-based).
pub fn oracle_aux_eigenvalues(v: &PotentialVector, grid_points: usize, count: usize, j: usize) -> Result<Vec<f64>> {
    oracle_with(v, grid_points, count, Some(j), FdMethod::Auto)
}

pub fn oracle_with(
    v: &PotentialVector,
    grid_points: usize,
    count: usize,
    neumann: Option<usize>,
    method: FdMethod,
) -> Result<Vec<f64>> {
    if grid_points < MIN_ORACLE_GRID {
        return Err(Error::invalid(format!(
            "oracle grid M = {grid_points} is below {MIN_ORACLE_GRID}"
        )));
    }
    FdSystem::assemble(v, grid_points, neumann)?.lowest(count, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_in_ball, StarGraphConfig};

    fn zero(m: usize) -> PotentialVector {
        PotentialVector::zero(StarGraphConfig::new(m, 200).unwrap()).unwrap()
    }

    #[test]
    fn dense_matrix_is_symmetric() {
        let v = random_in_ball(&StarGraphConfig::new(3, 64).unwrap(), 1.0, 2).unwrap();
        for neumann in [None, Some(2)] {
            let a = FdSystem::assemble(&v, 40, neumann).unwrap().to_dense();
            assert_eq!((&a - a.transpose()).amax(), 0.0);
        }
    }

    #[test]
    fn sturm_counts_agree_with_dense() {
        let v = random_in_ball(&StarGraphConfig::new(4, 64).unwrap(), 1.0, 9).unwrap();
        for neumann in [None, Some(1)] {
            let sys = FdSystem::assemble(&v, 50, neumann).unwrap();
            let dense = sys.lowest(12, FdMethod::Dense).unwrap();
            let bisect = sys.lowest(12, FdMethod::Bisection).unwrap();
            for (a, b) in dense.iter().zip(&bisect) {
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn zero_potential_three_edges() {
        let l = oracle_eigenvalues(&zero(3), 2000, 3).unwrap();
        for (got, want) in l.iter().zip([0.25, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-4, "{got}");
        }
    }

    #[test]
    fn two_edges_form_one_interval() {
        let l = oracle_eigenvalues(&zero(2), 2000, 6).unwrap();
        for (n, got) in l.iter().enumerate() {
            let want = ((n + 1) as f64 / 2.0).powi(2);
            assert!((got - want).abs() < 1e-4, "{n}: {got}");
        }
    }

    #[test]
    fn neumann_edge_of_two_edges() {
        // y'(0) = 0 on one end and y(2π) = 0 on the other: λ = ((2n − 1)/4)².
        let l = oracle_aux_eigenvalues(&zero(2), 2000, 4, 1).unwrap();
        for (n, got) in l.iter().enumerate() {
            let want = ((2 * n + 1) as f64 / 4.0).powi(2);
            assert!((got - want).abs() < 1e-4, "{n}: {got}");
        }
    }

    #[test]
    fn error_falls_fourfold_when_the_grid_doubles() {
        let v = random_in_ball(&StarGraphConfig::new(3, 400).unwrap(), 1.0, 4).unwrap();
        let l: Vec<f64> = [200, 400, 800]
            .iter()
            .map(|&g| oracle_eigenvalues(&v, g, 6).unwrap()[5])
            .collect();
        let ratio = (l[1] - l[0]) / (l[2] - l[1]);
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn small_grids_are_rejected() {
        assert!(oracle_eigenvalues(&zero(3), 100, 3).unwrap_err().is_input_error());
        assert!(FdSystem::assemble(&zero(3), 40, Some(4)).is_err());
    }
}
