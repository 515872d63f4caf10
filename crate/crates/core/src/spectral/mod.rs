//! Eigenvalues of the star graph, the modified problems with a Neumann
//! condition at one pendant vertex, Weyl functions and weight numbers.

mod asymptotics;
mod roots;
mod weights;

pub use asymptotics::{asymptotic_report, AsymptoticReport, RemainderSeries};
pub(crate) use weights::{contour_residues_of, isolating_groups};
pub use weights::{weight_numbers, weight_numbers_with, ClusterSplit, SplitRule, WeightMatrix, WeightOptions};

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PotentialVector;
use crate::ode::{char_delta, char_delta_real};
use roots::{edge_zeros, kinds_for, secular_roots, winding_count, EdgeZeros};

/// Minimum distance in λ between a Weyl-function sample and an eigenvalue.
pub const POLE_EPSILON: f64 = 1e-6;

/// Eigenvalues closer than this (relative to `max(1, |λ|)`) count as one
/// multiple eigenvalue.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Eigenvalues closer than this share one residue computation and are split
/// like a multiple eigenvalue; their individual residues are ill-conditioned.
pub const GROUP_TOL: f64 = 1e-6;

/// `arccos(1/√m)/π`, the shift of the two outer auxiliary branches.
pub fn aux_shift(m: usize) -> f64 {
    (1.0 / (m as f64).sqrt()).acos() / PI
}

/// Asymptote of `√λ_nk`.
pub fn main_asymptote(n: usize, k: usize, m: usize) -> f64 {
    if k == m {
        n as f64 - 0.5
    } else {
        n as f64
    }
}

/// Asymptote of `√θ_nkj`.
pub fn aux_asymptote(n: usize, k: usize, m: usize) -> f64 {
    let a = aux_shift(m);
    if k + 1 == m {
        n as f64 - 1.0 + a
    } else if k == m {
        n as f64 - a
    } else {
        n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedEigenvalue {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    /// `√|λ|`; see `negative`.
    pub rho: f64,
    pub multiplicity: usize,
    /// `nπ(ρ − asymptote)`, with ρ taken as 0 for negative λ.
    pub remainder: f64,
    pub negative: bool,
}

impl IndexedEigenvalue {
    /// Principal √λ, imaginary for negative λ.
    pub fn rho_complex(&self) -> Complex64 {
        crate::numeric::rho_of(Complex64::new(self.lambda, 0.0))
    }
}

/// Eigenvalues in shells `n = 1..=shells`, `m` per shell, sorted by `(n, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub edges: usize,
    pub shells: usize,
    pub eigenvalues: Vec<IndexedEigenvalue>,
}

impl Spectrum {
    pub fn get(&self, n: usize, k: usize) -> &IndexedEigenvalue {
        &self.eigenvalues[(n - 1) * self.edges + (k - 1)]
    }

    pub fn shell(&self, n: usize) -> &[IndexedEigenvalue] {
        &self.eigenvalues[(n - 1) * self.edges..n * self.edges]
    }

    /// All eigenvalues in ascending order.
    pub fn sorted_lambdas(&self) -> Vec<f64> {
        let mut l: Vec<f64> = self.eigenvalues.iter().map(|e| e.lambda).collect();
        l.sort_by(f64::total_cmp);
        l
    }

    pub fn has_negative(&self) -> bool {
        self.eigenvalues.iter().any(|e| e.negative)
    }

    /// Rebuilds a spectrum from values already indexed `(n − 1)m + k − 1`.
    /// `neumann = Some(j)` selects the asymptotes of the spectrum `Λ_j`.
    pub fn from_indexed(edges: usize, shells: usize, lambda: &[f64], neumann: Option<usize>) -> Result<Spectrum> {
        if edges < 2 || shells == 0 || lambda.len() != edges * shells {
            return Err(Error::InvalidInput(format!(
                "{} eigenvalues do not fill {shells} shells of {edges}",
                lambda.len()
            )));
        }
        let problem = match neumann {
            Some(j) => Problem::Aux(j),
            None => Problem::Main,
        };
        let eigenvalues = lambda
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let (n, k) = (i / edges + 1, i % edges + 1);
                let negative = l < 0.0;
                let re_rho = if negative { 0.0 } else { l.sqrt() };
                let multiplicity = lambda
                    .iter()
                    .filter(|&&o| (o - l).abs() <= CLUSTER_TOL * l.abs().max(1.0))
                    .count();
                IndexedEigenvalue {
                    n,
                    k,
                    lambda: l,
                    rho: l.abs().sqrt(),
                    multiplicity,
                    remainder: n as f64 * PI * (re_rho - problem.asymptote(n, k, edges)),
                    negative,
                }
            })
            .collect();
        Ok(Spectrum {
            edges,
            shells,
            eigenvalues,
        })
    }
}

/// Spectrum of the problem with `y_j'(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxSpectrum {
    pub j: usize,
    pub spectrum: Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    /// Confirm every shell count with an argument-principle winding number.
    pub verify_winding: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { verify_winding: true }
    }
}

#[derive(Clone, Copy)]
enum Problem {
    Main,
    Aux(usize),
}

impl Problem {
    fn upper_rho(self, n: usize, m: usize) -> f64 {
        match self {
            Problem::Main => n as f64 + 0.25,
            Problem::Aux(_) => n as f64 + 0.5 * aux_shift(m),
        }
    }

    fn shell_of(self, lambda: f64, m: usize) -> usize {
        let rho = lambda.max(0.0).sqrt();
        let n = match self {
            Problem::Main => (rho - 0.25).ceil(),
            Problem::Aux(_) => (rho - 0.5 * aux_shift(m)).ceil(),
        };
        n.max(1.0) as usize
    }

    fn asymptote(self, n: usize, k: usize, m: usize) -> f64 {
        match self {
            Problem::Main => main_asymptote(n, k, m),
            Problem::Aux(_) => aux_asymptote(n, k, m),
        }
    }

    /// Branch labels for a shell's eigenvalues sorted ascending.
    fn branch_order(self, m: usize) -> Vec<usize> {
        match self {
            Problem::Main => std::iter::once(m).chain(1..m).collect(),
            Problem::Aux(_) => [m - 1, m].into_iter().chain(1..m - 1).collect(),
        }
    }

    fn neumann(self) -> Option<usize> {
        match self {
            Problem::Main => None,
            Problem::Aux(j) => Some(j - 1),
        }
    }

    fn label(self) -> String {
        match self {
            Problem::Main => "Delta".into(),
            Problem::Aux(j) => format!("Delta_{j}"),
        }
    }
}

fn lower_bound(v: &PotentialVector) -> f64 {
    v.min_value() - 1.0
}

fn check_shells(v: &PotentialVector, shells: usize) -> Result<()> {
    if shells == 0 {
        return Err(Error::InvalidInput("number of shells must be at least 1".into()));
    }
    let top = (shells as f64 + 1.5).powi(2);
    if top > v.config().lambda_max {
        return Err(Error::InvalidInput(format!(
            "N = {shells} needs |lambda| up to {top:.0}, beyond lambda_max = {}",
            v.config().lambda_max
        )));
    }
    Ok(())
}

fn locate(
    v: &PotentialVector,
    zeros: &[EdgeZeros],
    problem: Problem,
    shells: usize,
    opts: &SpectrumOptions,
) -> Result<Spectrum> {
    let m = v.edges();
    let poles: Vec<f64> = zeros
        .iter()
        .enumerate()
        .flat_map(|(i, z)| {
            if problem.neumann() == Some(i) {
                z.c.clone()
            } else {
                z.s.clone()
            }
        })
        .collect();
    let kinds = kinds_for(m, problem.neumann());
    let roots = secular_roots(v, &kinds, &poles, lower_bound(v))?;

    let mut by_shell: Vec<Vec<f64>> = vec![Vec::new(); shells];
    let top = problem.upper_rho(shells, m).powi(2);
    for r in roots.iter().filter(|r| r.lambda <= top) {
        let n = problem.shell_of(r.lambda, m);
        for _ in 0..r.multiplicity {
            by_shell[n - 1].push(r.lambda);
        }
    }
    let mut eigenvalues = Vec::with_capacity(shells * m);
    for (idx, shell) in by_shell.iter_mut().enumerate() {
        let n = idx + 1;
        if shell.len() != m {
            return Err(Error::IndexingFailure {
                shell: n,
                expected: m,
                found: shell.len(),
                detail: format!("{} zeros in the shell window: {:?}", problem.label(), shell),
            });
        }
        shell.sort_by(f64::total_cmp);
        let mut entries: Vec<IndexedEigenvalue> = shell
            .iter()
            .zip(problem.branch_order(m))
            .map(|(&lambda, k)| {
                let rho = lambda.abs().sqrt();
                let negative = lambda < 0.0;
                let re_rho = if negative { 0.0 } else { rho };
                let multiplicity = shell
                    .iter()
                    .filter(|&&o| (o - lambda).abs() <= CLUSTER_TOL * lambda.abs().max(1.0))
                    .count();
                IndexedEigenvalue {
                    n,
                    k,
                    lambda,
                    rho,
                    multiplicity,
                    remainder: n as f64 * PI * (re_rho - problem.asymptote(n, k, m)),
                    negative,
                }
            })
            .collect();
        entries.sort_by_key(|e| e.k);
        eigenvalues.extend(entries);
    }
    if opts.verify_winding {
        (1..=shells)
            .into_par_iter()
            .map(|n| verify_shell(v, problem, n, m))
            .collect::<Result<Vec<()>>>()?;
    }
    Ok(Spectrum {
        edges: m,
        shells,
        eigenvalues,
    })
}

/// Argument-principle count of the zeros in shell `n`. Shell 1 uses a box in
/// the λ-plane so that negative eigenvalues are enclosed; the others use the
/// box `[lo, hi] × [−1/2, 1/2]` in the ρ-plane.
fn verify_shell(v: &PotentialVector, problem: Problem, n: usize, m: usize) -> Result<()> {
    let hi = problem.upper_rho(n, m);
    let lo = problem.upper_rho(n - 1, m);
    let eval = |lambda: Complex64| -> Result<Complex64> {
        let cv = char_delta(v, lambda)?;
        Ok(match problem {
            Problem::Main => cv.delta,
            Problem::Aux(j) => cv.delta_j[j - 1],
        })
    };
    let count = if n == 1 {
        let (a, b) = (lower_bound(v) - 1.0, hi * hi);
        let corners = [
            Complex64::new(a, -0.5),
            Complex64::new(b, -0.5),
            Complex64::new(b, 0.5),
            Complex64::new(a, 0.5),
        ];
        winding_count(&eval, &corners)?
    } else {
        let f = |rho: Complex64| eval(rho * rho);
        let corners = [
            Complex64::new(lo, -0.5),
            Complex64::new(hi, -0.5),
            Complex64::new(hi, 0.5),
            Complex64::new(lo, 0.5),
        ];
        winding_count(&f, &corners)?
    };
    let rounded = count.round();
    if (count - rounded).abs() > 0.1 || rounded as i64 != m as i64 {
        return Err(Error::IndexingFailure {
            shell: n,
            expected: m,
            found: rounded.max(0.0) as usize,
            detail: format!("winding number of {} is {count:.4}", problem.label()),
        });
    }
    Ok(())
}

fn scan_zeros(v: &PotentialVector, shells: usize) -> Result<Vec<EdgeZeros>> {
    check_shells(v, shells)?;
    edge_zeros(v, lower_bound(v), shells as f64 + 1.5)
}

/// Eigenvalues of the star graph with `√λ ≤ N + 1/4`, indexed by shell and
/// branch.
///
/// ```
/// use stargraph::{graph::{PotentialVector, StarGraphConfig}, spectral::locate_spectrum};
///
/// let v = PotentialVector::zero(StarGraphConfig::new(3, 400).unwrap()).unwrap();
/// let s = locate_spectrum(&v, 2).unwrap();
/// assert!((s.get(1, 3).lambda - 0.25).abs() < 1e-10);
/// assert_eq!(s.get(2, 1).multiplicity, 2);
/// ```
pub fn locate_spectrum(v: &PotentialVector, shells: usize) -> Result<Spectrum> {
    locate_spectrum_with(v, shells, &SpectrumOptions::default())
}

pub fn locate_spectrum_with(v: &PotentialVector, shells: usize, opts: &SpectrumOptions) -> Result<Spectrum> {
    let zeros = scan_zeros(v, shells)?;
    locate(v, &zeros, Problem::Main, shells, opts)
}

/// Spectra `Λ_j`, `j = 1..m−1`.
pub fn locate_aux_spectra(v: &PotentialVector, shells: usize) -> Result<Vec<AuxSpectrum>> {
    locate_aux_spectra_with(v, shells, &SpectrumOptions::default())
}

pub fn locate_aux_spectra_with(v: &PotentialVector, shells: usize, opts: &SpectrumOptions) -> Result<Vec<AuxSpectrum>> {
    let zeros = scan_zeros(v, shells)?;
    (1..v.edges())
        .map(|j| {
            Ok(AuxSpectrum {
                j,
                spectrum: locate(v, &zeros, Problem::Aux(j), shells, opts)?,
            })
        })
        .collect()
}

/// Main spectrum and all auxiliary spectra from a single scan.
pub fn locate_all(v: &PotentialVector, shells: usize, opts: &SpectrumOptions) -> Result<(Spectrum, Vec<AuxSpectrum>)> {
    let zeros = scan_zeros(v, shells)?;
    let main = locate(v, &zeros, Problem::Main, shells, opts)?;
    let aux = (1..v.edges())
        .map(|j| {
            Ok(AuxSpectrum {
                j,
                spectrum: locate(v, &zeros, Problem::Aux(j), shells, opts)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((main, aux))
}

/// Weyl functions `M_j(λ) = −Δ_j(λ)/Δ(λ)` on a real grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylSample {
    pub lambda: Vec<f64>,
    /// `values[i][j − 1] = M_j(lambda[i])`, `j = 1..m`.
    pub values: Vec<Vec<f64>>,
}

pub fn weyl_values(v: &PotentialVector, spectrum: &Spectrum, grid: &[f64]) -> Result<WeylSample> {
    let values = grid
        .par_iter()
        .map(|&lambda| {
            if let Some(e) = spectrum
                .eigenvalues
                .iter()
                .find(|e| (e.lambda - lambda).abs() < POLE_EPSILON)
            {
                return Err(Error::PoleProximity {
                    lambda,
                    eigenvalue: e.lambda,
                    distance: (e.lambda - lambda).abs(),
                });
            }
            let cv = char_delta_real(v, lambda)?;
            if cv.delta == 0.0 {
                return Err(Error::PoleProximity {
                    lambda,
                    eigenvalue: lambda,
                    distance: 0.0,
                });
            }
            let row: Vec<f64> = cv.delta_j.iter().map(|d| -d / cv.delta).collect();
            for (mj, dj) in row.iter().zip(&cv.delta_j) {
                let residual = (mj * cv.delta + dj).abs();
                if residual > 1e-9 * dj.abs().max(f64::MIN_POSITIVE) && residual > 1e-300 {
                    return Err(Error::NumericalFailure(format!(
                        "Weyl identity residual {residual:e} at lambda = {lambda}"
                    )));
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(WeylSample {
        lambda: grid.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_in_ball, Potential, StarGraphConfig};
    use proptest::prelude::*;

    fn zero(m: usize) -> PotentialVector {
        PotentialVector::zero(StarGraphConfig::new(m, 400).unwrap()).unwrap()
    }

    #[test]
    fn zero_potential_spectrum_m3() {
        let s = locate_spectrum(&zero(3), 3).unwrap();
        let got: Vec<f64> = s.sorted_lambdas();
        let want = [0.25, 1.0, 1.0, 2.25, 4.0, 4.0, 6.25, 9.0, 9.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-10, "{got:?}");
        }
        assert_eq!(s.get(1, 3).lambda, got[0]);
        assert_eq!(s.get(3, 1).multiplicity, 2);
        assert_eq!(s.get(3, 3).multiplicity, 1);
        assert!(s.eigenvalues.iter().all(|e| e.remainder.abs() < 1e-8));
    }

    #[test]
    fn zero_potential_aux_spectra() {
        let a = aux_shift(3);
        assert!((a - 0.304_086_723_984_696).abs() < 1e-12);
        let aux = locate_aux_spectra(&zero(3), 2).unwrap();
        assert_eq!(aux.len(), 2);
        let s = &aux[0].spectrum;
        assert!((s.get(1, 2).rho - 0.304_087).abs() < 1e-6);
        assert!((s.get(1, 3).rho - 0.695_913).abs() < 1e-6);
        assert!((s.get(1, 1).rho - 1.0).abs() < 1e-10);
        assert!(s.eigenvalues.iter().all(|e| e.remainder.abs() < 1e-7));

        let aux = locate_aux_spectra(&zero(2), 3).unwrap();
        let rhos: Vec<f64> = aux[0].spectrum.sorted_lambdas().iter().map(|l| l.sqrt()).collect();
        for (r, w) in rhos.iter().zip([0.25, 0.75, 1.25, 1.75, 2.25, 2.75]) {
            assert!((r - w).abs() < 1e-10, "{rhos:?}");
        }
    }

    #[test]
    fn perturbed_double_eigenvalues_split() {
        let v = zero(3)
            .with_edge(
                0,
                Potential::from_fn(400, |x| 1e-3 * (1..=3).map(|l| (2.0 * l as f64 * x).cos()).sum::<f64>()).unwrap(),
            )
            .unwrap();
        let s = locate_spectrum(&v, 3).unwrap();
        for n in 1..=3 {
            let (a, b) = (s.get(n, 1).lambda, s.get(n, 2).lambda);
            // First-order shift of the perturbed branch is -c/3; the other stays at n².
            assert!(b - a > 1e-4 && b - a < 1e-2, "n = {n}: {a} {b}");
            assert_eq!(s.get(n, 1).multiplicity, 1);
            assert!((a - (n * n) as f64).abs() < 1e-2);
        }
    }

    #[test]
    fn shell_count_failure_is_reported() {
        let v = zero(3);
        let zeros = scan_zeros(&v, 2).unwrap();
        let mut broken = zeros.clone();
        broken[0].s.retain(|z| (z - 1.0).abs() > 0.1);
        broken[1].s.retain(|z| (z - 1.0).abs() > 0.1);
        let err = locate(&v, &broken, Problem::Main, 2, &SpectrumOptions::default()).unwrap_err();
        assert!(matches!(err, Error::IndexingFailure { shell: 1, .. }), "{err}");
    }

    #[test]
    fn negative_eigenvalues_are_flagged() {
        let cfg = StarGraphConfig::new(2, 400).unwrap();
        let v = PotentialVector::new(
            cfg,
            vec![
                Potential::constant(400, -0.5).unwrap(),
                Potential::constant(400, -0.5).unwrap(),
            ],
        )
        .unwrap();
        let s = locate_spectrum_with(&v, 2, &SpectrumOptions::default()).unwrap();
        let e = s.get(1, 2);
        assert!(e.negative && (e.lambda + 0.25).abs() < 1e-10);
        assert!(s.has_negative());
    }

    #[test]
    fn weyl_values_and_residue_limit() {
        let v = zero(3);
        let s = locate_spectrum(&v, 2).unwrap();
        let w = weyl_values(&v, &s, &[-1.0]).unwrap();
        let lambda = Complex64::new(-1.0, 0.0);
        let expected =
            -crate::ode::closed_form::delta_j_zero(3, lambda) / crate::ode::closed_form::delta_zero(3, lambda);
        assert!((w.values[0][0] - expected.re).abs() < 1e-9 * expected.norm());

        let eps = 1e-5;
        let w = weyl_values(&v, &s, &[0.25 + eps]).unwrap();
        let limit = w.values[0][0] * eps;
        assert!((limit + 1.0 / (6.0 * PI)).abs() < 1e-5);

        let err = weyl_values(&v, &s, &[0.25 + 1e-7]).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
    }

    #[test]
    fn weyl_function_large_negative_lambda() {
        let v = random_in_ball(&StarGraphConfig::new(3, 1000).unwrap(), 1.0, 5).unwrap();
        let s = locate_spectrum_with(&v, 1, &SpectrumOptions { verify_winding: false }).unwrap();
        for lambda in [-100.0, -400.0, -900.0] {
            let w = weyl_values(&v, &s, &[lambda]).unwrap();
            for mj in &w.values[0] {
                let ratio = mj / (-lambda).sqrt();
                assert!(ratio < 0.0 && (ratio + 1.0).abs() < 0.2, "{lambda}: {mj}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn spectrum_is_invariant_under_edge_swap(seed in 0u64..1000) {
            let v = random_in_ball(&StarGraphConfig::new(3, 300).unwrap(), 1.0, seed).unwrap();
            let swapped = PotentialVector::new(
                *v.config(),
                vec![v.edge(1).clone(), v.edge(0).clone(), v.edge(2).clone()],
            ).unwrap();
            let opts = SpectrumOptions { verify_winding: false };
            let a = locate_spectrum_with(&v, 4, &opts).unwrap().sorted_lambdas();
            let b = locate_spectrum_with(&swapped, 4, &opts).unwrap().sorted_lambdas();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn every_shell_holds_m_eigenvalues(seed in 0u64..1000, m in 2usize..5) {
            let v = random_in_ball(&StarGraphConfig::new(m, 300).unwrap(), 1.0, seed).unwrap();
            let s = locate_spectrum(&v, 3).unwrap();
            prop_assert_eq!(s.eigenvalues.len(), 3 * m);
            for e in &s.eigenvalues {
                let c = char_delta_real(&v, e.lambda).unwrap();
                let scale = char_delta_real(&v, e.lambda + 0.1).unwrap().delta.abs();
                prop_assert!(c.delta.abs() < 1e-8 * scale.max(1e-3));
            }
        }
    }
}
