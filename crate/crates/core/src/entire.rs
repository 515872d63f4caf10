//! Characteristic functions rebuilt from their zeros, Paley–Wiener
//! remainders, partial characteristic functions of the first `m − 1` edges
//! and the Cauchy-data coefficients of the last edge.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Potential, PotentialVector};
use crate::numeric::{rho_of, trapezoid};
use crate::ode::{assemble, bases_complex, char_delta_real, product_except, propagate, Basis, Field};
use crate::spectral::{aux_shift, AuxSpectrum, Spectrum};

/// Hurwitz tail `Σ_{i≥0} (a + i)^{−s}` by Euler–Maclaurin; accurate for `a ≫ 1`.
fn hurwitz_tail(s: i32, a: f64) -> f64 {
    let sf = s as f64;
    a.powi(1 - s) / (sf - 1.0) + 0.5 * a.powi(-s) + sf * a.powi(-s - 1) / 12.0
        - sf * (sf + 1.0) * (sf + 2.0) * a.powi(-s - 3) / 720.0
}

/// `Π_{n>N} (1 − λ/(n + c)²)`: a direct product over the next block of
/// factors, then the exponential of the remaining logarithmic series.
pub fn unperturbed_tail(lambda: Complex64, shells: usize, offset: f64) -> Complex64 {
    let last = shells + 1000 + (50.0 * lambda.norm().sqrt()).ceil() as usize;
    let mut prod = Complex64::new(1.0, 0.0);
    for n in shells + 1..=last {
        let d = n as f64 + offset;
        prod *= 1.0 - lambda / (d * d);
    }
    let a = last as f64 + 1.0 + offset;
    let mut log = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    for k in 1..=4 {
        power *= lambda;
        log -= power / k as f64 * hurwitz_tail(2 * k, a);
    }
    prod * log.exp()
}

/// An entire function of λ determined by a sequence of zeros near `(n + c)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntireFromZeros {
    /// The shift `c` in the model zeros `(n + c)²`.
    pub offset: f64,
    pub prefactor: f64,
    pub zeros: Vec<f64>,
}

impl EntireFromZeros {
    /// `π Π (λ_n − λ)/n²`; equals `sin ρπ / ρ` for the zeros `n²`.
    pub fn sine(zeros: Vec<f64>) -> Self {
        EntireFromZeros {
            offset: 0.0,
            prefactor: PI,
            zeros,
        }
    }

    /// `Π (λ_n − λ)/(n − 1/2)²`; equals `cos ρπ` for the zeros `(n − 1/2)²`.
    pub fn cosine(zeros: Vec<f64>) -> Self {
        Self::shifted(-0.5, zeros)
    }

    /// `Π (λ_n − λ)/(n + c)²`.
    pub fn shifted(offset: f64, zeros: Vec<f64>) -> Self {
        EntireFromZeros {
            offset,
            prefactor: 1.0,
            zeros,
        }
    }

    pub fn eval_truncated(&self, lambda: Complex64) -> Complex64 {
        self.zeros
            .iter()
            .enumerate()
            .fold(Complex64::new(self.prefactor, 0.0), |acc, (i, &z)| {
                let d = i as f64 + 1.0 + self.offset;
                acc * (z - lambda) / (d * d)
            })
    }

    /// Truncated product times the tail of the unperturbed product.
    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        self.eval_truncated(lambda) * unperturbed_tail(lambda, self.zeros.len(), self.offset)
    }
}

/// Truncated-product evaluation of one branch.
///
/// ```
/// use stargraph::entire::{product_eval, EntireFromZeros};
/// use num_complex::Complex64;
///
/// let zeros: Vec<f64> = (1..=200).map(|n| (n * n) as f64).collect();
/// let theta = EntireFromZeros::sine(zeros);
/// let v = product_eval(&theta, Complex64::new(0.25, 0.0));
/// assert!((v.re - 2.0).abs() < 1e-8);
/// ```
pub fn product_eval(branch: &EntireFromZeros, lambda: Complex64) -> Complex64 {
    branch.eval(lambda)
}

/// Δ or Δ_j as a product over its indexed zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCharacteristic {
    pub constant: f64,
    pub branches: Vec<EntireFromZeros>,
    /// Extra factor fixed by [`ProductCharacteristic::normalize_at`].
    pub normalization: Complex64,
}

impl ProductCharacteristic {
    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        self.branches
            .iter()
            .fold(self.normalization * self.constant, |acc, b| acc * b.eval(lambda))
    }

    /// Rescales so the product equals `target` at `lambda`.
    pub fn normalize_at(&mut self, lambda: Complex64, target: Complex64) {
        self.normalization = Complex64::new(1.0, 0.0);
        self.normalization = target / self.eval(lambda);
    }
}

fn branch_zeros(s: &Spectrum, k: usize) -> Vec<f64> {
    (1..=s.shells).map(|n| s.get(n, k).lambda).collect()
}

/// `Δ(λ) = m Π_{k<m} θ_k(λ) · θ_m(λ)` from the indexed spectrum.
pub fn product_delta(spectrum: &Spectrum) -> ProductCharacteristic {
    let m = spectrum.edges;
    let mut branches: Vec<EntireFromZeros> = (1..m)
        .map(|k| EntireFromZeros::sine(branch_zeros(spectrum, k)))
        .collect();
    branches.push(EntireFromZeros::cosine(branch_zeros(spectrum, m)));
    ProductCharacteristic {
        constant: m as f64,
        branches,
        normalization: Complex64::new(1.0, 0.0),
    }
}

/// `Δ_j(λ) = (m − 1) Π_{k≤m−2} θ_k(λ) · Π (θ_{n,m−1} − λ)/(n − 1 + a)² · Π (θ_{nm} − λ)/(n − a)²`.
pub fn product_delta_j(aux: &AuxSpectrum) -> ProductCharacteristic {
    let s = &aux.spectrum;
    let m = s.edges;
    let a = aux_shift(m);
    let mut branches: Vec<EntireFromZeros> = (1..m - 1).map(|k| EntireFromZeros::sine(branch_zeros(s, k))).collect();
    branches.push(EntireFromZeros::shifted(a - 1.0, branch_zeros(s, m - 1)));
    branches.push(EntireFromZeros::shifted(-a, branch_zeros(s, m)));
    ProductCharacteristic {
        constant: (m - 1) as f64,
        branches,
        normalization: Complex64::new(1.0, 0.0),
    }
}

/// Samples of the Paley–Wiener remainders on a symmetric ρ-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PWRemainder {
    pub rho: Vec<f64>,
    /// `F(ρ) = ρ^m Δ(ρ²) − mρ sin^{m−1}ρπ cos ρπ`.
    pub f: Vec<f64>,
    /// `F_k(ρ) = ρ^{m−1} Δ_k(ρ²) − ρ sin^{m−2}ρπ (m cos²ρπ − 1)`, `k = 1..m−1`.
    pub f_k: Vec<Vec<f64>>,
    pub norm_f: f64,
    pub norm_f_k: Vec<f64>,
}

pub const DEFAULT_PW_SAMPLES: usize = 1201;

/// Leading terms `(mρ sin^{m−1} cos, ρ sin^{m−2}(m cos² − 1))`.
fn pw_leading(m: usize, rho: f64) -> (f64, f64) {
    let (s, c) = (rho * PI).sin_cos();
    let mf = m as f64;
    (
        mf * rho * s.powi(m as i32 - 1) * c,
        rho * s.powi(m as i32 - 2) * (mf * c * c - 1.0),
    )
}

/// Samples `F` and `F_k` from any route that yields `(Δ, [Δ_k])` at real λ.
pub fn pw_from<D>(m: usize, radius: f64, samples: usize, delta: D) -> Result<PWRemainder>
where
    D: Fn(f64) -> Result<(f64, Vec<f64>)> + Sync,
{
    if samples < 3 || radius <= 0.0 {
        return Err(Error::InvalidInput("need R > 0 and at least 3 samples".into()));
    }
    let step = 2.0 * radius / (samples - 1) as f64;
    let rho: Vec<f64> = (0..samples).map(|i| -radius + i as f64 * step).collect();
    let rows: Vec<(f64, Vec<f64>)> = rho
        .par_iter()
        .map(|&r| {
            let (d, dk) = delta(r * r)?;
            let (lead, lead_k) = pw_leading(m, r);
            let f = r.powi(m as i32) * d - lead;
            let fk = dk[..m - 1].iter().map(|x| r.powi(m as i32 - 1) * x - lead_k).collect();
            Ok((f, fk))
        })
        .collect::<Result<_>>()?;
    let f: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let f_k: Vec<Vec<f64>> = (0..m - 1).map(|k| rows.iter().map(|r| r.1[k]).collect()).collect();
    let norm = |v: &[f64]| trapezoid(&v.iter().map(|x| x * x).collect::<Vec<_>>(), step).sqrt();
    Ok(PWRemainder {
        norm_f: norm(&f),
        norm_f_k: f_k.iter().map(|v| norm(v)).collect(),
        rho,
        f,
        f_k,
    })
}

/// Paley–Wiener remainders of Δ and Δ_k computed by direct integration.
pub fn pw_extract(v: &PotentialVector, radius: f64, samples: usize) -> Result<PWRemainder> {
    if radius < 2.0 * v.edges() as f64 {
        return Err(Error::InvalidInput(format!("R = {radius} is below 2m")));
    }
    pw_from(v.edges(), radius, samples, |l| {
        let c = char_delta_real(v, l)?;
        Ok((c.delta, c.delta_j))
    })
}

/// Partial characteristic functions of the first `m − 1` edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialCharacteristicSet {
    pub lambda: Complex64,
    pub delta_pi: Complex64,
    pub delta_pi_1: Complex64,
    pub delta_k: Complex64,
    pub delta_k_1: Complex64,
    /// `Π_{k=2}^{m−1} S_k(π, λ)²`, identically 1 when `m = 2`.
    pub b: Complex64,
    /// `ΔΔ^Π₁ − Δ₁Δ^Π`; present when Δ and Δ₁ were supplied.
    pub j: Option<Complex64>,
}

fn partials<T: Field>(known: &[Basis<T>]) -> [T; 5] {
    let s: Vec<T> = known.iter().map(|b| b.s).collect();
    let rest = product_except(&s[1..], None);
    let cv = assemble(known);
    [
        product_except(&s, None),
        known[0].c * rest,
        cv.delta,
        cv.delta_j[0],
        rest * rest,
    ]
}

fn known_bases(known: &[Potential], lambda: Complex64, lambda_max: f64) -> Result<Vec<Basis<Complex64>>> {
    if known.is_empty() {
        return Err(Error::InvalidInput("at least one known edge is required".into()));
    }
    if lambda.norm() > lambda_max {
        return Err(Error::OutOfRange {
            magnitude: lambda.norm(),
            limit: lambda_max,
        });
    }
    Ok(known.iter().map(|q| propagate(q, lambda)).collect())
}

/// Partial functions from the known potentials `q_1..q_{m−1}`.
pub fn partials_from_known(
    known: &[Potential],
    lambda: Complex64,
    lambda_max: f64,
) -> Result<PartialCharacteristicSet> {
    let [delta_pi, delta_pi_1, delta_k, delta_k_1, b] = partials(&known_bases(known, lambda, lambda_max)?);
    Ok(PartialCharacteristicSet {
        lambda,
        delta_pi,
        delta_pi_1,
        delta_k,
        delta_k_1,
        b,
        j: None,
    })
}

/// Partial functions of `v` together with `J` built from its own Δ and Δ₁.
pub fn partial_chars(v: &PotentialVector, lambda: Complex64) -> Result<PartialCharacteristicSet> {
    let m = v.edges();
    let full = assemble(&bases_complex(v, lambda)?);
    let mut p = partials_from_known(&v.potentials()[..m - 1], lambda, v.config().lambda_max)?;
    p.j = Some(full.delta * p.delta_pi_1 - full.delta_j[0] * p.delta_pi);
    Ok(p)
}

/// Relative size of `B` below which the edge-`m` recovery is refused.
pub const NEAR_SINGULAR_TOL: f64 = 1e-8;

/// `(S_m(π, λ), S′_m(π, λ))` from Δ, Δ₁ and the potentials of the other edges.
pub fn recover_edge_m(
    known: &[Potential],
    lambda_max: f64,
    delta: Complex64,
    delta1: Complex64,
    lambda: Complex64,
) -> Result<(Complex64, Complex64)> {
    let p = partials_from_known(known, lambda, lambda_max)?;
    let m = known.len() + 1;
    let scale = rho_of(lambda).norm().max(1.0).powi(2 * (m as i32 - 2));
    let scaled = p.b.norm() * scale;
    if scaled < NEAR_SINGULAR_TOL {
        return Err(Error::NearSingular {
            lambda: format!("{lambda}"),
            scaled,
        });
    }
    let s = (delta * p.delta_pi_1 - delta1 * p.delta_pi) / p.b;
    let sp = (delta1 * p.delta_k - delta * p.delta_k_1) / p.b;
    Ok((s, sp))
}

/// Coefficients of the last edge's Cauchy data on the nodes `ν_n = n + iα`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyCoefficients {
    pub alpha: f64,
    pub n: Vec<i64>,
    pub nu: Vec<Complex64>,
    pub k_hat: Vec<Complex64>,
    pub h_hat: Vec<Complex64>,
    pub k_norm: f64,
    pub h_norm: f64,
}

pub const DEFAULT_CAUCHY_SHIFT: f64 = 0.5;

/// Builds the coefficients from any route to `(S_m(π, μ), S′_m(π, μ))`.
pub fn cauchy_from<F>(alpha: f64, modes: usize, edge_values: F) -> Result<CauchyCoefficients>
where
    F: Fn(Complex64) -> Result<(Complex64, Complex64)> + Sync,
{
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidInput(format!("shift alpha = {alpha} outside (0, 2]")));
    }
    let n: Vec<i64> = (-(modes as i64)..=modes as i64).collect();
    let nu: Vec<Complex64> = n.iter().map(|&k| Complex64::new(k as f64, alpha)).collect();
    let pairs: Vec<(Complex64, Complex64)> = nu
        .par_iter()
        .map(|&v| {
            let mu = v * v;
            let (s, sp) = edge_values(mu)?;
            Ok((mu * s - v * (v * PI).sin(), v * (sp - (v * PI).cos())))
        })
        .collect::<Result<_>>()?;
    let (k_hat, h_hat): (Vec<Complex64>, Vec<Complex64>) = pairs.into_iter().unzip();
    let l2 = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(CauchyCoefficients {
        alpha,
        k_norm: l2(&k_hat),
        h_norm: l2(&h_hat),
        n,
        nu,
        k_hat,
        h_hat,
    })
}

/// Cauchy coefficients of `q_m` by direct integration.
pub fn cauchy_coeffs(v: &PotentialVector, alpha: f64, modes: usize) -> Result<CauchyCoefficients> {
    let q = v.edge(v.edges() - 1);
    let max = v.config().lambda_max;
    cauchy_from(alpha, modes, |mu| {
        if mu.norm() > max {
            return Err(Error::OutOfRange {
                magnitude: mu.norm(),
                limit: max,
            });
        }
        let b = propagate(q, mu);
        Ok((b.s, b.sp))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_in_ball, StarGraphConfig};
    use crate::ode::{char_delta, closed_form, edge_basis};
    use crate::spectral::{locate_all, SpectrumOptions};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sine_product_with_and_without_tail() {
        let zeros: Vec<f64> = (1..=200).map(|n| (n * n) as f64).collect();
        let theta = EntireFromZeros::sine(zeros);
        let bare = theta.eval_truncated(c(0.25, 0.0)).re;
        // The bare truncation is off by about λ/N.
        assert!((bare - 2.0).abs() > 1e-3 && (bare - 2.0).abs() < 3e-3);
        assert!((theta.eval(c(0.25, 0.0)).re - 2.0).abs() < 1e-8);
        for lambda in [c(-7.0, 0.0), c(3.3, 2.0), c(150.0, -4.0)] {
            let want = closed_form::sinc_scaled(rho_of(lambda), PI);
            assert!((theta.eval(lambda) - want).norm() < 1e-8 * want.norm().max(1.0));
        }
    }

    #[test]
    fn cosine_product_examples() {
        let zeros: Vec<f64> = (1..=50).map(|n| (n as f64 - 0.5).powi(2)).collect();
        let theta = EntireFromZeros::cosine(zeros);
        assert!((theta.eval(c(0.0, 0.0)).re - 1.0).abs() < 1e-15);
        for lambda in [c(2.0, 0.0), c(-3.0, 1.0)] {
            let want = (rho_of(lambda) * PI).cos();
            assert!((theta.eval(lambda) - want).norm() < 1e-8 * want.norm().max(1.0));
        }
    }

    #[test]
    fn tail_series_agrees_with_long_product() {
        let lambda = c(40.0, 3.0);
        let direct: Complex64 = (11..200_000).fold(c(1.0, 0.0), |a, n| a * (1.0 - lambda / (n as f64).powi(2)));
        let rest = unperturbed_tail(lambda, 199_999, 0.0);
        assert!((unperturbed_tail(lambda, 10, 0.0) - direct * rest).norm() < 1e-12);
    }

    #[test]
    fn product_delta_matches_direct_route() {
        let cfg = StarGraphConfig::new(3, 1000).unwrap();
        let v = random_in_ball(&cfg, 1.0, 4).unwrap();
        let (s, aux) = locate_all(&v, 40, &SpectrumOptions { verify_winding: false }).unwrap();
        let mut prod = product_delta(&s);
        let raw = prod.eval(c(-5.0, 0.0));
        let direct = char_delta(&v, c(-5.0, 0.0)).unwrap();
        // The constant from the leading asymptotics is already close to 1.
        assert!((raw / direct.delta - 1.0).norm() < 1e-3);
        prod.normalize_at(c(-1.0, 0.0), char_delta(&v, c(-1.0, 0.0)).unwrap().delta);
        let mut pj = product_delta_j(&aux[0]);
        pj.normalize_at(c(-1.0, 0.0), char_delta(&v, c(-1.0, 0.0)).unwrap().delta_j[0]);
        for lambda in [c(-5.0, 0.0), c(2.0, 1.0), c(10.0, -1.0)] {
            let d = char_delta(&v, lambda).unwrap();
            assert!((prod.eval(lambda) / d.delta - 1.0).norm() < 1e-6, "{lambda}");
            assert!((pj.eval(lambda) / d.delta_j[0] - 1.0).norm() < 1e-6, "{lambda}");
        }
    }

    #[test]
    fn zero_potential_products_are_exact() {
        let v = PotentialVector::zero(StarGraphConfig::new(3, 400).unwrap()).unwrap();
        let (s, aux) = locate_all(&v, 20, &SpectrumOptions::default()).unwrap();
        let p = product_delta(&s);
        let pj = product_delta_j(&aux[1]);
        for lambda in [c(-2.0, 0.0), c(0.7, 0.3), c(5.0, -2.0)] {
            let want = closed_form::delta_zero(3, lambda);
            assert!((p.eval(lambda) - want).norm() < 1e-8 * want.norm());
            let want = closed_form::delta_j_zero(3, lambda);
            assert!((pj.eval(lambda) - want).norm() < 1e-8 * want.norm());
        }
    }

    #[test]
    fn pw_remainders() {
        let v = PotentialVector::zero(StarGraphConfig::new(3, 600).unwrap()).unwrap();
        let pw = pw_extract(&v, 12.0, 601).unwrap();
        assert!(pw.norm_f < 1e-6 && pw.norm_f_k.iter().all(|n| *n < 1e-6));
        assert!(pw_extract(&v, 5.0, 11).is_err());

        let norm = |a: f64| {
            let v = PotentialVector::zero(StarGraphConfig::new(3, 600).unwrap())
                .unwrap()
                .with_edge(0, Potential::from_fn(600, |x| a * (2.0 * x).cos()).unwrap())
                .unwrap();
            pw_extract(&v, 12.0, 601).unwrap()
        };
        let (big, small) = (norm(0.1), norm(0.05));
        let ratio = big.norm_f / small.norm_f;
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
        // F(−ρ) = (−1)^m F(ρ) and F_k(−ρ) = (−1)^{m−1} F_k(ρ).
        let len = big.rho.len();
        for i in 0..len {
            assert!((big.f[i] + big.f[len - 1 - i]).abs() < 1e-10);
            assert!((big.f_k[0][i] - big.f_k[0][len - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn partial_chars_examples_and_assembly() {
        let v = PotentialVector::zero(StarGraphConfig::new(3, 800).unwrap()).unwrap();
        let p = partial_chars(&v, c(0.0625, 0.0)).unwrap();
        assert!((p.delta_pi.re - 8.0).abs() < 1e-9);
        assert!((p.delta_k.re - 4.0).abs() < 1e-9);

        let v = random_in_ball(&StarGraphConfig::new(4, 500).unwrap(), 1.0, 9).unwrap();
        for i in 0..50 {
            let lambda = c(-20.0 + i as f64 * 1.7, (i % 5) as f64 - 2.0);
            let p = partial_chars(&v, lambda).unwrap();
            let full = char_delta(&v, lambda).unwrap();
            let b = edge_basis(v.edge(3), lambda, 1e4).unwrap();
            let d = p.delta_k * b.s_end + p.delta_pi * b.sp_end;
            let d1 = p.delta_k_1 * b.s_end + p.delta_pi_1 * b.sp_end;
            assert!((d - full.delta).norm() <= 1e-9 * full.delta.norm().max(1e-12));
            assert!((d1 - full.delta_j[0]).norm() <= 1e-9 * full.delta_j[0].norm().max(1e-12));
            // B equals the 2x2 determinant of the assembly system.
            let det = p.delta_k * p.delta_pi_1 - p.delta_k_1 * p.delta_pi;
            let scale = (p.delta_k * p.delta_pi_1).norm() + (p.delta_k_1 * p.delta_pi).norm();
            assert!((det - p.b).norm() < 1e-9 * scale);
        }
    }

    #[test]
    fn edge_m_recovery() {
        let v = PotentialVector::zero(StarGraphConfig::new(3, 800).unwrap()).unwrap();
        let lam = c(0.0625, 0.0);
        let full = char_delta(&v, lam).unwrap();
        let (s, _) = recover_edge_m(&v.potentials()[..2], 1e4, full.delta, full.delta_j[0], lam).unwrap();
        assert!((s.re - 2.828_427_124_746).abs() < 1e-9);
        let full = char_delta(&v, c(1.0, 0.0)).unwrap();
        let err = recover_edge_m(&v.potentials()[..2], 1e4, full.delta, full.delta_j[0], c(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NearSingular { .. }));

        let v = random_in_ball(&StarGraphConfig::new(3, 1000).unwrap(), 1.0, 31).unwrap();
        for l in [-1.0, -2.0, -3.0, -5.0] {
            let lam = c(l, 0.0);
            let full = char_delta(&v, lam).unwrap();
            let (s, sp) = recover_edge_m(&v.potentials()[..2], 1e4, full.delta, full.delta_j[0], lam).unwrap();
            let b = edge_basis(v.edge(2), lam, 1e4).unwrap();
            assert!((s / b.s_end - 1.0).norm() < 1e-8);
            assert!((sp / b.sp_end - 1.0).norm() < 1e-8);
            let p = partial_chars(&v, lam).unwrap();
            assert!((p.j.unwrap() / p.b - b.s_end).norm() < 1e-8 * b.s_end.norm());
        }
    }

    #[test]
    fn two_edge_graph_has_unit_b() {
        let v = random_in_ball(&StarGraphConfig::new(2, 400).unwrap(), 1.0, 2).unwrap();
        let p = partial_chars(&v, c(1.0, 0.0)).unwrap();
        assert_eq!(p.b, c(1.0, 0.0));
    }

    #[test]
    fn cauchy_coefficients() {
        let zero = PotentialVector::zero(StarGraphConfig::new(3, 600).unwrap()).unwrap();
        let cc = cauchy_coeffs(&zero, 0.5, 30).unwrap();
        assert!(cc.k_norm < 1e-7 && cc.h_norm < 1e-7);
        assert_eq!(cc.n.len(), 61);
        assert!(cauchy_coeffs(&zero, 0.0, 5).is_err());

        let with = |a: f64| {
            zero.with_edge(2, Potential::from_fn(600, |x| a * x.cos()).unwrap())
                .unwrap()
        };
        // cos x is odd about π/2, so the first-order part of k̂ cancels and
        // the coefficients scale quadratically.
        let big = cauchy_coeffs(&with(0.2), 0.5, 30).unwrap();
        let small = cauchy_coeffs(&with(0.1), 0.5, 30).unwrap();
        let ratio = big.k_norm / small.k_norm;
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
        let even = |a: f64| {
            zero.with_edge(2, Potential::from_fn(600, |x| a * (2.0 * x).cos()).unwrap())
                .unwrap()
        };
        let ratio =
            cauchy_coeffs(&even(0.2), 0.5, 30).unwrap().k_norm / cauchy_coeffs(&even(0.1), 0.5, 30).unwrap().k_norm;
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
        for i in 0..=30 {
            let (neg, pos) = (30 - i, 30 + i);
            assert!((big.k_hat[neg] - big.k_hat[pos].conj()).norm() < 1e-9 * (1.0 + big.k_hat[pos].norm()));
            assert!((big.h_hat[neg] + big.h_hat[pos].conj()).norm() < 1e-9 * (1.0 + big.h_hat[pos].norm()));
        }
    }
}
