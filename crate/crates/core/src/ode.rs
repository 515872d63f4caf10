//! Fundamental solutions on one edge and the characteristic functions of the
//! star graph.
//!
//! The first-order system `Y' = A(x)Y`, `A = [[0, 1], [q − λ, 0]]`, is
//! advanced over each grid interval with the fourth-order Magnus step
//!
//! ```text
//! Ω = (h/2)(A₁ + A₂) + (√3/12) h² [A₂, A₁]
//! ```
//!
//! built from the two Gauss–Legendre nodes. For this `A` the commutator is
//! `(q₁ − q₂) diag(1, −1)`, independent of λ, and `Ω² = s²I` with
//! `s² = c² + h²(q̄ − λ)`, so `exp Ω = cosh(s) I + (sinh(s)/s) Ω` is exact.
//! Each step therefore has unit determinant (the Wronskian is conserved to
//! rounding) and reproduces constant potentials exactly at every λ.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Potential, PotentialVector};
use crate::numeric::rho_of;

const SQRT3_OVER_12: f64 = 0.144_337_567_297_406_43;

/// Scalar field the propagator runs over (real λ or complex λ).
pub trait Field:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + From<f64> + Send + Sync
{
    /// `(cosh √z, sinh √z / √z)`, both entire in `z`.
    fn cosh_sinhc(z: Self) -> (Self, Self);
    fn magnitude(self) -> f64;
}

fn series_cosh_sinhc<T: Field>(z: T) -> (T, T) {
    let one = T::from(1.0);
    let ch =
        one + z * (T::from(0.5) + z * (T::from(1.0 / 24.0) + z * (T::from(1.0 / 720.0) + z * T::from(1.0 / 40320.0))));
    let sh = one
        + z * (T::from(1.0 / 6.0)
            + z * (T::from(1.0 / 120.0) + z * (T::from(1.0 / 5040.0) + z * T::from(1.0 / 362880.0))));
    (ch, sh)
}

impl Field for f64 {
    fn cosh_sinhc(z: f64) -> (f64, f64) {
        if z.abs() < 1e-3 {
            series_cosh_sinhc(z)
        } else if z > 0.0 {
            let s = z.sqrt();
            (s.cosh(), s.sinh() / s)
        } else {
            let s = (-z).sqrt();
            let (sin, cos) = s.sin_cos();
            (cos, sin / s)
        }
    }

    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Field for Complex64 {
    fn cosh_sinhc(z: Complex64) -> (Complex64, Complex64) {
        if z.norm() < 1e-3 {
            series_cosh_sinhc(z)
        } else {
            let s = z.sqrt();
            (s.cosh(), s.sinh() / s)
        }
    }

    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// `S(π), S′(π), C(π), C′(π)` for one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis<T> {
    pub s: T,
    pub sp: T,
    pub c: T,
    pub cp: T,
}

impl<T: Field> Basis<T> {
    /// `C S′ − C′ S`; equal to one for an exact fundamental system.
    pub fn wronskian(&self) -> T {
        self.c * self.sp - self.cp * self.s
    }
}

/// Per-edge fundamental solutions at `x = π` for a given λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeBasisValues {
    pub s_end: Complex64,
    pub sp_end: Complex64,
    pub c_end: Complex64,
    pub cp_end: Complex64,
    pub lambda: Complex64,
    /// Branch of √λ with Re ρ ≥ 0.
    pub rho: Complex64,
}

impl EdgeBasisValues {
    pub fn wronskian(&self) -> Complex64 {
        self.c_end * self.sp_end - self.cp_end * self.s_end
    }
}

/// Fundamental solutions on every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTrace {
    pub s: Vec<Complex64>,
    pub sp: Vec<Complex64>,
    pub c: Vec<Complex64>,
    pub cp: Vec<Complex64>,
}

fn check_range(lambda_abs: f64, lambda_max: f64) -> Result<()> {
    if lambda_abs > lambda_max || !lambda_abs.is_finite() {
        return Err(Error::OutOfRange {
            magnitude: lambda_abs,
            limit: lambda_max,
        });
    }
    Ok(())
}

#[inline]
fn step_matrix<T: Field>(h: f64, mean: f64, diff: f64, lambda: T) -> [T; 4] {
    let c = SQRT3_OVER_12 * h * h * diff;
    let abar = T::from(mean) - lambda;
    let z = T::from(c * c) + abar * T::from(h * h);
    let (ch, sh) = T::cosh_sinhc(z);
    let shc = sh * T::from(c);
    [ch + shc, sh * T::from(h), sh * abar * T::from(h), ch - shc]
}

/// Propagates both fundamental solutions from `x = 0` to `x = π`.
pub fn propagate<T: Field>(q: &Potential, lambda: T) -> Basis<T> {
    let h = q.step();
    let zero = T::from(0.0);
    let one = T::from(1.0);
    let (mut s, mut sp, mut c, mut cp) = (zero, one, one, zero);
    for g in q.gauss() {
        let [e00, e01, e10, e11] = step_matrix(h, g.mean, g.diff, lambda);
        let ns = e00 * s + e01 * sp;
        sp = e10 * s + e11 * sp;
        s = ns;
        let nc = e00 * c + e01 * cp;
        cp = e10 * c + e11 * cp;
        c = nc;
    }
    Basis { s, sp, c, cp }
}

/// `S(x, λ)` and `S′(x, λ)` on every grid node for real λ.
pub fn dirichlet_trace(q: &Potential, lambda: f64, lambda_max: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_range(lambda.abs(), lambda_max)?;
    let h = q.step();
    let n = q.grid_points() + 1;
    let mut s = Vec::with_capacity(n);
    let mut sp = Vec::with_capacity(n);
    let (mut y, mut yp) = (0.0, 1.0);
    s.push(y);
    sp.push(yp);
    for g in q.gauss() {
        let [e00, e01, e10, e11] = step_matrix(h, g.mean, g.diff, lambda);
        let ny = e00 * y + e01 * yp;
        yp = e10 * y + e11 * yp;
        y = ny;
        s.push(y);
        sp.push(yp);
    }
    Ok((s, sp))
}

/// Fundamental solutions `S_j, C_j` of `−y″ + q y = λ y` at `x = π`.
pub fn edge_basis(q: &Potential, lambda: Complex64, lambda_max: f64) -> Result<EdgeBasisValues> {
    check_range(lambda.norm(), lambda_max)?;
    let b = if lambda.im == 0.0 {
        let r = propagate(q, lambda.re);
        Basis {
            s: r.s.into(),
            sp: r.sp.into(),
            c: r.c.into(),
            cp: r.cp.into(),
        }
    } else {
        propagate(q, lambda)
    };
    Ok(EdgeBasisValues {
        s_end: b.s,
        sp_end: b.sp,
        c_end: b.c,
        cp_end: b.cp,
        lambda,
        rho: rho_of(lambda),
    })
}

/// Real-λ variant of [`edge_basis`] returning the raw values.
pub fn edge_basis_real(q: &Potential, lambda: f64, lambda_max: f64) -> Result<Basis<f64>> {
    check_range(lambda.abs(), lambda_max)?;
    Ok(propagate(q, lambda))
}

/// Full grid traces of both fundamental solutions.
pub fn edge_trace(q: &Potential, lambda: Complex64, lambda_max: f64) -> Result<EdgeTrace> {
    check_range(lambda.norm(), lambda_max)?;
    let h = q.step();
    let n = q.grid_points() + 1;
    let mut out = EdgeTrace {
        s: Vec::with_capacity(n),
        sp: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        cp: Vec::with_capacity(n),
    };
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let (mut s, mut sp, mut c, mut cp) = (zero, one, one, zero);
    let push = |out: &mut EdgeTrace, s, sp, c, cp| {
        out.s.push(s);
        out.sp.push(sp);
        out.c.push(c);
        out.cp.push(cp);
    };
    push(&mut out, s, sp, c, cp);
    for g in q.gauss() {
        let [e00, e01, e10, e11] = step_matrix(h, g.mean, g.diff, lambda);
        let ns = e00 * s + e01 * sp;
        sp = e10 * s + e11 * sp;
        s = ns;
        let nc = e00 * c + e01 * cp;
        cp = e10 * c + e11 * cp;
        c = nc;
        push(&mut out, s, sp, c, cp);
    }
    Ok(out)
}

/// Δ(λ) and the Neumann-modified Δ_j(λ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharValues<T> {
    pub delta: T,
    /// `Δ_j` for every edge `j = 1..m` (index `j − 1`). The spectra `Λ_j`
    /// use `j ≤ m − 1`; the last entry is needed for the weights at `j = m`.
    pub delta_j: Vec<T>,
}

/// `Σ_i d_i Π_{l≠i} v_l` over the indices not equal to `skip`.
pub(crate) fn product_derivative<T: Field>(values: &[T], derivs: &[T], skip: Option<usize>) -> T {
    let mut acc = T::from(0.0);
    for i in (0..values.len()).filter(|&i| Some(i) != skip) {
        let mut term = derivs[i];
        for l in (0..values.len()).filter(|&l| l != i && Some(l) != skip) {
            term = term * values[l];
        }
        acc = acc + term;
    }
    acc
}

pub(crate) fn product_except<T: Field>(values: &[T], skip: Option<usize>) -> T {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .fold(T::from(1.0), |a, (_, v)| a * *v)
}

/// Assembles Δ and all Δ_j from per-edge boundary values.
pub fn assemble<T: Field>(bases: &[Basis<T>]) -> CharValues<T> {
    let s: Vec<T> = bases.iter().map(|b| b.s).collect();
    let sp: Vec<T> = bases.iter().map(|b| b.sp).collect();
    let delta = product_derivative(&s, &sp, None);
    let delta_j = (0..bases.len())
        .map(|j| bases[j].cp * product_except(&s, Some(j)) + bases[j].c * product_derivative(&s, &sp, Some(j)))
        .collect();
    CharValues { delta, delta_j }
}

/// Per-edge boundary values for real λ.
pub fn bases_real(v: &PotentialVector, lambda: f64) -> Result<Vec<Basis<f64>>> {
    let max = v.config().lambda_max;
    v.potentials().iter().map(|q| edge_basis_real(q, lambda, max)).collect()
}

pub fn bases_complex(v: &PotentialVector, lambda: Complex64) -> Result<Vec<Basis<Complex64>>> {
    check_range(lambda.norm(), v.config().lambda_max)?;
    Ok(v.potentials().iter().map(|q| propagate(q, lambda)).collect())
}

/// Δ(λ) and Δ_j(λ) at complex λ.
pub fn char_delta(v: &PotentialVector, lambda: Complex64) -> Result<CharValues<Complex64>> {
    if lambda.im == 0.0 {
        let r = char_delta_real(v, lambda.re)?;
        return Ok(CharValues {
            delta: r.delta.into(),
            delta_j: r.delta_j.into_iter().map(Complex64::from).collect(),
        });
    }
    Ok(assemble(&bases_complex(v, lambda)?))
}

pub fn char_delta_real(v: &PotentialVector, lambda: f64) -> Result<CharValues<f64>> {
    Ok(assemble(&bases_real(v, lambda)?))
}

/// Entire-function scalings `ρ^{m−1}Δ(ρ²)` and `ρ^{m−2}Δ_k(ρ²)`,
/// `k = 1..m−1`, at real ρ.
pub fn scaled_char(v: &PotentialVector, rho: f64) -> Result<(f64, Vec<f64>)> {
    let m = v.edges() as i32;
    let cv = char_delta_real(v, rho * rho)?;
    let scaled_delta = rho.powi(m - 1) * cv.delta;
    let scaled_k = cv.delta_j[..v.edges() - 1]
        .iter()
        .map(|d| rho.powi(m - 2) * d)
        .collect();
    Ok((scaled_delta, scaled_k))
}

/// Closed forms for the zero potential, used as leading terms and in tests.
pub mod closed_form {
    use num_complex::Complex64;
    use std::f64::consts::PI;

    /// `sin(ρx)/ρ` with the removable singularity at ρ = 0.
    pub fn sinc_scaled(rho: Complex64, x: f64) -> Complex64 {
        if rho.norm() < 1e-4 {
            let z = rho * rho * x * x;
            x * (1.0 - z / 6.0 + z * z / 120.0)
        } else {
            (rho * x).sin() / rho
        }
    }

    /// `(S, S′, C, C′)` at `x` for `q ≡ 0`.
    pub fn zero_basis(lambda: Complex64, x: f64) -> [Complex64; 4] {
        let rho = crate::numeric::rho_of(lambda);
        let s = sinc_scaled(rho, x);
        let sp = (rho * x).cos();
        [s, sp, sp, -lambda * s]
    }

    /// `m sin^{m−1}(ρπ) cos(ρπ) / ρ^{m−1}`.
    pub fn delta_zero(m: usize, lambda: Complex64) -> Complex64 {
        let rho = crate::numeric::rho_of(lambda);
        let s = sinc_scaled(rho, PI);
        (m as f64) * s.powu(m as u32 - 1) * (rho * PI).cos()
    }

    /// `sin^{m−2}(ρπ)(m cos²ρπ − 1) / ρ^{m−2}`.
    pub fn delta_j_zero(m: usize, lambda: Complex64) -> Complex64 {
        let rho = crate::numeric::rho_of(lambda);
        let s = sinc_scaled(rho, PI);
        let c = (rho * PI).cos();
        s.powu(m as u32 - 2) * (m as f64 * c * c - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_in_ball, StarGraphConfig};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const MAX: f64 = 1e4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_potential_closed_forms() {
        let q = Potential::zero(1000).unwrap();
        let b = edge_basis(&q, c(0.25, 0.0), MAX).unwrap();
        assert!((b.s_end.re - 2.0).abs() < 1e-12);
        assert!(b.sp_end.re.abs() < 1e-12);
        assert!(b.c_end.re.abs() < 1e-12);
        assert!((b.cp_end.re + 0.5).abs() < 1e-12);
        assert_eq!(b.rho, c(0.5, 0.0));

        let b = edge_basis(&q, c(-1.0, 0.0), MAX).unwrap();
        assert!((b.s_end.re - PI.sinh()).abs() < 1e-9);
        assert!((b.c_end.re - PI.cosh()).abs() < 1e-9);
        assert_eq!(b.rho, c(0.0, 1.0));

        for lambda in [c(3.7, 0.0), c(-2.0, 1.5), c(40.0, -3.0), c(1e-9, 0.0)] {
            let b = edge_basis(&q, lambda, MAX).unwrap();
            let [s, sp, cc, cp] = closed_form::zero_basis(lambda, PI);
            let scale = 1.0 + s.norm().max(cp.norm());
            assert!((b.s_end - s).norm() < 1e-8 * scale);
            assert!((b.sp_end - sp).norm() < 1e-8 * scale);
            assert!((b.c_end - cc).norm() < 1e-8 * scale);
            assert!((b.cp_end - cp).norm() < 1e-8 * scale);
        }
    }

    #[test]
    fn constant_shift_identity() {
        let one = Potential::constant(500, 1.0).unwrap();
        let zero = Potential::zero(500).unwrap();
        let a = edge_basis(&one, c(1.25, 0.0), MAX).unwrap();
        assert!((a.s_end.re - 2.0).abs() < 1e-10);
        let mut seed = 11u64;
        for _ in 0..20 {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let cst = ((seed >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0;
            let lam = c(
                ((seed >> 3) % 1000) as f64 / 10.0 - 20.0,
                ((seed >> 20) % 7) as f64 - 3.0,
            );
            let shifted = edge_basis(&Potential::constant(500, cst).unwrap(), lam, MAX).unwrap();
            let base = edge_basis(&zero, lam - cst, MAX).unwrap();
            let scale = 1.0 + base.s_end.norm() + base.cp_end.norm();
            assert!((shifted.s_end - base.s_end).norm() < 1e-8 * scale);
            assert!((shifted.cp_end - base.cp_end).norm() < 1e-8 * scale);
        }
    }

    #[test]
    fn out_of_range_is_reported() {
        let q = Potential::zero(100).unwrap();
        let err = edge_basis(&q, c(2e4, 0.0), MAX).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { .. }));
    }

    /// Self-consistency oracle: the same smooth potential on successively
    /// refined grids, with a Richardson-extrapolated reference.
    #[test]
    fn grid_convergence_is_fourth_order() {
        let f = |x: f64| (2.0 * x).cos() + 0.3 * (5.0 * x).sin();
        let value = |m: usize| {
            let q = Potential::from_fn(m, f).unwrap();
            edge_basis(&q, c(4.0, 0.0), MAX).unwrap().s_end.re
        };
        let (a, b, cc) = (value(50), value(100), value(200));
        let reference = cc + (cc - b) / 15.0;
        let e1 = (a - reference).abs();
        let e2 = (b - reference).abs();
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
        // M -> 4M self-consistency for q = cos 2x at λ = 4.
        let q1 = Potential::from_fn(250, |x| (2.0 * x).cos()).unwrap();
        let q4 = Potential::from_fn(1000, |x| (2.0 * x).cos()).unwrap();
        let s1 = edge_basis(&q1, c(4.0, 0.0), MAX).unwrap().s_end.re;
        let s4 = edge_basis(&q4, c(4.0, 0.0), MAX).unwrap().s_end.re;
        assert!((s1 - s4).abs() < 1e-8 * (1.0 + s4.abs()));
    }

    #[test]
    fn char_delta_zero_potential_examples() {
        let cfg = StarGraphConfig::new(3, 800).unwrap();
        let v = PotentialVector::zero(cfg).unwrap();
        let d = char_delta(&v, c(0.0625, 0.0)).unwrap();
        let expected = 3.0 * (PI / 4.0).sin().powi(2) * (PI / 4.0).cos() / 0.0625;
        assert!((d.delta.re - expected).abs() < 1e-9);
        assert!((expected - 16.970_562_748).abs() < 1e-8);

        let d = char_delta(&v, c(0.25, 0.0)).unwrap();
        assert!(d.delta.norm() < 1e-12);
        assert!((d.delta_j[0].re + 2.0).abs() < 1e-10);

        for m in [2usize, 3, 4] {
            let v = PotentialVector::zero(StarGraphConfig::new(m, 400).unwrap()).unwrap();
            for n in 1..4 {
                let d = char_delta_real(&v, (n * n) as f64).unwrap();
                assert!(d.delta.abs() < 1e-9);
            }
            for lambda in [c(2.3, 0.0), c(-1.0, 0.5), c(7.0, 2.0)] {
                let d = char_delta(&v, lambda).unwrap();
                let e = closed_form::delta_zero(m, lambda);
                assert!(
                    (d.delta - e).norm() < 1e-9 * (1.0 + e.norm()),
                    "{m} {lambda} {} {e}",
                    d.delta
                );
                let e = closed_form::delta_j_zero(m, lambda);
                assert!(
                    (d.delta_j[0] - e).norm() < 1e-9 * (1.0 + e.norm()),
                    "{m} {lambda} {} {e}",
                    d.delta_j[0]
                );
            }
        }
    }

    #[test]
    fn scaled_char_examples() {
        let v = PotentialVector::zero(StarGraphConfig::new(3, 800).unwrap()).unwrap();
        let (d, dk) = scaled_char(&v, 0.25).unwrap();
        assert!((d - 1.060_660_171_779_821).abs() < 1e-10);
        let (_, dk2) = scaled_char(&v, 0.5).unwrap();
        assert!((dk2[0] + 1.0).abs() < 1e-10);
        assert_eq!(dk.len(), 2);
        // ρ = 0 is a regular point of the scalings.
        let (d0, _) = scaled_char(&v, 0.0).unwrap();
        assert_eq!(d0, 0.0);
    }

    /// The remainder ρ²Δ − m sin² cos decays like 1/ρ; the constant is
    /// measured over a sweep and must stay finite.
    #[test]
    fn scaled_char_remainder_is_bounded() {
        let v = random_in_ball(&StarGraphConfig::new(3, 1000).unwrap(), 1.0, 21).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=490 {
            let rho = 1.0 + i as f64 * 0.1;
            let (d, _) = scaled_char(&v, rho).unwrap();
            let lead = 3.0 * (rho * PI).sin().powi(2) * (rho * PI).cos();
            worst = worst.max((d - lead).abs() * rho);
        }
        assert!(worst.is_finite() && worst < 10.0, "C = {worst}");
    }

    #[test]
    fn real_lambda_gives_real_values() {
        let v = random_in_ball(&StarGraphConfig::new(4, 400).unwrap(), 1.0, 3).unwrap();
        let lambda = c(5.3, 0.0);
        let d = char_delta(&v, lambda).unwrap();
        assert_eq!(d.delta.im, 0.0);
        // Approach the real axis through the complex path as well.
        let near = char_delta(&v, c(5.3, 1e-12)).unwrap();
        assert!(near.delta.im.abs() <= 1e-9 * (1.0 + near.delta.norm()));
        assert!((near.delta.re - d.delta.re).abs() < 1e-9 * (1.0 + d.delta.norm()));
    }

    #[test]
    fn trace_endpoints_match_basis() {
        let q = Potential::from_fn(300, |x| (3.0 * x).cos()).unwrap();
        let lambda = c(2.5, 0.7);
        let t = edge_trace(&q, lambda, MAX).unwrap();
        let b = edge_basis(&q, lambda, MAX).unwrap();
        assert_eq!(t.s.len(), 301);
        assert_eq!(*t.s.last().unwrap(), b.s_end);
        assert_eq!(*t.cp.last().unwrap(), b.cp_end);
        let (s, sp) = dirichlet_trace(&q, 2.5, MAX).unwrap();
        let r = edge_basis_real(&q, 2.5, MAX).unwrap();
        assert_eq!(*s.last().unwrap(), r.s);
        assert_eq!(*sp.last().unwrap(), r.sp);
    }

    #[test]
    fn delta_j_matches_expanded_product_derivative() {
        let v = random_in_ball(&StarGraphConfig::new(3, 300).unwrap(), 1.0, 8).unwrap();
        let bases = bases_real(&v, 3.3).unwrap();
        let cv = assemble(&bases);
        let (b1, b2, b3) = (bases[0], bases[1], bases[2]);
        let d1 = b1.cp * b2.s * b3.s + b1.c * (b2.sp * b3.s + b2.s * b3.sp);
        assert!((cv.delta_j[0] - d1).abs() < 1e-13);
        let d = b1.sp * b2.s * b3.s + b1.s * b2.sp * b3.s + b1.s * b2.s * b3.sp;
        assert!((cv.delta - d).abs() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn wronskian_is_conserved(seed in 0u64..10_000, re in -50.0f64..900.0, im in -20.0f64..20.0) {
            let v = random_in_ball(&StarGraphConfig::new(2, 200).unwrap(), 2.0, seed).unwrap();
            let b = edge_basis(v.edge(0), c(re, im), MAX).unwrap();
            let w = b.wronskian();
            let scale = 1.0 + (b.c_end * b.sp_end).norm();
            prop_assert!((w - 1.0).norm() < 1e-8 * scale);
        }
    }
}
