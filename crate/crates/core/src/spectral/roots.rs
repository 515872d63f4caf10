//! Root location for functions of the form `Σ_i φ_i' Π_{l≠i} φ_l`.
//!
//! Writing the function as `(Π φ_l) w(λ)` with `w = Σ φ_i'/φ_i`, every
//! quotient `φ'/φ` is strictly decreasing in λ between its poles. Hence `w`
//! has exactly one zero below the first pole and one in every gap between
//! consecutive distinct poles, while a pole shared by `r` of the `φ_i` is a
//! zero of multiplicity `r − 1`. Double roots, which never change sign, are
//! found this way without any sign scan of the product itself.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::PotentialVector;
use crate::numeric::{brent, lambda_of_sigma, sigma_of};
use crate::ode::{propagate, Basis};

/// Scan step in σ = sign(λ)√|λ| for the zeros of single-edge functions.
const SCAN_STEP: f64 = 0.125;

/// Zeros of `S_i(π, ·)` and `C_i(π, ·)` for every edge.
#[derive(Debug, Clone)]
pub(crate) struct EdgeZeros {
    pub s: Vec<f64>,
    pub c: Vec<f64>,
}

fn xtol(lambda: f64) -> f64 {
    1e-15 * lambda.abs().max(1.0)
}

fn refine_zeros(grid: &[f64], values: &[f64], f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let brackets: Vec<usize> = (1..grid.len())
        .filter(|&i| (values[i - 1] > 0.0) != (values[i] > 0.0))
        .collect();
    brackets
        .par_iter()
        .map(|&i| {
            let mut g = |x: f64| Ok::<_, std::convert::Infallible>(f(x));
            let (a, b) = (grid[i - 1], grid[i]);
            brent(&mut g, a, b, values[i - 1], values[i], xtol(b)).unwrap_or(0.5 * (a + b))
        })
        .collect()
}

/// Locates every zero of `S_i(π, λ)` and `C_i(π, λ)` in `[lambda_low, σ_hi²]`.
pub(crate) fn edge_zeros(v: &PotentialVector, lambda_low: f64, sigma_hi: f64) -> Result<Vec<EdgeZeros>> {
    let hi = lambda_of_sigma(sigma_hi);
    let limit = v.config().lambda_max;
    if hi > limit || lambda_low.abs() > limit {
        return Err(Error::OutOfRange {
            magnitude: hi.max(lambda_low.abs()),
            limit,
        });
    }
    let s0 = sigma_of(lambda_low);
    let count = ((sigma_hi - s0) / SCAN_STEP).ceil() as usize + 1;
    let grid: Vec<f64> = (0..count)
        .map(|i| lambda_of_sigma((s0 + i as f64 * SCAN_STEP).min(sigma_hi)))
        .collect();
    let samples: Vec<Vec<Basis<f64>>> = grid
        .par_iter()
        .map(|&l| v.potentials().iter().map(|q| propagate(q, l)).collect())
        .collect();
    Ok((0..v.edges())
        .map(|i| {
            let q = v.edge(i);
            let sv: Vec<f64> = samples.iter().map(|b| b[i].s).collect();
            let cv: Vec<f64> = samples.iter().map(|b| b[i].c).collect();
            EdgeZeros {
                s: refine_zeros(&grid, &sv, |l| propagate(q, l).s),
                c: refine_zeros(&grid, &cv, |l| propagate(q, l).c),
            }
        })
        .collect())
}

/// Which boundary function each edge contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EdgeFn {
    Dirichlet,
    Neumann,
}

/// `(φ, φ')` per edge at real λ for the selected boundary functions.
fn select(bases: &[Basis<f64>], kinds: &[EdgeFn]) -> (Vec<f64>, Vec<f64>) {
    bases
        .iter()
        .zip(kinds)
        .map(|(b, k)| match k {
            EdgeFn::Dirichlet => (b.s, b.sp),
            EdgeFn::Neumann => (b.c, b.cp),
        })
        .unzip()
}

pub(crate) fn kinds_for(m: usize, neumann: Option<usize>) -> Vec<EdgeFn> {
    (0..m)
        .map(|i| {
            if Some(i) == neumann {
                EdgeFn::Neumann
            } else {
                EdgeFn::Dirichlet
            }
        })
        .collect()
}

/// Evaluates `(w, Σ φ_i' Π_{l≠i} φ_l)` at real λ.
fn secular(v: &PotentialVector, kinds: &[EdgeFn], lambda: f64) -> (f64, f64) {
    let bases: Vec<Basis<f64>> = v.potentials().iter().map(|q| propagate(q, lambda)).collect();
    let (phi, dphi) = select(&bases, kinds);
    let w = phi.iter().zip(&dphi).map(|(p, d)| d / p).sum();
    (w, crate::ode::product_derivative(&phi, &dphi, None))
}

/// Root with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Root {
    pub lambda: f64,
    pub multiplicity: usize,
}

fn merge_tol(lambda: f64) -> f64 {
    1e-10 * lambda.abs().max(1.0)
}

/// Finds the zero of `w` strictly between two poles (or below the first).
fn root_between(
    v: &PotentialVector,
    kinds: &[EdgeFn],
    mut left: f64,
    mut right: f64,
    left_known: Option<(f64, f64)>,
) -> Result<f64> {
    let mut fl = left_known.map(|(_, d)| d);
    let mut fr = None;
    for _ in 0..200 {
        if let (Some(a), Some(b)) = (fl, fr) {
            let mut g = |x: f64| Ok::<_, Error>(secular(v, kinds, x).1);
            return brent(&mut g, left, right, a, b, xtol(right));
        }
        let mid = 0.5 * (left + right);
        if mid <= left || mid >= right {
            return Ok(mid);
        }
        let (w, d) = secular(v, kinds, mid);
        if w == 0.0 {
            return Ok(mid);
        } else if w > 0.0 {
            left = mid;
            fl = Some(d);
        } else {
            right = mid;
            fr = Some(d);
        }
    }
    Err(Error::NumericalFailure(format!(
        "no root isolated in ({left}, {right})"
    )))
}

/// All zeros of the secular product below the last pole, in ascending order.
pub(crate) fn secular_roots(
    v: &PotentialVector,
    kinds: &[EdgeFn],
    poles: &[f64],
    lambda_low: f64,
) -> Result<Vec<Root>> {
    let mut sorted = poles.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for p in sorted {
        match groups.last_mut() {
            Some((c, r)) if (p - *c).abs() <= merge_tol(p) => {
                *c += (p - *c) / (*r as f64 + 1.0);
                *r += 1;
            }
            _ => groups.push((p, 1)),
        }
    }
    if groups.is_empty() {
        return Ok(Vec::new());
    }
    let (w_low, d_low) = secular(v, kinds, lambda_low);
    if w_low <= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "secular function not positive at the lower bound {lambda_low}"
        )));
    }
    let first = root_between(v, kinds, lambda_low, groups[0].0, Some((w_low, d_low)))?;
    let gaps: Vec<f64> = groups
        .par_windows(2)
        .map(|w| root_between(v, kinds, w[0].0, w[1].0, None))
        .collect::<Result<_>>()?;
    let mut roots = vec![Root {
        lambda: first,
        multiplicity: 1,
    }];
    for (i, (pole, r)) in groups.iter().enumerate() {
        if *r > 1 {
            roots.push(Root {
                lambda: *pole,
                multiplicity: r - 1,
            });
        }
        if let Some(g) = gaps.get(i) {
            roots.push(Root {
                lambda: *g,
                multiplicity: 1,
            });
        }
    }
    Ok(roots)
}

/// Net number of zeros of an analytic `f` inside the positively oriented
/// polygon `corners`, by continuous tracking of `arg f` along the boundary.
pub(crate) fn winding_count<F>(f: &F, corners: &[Complex64]) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    const SAMPLES: usize = 16;
    let mut total = 0.0;
    for s in 0..corners.len() {
        let (a, b) = (corners[s], corners[(s + 1) % corners.len()]);
        let pts: Vec<Complex64> = (0..=SAMPLES)
            .map(|i| a + (b - a) * (i as f64 / SAMPLES as f64))
            .collect();
        let vals: Vec<Complex64> = pts.par_iter().map(|&z| f(z)).collect::<Result<_>>()?;
        for i in 0..SAMPLES {
            total += arg_increment(f, pts[i], vals[i], pts[i + 1], vals[i + 1], 0)?;
        }
    }
    Ok(total / (2.0 * PI))
}

fn arg_increment<F>(f: &F, za: Complex64, fa: Complex64, zb: Complex64, fb: Complex64, depth: u32) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if fa.norm() == 0.0 || fb.norm() == 0.0 || !(fa.norm().is_finite() && fb.norm().is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "zero or overflow on the contour near {za}"
        )));
    }
    let d = (fb / fa).arg();
    if d.abs() <= PI / 4.0 || depth >= 30 {
        return Ok(d);
    }
    let zm = 0.5 * (za + zb);
    let fm = f(zm)?;
    Ok(arg_increment(f, za, fa, zm, fm, depth + 1)? + arg_increment(f, zm, fm, zb, fb, depth + 1)?)
}
