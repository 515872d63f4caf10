//! Small numerical kernels shared across the crate: grid quadrature, the
//! principal square-root branch, a bracketing root finder and the
//! Richardson-extrapolated central difference.

use num_complex::Complex64;

/// Composite trapezoid rule on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Composite Simpson rule; falls back to trapezoid on the last panel when the
/// number of intervals is odd.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 3 {
        return trapezoid(values, h);
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut acc = values[0] + values[even];
    for (i, v) in values.iter().enumerate().take(even).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = acc * h / 3.0;
    if even < intervals {
        total += 0.5 * h * (values[even] + values[even + 1]);
    }
    total
}

/// ρ = √λ with Re ρ ≥ 0; a negative real λ maps to ρ = i√|λ|.
pub fn rho_of(lambda: Complex64) -> Complex64 {
    if lambda.im == 0.0 {
        if lambda.re >= 0.0 {
            Complex64::new(lambda.re.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-lambda.re).sqrt())
        }
    } else {
        let r = lambda.sqrt();
        if r.re < 0.0 {
            -r
        } else {
            r
        }
    }
}

/// Signed square root σ = sign(λ)√|λ|; the real coordinate used for scans.
pub fn sigma_of(lambda: f64) -> f64 {
    lambda.signum() * lambda.abs().sqrt()
}

pub fn lambda_of_sigma(sigma: f64) -> f64 {
    sigma * sigma.abs()
}

/// Brent's method on a bracket `[a, b]` with `fa`, `fb` of opposite sign.
///
/// Returns the abscissa once the bracket is narrower than `xtol`, or early on
/// an exact zero. Errors from `f` are propagated.
pub fn brent<E, F>(f: &mut F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    debug_assert!(fa * fb <= 0.0);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Ok(b)
}

/// Fourth-order central difference built from steps `h` and `2h`.
pub fn richardson_derivative<E, F>(f: &mut F, x: f64, h: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let d1 = f(x + h)? - f(x - h)?;
    let d2 = f(x + 2.0 * h)? - f(x - 2.0 * h)?;
    Ok((8.0 * d1 - d2) / (12.0 * h))
}

/// Trapezoid-rule contour integral ∮ f dz over the circle |z − center| = radius.
pub fn circle_integral<E, F>(f: &mut F, center: Complex64, radius: f64, points: usize) -> Result<Complex64, E>
where
    F: FnMut(Complex64) -> Result<Complex64, E>,
{
    let mut acc = Complex64::new(0.0, 0.0);
    let dtheta = std::f64::consts::TAU / points as f64;
    for i in 0..points {
        let unit = Complex64::from_polar(1.0, dtheta * i as f64);
        let z = center + unit * radius;
        acc += f(z)? * Complex64::i() * unit * radius;
    }
    Ok(acc * dtheta)
}
