use rayon::prelude::*;

use super::{reconstruct_ip1, ReconstructConfig, SpectralDataIP1, SpectralDataIP2};
use crate::entire::{product_delta, product_delta_j, ProductCharacteristic};
use crate::error::{Error, Result};
use crate::graph::{PotentialVector, StarGraphConfig};
use crate::ode::char_delta;
use crate::spectral::{
    contour_residues_of, isolating_groups, locate_spectrum_with, weight_numbers_with, AuxSpectrum, Spectrum,
    SpectrumOptions, WeightOptions,
};

/// Residues below this signal spectra that no potential can produce.
const NEGATIVE_TOL: f64 = -1e-8;

fn check_sign(alpha: &[f64], lambda: f64) -> Result<()> {
    let scale = alpha.iter().map(|a| a.abs()).sum::<f64>().max(1.0);
    match alpha.iter().find(|&&a| a < NEGATIVE_TOL * scale) {
        Some(a) => Err(Error::ConversionFailure(format!(
            "residue {a:e} at lambda = {lambda} is negative; the spectra are inconsistent"
        ))),
        None => Ok(()),
    }
}

fn main_product(data: &SpectralDataIP1) -> Result<ProductCharacteristic> {
    Ok(product_delta(&Spectrum::from_indexed(
        data.edges,
        data.shells,
        &data.main,
        None,
    )?))
}

/// Columns `j = 1..m−1` of the weight numbers. Only the zero sets enter:
/// every residue of `Δ_j/Δ` is taken with both functions built as products.
fn product_columns(data: &SpectralDataIP1, delta: &ProductCharacteristic) -> Result<Vec<Vec<f64>>> {
    let m = data.edges;
    let aux: Vec<ProductCharacteristic> = data
        .aux
        .iter()
        .enumerate()
        .map(|(i, a)| {
            Ok(product_delta_j(&AuxSpectrum {
                j: i + 1,
                spectrum: Spectrum::from_indexed(m, data.shells, a, Some(i + 1))?,
            }))
        })
        .collect::<Result<_>>()?;
    let ceiling = (data.shells as f64 + 0.25).powi(2);
    let groups = isolating_groups(&data.main, ceiling)?;
    let mut alpha = vec![vec![0.0; m - 1]; data.main.len()];
    let found: Vec<(Vec<usize>, Vec<f64>)> = groups
        .par_iter()
        .map(|g| {
            let res = contour_residues_of(g.center, 0.5 * g.gap, |z| {
                let d = delta.eval(z);
                Ok(aux.iter().map(|p| p.eval(z) / d).collect())
            })?;
            check_sign(&res, g.center)?;
            Ok((g.members.clone(), res))
        })
        .collect::<Result<_>>()?;
    for (members, res) in found {
        for &i in &members {
            alpha[i] = res.iter().map(|a| a / members.len() as f64).collect();
        }
    }
    Ok(alpha)
}

/// Weight numbers `β_nkm` of the last vertex, from the product `Δ` and the
/// Neumann function `Δ_m` of `hint`. Exact when `hint` is the true
/// potential; otherwise residues move linearly with the error of `hint`.
pub fn hybrid_last_weights(data: &SpectralDataIP1, hint: &PotentialVector) -> Result<Vec<f64>> {
    data.validate()?;
    if hint.edges() != data.edges {
        return Err(Error::InvalidInput("hint has a different number of edges".into()));
    }
    let delta = main_product(data)?;
    last_column(data, &delta, hint, &own_last_column(hint, data.shells)?, true)
}

fn own_last_column(v: &PotentialVector, shells: usize) -> Result<Vec<f64>> {
    let s = locate_spectrum_with(v, shells, &SpectrumOptions { verify_winding: false })?;
    let w = weight_numbers_with(v, &s, &WeightOptions { cross_check: false }, None)?;
    Ok(w.beta.iter().map(|row| row[v.edges() - 1]).collect())
}

/// Index sets of the shell clusters `k < m` and of the single `k = m`
/// eigenvalues, with a circle around each that holds no other eigenvalue.
fn shell_groups(data: &SpectralDataIP1) -> Result<Vec<(Vec<usize>, f64, f64)>> {
    let m = data.edges;
    let ceiling = (data.shells as f64 + 0.25).powi(2);
    let sets = (0..data.shells).flat_map(|n| [(n * m..n * m + m - 1).collect::<Vec<_>>(), vec![n * m + m - 1]]);
    sets.map(|members| {
        let lo = members.iter().map(|&i| data.main[i]).fold(f64::INFINITY, f64::min);
        let hi = members.iter().map(|&i| data.main[i]).fold(f64::NEG_INFINITY, f64::max);
        let outside = data
            .main
            .iter()
            .enumerate()
            .filter(|(i, _)| !members.contains(i))
            .map(|(_, &l)| {
                if l < lo {
                    lo - l
                } else if l > hi {
                    l - hi
                } else {
                    0.0
                }
            })
            .fold(ceiling - hi, f64::min);
        if !(outside > 0.0) {
            return Err(Error::NumericalFailure(format!(
                "eigenvalues of shell cluster [{lo}, {hi}] overlap a neighbouring shell"
            )));
        }
        Ok((members, 0.5 * (lo + hi), 0.5 * (hi - lo) + 0.5 * outside))
    })
    .collect()
}

/// The hint enters only through `Δ_m`, whose error at a near-degenerate pair
/// does not shrink with the gap, so residues are taken over whole shell
/// clusters and split in proportion to `own`, the hint's own weights. Without
/// `strict` a negative cluster residue keeps `own`.
fn last_column(
    data: &SpectralDataIP1,
    delta: &ProductCharacteristic,
    hint: &PotentialVector,
    own: &[f64],
    strict: bool,
) -> Result<Vec<f64>> {
    let m = data.edges;
    let found: Vec<(Vec<usize>, f64)> = shell_groups(data)?
        .into_par_iter()
        .map(|(members, center, radius)| {
            let res = contour_residues_of(center, radius, |z| {
                let d = char_delta(hint, z)?.delta_j[m - 1];
                Ok(vec![d / delta.eval(z)])
            })?;
            if strict {
                check_sign(&res, center)?;
            }
            Ok((members, res[0]))
        })
        .collect::<Result<_>>()?;
    let mut out = own.to_vec();
    for (members, res) in found {
        if res < 0.0 {
            continue;
        }
        let total: f64 = members.iter().map(|&i| own[i].max(0.0)).sum();
        for &i in &members {
            out[i] = if total > 0.0 {
                res * own[i].max(0.0) / total
            } else {
                res / members.len() as f64
            };
        }
    }
    Ok(out)
}

/// Precomputed part of the conversion that depends on the spectra only.
pub(crate) struct Converter {
    data: SpectralDataIP1,
    delta: ProductCharacteristic,
    columns: Vec<Vec<f64>>,
}

impl Converter {
    pub(crate) fn new(data: &SpectralDataIP1) -> Result<Self> {
        data.validate()?;
        let delta = main_product(data)?;
        let columns = product_columns(data, &delta)?;
        Ok(Converter {
            data: data.clone(),
            delta,
            columns,
        })
    }

    /// `own` holds the last-column weights of `hint` itself, if known.
    pub(crate) fn convert(&self, hint: &PotentialVector, own: Option<&[f64]>, strict: bool) -> Result<SpectralDataIP2> {
        if hint.edges() != self.data.edges {
            return Err(Error::InvalidInput("hint has a different number of edges".into()));
        }
        let last = match own {
            Some(own) => last_column(&self.data, &self.delta, hint, own, strict)?,
            None => last_column(
                &self.data,
                &self.delta,
                hint,
                &own_last_column(hint, self.data.shells)?,
                strict,
            )?,
        };
        let beta = self
            .columns
            .iter()
            .zip(last)
            .map(|(c, l)| {
                let mut row = c.clone();
                row.push(l.max(0.0));
                row.iter().map(|b| b.max(0.0)).collect()
            })
            .collect();
        Ok(SpectralDataIP2 {
            edges: self.data.edges,
            shells: self.data.shells,
            lambda: self.data.main.clone(),
            beta,
        })
    }
}

/// One conversion pass with the last column taken from `hint`.
pub fn ip1_to_ip2_with_hint(data: &SpectralDataIP1, hint: &PotentialVector) -> Result<SpectralDataIP2> {
    Converter::new(data)?.convert(hint, None, true)
}

/// Weight numbers from the main and the `m − 1` auxiliary spectra. The last
/// column is made self-consistent by reconstructing the potentials from the
/// spectra on `graph` and evaluating it with the result.
pub fn ip1_to_ip2(data: &SpectralDataIP1, graph: &StarGraphConfig) -> Result<SpectralDataIP2> {
    let rec = reconstruct_ip1(data, &ReconstructConfig::new(*graph))?;
    ip1_to_ip2_with_hint(data, &rec.potentials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_in_ball;
    use crate::spectral::{locate_all, weight_numbers, SpectrumOptions};
    use std::f64::consts::PI;

    fn forward(v: &PotentialVector, shells: usize) -> (SpectralDataIP1, SpectralDataIP2) {
        let (s, aux) = locate_all(v, shells, &SpectrumOptions::default()).unwrap();
        let w = weight_numbers(v, &s).unwrap();
        (
            SpectralDataIP1::from_forward(&s, &aux),
            SpectralDataIP2::from_forward(&s, &w),
        )
    }

    #[test]
    fn zero_spectra_give_closed_form_weights() {
        let v = PotentialVector::zero(StarGraphConfig::new(3, 200).unwrap()).unwrap();
        let (ip1, _) = forward(&v, 12);
        let out = ip1_to_ip2_with_hint(&ip1, &v).unwrap();
        for j in 1..=3 {
            assert!(
                (out.beta_at(1, 3, j) - 1.0 / (6.0 * PI)).abs() < 1e-8,
                "{}",
                out.beta_at(1, 3, j)
            );
            assert!((out.beta_at(1, 1, j) - 2.0 / (3.0 * PI)).abs() < 1e-8);
        }
    }

    #[test]
    fn product_columns_match_forward_weights() {
        let cfg = StarGraphConfig::new(3, 400).unwrap();
        let v = random_in_ball(&cfg, 1.0, 5).unwrap();
        let (ip1, ip2) = forward(&v, 40);
        let out = ip1_to_ip2_with_hint(&ip1, &v).unwrap();
        for n in 1..=3 {
            for k in 1..=3 {
                for j in 1..=3 {
                    let (a, b) = (out.beta_at(n, k, j), ip2.beta_at(n, k, j));
                    assert!((a - b).abs() < 1e-3 * b.abs().max(1e-3), "{n} {k} {j}: {a} {b}");
                }
            }
        }
    }

    #[test]
    fn inconsistent_spectra_are_rejected() {
        let v = PotentialVector::zero(StarGraphConfig::new(3, 200).unwrap()).unwrap();
        let (mut ip1, _) = forward(&v, 6);
        // Moving an auxiliary zero across a main eigenvalue breaks interlacing.
        ip1.aux[0][2] = 0.2;
        let err = ip1_to_ip2_with_hint(&ip1, &v).unwrap_err();
        assert!(matches!(err, Error::ConversionFailure(_)), "{err}");
    }
}
