use num_complex::Complex64;
use proptest::prelude::*;
use stargraph::entire::product_delta;
use stargraph::graph::{random_in_ball, Potential, PotentialVector, StarGraphConfig};
use stargraph::inverse::{ip1_to_ip2_with_hint, SpectralDataIP1};
use stargraph::ode::char_delta;
use stargraph::oracle::oracle_eigenvalues;
use stargraph::spectral::{locate_all, locate_spectrum, weight_numbers, SpectrumOptions};

fn cos2(m: usize, grid: usize, amps: &[f64], shift: f64) -> PotentialVector {
    let edges = amps
        .iter()
        .map(|&a| Potential::from_fn(grid, |x| a * (2.0 * x).cos() + shift))
        .collect::<Result<Vec<_>, _>>()
        .unwrap();
    PotentialVector::new(StarGraphConfig::new(m, grid).unwrap(), edges).unwrap()
}

#[test]
fn ip1_conversion_matches_forward_weights() {
    let v = random_in_ball(&StarGraphConfig::new(3, 200).unwrap(), 0.5, 11).unwrap();
    let shells = 8;
    let (main, aux) = locate_all(&v, shells, &SpectrumOptions::default()).unwrap();
    let w = weight_numbers(&v, &main).unwrap();
    let ip1 = SpectralDataIP1::from_forward(&main, &aux);
    let ip2 = ip1_to_ip2_with_hint(&ip1, &v).unwrap();
    let m = 3;
    // Weight numbers grow like n², so compare n⁻²β as the metrics do.
    for n in 1..=shells {
        let tol = 1e-3 * (n * n) as f64;
        for k in 1..=m {
            let row = &ip2.beta[(n - 1) * m + k - 1];
            for j in 1..m {
                assert!(
                    (row[j - 1] - w.beta(n, k, j)).abs() < tol,
                    "n={n} k={k} j={j}: {} vs {}",
                    row[j - 1],
                    w.beta(n, k, j)
                );
            }
        }
        // The last column is only fixed per cluster of the shell.
        let got: f64 = (1..m).map(|k| ip2.beta[(n - 1) * m + k - 1][m - 1]).sum();
        let want: f64 = (1..m).map(|k| w.beta(n, k, m)).sum();
        assert!((got - want).abs() < tol, "shell {n}: {got} vs {want}");
        let got = ip2.beta[(n - 1) * m + m - 1][m - 1];
        assert!((got - w.beta(n, m, m)).abs() < tol, "shell {n} k=m");
    }
}

#[test]
fn oracle_agrees_with_shooting_for_a_random_potential() {
    let v = random_in_ball(&StarGraphConfig::new(4, 400).unwrap(), 1.0, 3).unwrap();
    let fd = oracle_eigenvalues(&v, 2000, 12).unwrap();
    let exact = locate_spectrum(&v, 4).unwrap().sorted_lambdas();
    for (a, b) in fd.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-3 * b.abs().max(1.0), "{a} {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn constant_shift_moves_every_eigenvalue(
        amps in proptest::collection::vec(-0.5f64..0.5, 3),
        c in -0.2f64..0.2,
    ) {
        let base = locate_spectrum(&cos2(3, 200, &amps, 0.0), 3).unwrap().sorted_lambdas();
        let moved = locate_spectrum(&cos2(3, 200, &amps, c), 3).unwrap().sorted_lambdas();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((b - a - c).abs() < 1e-8, "{} {} {}", a, b, c);
        }
    }

    #[test]
    fn weights_are_nonnegative(seed in 0u64..1000) {
        let v = random_in_ball(&StarGraphConfig::new(3, 200).unwrap(), 1.0, seed).unwrap();
        let s = locate_spectrum(&v, 4).unwrap();
        let w = weight_numbers(&v, &s).unwrap();
        for row in &w.beta {
            for &b in row {
                prop_assert!(b >= 0.0);
            }
        }
    }

    #[test]
    fn product_matches_direct_evaluation(seed in 0u64..1000, re in -5.0f64..20.0, im in 0.5f64..4.0) {
        let v = random_in_ball(&StarGraphConfig::new(3, 200).unwrap(), 0.5, seed).unwrap();
        let p = product_delta(&locate_spectrum(&v, 40).unwrap());
        let z = Complex64::new(re, im);
        let direct = char_delta(&v, z).unwrap().delta;
        prop_assert!((p.eval(z) - direct).norm() < 2e-3 * direct.norm());
    }
}
