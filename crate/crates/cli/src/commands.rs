use std::fs;
use std::path::Path;

use serde_json::json;
use stargraph::entire::{cauchy_coeffs, pw_extract};
use stargraph::graph::{potential_csv, PotentialVector};
use stargraph::inverse::{
    ip1_to_ip2, reconstruct, ReconstructConfig, SpectralDataIP1, SpectralDataIP2, StabilityConfig,
};
use stargraph::ode::char_delta_real;
use stargraph::oracle::{oracle_with, FdMethod};
use stargraph::spectral::{
    locate_all, locate_aux_spectra_with, locate_spectrum_with, weight_numbers_with, SpectrumOptions, WeightOptions,
};
use stargraph::{Error, Result};

use crate::config::RunConfig;
use crate::report::{json_text, mirror, num, to_value, Csv, Outcome};

pub const COMMANDS: &[&str] = &[
    "char-scan",
    "spectrum",
    "aux-spectra",
    "weights",
    "pw-extract",
    "cauchy",
    "oracle",
    "reconstruct",
    "ip1-convert",
    "stability",
];

pub fn run(command: &str, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        "char-scan" => char_scan(cfg),
        "spectrum" => spectrum(cfg),
        "aux-spectra" => aux_spectra(cfg),
        "weights" => weights(cfg),
        "pw-extract" => pw(cfg),
        "cauchy" => cauchy(cfg),
        "oracle" => oracle(cfg),
        "reconstruct" => reconstruct_cmd(cfg),
        "ip1-convert" => ip1_convert(cfg),
        "stability" => stability(cfg),
        other => Err(Error::InvalidInput(format!("unknown command `{other}`"))),
    }
}

fn spectrum_options(cfg: &RunConfig) -> Result<SpectrumOptions> {
    Ok(SpectrumOptions {
        verify_winding: cfg.bool("verify_winding")?,
    })
}

fn n_k(i: usize, m: usize) -> (usize, usize) {
    (i / m + 1, i % m + 1)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn weight_csv(data: &SpectralDataIP2) -> Csv {
    let mut csv = Csv::new(&["n", "k", "j", "lambda", "beta", "beta_17"]);
    for (i, row) in data.beta.iter().enumerate() {
        let (n, k) = n_k(i, data.edges);
        for (j, b) in row.iter().enumerate() {
            csv.push(vec![
                n.to_string(),
                k.to_string(),
                (j + 1).to_string(),
                num(data.lambda[i]),
                num(*b),
                mirror(*b),
            ]);
        }
    }
    csv
}

fn potential_files(v: &PotentialVector, dir: &str) -> Vec<(String, String)> {
    v.potentials()
        .iter()
        .enumerate()
        .map(|(j, p)| (format!("{dir}/edge_{}.csv", j + 1), potential_csv(p)))
        .collect()
}

fn char_scan(cfg: &RunConfig) -> Result<Outcome> {
    let v = cfg.potential()?;
    let (lo, hi, count) = (cfg.f64("scan_min")?, cfg.f64("scan_max")?, cfg.usize("scan_points")?);
    if count < 2 || !(hi > lo) {
        return Err(Error::InvalidInput(
            "scan needs scan_max > scan_min and at least 2 points".into(),
        ));
    }
    let m = v.edges();
    let mut header = vec!["lambda".to_string(), "delta".into(), "delta_17".into()];
    header.extend((1..=m).map(|j| format!("delta_{j}")));
    let mut csv = Csv::new(&header);
    for i in 0..count {
        let lambda = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        let c = char_delta_real(&v, lambda)?;
        let mut row = vec![num(lambda), num(c.delta), mirror(c.delta)];
        row.extend(c.delta_j.iter().map(|d| num(*d)));
        csv.push(row);
    }
    Ok(Outcome {
        summary: format!("scanned {count} points on [{lo}, {hi}]"),
        result: json!({ "points": count, "lambda_min": lo, "lambda_max": hi }),
        csv,
        extra: Vec::new(),
    })
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let v = cfg.potential()?;
    let s = locate_spectrum_with(&v, cfg.usize("shells")?, &spectrum_options(cfg)?)?;
    let mut csv = Csv::new(&[
        "n",
        "k",
        "lambda",
        "lambda_17",
        "rho",
        "multiplicity",
        "remainder",
        "negative",
    ]);
    for e in &s.eigenvalues {
        csv.push(vec![
            e.n.to_string(),
            e.k.to_string(),
            num(e.lambda),
            mirror(e.lambda),
            num(e.rho),
            e.multiplicity.to_string(),
            num(e.remainder),
            e.negative.to_string(),
        ]);
    }
    Ok(Outcome {
        summary: format!("{} eigenvalues in {} shells", s.eigenvalues.len(), s.shells),
        result: to_value(&s),
        csv,
        extra: Vec::new(),
    })
}

fn aux_spectra(cfg: &RunConfig) -> Result<Outcome> {
    let v = cfg.potential()?;
    let (s, aux) = locate_all(&v, cfg.usize("shells")?, &spectrum_options(cfg)?)?;
    let mut csv = Csv::new(&["j", "n", "k", "lambda", "lambda_17", "rho", "remainder"]);
    for a in &aux {
        for e in &a.spectrum.eigenvalues {
            csv.push(vec![
                a.j.to_string(),
                e.n.to_string(),
                e.k.to_string(),
                num(e.lambda),
                mirror(e.lambda),
                num(e.rho),
                num(e.remainder),
            ]);
        }
    }
    let data = SpectralDataIP1::from_forward(&s, &aux);
    Ok(Outcome {
        summary: format!("{} auxiliary spectra, {} shells", aux.len(), s.shells),
        result: to_value(&aux),
        csv,
        extra: vec![("ip1_data.json".into(), json_text(&data))],
    })
}

fn weights(cfg: &RunConfig) -> Result<Outcome> {
    let v = cfg.potential()?;
    let s = locate_spectrum_with(&v, cfg.usize("shells")?, &spectrum_options(cfg)?)?;
    let opts = WeightOptions {
        cross_check: cfg.bool("cross_check")?,
    };
    let w = weight_numbers_with(&v, &s, &opts, None)?;
    let mut csv = Csv::new(&["n", "k", "j", "lambda", "alpha", "beta", "beta_17"]);
    for (i, (a, b)) in w.alpha.iter().zip(&w.beta).enumerate() {
        let (n, k) = n_k(i, w.edges);
        for j in 0..w.edges {
            csv.push(vec![
                n.to_string(),
                k.to_string(),
                (j + 1).to_string(),
                num(w.lambda[i]),
                num(a[j]),
                num(b[j]),
                mirror(b[j]),
            ]);
        }
    }
    let data = SpectralDataIP2::from_forward(&s, &w);
    Ok(Outcome {
        summary: format!(
            "weights at {} eigenvalues, {} clusters",
            w.lambda.len(),
            w.clusters.len()
        ),
        result: to_value(&w),
        csv,
        extra: vec![("ip2_data.json".into(), json_text(&data))],
    })
}

fn pw(cfg: &RunConfig) -> Result<Outcome> {
    let v = cfg.potential()?;
    let r = pw_extract(&v, cfg.f64("pw_radius")?, cfg.usize("pw_samples")?)?;
    let mut header = vec!["rho".to_string(), "f".into()];
    header.extend((1..v.edges()).map(|k| format!("f_{k}")));
    let mut csv = Csv::new(&header);
    for (i, rho) in r.rho.iter().enumerate() {
        let mut row = vec![num(*rho), num(r.f[i])];
        row.extend(r.f_k.iter().map(|f| num(f[i])));
        csv.push(row);
    }
    Ok(Outcome {
        summary: format!("||F|| = {:e}", r.norm_f),
        result: json!({ "norm_f": r.norm_f, "norm_f_k": r.norm_f_k }),
        csv,
        extra: Vec::new(),
    })
}

fn cauchy(cfg: &RunConfig) -> Result<Outcome> {
    let v = cfg.potential()?;
    let c = cauchy_coeffs(&v, cfg.f64("cauchy_alpha")?, cfg.usize("cauchy_modes")?)?;
    let mut csv = Csv::new(&["n", "nu_re", "nu_im", "k_hat_re", "k_hat_im", "h_hat_re", "h_hat_im"]);
    for i in 0..c.n.len() {
        csv.push(vec![
            c.n[i].to_string(),
            num(c.nu[i].re),
            num(c.nu[i].im),
            num(c.k_hat[i].re),
            num(c.k_hat[i].im),
            num(c.h_hat[i].re),
            num(c.h_hat[i].im),
        ]);
    }
    Ok(Outcome {
        summary: format!("||k_hat|| = {:e}, ||h_hat|| = {:e}", c.k_norm, c.h_norm),
        result: json!({ "alpha": c.alpha, "k_norm": c.k_norm, "h_norm": c.h_norm }),
        csv,
        extra: Vec::new(),
    })
}

fn oracle(cfg: &RunConfig) -> Result<Outcome> {
    let v = cfg.potential()?;
    let count = cfg.usize("oracle_count")?;
    let grid = cfg.usize("oracle_grid")?;
    let m = v.edges();
    let neumann = match cfg.usize("neumann")? {
        0 => None,
        j if j < m => Some(j),
        j => return Err(Error::InvalidInput(format!("neumann = {j} is not in 1..{m}"))),
    };
    let fd = oracle_with(&v, grid, count, neumann, FdMethod::Auto)?;
    // One shell beyond the count, so that no requested value sits at the edge.
    let shells = count.div_ceil(m) + 1;
    let opts = spectrum_options(cfg)?;
    let mut solver = match neumann {
        None => locate_spectrum_with(&v, shells, &opts)?.sorted_lambdas(),
        Some(j) => locate_aux_spectra_with(&v, shells, &opts)?[j - 1]
            .spectrum
            .sorted_lambdas(),
    };
    solver.truncate(count);
    let mut csv = Csv::new(&["index", "lambda_oracle", "lambda_solver", "abs_diff"]);
    let mut worst: f64 = 0.0;
    for (i, (a, b)) in fd.iter().zip(&solver).enumerate() {
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
        csv.push(vec![(i + 1).to_string(), num(*a), num(*b), num((a - b).abs())]);
    }
    Ok(Outcome {
        summary: format!("{count} eigenvalues, worst relative difference {worst:e}"),
        result: json!({ "grid": grid, "neumann": neumann, "oracle": fd, "solver": solver, "max_rel_diff": worst }),
        csv,
        extra: Vec::new(),
    })
}

fn reconstruct_config(cfg: &RunConfig) -> Result<ReconstructConfig> {
    let mut rc = ReconstructConfig::new(cfg.graph()?);
    rc.max_iters = cfg.usize("max_iters")?;
    rc.tol = cfg.f64("tol")?;
    rc.damping = cfg.f64("damping")?;
    rc.boundary_repair = cfg.bool("boundary_repair")?;
    Ok(rc)
}

fn reconstruct_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let (data, source) = match cfg.path("data") {
        Some(p) => (read_json::<SpectralDataIP2>(&p)?, None),
        None => {
            let v = cfg.potential()?;
            let s = locate_spectrum_with(&v, cfg.usize("shells")?, &spectrum_options(cfg)?)?;
            let w = weight_numbers_with(&v, &s, &WeightOptions { cross_check: false }, None)?;
            (SpectralDataIP2::from_forward(&s, &w), Some(v))
        }
    };
    let r = reconstruct(&data, &reconstruct_config(cfg)?)?;
    let errors = match &source {
        Some(v) => Some(
            (0..v.edges())
                .map(|j| r.potentials.edge(j).l2_distance(v.edge(j)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let mut csv = Csv::new(&["iteration", "update_norm", "data_residual", "tail_estimate"]);
    for t in &r.trace {
        csv.push(vec![
            t.iteration.to_string(),
            num(t.update_norm),
            num(t.data_residual),
            num(t.tail_estimate),
        ]);
    }
    Ok(Outcome {
        summary: format!(
            "{:?} after {} iterations, residual {:e}",
            r.stop_reason, r.iterations, r.final_residual
        ),
        result: json!({
            "stop_reason": r.stop_reason,
            "iterations": r.iterations,
            "final_residual": r.final_residual,
            "edge_errors": errors,
            "trace": r.trace,
        }),
        csv,
        extra: potential_files(&r.potentials, "potentials"),
    })
}

fn ip1_convert(cfg: &RunConfig) -> Result<Outcome> {
    let data = match cfg.path("data") {
        Some(p) => read_json::<SpectralDataIP1>(&p)?,
        None => {
            let v = cfg.potential()?;
            let (s, aux) = locate_all(&v, cfg.usize("shells")?, &spectrum_options(cfg)?)?;
            SpectralDataIP1::from_forward(&s, &aux)
        }
    };
    let out = ip1_to_ip2(&data, &cfg.graph()?)?;
    Ok(Outcome {
        summary: format!("weights for {} eigenvalues", out.lambda.len()),
        result: to_value(&out),
        csv: weight_csv(&out),
        extra: vec![("ip2_data.json".into(), json_text(&out))],
    })
}

fn stability(cfg: &RunConfig) -> Result<Outcome> {
    let mut sc = StabilityConfig::new(
        cfg.graph()?,
        cfg.f64("q_ball")?,
        cfg.usize("pairs")?,
        cfg.usize("shells")?,
        cfg.u64("seed")?,
    );
    sc.modes = cfg.usize("modes")?;
    sc.max_iters = cfg.usize("stability_iters")?;
    let r = stargraph::inverse::stability_experiment(&sc)?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let mut csv = Csv::new(&[
        "pair",
        "seed_1",
        "seed_2",
        "delta",
        "delta_tilde",
        "lhs",
        "lhs_true",
        "ratio",
        "ratio_ip1",
        "error",
    ]);
    for row in &r.rows {
        csv.push(vec![
            row.pair.to_string(),
            row.seeds[0].to_string(),
            row.seeds[1].to_string(),
            opt(row.delta),
            opt(row.delta_tilde),
            opt(row.lhs),
            opt(row.lhs_true),
            opt(row.ratio),
            opt(row.ratio_ip1),
            row.error.clone().unwrap_or_default().replace(',', ";"),
        ]);
    }
    Ok(Outcome {
        summary: format!(
            "{} pairs, max ratio {}, median {}, {} failures",
            r.rows.len(),
            opt(r.max_ratio),
            opt(r.median_ratio),
            r.failures
        ),
        result: to_value(&r),
        csv,
        extra: Vec::new(),
    })
}
