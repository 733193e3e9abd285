//! Implementations of the experiment subcommands. Every command resolves
//! its parameters (flags over config-file values over defaults), runs the
//! corresponding library pipeline, and emits a deterministic report.

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use ep_spectra_core::epn_models::{
    chain_residuals, ep_sweep, standard_direction, transition_matrix, EPNModel,
};
use ep_spectra_core::epn_perturbation::{
    classify_perturbation, exponent_fit_family, rescale_reduced, solve_secular, Classification,
    PerturbationFamily, SecularMethod, SecularMode,
};
use ep_spectra_core::ic_spectral::{
    convergence_study, converged_count, metric_operator, oscillator_spectrum,
    parallelization_diagnostics, pt_residual, OscillatorSpec,
};
use ep_spectra_core::iep_basis::{assemble_chain_basis, basis_diagnostics};
use ep_spectra_core::iep_perturbation::{
    closure_boundary_zero, direct_reference, iep_jordan_matrix,
};
use ep_spectra_core::numerics::fro_norm;

use crate::report::{cmatrix, cplx, cvec, CsvTable, RunWriter};

// ── parameter parsing ───────────────────────────────────────────────

/// `start:end:count` with linear spacing, endpoints included.
pub fn parse_linear_grid(spec: &str) -> Result<Vec<f64>> {
    let (start, end, count) = split_grid(spec)?;
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
        .collect())
}

/// `start:end:count` with geometric spacing, endpoints included.
pub fn parse_geometric_grid(spec: &str) -> Result<Vec<f64>> {
    let (start, end, count) = split_grid(spec)?;
    if start <= 0.0 || end <= 0.0 {
        bail!("geometric grid endpoints must be positive: {spec:?}");
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let (ls, le) = (start.ln(), end.ln());
    Ok((0..count)
        .map(|i| (ls + (le - ls) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

fn split_grid(spec: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid spec {spec:?} must have the form start:end:count");
    }
    let start: f64 = parts[0].parse().context("grid start")?;
    let end: f64 = parts[1].parse().context("grid end")?;
    let count: usize = parts[2].parse().context("grid count")?;
    if count == 0 {
        bail!("grid count must be positive");
    }
    Ok((start, end, count))
}

fn parse_direction(spec: &str, j: usize) -> Result<Vec<f64>> {
    if spec == "standard" {
        return Ok(standard_direction(j));
    }
    let values: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("direction entry {s:?}")))
        .collect::<Result<_>>()?;
    if values.len() != j {
        bail!("direction needs J = {j} entries, got {}", values.len());
    }
    Ok(values)
}

fn parse_usize_list(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("list entry {s:?}")))
        .collect()
}

pub fn family_from_name(name: &str, n: usize, seed: u64) -> Result<PerturbationFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let family = match name {
        "corner" => PerturbationFamily::corner(n, 1.0),
        "admissible" => PerturbationFamily::admissible_pattern(n),
        "diagonal" => {
            let mus: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
                .collect();
            PerturbationFamily::diagonal(&mus)
        }
        "random-benign" => {
            let mut uniform = || rng.gen_range(0.0..1.0);
            PerturbationFamily::random_benign(n, &mut uniform)
        }
        "random-malign" => {
            let mut uniform = || rng.gen_range(0.0..1.0);
            PerturbationFamily::random_malign(n, &mut uniform)
        }
        other => bail!(
            "unknown family {other:?} (expected corner, admissible, diagonal, random-benign or random-malign)"
        ),
    };
    Ok(family)
}

fn dense_matrix(n: usize, seed: u64) -> Array2<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, n), |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

// ── subcommands ─────────────────────────────────────────────────────

pub fn epn_sweep(writer: &RunWriter, j: usize, direction: &str, t_grid: &str, seed: u64) -> Result<()> {
    let dir = parse_direction(direction, j)?;
    let grid = parse_linear_grid(t_grid)?;
    let mut model = EPNModel::new(j, dir.clone())?;
    let report = ep_sweep(&mut model, &grid)?;
    let located = report.located;
    let params = json!({
        "J": j, "direction": dir, "t_grid": t_grid, "seed": seed,
    });
    let results = json!({
        "located_ep": {
            "t_ep": located.t_ep,
            "E_ep": cplx(located.e_ep),
            "gap_at_ep": located.gap_at_ep,
        },
        "grid_points": report.points.len(),
    });
    let table = CsvTable {
        name: String::new(),
        header: "t,min_gap,max_gap,max_overlap,defective".into(),
        rows: report
            .points
            .iter()
            .map(|p| {
                format!(
                    "{},{},{},{},{}",
                    p.t, p.min_gap, p.max_gap, p.max_overlap, p.defective as u8
                )
            })
            .collect(),
    };
    writer.finish(params.clone(), results, &[table], params)
}

pub fn epn_canon(writer: &RunWriter, j: usize, direction: &str, t_grid: &str, seed: u64) -> Result<()> {
    let dir = parse_direction(direction, j)?;
    let grid = parse_linear_grid(t_grid)?;
    let mut model = EPNModel::new(j, dir.clone())?;
    let report = ep_sweep(&mut model, &grid)?;
    let located = report.located;
    let h = model.hamiltonian_at(located.t_ep);
    let tm = transition_matrix(&h, located.e_ep)?;
    let residuals = chain_residuals(&h, &tm.r, located.e_ep);
    let params = json!({
        "J": j, "direction": dir, "t_grid": t_grid, "seed": seed,
    });
    let results = json!({
        "located_ep": {
            "t_ep": located.t_ep,
            "E_ep": cplx(located.e_ep),
            "gap_at_ep": located.gap_at_ep,
        },
        "jordan_eigenvalue": cplx(tm.jordan_eigenvalue),
        "similarity_residual": tm.similarity_residual,
        "inverse_condition": tm.inverse_condition,
        "chain_residuals": residuals,
        "R": cmatrix(&tm.r),
        "h_norm": fro_norm(&h),
    });
    let table = CsvTable {
        name: String::new(),
        header: "column,chain_residual".into(),
        rows: residuals
            .iter()
            .enumerate()
            .map(|(k, r)| format!("{k},{r}"))
            .collect(),
    };
    writer.finish(params.clone(), results, &[table], params)
}

pub fn epn_perturb(
    writer: &RunWriter,
    n: usize,
    family_name: &str,
    lambda: f64,
    mode_spec: &str,
    seed: u64,
) -> Result<()> {
    let mode = match mode_spec {
        "direct" => SecularMode::Direct,
        other => match other.strip_prefix("series:") {
            Some(order) => SecularMode::Series(order.parse().context("series order")?),
            None => bail!("mode must be `direct` or `series:<order>`"),
        },
    };
    let family = family_from_name(family_name, n, seed)?;
    if lambda < 0.0 {
        bail!("lambda must be nonnegative");
    }
    // the secular machinery takes V with (lambda V) = family at this scale
    let v = if lambda > 0.0 {
        family.realize(lambda).mapv(|x| x / lambda)
    } else {
        family.mu.clone()
    };
    let solution = solve_secular(&v, lambda, mode)?;
    let y_last: Vec<f64> = solution
        .y_vectors
        .iter()
        .map(|y| y[y.len() - 1].norm())
        .collect();
    let params = json!({
        "N": n, "family": family_name, "lambda": lambda, "mode": mode_spec, "seed": seed,
    });
    let y_vectors: Vec<Value> = solution
        .y_vectors
        .iter()
        .map(|y| cvec(y.as_slice().expect("contiguous")))
        .collect();
    let results = json!({
        "roots": cvec(&solution.roots),
        "reality_flags": solution.reality_flags,
        "y_vectors": y_vectors,
        "omega_magnitudes": y_last,
        "method": match solution.method {
            SecularMethod::Direct => json!("direct"),
            SecularMethod::Series { order } => json!(format!("series:{order}")),
        },
        "classification": classification_json(&family),
    });
    let table = CsvTable {
        name: String::new(),
        header: "root_re,root_im,real,omega_magnitude".into(),
        rows: solution
            .roots
            .iter()
            .zip(solution.reality_flags.iter())
            .zip(y_last.iter())
            .map(|((root, flag), omega)| {
                format!("{},{},{},{}", root.re, root.im, *flag as u8, omega)
            })
            .collect(),
    };
    writer.finish(params.clone(), results, &[table], params)
}

fn classification_json(family: &PerturbationFamily) -> Value {
    match classify_perturbation(family) {
        Classification::Benign => json!({"benign": true, "witness": Value::Null}),
        Classification::Malign { witness } => {
            json!({"benign": false, "witness": [witness.0, witness.1]})
        }
    }
}

pub fn epn_classify(
    writer: &RunWriter,
    n: usize,
    family_name: &str,
    lambda_grid: &str,
    fit_grid: &str,
    seed: u64,
) -> Result<()> {
    let family = family_from_name(family_name, n, seed)?;
    let lambdas = parse_geometric_grid(lambda_grid)?;
    let mut rescale_rows = Vec::new();
    let mut rescale_json = Vec::new();
    for &lambda in &lambdas {
        let (_, max_abs) = rescale_reduced(&family, lambda)?;
        rescale_rows.push(format!("{lambda},{max_abs}"));
        rescale_json.push(json!({"lambda": lambda, "max_abs": max_abs}));
    }
    let fit_lambdas = parse_geometric_grid(fit_grid)?;
    let h = ep_spectra_core::epn_models::jordan_block(n, Complex64::default());
    let fit = exponent_fit_family(&h, &family, &fit_lambdas);
    let fit_json = match &fit {
        Ok(f) => json!({"slope": f.slope, "stderr": f.stderr}),
        Err(e) => json!({"error": e.to_string()}),
    };
    let params = json!({
        "N": n, "family": family_name, "lambda_grid": lambda_grid,
        "fit_grid": fit_grid, "seed": seed,
    });
    let results = json!({
        "classification": classification_json(&family),
        "max_mu": family.max_mu(),
        "rescale": rescale_json,
        "exponent_fit": fit_json,
    });
    let mut tables = vec![CsvTable {
        name: String::new(),
        header: "lambda,max_abs".into(),
        rows: rescale_rows,
    }];
    if let Ok(f) = &fit {
        tables.push(CsvTable {
            name: "displacements".into(),
            header: "lambda,max_displacement".into(),
            rows: f
                .displacements
                .iter()
                .map(|(l, d)| format!("{l},{d}"))
                .collect(),
        });
    }
    writer.finish(params.clone(), results, &tables, params)
}

pub fn ic_spectrum(
    writer: &RunWriter,
    delta: u8,
    m_list: &str,
    n_max: Option<usize>,
    metric_k: Option<usize>,
    seed: u64,
) -> Result<()> {
    let ms = parse_usize_list(m_list)?;
    let study = convergence_study(delta, &ms)?;
    let working_m = *ms.last().expect("nonempty M list");
    let spec = OscillatorSpec::new(delta, working_m)?;
    let (h, sd) = oscillator_spectrum(&spec)?;
    let refined_spec = OscillatorSpec::new(delta, 2 * working_m)?;
    let (_, sd_refined) = oscillator_spectrum(&refined_spec)?;
    let window = converged_count(&sd, &sd_refined);
    let pt = pt_residual(&h);

    let energies = study.energies.last().expect("nonempty study");
    let converged_n = study.converged_count();
    let level_rows: Vec<String> = energies
        .iter()
        .enumerate()
        .map(|(n, e)| {
            let flag = study.converged.get(n).copied().unwrap_or(false);
            format!("{n},{},{},{}", e.re, e.im, flag as u8)
        })
        .collect();

    // an explicit n_max propagates its own range errors; the default caps
    // itself inside the certified window
    let parallelization = match (n_max, window) {
        (None, w) if w <= 2 => Value::Null,
        (cap, w) => {
            let cap = cap.unwrap_or_else(|| w.saturating_sub(1).min(15));
            let report = parallelization_diagnostics(&sd, cap, &sd_refined)?;
            json!({
                "overlaps_right": report.overlaps_right,
                "overlaps_left": report.overlaps_left,
                "kappa": report.kappa,
                "converged_count": report.converged_count,
            })
        }
    };
    let parallel_table = if let Value::Object(map) = &parallelization {
        let s: Vec<f64> = serde_json::from_value(map["overlaps_right"].clone())?;
        let sl: Vec<f64> = serde_json::from_value(map["overlaps_left"].clone())?;
        let kappa: Vec<f64> = serde_json::from_value(map["kappa"].clone())?;
        Some(CsvTable {
            name: "parallelization".into(),
            header: "n,overlap_right,overlap_left,kappa".into(),
            rows: (0..kappa.len())
                .map(|i| {
                    let sr = s.get(i).map_or(String::new(), |v| v.to_string());
                    let slv = sl.get(i).map_or(String::new(), |v| v.to_string());
                    format!("{i},{sr},{slv},{}", kappa[i])
                })
                .collect(),
        })
    } else {
        None
    };

    let metric = match metric_k {
        Some(k) => {
            let report = metric_operator(&h, &sd, k)?;
            json!({
                "K": k,
                "quasi_hermiticity_residual": report.quasi_hermiticity_residual,
                "min_eigenvalue": report.min_eigenvalue,
                "min_eigenvalue_span": report.min_eigenvalue_span,
            })
        }
        None => Value::Null,
    };

    let params = json!({
        "delta": delta, "M": ms, "n_max": n_max, "metric_K": metric_k, "seed": seed,
    });
    let results = json!({
        "converged_count": converged_n,
        "window_vs_refined": window,
        "pt_residual": pt,
        "energies": cvec(energies),
        "converged": study.converged,
        "parallelization": parallelization,
        "metric": metric,
    });
    let mut tables = vec![CsvTable {
        name: String::new(),
        header: "level,E_re,E_im,converged".into(),
        rows: level_rows,
    }];
    if let Some(t) = parallel_table {
        tables.push(t);
    }
    writer.finish(params.clone(), results, &tables, params)
}

pub fn iep_basis(
    writer: &RunWriter,
    delta: u8,
    m: usize,
    k: Option<usize>,
    p_max: usize,
    seed: u64,
) -> Result<()> {
    let spec = OscillatorSpec::new(delta, m)?;
    let (h, sd) = oscillator_spectrum(&spec)?;
    let (_, sd_refined) = oscillator_spectrum(&OscillatorSpec::new(delta, 2 * m)?)?;
    let window = converged_count(&sd, &sd_refined);
    let k = k.unwrap_or_else(|| (window / 4).max(2));
    if k + p_max > window {
        bail!(
            "K + p_max = {} exceeds the converged window of {window} levels",
            k + p_max
        );
    }
    let cb = assemble_chain_basis(&h, &sd, k, p_max)?;
    let diag = basis_diagnostics(&cb, &sd)?;
    let params = json!({
        "delta": delta, "M": m, "K": k, "p_max": p_max, "seed": seed,
    });
    let coefficients: Vec<Value> = cb
        .coefficients
        .rows()
        .iter()
        .map(|row| cvec(row))
        .collect();
    let results = json!({
        "window": window,
        "interior_residual_max": cb.interior_residual_max(),
        "boundary_residual": cb.boundary_residual(),
        "column_residuals": cb.column_residuals,
        "sigma_min_chain": diag.sigma_min_chain,
        "sigma_min_eig": diag.sigma_min_eig,
        "overlap_chain": diag.overlap_chain,
        "overlap_eig": diag.overlap_eig,
        "coefficients": coefficients,
    });
    let table = CsvTable {
        name: String::new(),
        header: "column,residual,overlap_chain,overlap_eig".into(),
        rows: (0..cb.columns())
            .map(|j| {
                let oc = diag
                    .overlap_chain
                    .get(j)
                    .map_or(String::new(), |v| v.to_string());
                let oe = diag
                    .overlap_eig
                    .get(j)
                    .map_or(String::new(), |v| v.to_string());
                format!("{j},{},{oc},{oe}", cb.column_residuals[j])
            })
            .collect(),
    };
    writer.finish(params.clone(), results, &[table], params)
}

pub fn iep_perturb(
    writer: &RunWriter,
    delta: u8,
    m: usize,
    n_trunc: usize,
    family: &str,
    lambda_grid: &str,
    seed: u64,
) -> Result<()> {
    let spec = OscillatorSpec::new(delta, m)?;
    let (_, sd) = oscillator_spectrum(&spec)?;
    let lambdas = parse_geometric_grid(lambda_grid)?;
    let truncations = [16usize, n_trunc, 32];
    let max_trunc = truncations.iter().copied().max().unwrap();
    if sd.len() < max_trunc {
        bail!(
            "basis too small: {} physical levels available, {max_trunc} needed",
            sd.len()
        );
    }
    let v = match family {
        "dense" => dense_matrix(max_trunc, seed),
        "diagonal" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Array2::from_shape_fn((max_trunc, max_trunc), |(i, j)| {
                if i == j {
                    Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
                } else {
                    Complex64::default()
                }
            })
        }
        other => bail!("unknown perturbation {other:?} (expected dense or diagonal)"),
    };
    let psi0_0 = Complex64::new(1.0, 0.0);

    // truncation-dependence report for the closure
    let mut closure_per_trunc = Vec::new();
    for &nt in &truncations {
        let energies: Vec<Complex64> = sd.eigenvalues.iter().take(nt).cloned().collect();
        let sub = v.slice(ndarray::s![..nt, ..nt]).to_owned();
        let result = closure_boundary_zero(&energies, &sub, psi0_0, nt)?;
        closure_per_trunc.push(json!({
            "n_trunc": nt,
            "E1": cplx(result.e1),
        }));
    }

    let energies: Vec<Complex64> = sd.eigenvalues.iter().take(n_trunc).cloned().collect();
    let sub = v.slice(ndarray::s![..n_trunc, ..n_trunc]).to_owned();
    let closed = closure_boundary_zero(&energies, &sub, psi0_0, n_trunc)?;
    let j_iep = iep_jordan_matrix(&energies);

    // finite-difference cross-check of the first-order coefficient
    let e_a = direct_reference(&j_iep, &sub, 1e-6)?.paired[0];
    let e_b = direct_reference(&j_iep, &sub, 2e-6)?.paired[0];
    let fd_slope = (e_b - e_a) / Complex64::new(1e-6, 0.0);
    let fd_rel = (closed.e1 - fd_slope).norm() / fd_slope.norm().max(1e-300);

    let mut remainder_rows = Vec::new();
    let mut remainder_json = Vec::new();
    for &lambda in &lambdas {
        let reference = direct_reference(&j_iep, &sub, lambda)?;
        let predicted = closed.e0 + Complex64::new(lambda, 0.0) * closed.e1;
        let remainder = (reference.paired[0] - predicted).norm() / lambda;
        remainder_rows.push(format!("{lambda},{remainder}"));
        remainder_json.push(json!({"lambda": lambda, "remainder_per_lambda": remainder}));
    }

    let params = json!({
        "delta": delta, "M": m, "n_trunc": n_trunc, "family": family,
        "lambda_grid": lambda_grid, "seed": seed,
    });
    let results = json!({
        "E0": cplx(closed.e0),
        "E1": cplx(closed.e1),
        "psi1": cvec(closed.psi1.as_slice().expect("contiguous")),
        "residual": closed.residual,
        "closure": "boundary_zero",
        "closure_per_trunc": closure_per_trunc,
        "fd_slope": cplx(fd_slope),
        "fd_relative_deviation": fd_rel,
        "remainders": remainder_json,
    });
    let table = CsvTable {
        name: String::new(),
        header: "lambda,remainder_per_lambda".into(),
        rows: remainder_rows,
    };
    writer.finish(params.clone(), results, &[table], params)
}
