//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! per clause (run with `-- --nocapture` to see them on success).

mod common;

use ep_spectra_core::epn_models::*;
use ep_spectra_core::epn_perturbation::*;
use ep_spectra_core::ic_spectral::*;
use ep_spectra_core::iep_basis::*;
use ep_spectra_core::iep_perturbation::*;
use ep_spectra_core::numerics::*;
use ep_spectra_core::stats::spearman_rho;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Criterion {
    name: &'static str,
    clauses: Vec<(String, bool)>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            clauses: Vec::new(),
        }
    }

    fn check(&mut self, clause: &str, ok: bool) {
        self.clauses.push((clause.to_string(), ok));
    }

    fn finish(self) {
        let mut all_ok = true;
        for (clause, ok) in &self.clauses {
            println!(
                "criterion {}: {} [{}]",
                self.name,
                clause,
                if *ok { "PASS" } else { "FAIL" }
            );
            all_ok &= ok;
        }
        let failed: Vec<String> = self
            .clauses
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(cl, _)| cl.clone())
            .collect();
        assert!(all_ok, "criterion {} failed: {}", self.name, failed.join("; "));
    }
}

#[test]
fn criterion_01_epn_coalescence() {
    let mut crit = Criterion::new("1 (EPN coalescence, J = 1)");
    let mut model = EPNModel::new(1, vec![1.0]).unwrap();
    let grid: Vec<f64> = (0..200).map(|i| 0.999 * i as f64 / 199.0).collect();
    let report = ep_sweep(&mut model, &grid).unwrap();
    crit.check(
        &format!("t_ep = {} within 1e-8 of 1", report.located.t_ep),
        (report.located.t_ep - 1.0).abs() <= 1e-8,
    );
    let worst = report
        .points
        .iter()
        .map(|p| (p.max_gap - 2.0 * (1.0 - p.t * p.t).sqrt()).abs())
        .fold(0.0f64, f64::max);
    crit.check(
        &format!("gap law 2 sqrt(1 - t^2) within 1e-10 over 200 points (worst {worst:.2e})"),
        worst <= 1e-10,
    );
    crit.finish();
}

#[test]
fn criterion_02_jordan_canonicalization() {
    let mut crit = Criterion::new("2 (Jordan canonicalization)");
    for j in 1..=3usize {
        let mut model = EPNModel::new(j, standard_direction(j)).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| 0.99 * i as f64 / 49.0).collect();
        let report = ep_sweep(&mut model, &grid).unwrap();
        let h = model.hamiltonian_at(report.located.t_ep);
        let tm = transition_matrix(&h, report.located.e_ep).unwrap();
        crit.check(
            &format!(
                "chain model J = {j}: similarity residual {:.2e} <= 1e-8",
                tm.similarity_residual
            ),
            tm.similarity_residual <= 1e-8,
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for n in 2..=8usize {
        for _ in 0..3 {
            let eta = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let s = common::random_similarity(&mut rng, n);
            let lu = Lu::factor(&s).unwrap();
            let h = s.dot(&jordan_block(n, eta)).dot(&lu.inverse());
            let tm = transition_matrix(&h, eta).unwrap();
            worst = worst.max(tm.similarity_residual);
        }
    }
    crit.check(
        &format!("disguised Jordan blocks N <= 8: worst residual {worst:.2e} <= 1e-8"),
        worst <= 1e-8,
    );
    crit.finish();
}

#[test]
fn criterion_03_secular_machinery() {
    let mut crit = Criterion::new("3 (secular machinery)");
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let order = 8usize;
    let mut worst_match = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut bound_checked = 0usize;
    for n in 2..=5usize {
        for _ in 0..50 {
            let v = common::random_cmatrix(&mut rng, n);
            for &lambda in &[1e-2, 1e-4, 1e-6] {
                let sol = solve_secular(&v, lambda, SecularMode::Direct).unwrap();
                let perturbed = jordan_block(n, Complex64::default())
                    + &v.mapv(|x| x * c(lambda, 0.0));
                let reference = eig_biorthogonal(&perturbed).unwrap();
                let tol = 1e-6 * (lambda.powf(1.0 / n as f64)).max(lambda * spectral_norm(&v).unwrap());
                let mut used = vec![false; n];
                let mut worst_here = 0.0f64;
                for &root in &sol.roots {
                    let mut best = f64::INFINITY;
                    let mut best_j = 0;
                    for (jj, &ev) in reference.eigenvalues.iter().enumerate() {
                        if !used[jj] && (ev - root).norm() < best {
                            best = (ev - root).norm();
                            best_j = jj;
                        }
                    }
                    used[best_j] = true;
                    worst_here = worst_here.max(best);
                }
                worst_match = worst_match.max(worst_here / tol);

                // series vs direct wherever the tail bound is meaningful
                let eps = c(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                let system = assemble_system(&v, eps, lambda).unwrap();
                let g = system.a.dot(&system.z).mapv(|x| x * c(lambda, 0.0));
                let gnorm = spectral_norm(&g).unwrap();
                if gnorm < 0.9 {
                    let direct = secular_value(&system, SecularMode::Direct).unwrap();
                    let series = secular_value(&system, SecularMode::Series(order)).unwrap();
                    let ar = system.a.dot(&system.r);
                    let bound =
                        gnorm.powi(order as i32 + 1) / (1.0 - gnorm) * vec_norm(&ar.view());
                    let diff = &direct - &series;
                    worst_ratio = worst_ratio.max(vec_norm(&diff.view()) / (bound + 1e-14));
                    bound_checked += 1;
                }
            }
        }
    }
    crit.check(
        &format!("direct roots match eigensolve (worst ratio to tolerance {worst_match:.2e})"),
        worst_match <= 1.0,
    );
    crit.check(
        &format!(
            "series order 8 within geometric tail bound on {bound_checked} cases (worst ratio {worst_ratio:.2e})"
        ),
        worst_ratio <= 1.0 && bound_checked > 100,
    );
    crit.finish();
}

#[test]
fn criterion_04_unfolding_exponents() {
    let mut crit = Criterion::new("4 (unfolding exponents)");
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let generic_grid: Vec<f64> = (0..13).map(|i| 10f64.powf(-12.0 + 0.5 * i as f64)).collect();
    for n in 2..=5usize {
        let h = jordan_block(n, Complex64::default());
        let direction = common::random_cmatrix(&mut rng, n);
        let fit = exponent_fit_direction(&h, &direction, &generic_grid).unwrap();
        let want = 1.0 / n as f64;
        crit.check(
            &format!("generic N = {n}: slope {:.4} = 1/N +- 0.05", fit.slope),
            (fit.slope - want).abs() <= 0.05,
        );
    }
    let benign_grid: Vec<f64> = (0..13).map(|i| 10f64.powf(-7.0 + 0.25 * i as f64)).collect();
    for n in 2..=5usize {
        let h = jordan_block(n, Complex64::default());
        let family = PerturbationFamily::admissible_pattern(n);
        let fit = exponent_fit_family(&h, &family, &benign_grid).unwrap();
        crit.check(
            &format!("admissible N = {n}: slope {:.4} = 0.50 +- 0.05", fit.slope),
            (fit.slope - 0.5).abs() <= 0.05,
        );
    }
    let mut all_complex = true;
    for &lambda in &[1e-2, 1e-4, 1e-6, 1e-8] {
        let family = PerturbationFamily::corner(3, 1.0);
        let v = family.realize(lambda).mapv(|x| x / lambda);
        let sol = solve_secular(&v, lambda, SecularMode::Direct).unwrap();
        let real_count = sol.reality_flags.iter().filter(|&&f| f).count();
        all_complex &= real_count == 1 && sol.roots.len() == 3;
    }
    crit.check(
        "malign corner N = 3: two complex roots at every tested lambda",
        all_complex,
    );
    crit.finish();
}

#[test]
fn criterion_05_rescaling_identity() {
    let mut crit = Criterion::new("5 (rescaling identity)");
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst_recon = 0.0f64;
    let mut benign_ok = true;
    for n in 2..=5usize {
        let family = {
            let mut u = || rng.gen_range(0.0..1.0);
            PerturbationFamily::random_benign(n, &mut u)
        };
        let cap = family.max_mu();
        for &lambda in &[1e-2, 1e-4, 1e-6] {
            let (reduced, max_abs) = rescale_reduced(&family, lambda).unwrap();
            benign_ok &= max_abs <= cap + 1e-12;
            let realized = family.realize(lambda);
            for j in 1..=n {
                for k in 1..=n {
                    let back = reduced[(j - 1, k - 1)]
                        * lambda.powf(0.5 + j as f64 / 2.0 - k as f64 / 2.0);
                    let want = realized[(j - 1, k - 1)];
                    if want.norm() > 0.0 {
                        worst_recon = worst_recon.max((back - want).norm() / want.norm());
                    }
                }
            }
        }
    }
    crit.check(
        &format!("reconstruction error {worst_recon:.2e} <= 1e-12"),
        worst_recon <= 1e-12,
    );
    crit.check(
        "benign families bounded by max |mu| across three decades",
        benign_ok,
    );
    let malign = PerturbationFamily::corner(3, 1.0);
    let (_, m2) = rescale_reduced(&malign, 1e-2).unwrap();
    let (_, m4) = rescale_reduced(&malign, 1e-4).unwrap();
    let (_, m6) = rescale_reduced(&malign, 1e-6).unwrap();
    crit.check(
        &format!("malign witness grows {:.1}x then {:.1}x per two decades (>= 10x)", m4 / m2, m6 / m4),
        m4 >= 10.0 * m2 - 1e-9 && m6 >= 10.0 * m4 - 1e-9,
    );
    crit.finish();
}

#[test]
fn criterion_06_ic_spectrum() {
    let mut crit = Criterion::new("6 (IC spectrum)");
    let study = convergence_study(1, &[64, 128]).unwrap();
    let agree = study.converged_count();
    // Known red: in the fixed frequency-1 oscillator basis, levels 6 and 7
    // carry genuine truncation error ~2e-3 and ~2.5e-2 at M = 64 (the
    // M = 128 values match the published spectrum to ten digits), so only
    // six levels can agree at 1e-6. The assertion stays as written rather
    // than being loosened; see README.
    crit.check(
        &format!("M = 64 vs 128 agree on {agree} levels at 1e-6 (need >= 8)"),
        agree >= 8,
    );
    let energies = study.energies.last().unwrap();
    let max_im = (0..agree)
        .map(|n| energies[n].im.abs())
        .fold(0.0f64, f64::max);
    crit.check(
        &format!("converged levels real: max |Im E| = {max_im:.2e} <= 1e-6"),
        max_im <= 1e-6,
    );
    let fd = common::fd_cubic_ground_state(12.0, 4800, 1.1);
    let e0 = energies[0];
    crit.check(
        &format!(
            "ground state {:.6} matches finite-difference oracle {:.6} within 1e-3",
            e0.re, fd.re
        ),
        (e0 - fd).norm() <= 1e-3,
    );
    let h = build_bb_matrix(&OscillatorSpec::new(1, 128).unwrap());
    let pt = pt_residual(&h);
    crit.check(&format!("PT residual {pt:.2e} <= 1e-12"), pt <= 1e-12);
    crit.finish();
}

#[test]
fn criterion_07_parallelization_trend() {
    let mut crit = Criterion::new("7 (parallelization trend)");
    let (_, sd) = oscillator_spectrum(&OscillatorSpec::new(1, 128).unwrap()).unwrap();
    let (_, sd2) = oscillator_spectrum(&OscillatorSpec::new(1, 256).unwrap()).unwrap();
    let window = converged_count(&sd, &sd2);
    crit.check(&format!("converged window {window} >= 8"), window >= 8);
    let n_max = window.min(12) - 1;
    let report = parallelization_diagnostics(&sd, n_max, &sd2).unwrap();
    let idx: Vec<f64> = (0..report.overlaps_right.len()).map(|i| i as f64).collect();
    let rho_s = spearman_rho(&idx, &report.overlaps_right).unwrap();
    crit.check(&format!("spearman rho(n, s_n) = {rho_s:.3} >= 0.9"), rho_s >= 0.9);
    let idx_k: Vec<f64> = (0..report.kappa.len()).map(|i| i as f64).collect();
    let rho_k = spearman_rho(&idx_k, &report.kappa).unwrap();
    crit.check(&format!("spearman rho(n, kappa_n) = {rho_k:.3} >= 0.9"), rho_k >= 0.9);

    let (_, hd) = oscillator_spectrum(&OscillatorSpec::new(0, 64).unwrap()).unwrap();
    let (_, hd2) = oscillator_spectrum(&OscillatorSpec::new(0, 128).unwrap()).unwrap();
    let hwin = converged_count(&hd, &hd2);
    let control = parallelization_diagnostics(&hd, hwin.min(10) - 1, &hd2).unwrap();
    let max_s = control.overlaps_right.iter().cloned().fold(0.0f64, f64::max);
    let max_k = control
        .kappa
        .iter()
        .map(|k| (k - 1.0).abs())
        .fold(0.0f64, f64::max);
    crit.check(
        &format!("Hermitian control: s_n <= 1e-8 (max {max_s:.2e}), kappa - 1 <= 1e-8 (max {max_k:.2e})"),
        max_s <= 1e-8 && max_k <= 1e-8,
    );
    crit.finish();
}

#[test]
fn criterion_08_metric_quasi_hermiticity() {
    let mut crit = Criterion::new("8 (metric quasi-Hermiticity)");
    let (h128, sd128) = oscillator_spectrum(&OscillatorSpec::new(1, 128).unwrap()).unwrap();
    let met128 = metric_operator(&h128, &sd128, 8).unwrap();
    crit.check(
        &format!(
            "K = 8, M = 128: residual {:.2e} <= 1e-6",
            met128.quasi_hermiticity_residual
        ),
        met128.quasi_hermiticity_residual <= 1e-6,
    );
    crit.check(
        &format!(
            "positive definite on the converged span (min eig {:.3})",
            met128.min_eigenvalue_span
        ),
        met128.min_eigenvalue_span > 0.0,
    );
    let (h256, sd256) = oscillator_spectrum(&OscillatorSpec::new(1, 256).unwrap()).unwrap();
    let met256 = metric_operator(&h256, &sd256, 8).unwrap();
    // Known red: the residual sits at the kappa-weighted eigensolver
    // rounding floor (~2 max |Im E|), which grows with ||H(M)||; parity
    // pseudo-Hermiticity keeps unbroken eigenvalues exactly real at every
    // truncation, so there is no truncation component left to decrease.
    // The assertion stays as written rather than being loosened; see
    // README.
    crit.check(
        &format!(
            "residual decreases when M doubles: {:.3e} (M = 256) < {:.3e} (M = 128)",
            met256.quasi_hermiticity_residual, met128.quasi_hermiticity_residual
        ),
        met256.quasi_hermiticity_residual < met128.quasi_hermiticity_residual,
    );
    crit.finish();
}

#[test]
fn criterion_09_chain_basis() {
    let mut crit = Criterion::new("9 (chain basis)");
    let (h, sd) = oscillator_spectrum(&OscillatorSpec::new(1, 128).unwrap()).unwrap();
    let cb = assemble_chain_basis(&h, &sd, 4, 8).unwrap();
    crit.check(
        &format!(
            "interior recurrence residuals {:.2e} <= 1e-6 (boundary column {:.2e} reported)",
            cb.interior_residual_max(),
            cb.boundary_residual()
        ),
        cb.interior_residual_max() <= 1e-6,
    );

    let equidistant: Vec<Complex64> = (0..3).map(|i| c(i as f64, 0.0)).collect();
    let table = chain_coefficients(&equidistant, 0, 2).unwrap();
    let hand = [
        (1usize, 0usize, c(-1.0, 0.0)),
        (2, 0, c(0.5, 0.0)),
        (2, 1, c(-1.0, 0.0)),
    ];
    let exact = hand
        .iter()
        .all(|&(p, n, want)| (table.c(p, n) - want).norm() == 0.0);
    crit.check("coefficient table matches the hand recursion exactly", exact);

    let base: Vec<Complex64> = vec![c(0.3, 0.0), c(1.9, 0.4), c(2.8, -0.2), c(5.1, 0.0), c(9.4, 0.1)];
    let s = 3.7f64;
    let scaled: Vec<Complex64> = base.iter().map(|e| e * c(s, 0.0)).collect();
    let t1 = chain_coefficients(&base, 0, 4).unwrap();
    let t2 = chain_coefficients(&scaled, 0, 4).unwrap();
    let mut worst_cov = 0.0f64;
    for p in 0..=4usize {
        for n in 0..=p {
            let want = t1.c(p, n) * c(s.powi(-(p as i32)), 0.0);
            let got = t2.c(p, n);
            worst_cov = worst_cov.max((got - want).norm() / want.norm().max(1e-300));
        }
    }
    crit.check(
        &format!("scale covariance c(sE) = s^-k c(E) to 1e-12 (worst {worst_cov:.2e})"),
        worst_cov <= 1e-12,
    );

    let diag = basis_diagnostics(&cb, &sd).unwrap();
    crit.check(
        &format!(
            "sigma_min improves strictly: chain {:.3e} > eig {:.3e}",
            diag.sigma_min_chain, diag.sigma_min_eig
        ),
        diag.sigma_min_chain > diag.sigma_min_eig,
    );
    crit.finish();
}

#[test]
fn criterion_10_first_order_iep() {
    let mut crit = Criterion::new("10 (first-order IEP scheme)");
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    // consistency relation on every run
    let mut worst_consistency = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(4..16);
        let energies: Vec<Complex64> = (0..n)
            .map(|i| c(i as f64 * 1.3 + rng.gen_range(0.0..0.2), 0.0))
            .collect();
        let v = common::random_cmatrix(&mut rng, n);
        let psi0_0 = c(rng.gen_range(0.5..2.0), rng.gen_range(-0.5..0.5));
        let e1 = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let result = first_order_forward(&energies, &v, psi0_0, e1, n).unwrap();
        let back = v[(0, 0)] + result.psi1[1] / psi0_0;
        worst_consistency = worst_consistency.max((back - e1).norm() / (1.0 + e1.norm()));
    }
    crit.check(
        &format!("consistency relation to 1e-12 (worst {worst_consistency:.2e})"),
        worst_consistency <= 1e-12,
    );

    // diagonal exactness at every lambda
    let energies: Vec<Complex64> = (0..8).map(|i| c(2.0 * i as f64 + 1.0, 0.0)).collect();
    let mut v = Array2::<Complex64>::default((8, 8));
    for i in 0..8 {
        v[(i, i)] = c(rng.gen_range(-1.0..1.0), 0.0);
    }
    let closed = closure_boundary_zero(&energies, &v, c(1.0, 0.0), 8).unwrap();
    let j = iep_jordan_matrix(&energies);
    let mut diag_ok = true;
    for &lambda in &[0.5, 1e-2, 1e-4, 1e-6] {
        let reference = direct_reference(&j, &v, lambda).unwrap();
        let want = energies[0] + c(lambda, 0.0) * closed.e1;
        diag_ok &= (reference.paired[0] - want).norm() <= 1e-9 * (1.0 + want.norm());
    }
    crit.check("diagonal V: E(lambda) = E0 + lambda V00 exactly", diag_ok);

    // dense superlinear remainder along the decade ladder
    let energies: Vec<Complex64> = (0..12)
        .map(|i| c(0.7 + 1.1 * i as f64 + 0.1 * ((i * i) % 3) as f64, 0.0))
        .collect();
    let v = common::random_cmatrix(&mut rng, 12);
    let closed = closure_boundary_zero(&energies, &v, c(1.0, 0.0), 12).unwrap();
    let j = iep_jordan_matrix(&energies);
    let mut remainders = Vec::new();
    for &lambda in &[1e-4, 1e-6, 1e-8] {
        let reference = direct_reference(&j, &v, lambda).unwrap();
        let predicted = closed.e0 + c(lambda, 0.0) * closed.e1;
        remainders.push((reference.paired[0] - predicted).norm() / lambda);
    }
    crit.check(
        &format!(
            "dense V remainder per lambda decreasing: {:.2e} > {:.2e} > {:.2e}",
            remainders[0], remainders[1], remainders[2]
        ),
        remainders[0] > remainders[1] && remainders[1] > remainders[2],
    );
    crit.finish();
}
