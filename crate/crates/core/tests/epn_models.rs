mod common;

use ep_spectra_core::epn_models::*;
use ep_spectra_core::numerics::{eig_biorthogonal, fro_norm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn j1_gap_law_and_location() {
    let mut model = EPNModel::new(1, vec![1.0]).unwrap();
    let grid: Vec<f64> = (0..200).map(|i| 0.999 * i as f64 / 199.0).collect();
    let report = ep_sweep(&mut model, &grid).unwrap();
    assert!((report.located.t_ep - 1.0).abs() <= 1e-8);
    for p in &report.points {
        let expect = 2.0 * (1.0 - p.t * p.t).sqrt();
        assert!((p.max_gap - expect).abs() <= 1e-10, "t = {}", p.t);
    }
}

#[test]
fn square_root_unfolding_near_j1_ep() {
    // gap(t_ep - s) / sqrt(s) constant within 5 percent
    let model = EPNModel::new(1, vec![1.0]).unwrap();
    let mut ratios = Vec::new();
    let mut s = 1e-6;
    while s <= 1e-2 + 1e-12 {
        let h = model.hamiltonian_at(1.0 - s);
        let sd = eig_biorthogonal(&h).unwrap();
        let gap = (sd.eigenvalues[1] - sd.eigenvalues[0]).norm();
        ratios.push(gap / s.sqrt());
        s *= 10.0;
    }
    let max = ratios.iter().cloned().fold(0.0f64, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 1.05, "ratios {ratios:?}");
}

#[test]
fn plane_sweep_oracle_finds_the_fourfold_point() {
    // brute-force oracle: the spectral radius over the (b, a) coupling plane
    // vanishes only at the isolated fourfold point, which fixes the sweep
    // direction up to scale
    fn rho(b: f64, a: f64) -> f64 {
        let mut model = EPNModel::new(2, vec![b, a]).unwrap();
        model.t = 1.0;
        let sd = eig_biorthogonal(&chain_hamiltonian(&model)).unwrap();
        sd.eigenvalues.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    let mut best = (0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..=60 {
        for j in 0..=60 {
            let b = 3.0 * i as f64 / 60.0;
            let a = 3.0 * j as f64 / 60.0;
            let r = rho(b, a);
            if r < best.2 {
                best = (b, a, r);
            }
        }
    }
    // nested refinement: fully minimize over b for each a (the dip sits in
    // a diagonal valley that defeats coordinate descent)
    fn min_over_b(a: f64) -> (f64, f64) {
        let mut coarse = (0.0f64, f64::INFINITY);
        for i in 0..=80 {
            let b = 0.2 + 2.8 * i as f64 / 80.0;
            let r = rho(b, a);
            if r < coarse.1 {
                coarse = (b, r);
            }
        }
        let b = golden_argmin(&|x| rho(x, a), coarse.0 - 0.05, coarse.0 + 0.05);
        (b, rho(b, a))
    }
    let mut a = best.1;
    a = golden_argmin(&|x| min_over_b(x).1, a - 0.1, a + 0.1);
    let b = min_over_b(a).0;
    assert!(
        (b - 3.0f64.sqrt()).abs() <= 1e-4 && (a - 2.0).abs() <= 1e-4,
        "plane sweep found (b, a) = ({b}, {a})"
    );
    assert!(rho(b, a) <= 1e-2, "dip {:.3e}", rho(b, a));
    // spectral radius stays pinned away from zero off the point
    assert!(rho(b - 0.3, a) > 0.5 && rho(b, a + 0.3) > 0.5);

    // on the confirmed ray the sweep locates a single fourfold coalescence
    // at zero energy, certified by the Jordan canonicalization
    let grid: Vec<f64> = (0..60).map(|i| 1.2 * i as f64 / 59.0).collect();
    let mut model = EPNModel::new(2, vec![b, a]).unwrap();
    let report = ep_sweep(&mut model, &grid).unwrap();
    assert!((report.located.t_ep * (b * b + a * a).sqrt() - 7.0f64.sqrt()).abs() <= 1e-3);
    assert!(report.located.e_ep.norm() <= 1e-8);
    let h = model.hamiltonian_at(report.located.t_ep);
    let tm = transition_matrix(&h, report.located.e_ep).unwrap();
    assert!(tm.similarity_residual <= 1e-8);
}

fn golden_argmin(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..80 {
        let x1 = hi - 0.618_033_988_75 * (hi - lo);
        let x2 = lo + 0.618_033_988_75 * (hi - lo);
        if f(x1) <= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn standard_direction_coalesces_at_unit_parameter() {
    for j in 1..=3usize {
        let mut model = EPNModel::new(j, standard_direction(j)).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| 0.99 * i as f64 / 49.0).collect();
        let report = ep_sweep(&mut model, &grid).unwrap();
        assert!(
            (report.located.t_ep - 1.0).abs() <= 1e-8,
            "J = {j}: t_ep = {}",
            report.located.t_ep
        );
        assert!(report.located.e_ep.norm() <= 1e-6, "J = {j}");
        // the measured gap saturates at the eigensolver's 2J-th-root noise
        // floor; coalescence itself is certified in the canonicalization test
        assert!(report.located.gap_at_ep <= 0.05, "J = {j}");
    }
}

#[test]
fn spectral_antisymmetry_below_the_ep() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for j in 1..=3usize {
        let model = EPNModel::new(j, standard_direction(j)).unwrap();
        for _ in 0..5 {
            let t = 0.95 * rand::Rng::gen_range(&mut rng, 0.0..1.0);
            let sd = eig_biorthogonal(&model.hamiltonian_at(t)).unwrap();
            let n = sd.len();
            for i in 0..n {
                let sym = sd.eigenvalues[i] + sd.eigenvalues[n - 1 - i];
                assert!(sym.norm() <= 1e-8, "J = {j}, t = {t}");
                assert!(sd.eigenvalues[i].im.abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn chain_canonicalization_at_located_eps() {
    for j in 1..=3usize {
        let mut model = EPNModel::new(j, standard_direction(j)).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| 0.99 * i as f64 / 49.0).collect();
        let report = ep_sweep(&mut model, &grid).unwrap();
        let h = model.hamiltonian_at(report.located.t_ep);
        let tm = transition_matrix(&h, report.located.e_ep).unwrap();
        assert!(
            tm.similarity_residual <= 1e-8,
            "J = {j}: residual {}",
            tm.similarity_residual
        );
        assert!(tm.inverse_condition.is_finite());
        // chain property column by column
        let scale = fro_norm(&h);
        let residuals = chain_residuals(&h, &tm.r, report.located.e_ep);
        for (k, res) in residuals.iter().enumerate() {
            assert!(res <= &(1e-8 * scale), "J = {j}, column {k}: {res}");
        }
    }
}

#[test]
fn disguised_jordan_blocks_recanonicalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240801);
    for n in 2..=8usize {
        for _ in 0..3 {
            let eta = common::c(
                rand::Rng::gen_range(&mut rng, -1.0..1.0),
                rand::Rng::gen_range(&mut rng, -1.0..1.0),
            );
            let s = common::random_similarity(&mut rng, n);
            let j = jordan_block(n, eta);
            let lu = ep_spectra_core::numerics::Lu::factor(&s).unwrap();
            let h = s.dot(&j).dot(&lu.inverse());
            let tm = transition_matrix(&h, eta).unwrap();
            assert!(
                tm.similarity_residual <= 1e-8,
                "N = {n}: residual {}",
                tm.similarity_residual
            );
            // kernel vector canonicalization: unit norm, leading significant
            // component real positive
            let psi0 = tm.r.column(0);
            let norm: f64 = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-10);
            let lead = psi0.iter().find(|z| z.norm() > 1e-10).unwrap();
            assert!(lead.im.abs() <= 1e-10 && lead.re > 0.0);
        }
    }
}

#[test]
fn sweep_reports_overlap_growth() {
    let mut model = EPNModel::new(2, standard_direction(2)).unwrap();
    let grid = [0.0, 0.5, 0.9, 0.99];
    let report = ep_sweep(&mut model, &grid).unwrap();
    let overlaps: Vec<f64> = report.points.iter().map(|p| p.max_overlap).collect();
    assert!(overlaps[0] <= 1e-12);
    assert!(overlaps.windows(2).all(|w| w[1] > w[0]));
    assert!(overlaps[3] > 0.9);
}

#[test]
fn degenerate_sweep_grid_rejected() {
    let mut model = EPNModel::new(1, vec![1.0]).unwrap();
    assert!(ep_sweep(&mut model, &[]).is_err());
    assert!(ep_sweep(&mut model, &[0.5, 0.5]).is_err());
    assert!(ep_sweep(&mut model, &[0.5, 0.1]).is_err());
}
