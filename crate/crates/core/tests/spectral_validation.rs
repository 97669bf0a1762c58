//! Joint spectral checks: the multiplicative-bound event, its eigenpair and
//! Davis–Kahan consequences, and preconditioned-solver behavior at scale.

use maglap::dense::{eigh, eigh_generalized};
use maglap::generators::{Connectivity, gen_er, gen_mun};
use maglap::laplacian::{assemble_combinatorial_laplacian, assemble_magnetic_laplacian};
use maglap::leverage::exact_ls;
use maglap::rng::replicate_rng;
use maglap::sampler::{WeightMode, cycle_popping};
use maglap::solvers::{Preconditioner, davis_kahan_bound, eigenvector_distance, pcg_solve};
use maglap::sparsifier::{
    EstimatorKind, LsSpec, SparsifierBatch, build_self_normalized, cholesky_sparse_hpd,
};
use num_complex::Complex64;

type C64 = Complex64;

fn crsf_sparsifier(
    g: &maglap::ConnectionGraph,
    t: usize,
    seed: u64,
) -> maglap::MagneticLaplacian {
    let ls = exact_ls(g, 0.0).unwrap();
    let mut samples = Vec::with_capacity(t);
    for rep in 0..t {
        let mut rng = replicate_rng(seed, rep as u64);
        samples.push(
            cycle_popping(g, 0.0, WeightMode::Capped, &mut rng)
                .unwrap()
                .0,
        );
    }
    let batch = SparsifierBatch::new(
        g,
        samples,
        LsSpec::PerEdge(ls.scores),
        0.0,
        EstimatorKind::SelfNormalized,
    )
    .unwrap();
    build_self_normalized(&batch).unwrap()
}

#[test]
fn davis_kahan_certificate_holds_when_event_does() {
    // Noisy enough that the connection is clearly non-trivial, so Δ is
    // positive definite and CRSF sampling terminates quickly.
    let inst = gen_mun(40, 0.3, 0.5, 3, Connectivity::RejectResample).unwrap();
    let g = inst.graph;
    let lap = assemble_magnetic_laplacian(&g, 0.0);
    let dense = lap.to_dense();
    let (vals, vecs) = eigh(&dense).unwrap();
    let n = g.node_count();
    let (lambda_1, lambda_2, lambda_n) = (vals[0], vals[1], vals[n - 1]);
    let delta_star = lambda_2 - lambda_1;
    let scale = (n as f64).sqrt();
    let f1: Vec<C64> = (0..n).map(|i| vecs[(i, 0)] * scale).collect();

    let mut certified = 0;
    for (i, &t) in [100usize, 400, 1600].iter().enumerate() {
        let sp = crsf_sparsifier(&g, t, 1000 + i as u64);
        let sp_dense = sp.to_dense();
        let gen_eigs = eigh_generalized(&sp_dense, &dense).unwrap();
        let eps_obs = gen_eigs
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0f64, f64::max);
        if eps_obs * lambda_n >= delta_star {
            continue; // Davis–Kahan certificate undefined for this batch.
        }
        certified += 1;
        let (sp_vals, sp_vecs) = eigh(&sp_dense).unwrap();
        assert!(sp_vals[0] > 0.0, "CRSF sparsifier stays invertible");
        let f1_sp: Vec<C64> = (0..n).map(|i| sp_vecs[(i, 0)] * scale).collect();
        let dist = eigenvector_distance(&f1, &f1_sp);
        let bound = davis_kahan_bound(lambda_n, delta_star, eps_obs, n).unwrap();
        assert!(
            dist <= bound + 1e-9,
            "t = {t}: dist {dist} exceeds bound {bound} (eps {eps_obs})"
        );
    }
    assert!(certified >= 1, "no batch size activated the certificate");
}

#[test]
fn eigenpair_relative_error_bound_follows_the_event() {
    // Whenever the multiplicative event holds with observed ε, every
    // eigenpair of Δ obeys |v*Δ̃v − λ|/λ ≤ ε(1 + q/λ).
    let inst = gen_mun(30, 0.35, 0.5, 9, Connectivity::RejectResample).unwrap();
    let g = inst.graph;
    let q = 0.2;
    let lapq = assemble_magnetic_laplacian(&g, q);
    let ls = exact_ls(&g, q).unwrap();
    let mut samples = Vec::new();
    for rep in 0..600u64 {
        let mut rng = replicate_rng(77, rep);
        samples.push(cycle_popping(&g, q, WeightMode::Capped, &mut rng).unwrap().0);
    }
    let batch = SparsifierBatch::new(
        &g,
        samples,
        LsSpec::PerEdge(ls.scores),
        q,
        EstimatorKind::SelfNormalized,
    )
    .unwrap();
    let sp = build_self_normalized(&batch).unwrap();
    let mut a = sp.to_dense();
    a.add_diag(q);
    let mut b = lapq.to_dense();
    b.add_diag(q);
    let gen_eigs = eigh_generalized(&a, &b).unwrap();
    let eps_obs = gen_eigs
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0f64, f64::max);
    assert!(eps_obs < 1.0, "batch too small for the event, eps {eps_obs}");
    // Preconditioned spectrum lands in [(1+ε)⁻¹, (1−ε)⁻¹].
    for v in &gen_eigs {
        let inv = 1.0 / v;
        assert!(inv >= 1.0 / (1.0 + eps_obs) - 1e-9);
        assert!(inv <= 1.0 / (1.0 - eps_obs) + 1e-9);
    }
    let delta_dense = assemble_magnetic_laplacian(&g, 0.0).to_dense();
    let (vals, vecs) = eigh(&delta_dense).unwrap();
    let sp_delta = sp.to_dense();
    let n = g.node_count();
    for l in 0..n {
        if vals[l] <= 1e-9 {
            continue;
        }
        let v: Vec<C64> = (0..n).map(|i| vecs[(i, l)]).collect();
        let sv = sp_delta.matvec(&v);
        let quad: f64 = v.iter().zip(&sv).map(|(a, b)| (a.conj() * b).re).sum();
        let rel = (quad - vals[l]).abs() / vals[l];
        let allowed = eps_obs * (1.0 + q / vals[l]);
        assert!(
            rel <= allowed + 1e-9,
            "eigenpair {l}: relative error {rel} above {allowed}"
        );
    }
}

#[test]
fn preconditioned_pcg_beats_identity_at_scale() {
    // On ER graphs plain CG already absorbs the lone small eigenvalue
    // superlinearly, so the iteration gap is thin; the separation widens as
    // q shrinks and shows up robustly in the condition numbers (covered by
    // the acceptance suite).
    let g = gen_er(2000, 0.01, 4, Connectivity::RejectResample).unwrap();
    let q = 1e-4;
    let lap = assemble_combinatorial_laplacian(&g, q);
    // 3-SF batch under the uniform leverage heuristic.
    let mut samples = Vec::new();
    for rep in 0..3u64 {
        let mut rng = replicate_rng(31, rep);
        samples.push(cycle_popping(&g, q, WeightMode::Exact, &mut rng).unwrap().0);
    }
    let batch =
        SparsifierBatch::new(&g, samples, LsSpec::UniformPerSample, q, EstimatorKind::Plain)
            .unwrap();
    let sp = maglap::sparsifier::build_sparsifier(&batch).unwrap();
    let factor = cholesky_sparse_hpd(&sp).unwrap();
    // A right-hand side with a substantial mean component so the solver must
    // resolve the near-kernel direction at scale q.
    let b: Vec<C64> = (0..2000)
        .map(|i| C64::new(1.0 + 0.3 * (((i * 37) % 11) as f64 - 5.0), 0.0))
        .collect();
    let with = pcg_solve(&lap, &Preconditioner::Cholesky(&factor), &b, 1e-8, 20_000).unwrap();
    let without = pcg_solve(&lap, &Preconditioner::Identity, &b, 1e-8, 20_000).unwrap();
    assert!(with.converged && without.converged);
    assert!(
        with.iterations < without.iterations,
        "preconditioned {} vs identity {}",
        with.iterations,
        without.iterations
    );
}

#[test]
fn pcg_iterations_nonincreasing_in_batch_quality() {
    // Matched instances, same seed family: the 3-SF preconditioner never
    // needs more iterations than the 1-SF one, in the median over 10 trials.
    let g = gen_er(500, 0.05, 21, Connectivity::RejectResample).unwrap();
    let q = 0.01;
    let lap = assemble_combinatorial_laplacian(&g, q);
    let b: Vec<C64> = (0..500).map(|i| C64::new(1.0 + (i % 7) as f64, 0.0)).collect();
    let iters = |t: usize, trial: u64| -> usize {
        let mut samples = Vec::new();
        for rep in 0..t as u64 {
            let mut rng = replicate_rng(900 + trial, rep);
            samples.push(cycle_popping(&g, q, WeightMode::Exact, &mut rng).unwrap().0);
        }
        let batch = SparsifierBatch::new(
            &g,
            samples,
            LsSpec::UniformPerSample,
            q,
            EstimatorKind::Plain,
        )
        .unwrap();
        let sp = maglap::sparsifier::build_sparsifier(&batch).unwrap();
        let factor = cholesky_sparse_hpd(&sp).unwrap();
        pcg_solve(&lap, &Preconditioner::Cholesky(&factor), &b, 1e-9, 10_000)
            .unwrap()
            .iterations
    };
    let mut one: Vec<usize> = (0..10).map(|trial| iters(1, trial)).collect();
    let mut three: Vec<usize> = (0..10).map(|trial| iters(3, trial)).collect();
    one.sort_unstable();
    three.sort_unstable();
    assert!(
        three[5] <= one[5],
        "median iterations t=3 {} vs t=1 {}",
        three[5],
        one[5]
    );
}

#[test]
fn er_2000_low_spectrum_matches_reported_scale() {
    // λ₂ ≈ 6 and λ₃ ≈ 7 for ER(2000, 0.01): checked by deflated inverse
    // iteration on the combinatorial Laplacian (kernel direction projected
    // out), to the reported order of magnitude.
    let g = gen_er(2000, 0.01, 2, Connectivity::RejectResample).unwrap();
    let lap = assemble_combinatorial_laplacian(&g, 0.0);
    let mut dense = lap.to_dense();
    let sigma = 0.5;
    dense.add_diag(sigma);
    let chol = maglap::dense::cholesky(&dense).unwrap();
    let n = 2000;
    let ones_unit = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut basis: Vec<Vec<C64>> = vec![vec![ones_unit; n]];
    let mut eigenvalues = Vec::new();
    for k in 0..2 {
        let mut x: Vec<C64> = (0..n)
            .map(|i| C64::new(((i * 131 + 7 * k) % 23) as f64 - 11.0, 0.0))
            .collect();
        let mut value = f64::NAN;
        for _ in 0..400 {
            // Project out converged directions, solve, normalize.
            for b in &basis {
                let proj: C64 = b.iter().zip(&x).map(|(p, q)| p.conj() * q).sum();
                for i in 0..n {
                    x[i] -= proj * b[i];
                }
            }
            chol.solve(&mut x);
            let nx = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            let mut ax = vec![C64::ZERO; n];
            lap.apply(&x, &mut ax);
            let rho: f64 = x.iter().zip(&ax).map(|(a, b)| (a.conj() * b).re).sum();
            if !value.is_nan() && (rho - value).abs() <= 1e-7 * rho.abs() {
                value = rho;
                break;
            }
            value = rho;
        }
        eigenvalues.push(value);
        basis.push(x);
    }
    let (l2, l3) = (eigenvalues[0], eigenvalues[1]);
    assert!(l2 <= l3 + 1e-9);
    assert!((3.0..=12.0).contains(&l2), "lambda_2 = {l2}");
    assert!((3.5..=14.0).contains(&l3), "lambda_3 = {l3}");
}

#[test]
fn empirical_leverage_scores_center_on_exact_ones() {
    // Mean of (l − l_emp)/l across edges sits within ±0.01 at 1e5 samples.
    let g = maglap::ConnectionGraph::new(
        6,
        vec![
            (0, 1, 1.0, 0.3),
            (1, 2, 1.0, 0.4),
            (2, 3, 1.0, 0.2),
            (3, 4, 1.0, 0.15),
            (4, 0, 1.0, 0.15),
            (0, 2, 1.0, 0.2),
            (2, 5, 1.0, 1.3),
        ],
    )
    .unwrap();
    let q = 0.5;
    let ls = exact_ls(&g, q).unwrap();
    let n_samples = 100_000;
    let mut rng = replicate_rng(0x1EAF, 0);
    let mut counts = vec![0usize; g.edge_count()];
    for _ in 0..n_samples {
        let (f, _) = cycle_popping(&g, q, WeightMode::Capped, &mut rng).unwrap();
        for &e in f.edge_ids() {
            counts[e] += 1;
        }
    }
    let rel_mean: f64 = (0..g.edge_count())
        .map(|e| {
            let emp = counts[e] as f64 / n_samples as f64;
            (ls.scores[e] - emp) / ls.scores[e]
        })
        .sum::<f64>()
        / g.edge_count() as f64;
    assert!(rel_mean.abs() < 0.01, "mean relative difference {rel_mean}");
}
