//! Preconditioned iterative solvers and spectral utilities: conjugate
//! gradients for (Δ+qI)x = b with a sparsifier preconditioner, condition
//! estimation of the preconditioned operator, smallest-eigenpair computation
//! and the Davis–Kahan eigenvector distance certificate.

use crate::dense::{CMat, DenseCholesky, cholesky, eigh};
use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use crate::laplacian::{MagneticLaplacian, assemble_magnetic_laplacian};
use crate::rng::SplitMix64;
use crate::sampler::{WeightMode, cycle_popping};
use crate::sparsifier::{CholeskyFactor, cholesky_mtsf_weighted};
use num_complex::Complex64;
use serde::Serialize;

type C64 = Complex64;

/// Hermitian positive (semi)definite operator usable by the iterative code.
pub trait HermitianOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// The regularized Laplacian Δ + qI as an operator.
impl HermitianOp for MagneticLaplacian {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.apply_regularized(x, y);
    }
}

/// A Hermitian operator shifted by a real constant: A + s·I.
pub struct ShiftedOp<'a, T: HermitianOp> {
    pub inner: &'a T,
    pub shift: f64,
}

impl<T: HermitianOp> HermitianOp for ShiftedOp<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.inner.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += self.shift * xi;
        }
    }
}

#[derive(Debug)]
pub enum Preconditioner<'a> {
    Identity,
    Cholesky(&'a CholeskyFactor),
}

impl Preconditioner<'_> {
    fn apply_inv(&self, r: &[C64]) -> Vec<C64> {
        match self {
            Preconditioner::Identity => r.to_vec(),
            Preconditioner::Cholesky(f) => f.solve(r),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcgResult {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// Relative residual after each iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Preconditioned conjugate gradients for a Hermitian positive definite
/// operator. Stops at relative residual `tol`; a `maxit` exit is flagged on
/// the result rather than an error, while an indefinite operator is.
pub fn pcg_solve(
    op: &dyn HermitianOp,
    precond: &Preconditioner,
    b: &[C64],
    tol: f64,
    maxit: usize,
) -> Result<PcgResult> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(PcgResult {
            x: vec![C64::ZERO; n],
            iterations: 0,
            residuals: Vec::new(),
            converged: true,
        });
    }
    let mut x = vec![C64::ZERO; n];
    let mut r = b.to_vec();
    let mut z = precond.apply_inv(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    let mut residuals = Vec::new();
    let mut ap = vec![C64::ZERO; n];
    for k in 0..maxit {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap).re;
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::IndefiniteOperator(k));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / bnorm;
        residuals.push(rel);
        if rel <= tol {
            return Ok(PcgResult {
                x,
                iterations: k + 1,
                residuals,
                converged: true,
            });
        }
        z = precond.apply_inv(&r);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(PcgResult {
        x,
        iterations: maxit,
        residuals,
        converged: false,
    })
}

fn seeded_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut s = SplitMix64::from_key(&[seed, 0x7665_6374]);
    (0..n)
        .map(|_| C64::new(s.next_f64() - 0.5, s.next_f64() - 0.5))
        .collect()
}

/// Power iteration on a Hermitian PSD operator given as a closure; returns
/// the dominant eigenvalue to relative tolerance `tol` on the Rayleigh
/// quotient.
fn power_iteration(
    apply: &mut dyn FnMut(&[C64]) -> Result<Vec<C64>>,
    n: usize,
    tol: f64,
    maxit: usize,
    seed: u64,
) -> Result<f64> {
    let mut x = seeded_vector(n, seed);
    let s = norm(&x);
    x.iter_mut().for_each(|v| *v /= s);
    let mut rho_prev = f64::NAN;
    for _ in 0..maxit {
        let y = apply(&x)?;
        let rho = dot(&x, &y).re;
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        x = y;
        x.iter_mut().for_each(|v| *v /= ny);
        if !rho_prev.is_nan() && (rho - rho_prev).abs() <= tol * rho.abs().max(1e-300) {
            return Ok(rho);
        }
        rho_prev = rho;
    }
    Err(Error::NoConvergence(format!(
        "power iteration did not settle within {maxit} iterations (last {rho_prev:.6e})"
    )))
}

#[derive(Debug, Clone, Copy)]
pub struct CondOptions {
    pub tol: f64,
    pub maxit: usize,
    pub inner_tol: f64,
    pub inner_maxit: usize,
    pub seed: u64,
}

impl Default for CondOptions {
    fn default() -> Self {
        CondOptions {
            tol: 1e-8,
            maxit: 20_000,
            inner_tol: 1e-11,
            inner_maxit: 4_000,
            seed: 0x636f_6e64,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CondEstimate {
    pub cond: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
}

/// Condition number of B⁻¹A for Hermitian positive definite A (as operator)
/// and factored B = R*R: the extremal eigenvalues of the similar Hermitian
/// operator R⁻*AR⁻¹ are found by power iterations, the smallest through
/// factored-preconditioned inner solves of A.
pub fn cond_estimate(
    a: &dyn HermitianOp,
    b: &CholeskyFactor,
    opts: CondOptions,
) -> Result<CondEstimate> {
    let n = a.dim();
    if b.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.n(),
        });
    }
    // λmax of M = R⁻* A R⁻¹.
    let mut apply_m = |x: &[C64]| -> Result<Vec<C64>> {
        let w = b.solve_r(x);
        let wo = b.from_permuted(&w);
        let mut y = vec![C64::ZERO; n];
        a.apply(&wo, &mut y);
        let yp = b.to_permuted(&y);
        Ok(b.solve_r_adjoint(&yp))
    };
    let lambda_max = power_iteration(&mut apply_m, n, opts.tol, opts.maxit, opts.seed)?;
    // λmax of M⁻¹ = R A⁻¹ R*, with A-solves preconditioned by B itself.
    let precond = Preconditioner::Cholesky(b);
    let mut apply_minv = |x: &[C64]| -> Result<Vec<C64>> {
        let u = b.mul_r_adjoint(x);
        let uo = b.from_permuted(&u);
        let sol = pcg_solve(a, &precond, &uo, opts.inner_tol, opts.inner_maxit)?;
        if !sol.converged {
            return Err(Error::NoConvergence(format!(
                "inner solve stalled at residual {:.3e}",
                sol.residuals.last().copied().unwrap_or(f64::NAN)
            )));
        }
        let sp = b.to_permuted(&sol.x);
        Ok(b.mul_r(&sp))
    };
    let inv_min = power_iteration(&mut apply_minv, n, opts.tol, opts.maxit, opts.seed ^ 1)?;
    let lambda_min = 1.0 / inv_min;
    Ok(CondEstimate {
        cond: lambda_max / lambda_min,
        lambda_max,
        lambda_min,
    })
}

/// How the inner solves of the eigenpair iteration are carried out.
pub enum InnerSolve<'a> {
    /// Dense Cholesky factorization of the shifted matrix (desk scale).
    Dense,
    /// Conjugate gradients preconditioned by a sparsifier factor.
    Pcg {
        precond: &'a CholeskyFactor,
        tol: f64,
        maxit: usize,
    },
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Eigenvector normalized to ‖f‖ = √n.
    pub vector: Vec<C64>,
    /// Set when the two smallest Ritz values are within 1e-10.
    pub degenerate: bool,
    pub ritz_gap: f64,
    pub iterations: usize,
}

/// Smallest eigenpair of Δ by block-2 inverse subspace iteration around the
/// shift λ̂₁ (0 targets the bottom of the spectrum). The block of size two
/// exposes a degenerate least eigenspace, which is flagged.
pub fn least_eigenpair(
    lap: &MagneticLaplacian,
    inner: InnerSolve,
    shift: f64,
) -> Result<EigenPair> {
    let n = lap.n;
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two nodes".into()));
    }
    let norm_bound = lap.norm_upper_bound().max(1e-300);
    // Solve operator Δ − λ̂₁ I + εI; ε keeps it definite when λ̂₁ hits λ₁.
    let eps = 1e-10 * norm_bound;
    let sigma = eps - shift;
    let dense_factor: Option<DenseCholesky> = match inner {
        InnerSolve::Dense => {
            let mut a = lap.to_dense();
            a.add_diag(sigma);
            Some(cholesky(&a).map_err(|e| {
                Error::Singular(format!("shifted matrix not positive definite: {e}"))
            })?)
        }
        InnerSolve::Pcg { .. } => None,
    };
    let shifted = ShiftedOp {
        inner: lap,
        shift: sigma - lap.q, // lap applies Δ + qI; cancel the stored q
    };
    let solve = |b: &[C64]| -> Result<Vec<C64>> {
        match (&dense_factor, &inner) {
            (Some(f), _) => {
                let mut x = b.to_vec();
                f.solve(&mut x);
                Ok(x)
            }
            (None, InnerSolve::Pcg { precond, tol, maxit }) => {
                let r = pcg_solve(
                    &shifted,
                    &Preconditioner::Cholesky(precond),
                    b,
                    *tol,
                    *maxit,
                )?;
                if !r.converged {
                    return Err(Error::NoConvergence(format!(
                        "inner eigen solve stalled at residual {:.3e}",
                        r.residuals.last().copied().unwrap_or(f64::NAN)
                    )));
                }
                Ok(r.x)
            }
            _ => unreachable!(),
        }
    };
    let mut x0 = seeded_vector(n, 0xe1);
    let mut x1 = seeded_vector(n, 0xe2);
    let mut buf = vec![C64::ZERO; n];
    let tol = 1e-8 * norm_bound;
    let max_iters = 400;
    let mut last = (f64::NAN, f64::NAN);
    for it in 0..max_iters {
        x0 = solve(&x0)?;
        x1 = solve(&x1)?;
        // Orthonormalize the block.
        let n0 = norm(&x0);
        x0.iter_mut().for_each(|v| *v /= n0);
        let proj = dot(&x0, &x1);
        for i in 0..n {
            x1[i] -= proj * x0[i];
        }
        let n1 = norm(&x1);
        if n1 < 1e-14 {
            x1 = seeded_vector(n, 0xe3 + it as u64);
        } else {
            x1.iter_mut().for_each(|v| *v /= n1);
        }
        // Rayleigh–Ritz with Δ itself on the 2-dimensional block.
        let mut dx0 = vec![C64::ZERO; n];
        let mut dx1 = vec![C64::ZERO; n];
        lap.apply(&x0, &mut dx0);
        lap.apply(&x1, &mut dx1);
        let mut s = CMat::zeros(2, 2);
        s[(0, 0)] = dot(&x0, &dx0);
        s[(0, 1)] = dot(&x0, &dx1);
        s[(1, 0)] = dot(&x1, &dx0);
        s[(1, 1)] = dot(&x1, &dx1);
        let (vals, vecs) = eigh(&s)?;
        // Rotate the block onto the Ritz vectors.
        let mut y0 = vec![C64::ZERO; n];
        let mut y1 = vec![C64::ZERO; n];
        for i in 0..n {
            y0[i] = x0[i] * vecs[(0, 0)] + x1[i] * vecs[(1, 0)];
            y1[i] = x0[i] * vecs[(0, 1)] + x1[i] * vecs[(1, 1)];
        }
        x0 = y0;
        x1 = y1;
        // Residual of the leading Ritz pair.
        lap.apply(&x0, &mut buf);
        let mut res = 0.0f64;
        for i in 0..n {
            res += (buf[i] - vals[0] * x0[i]).norm_sqr();
        }
        let res = res.sqrt();
        last = (vals[0], vals[1]);
        if res <= tol && it > 0 {
            let scale = (n as f64).sqrt() / norm(&x0);
            let vector = x0.iter().map(|v| v * scale).collect();
            let gap = (vals[1] - vals[0]).abs();
            return Ok(EigenPair {
                value: vals[0],
                vector,
                degenerate: gap < 1e-10,
                ritz_gap: gap,
                iterations: it + 1,
            });
        }
    }
    Err(Error::NoConvergence(format!(
        "inverse iteration still above tolerance after {max_iters} rounds \
         (ritz values {:.6e}, {:.6e})",
        last.0, last.1
    )))
}

/// Davis–Kahan a-posteriori certificate: with spectral gap δ* = λ₂ − λ₁ and
/// multiplicative accuracy ε, dist(f₁, f̃₁) ≤ √(2n)·ελ_n/(δ* − ελ_n).
pub fn davis_kahan_bound(lambda_n: f64, delta_star: f64, eps: f64, n: usize) -> Result<f64> {
    let perturbation = eps * lambda_n;
    if perturbation >= delta_star {
        return Err(Error::BoundUndefined(perturbation, delta_star));
    }
    Ok((2.0 * n as f64).sqrt() * perturbation / (delta_star - perturbation))
}

/// Phase-aligned eigenvector distance min_θ ‖a − e^{iθ}b‖ for ‖a‖ = ‖b‖ = √n.
pub fn eigenvector_distance(a: &[C64], b: &[C64]) -> f64 {
    let n = a.len() as f64;
    (2.0 * n - 2.0 * dot(a, b).norm()).max(0.0).sqrt()
}

/// Laplacian-regularized least squares: solves (Δ + qI) f = q·y with a
/// one-MTSF sparsifier preconditioner (uniform leverage heuristic).
pub fn ssl_solve(g: &ConnectionGraph, q: f64, y: &[C64], seed: u64) -> Result<Vec<C64>> {
    if q <= 0.0 {
        return Err(Error::InvalidParameter(
            "Tikhonov solve needs q > 0".into(),
        ));
    }
    if y.len() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            got: y.len(),
        });
    }
    let lap = assemble_magnetic_laplacian(g, q);
    // The walk kernel needs unit weights; the factor then reweights by the
    // host graph's weights under the uniform leverage normalization.
    let unit = g.reweighted(|_| 1.0)?;
    let mut rng = crate::rng::replicate_rng(seed, 0);
    let (f, _) = cycle_popping(&unit, q, WeightMode::Capped, &mut rng)?;
    let m = g.edge_count() as f64;
    let scale = m / f.edge_count().max(1) as f64;
    let factor = cholesky_mtsf_weighted(&f, g, q, &|e| g.edge(e).weight * scale)?;
    let b: Vec<C64> = y.iter().map(|v| q * v).collect();
    let sol = pcg_solve(&lap, &Preconditioner::Cholesky(&factor), &b, 1e-8, 10_000)?;
    if !sol.converged {
        return Err(Error::NoConvergence(format!(
            "Tikhonov solve stalled at residual {:.3e}",
            sol.residuals.last().copied().unwrap_or(f64::NAN)
        )));
    }
    Ok(sol.x)
}

/// Condition and iteration-count report for a preconditioner candidate.
#[derive(Debug, Clone, Serialize)]
pub struct PrecondReport {
    pub cond: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub pcg_iterations_preconditioned: usize,
    pub pcg_iterations_identity: usize,
    pub residuals_preconditioned: Vec<f64>,
    pub residuals_identity: Vec<f64>,
}

/// Runs both PCG arms on (Δ+qI)x = b and estimates the generalized condition
/// number of the preconditioned system.
pub fn precondition_report(
    lap: &MagneticLaplacian,
    factor: &CholeskyFactor,
    b: &[C64],
    tol: f64,
    maxit: usize,
) -> Result<PrecondReport> {
    let est = cond_estimate(lap, factor, CondOptions::default())?;
    let with = pcg_solve(lap, &Preconditioner::Cholesky(factor), b, tol, maxit)?;
    let without = pcg_solve(lap, &Preconditioner::Identity, b, tol, maxit)?;
    Ok(PrecondReport {
        cond: est.cond,
        lambda_max: est.lambda_max,
        lambda_min: est.lambda_min,
        pcg_iterations_preconditioned: with.iterations,
        pcg_iterations_identity: without.iterations,
        residuals_preconditioned: with.residuals,
        residuals_identity: without.residuals,
    })
}
