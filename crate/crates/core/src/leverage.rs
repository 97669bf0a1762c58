//! Leverage-score providers.
//!
//! The magnetic leverage score of an edge is the diagonal kernel entry
//! l(e) = [B(Δ+qI)⁻¹B*]_{ee}, the probability that e appears in a sampled
//! MTSF. Exact scores come from a dense inverse at desk scale (each edge then
//! costs a 2×2 quadratic form) or from per-edge solves; large graphs use the
//! uniform heuristic l(e) = |F|/m or Johnson–Lindenstrauss sketching, which
//! estimates the squared row norms of B·T from k = ⌈40·log(m+n)+1⌉ solves
//! against Rademacher probes.

use crate::dense::{cholesky, hpd_inverse};
use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use crate::laplacian::{IncidenceOperator, assemble_magnetic_laplacian, check_assumption1};
use crate::rng::SplitMix64;
use crate::solvers::{Preconditioner, pcg_solve};
use num_complex::Complex64;

type C64 = Complex64;

/// Nodes up to this count take the one-shot dense-inverse route.
pub const DENSE_EXACT_LIMIT: usize = 2048;
/// Edge budget for the per-edge solve fallback beyond the dense limit.
pub const SOLVE_EXACT_LIMIT: usize = 5000;

const JL_DOMAIN: u64 = 0x6a6c_7134;
const CLIP_LOW: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Uniform,
    Jl { sketch_width: usize },
}

/// Per-edge nonnegative scores with their provenance.
#[derive(Debug, Clone)]
pub struct LeverageScores {
    pub scores: Vec<f64>,
    pub provenance: Provenance,
    pub q: f64,
    pub clipped_low: usize,
    pub clipped_high: usize,
}

impl LeverageScores {
    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// Exact scores: the kernel diagonal, through a dense inverse when n allows
/// it, else m per-edge solves, else an error directing to jl/uniform.
pub fn exact_ls(g: &ConnectionGraph, q: f64) -> Result<LeverageScores> {
    check_assumption1(g, q)?;
    let n = g.node_count();
    let m = g.edge_count();
    let b = IncidenceOperator::new(g);
    let scores = if n <= DENSE_EXACT_LIMIT {
        let lap = assemble_magnetic_laplacian(g, q);
        let minv = hpd_inverse(&lap.to_dense_regularized())
            .map_err(|_| Error::AssumptionViolated)?;
        (0..m)
            .map(|e| {
                let (u, bu, v, bv) = b.row(e);
                let quad = bu * minv[(u, u)] * bu.conj()
                    + bu * minv[(u, v)] * bv.conj()
                    + bv * minv[(v, u)] * bu.conj()
                    + bv * minv[(v, v)] * bv.conj();
                quad.re
            })
            .collect()
    } else if m <= SOLVE_EXACT_LIMIT {
        let lap = assemble_magnetic_laplacian(g, q);
        let mut scores = Vec::with_capacity(m);
        for e in 0..m {
            let (u, bu, v, bv) = b.row(e);
            let mut rhs = vec![C64::ZERO; n];
            rhs[u] = bu.conj();
            rhs[v] = bv.conj();
            let sol = pcg_solve(&lap, &Preconditioner::Identity, &rhs, 1e-12, 20 * n)?;
            if !sol.converged {
                return Err(Error::NoConvergence(format!(
                    "leverage solve for edge {e} stalled at residual {:.3e}",
                    sol.residuals.last().copied().unwrap_or(f64::NAN)
                )));
            }
            scores.push((bu * sol.x[u] + bv * sol.x[v]).re);
        }
        scores
    } else {
        return Err(Error::SizeGuard(format!(
            "exact scores refused at n = {n}, m = {m}; use jl or uniform"
        )));
    };
    Ok(LeverageScores {
        scores,
        provenance: Provenance::Exact,
        q,
        clipped_low: 0,
        clipped_high: 0,
    })
}

/// Uniform heuristic: a constant sample_size/m per edge, normalized so the
/// scores sum to the sample size.
pub fn uniform_ls(sample_size: usize, m: usize) -> Result<LeverageScores> {
    if sample_size == 0 || sample_size > m {
        return Err(Error::InvalidParameter(format!(
            "sample size {sample_size} outside 1..={m}"
        )));
    }
    Ok(LeverageScores {
        scores: vec![sample_size as f64 / m as f64; m],
        provenance: Provenance::Uniform,
        q: f64::NAN,
        clipped_low: 0,
        clipped_high: 0,
    })
}

/// Sketch width k = ⌈40·log(m+n)+1⌉ (natural log); the q = 0 variant drops
/// the n auxiliary rows.
pub fn jl_sketch_width(m: usize, n: usize, q: f64) -> usize {
    let rows = if q > 0.0 { m + n } else { m };
    (40.0 * (rows as f64).ln() + 1.0).ceil() as usize
}

/// Johnson–Lindenstrauss sketched scores: solve (Δ+qI)T = [√q·I  B*]Q for a
/// Rademacher probe matrix Q with entries ±1/√k, then read squared row norms
/// of B·T. Scores are clipped to [1e-12, 1] with clip counts recorded.
pub fn jl_ls(g: &ConnectionGraph, q: f64, seed: u64) -> Result<LeverageScores> {
    check_assumption1(g, q)?;
    let n = g.node_count();
    let m = g.edge_count();
    let k = jl_sketch_width(m, n, q);
    let b = IncidenceOperator::new(g);
    let lap = assemble_magnetic_laplacian(g, q);
    let inv_sqrt_k = 1.0 / (k as f64).sqrt();
    let sqrt_q = q.sqrt();

    // T column by column; the probe column j is regenerated deterministically
    // from (seed, j) so columns can be processed in any order or in parallel.
    let mut t = vec![vec![C64::ZERO; n]; k];
    let dense_factor = if n <= DENSE_EXACT_LIMIT {
        Some(
            cholesky(&lap.to_dense_regularized()).map_err(|_| Error::AssumptionViolated)?,
        )
    } else {
        None
    };
    for (j, tcol) in t.iter_mut().enumerate() {
        let mut probe = SplitMix64::from_key(&[seed, JL_DOMAIN, j as u64]);
        let sign = |s: &mut SplitMix64| {
            if s.next_u64() & 1 == 0 { inv_sqrt_k } else { -inv_sqrt_k }
        };
        let mut rhs = vec![C64::ZERO; n];
        if q > 0.0 {
            for r in rhs.iter_mut() {
                *r = C64::new(sqrt_q * sign(&mut probe), 0.0);
            }
        }
        // B* rows of the probe: entry e contributes to nodes u and v.
        for e in 0..m {
            let (u, bu, v, bv) = b.row(e);
            let s = sign(&mut probe);
            rhs[u] += bu.conj() * s;
            rhs[v] += bv.conj() * s;
        }
        match &dense_factor {
            Some(f) => {
                let mut x = rhs;
                f.solve(&mut x);
                *tcol = x;
            }
            None => {
                let sol = pcg_solve(&lap, &Preconditioner::Identity, &rhs, 1e-10, 40 * n)?;
                if !sol.converged {
                    return Err(Error::NoConvergence(format!(
                        "sketch solve {j} stalled at residual {:.3e}",
                        sol.residuals.last().copied().unwrap_or(f64::NAN)
                    )));
                }
                *tcol = sol.x;
            }
        }
    }
    let mut clipped_low = 0;
    let mut clipped_high = 0;
    let scores = (0..m)
        .map(|e| {
            let (u, bu, v, bv) = b.row(e);
            let raw: f64 = t
                .iter()
                .map(|col| (bu * col[u] + bv * col[v]).norm_sqr())
                .sum();
            if raw < CLIP_LOW {
                clipped_low += 1;
                CLIP_LOW
            } else if raw > 1.0 {
                clipped_high += 1;
                1.0
            } else {
                raw
            }
        })
        .collect();
    Ok(LeverageScores {
        scores,
        provenance: Provenance::Jl { sketch_width: k },
        q,
        clipped_low,
        clipped_high,
    })
}
