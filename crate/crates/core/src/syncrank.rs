//! Ranking from pairwise comparisons.
//!
//! Comparisons κ_uv (cardinal in [−n+1, n−1] or ordinal ±1, positive when u
//! beats v) are embedded as edge angles θ(uv) = π·κ_uv/(n−1). The angular
//! scores are the entrywise arguments of the least eigenvector of the
//! degree-normalized magnetic Laplacian (weights 1/√(d(u)d(v))); the induced
//! circular order is cut at the point minimizing the number of upsets over
//! the n circular shifts, and compared against a reference by Kendall's tau.

use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use crate::laplacian::assemble_magnetic_laplacian;
use crate::rng::replicate_rng;
use crate::sampler::{WeightMode, cycle_popping};
use crate::solvers::{InnerSolve, least_eigenpair};
use crate::sparsifier::{
    EstimatorKind, LsSpec, SparsifierBatch, build_self_normalized, cholesky_sparse_hpd,
};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub u: usize,
    pub v: usize,
    pub kappa: f64,
}

/// Angular embedding θ(uv) = π·κ_uv/(n−1) of antisymmetric comparisons.
pub fn embed_comparisons(comparisons: &[Comparison], n: usize) -> Result<ConnectionGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter("need n >= 2".into()));
    }
    let bound = n as f64 - 1.0;
    let mut edges = Vec::with_capacity(comparisons.len());
    for c in comparisons {
        if c.kappa.abs() > bound + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "comparison {}–{} out of range: |{}| > {bound}",
                c.u, c.v, c.kappa
            )));
        }
        edges.push((c.u, c.v, 1.0, PI * c.kappa / bound));
    }
    ConnectionGraph::new(n, edges)
}

/// Recovers the cardinal comparisons κ_uv = θ(uv)(n−1)/π stored in a
/// connection graph's angles (the inverse of `embed_comparisons`).
pub fn comparisons_from_connection(g: &ConnectionGraph) -> Vec<Comparison> {
    let n = g.node_count() as f64;
    g.edges()
        .iter()
        .map(|e| {
            let signed = if e.angle > PI { e.angle - TAU } else { e.angle };
            Comparison {
                u: e.u,
                v: e.v,
                kappa: signed * (n - 1.0) / PI,
            }
        })
        .collect()
}

/// Sparsifier configuration shared by the two sparsify modes: t capped-mode
/// samples at regularization q, combined with the self-normalized estimator
/// under the uniform leverage heuristic.
#[derive(Debug, Clone, Copy)]
pub struct SparsifyConfig {
    pub t: usize,
    pub q: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub enum EigensolveMode {
    /// Direct dense-backed inverse iteration on the full Laplacian.
    Exact,
    /// Eigen-solve the sparsifier instead of the full Laplacian.
    SparsifyEigensolve(SparsifyConfig),
    /// Solve on the full Laplacian, preconditioned by the sparsifier factor.
    SparsifyPrecondition(SparsifyConfig),
}

/// Result of the ranking pipeline.
#[derive(Debug, Clone)]
pub struct RankingResult {
    /// Angular scores ĥ(u) ∈ [0, 2π).
    pub scores: Vec<f64>,
    /// Final ranking after the best circular shift; a permutation of 1..=n.
    pub rank: Vec<usize>,
    pub shift: usize,
    pub upsets: usize,
    /// Kendall tau against the reference ranking, when one was given.
    pub tau: Option<f64>,
    pub degenerate: bool,
    /// Ties in the angular scores were broken by node id.
    pub had_ties: bool,
}

fn normalized_weight_graph(g: &ConnectionGraph) -> Result<ConnectionGraph> {
    g.reweighted(|e| {
        let edge = g.edge(e);
        1.0 / ((g.degree(edge.u) * g.degree(edge.v)) as f64).sqrt()
    })
}

fn sparsified_laplacian(
    g_norm: &ConnectionGraph,
    cfg: &SparsifyConfig,
) -> Result<crate::laplacian::MagneticLaplacian> {
    // The walk kernel needs unit weights; samples land back on the weighted
    // graph through the estimator.
    let unit = g_norm.reweighted(|_| 1.0)?;
    let mut samples = Vec::with_capacity(cfg.t);
    for rep in 0..cfg.t {
        let mut rng = replicate_rng(cfg.seed, rep as u64);
        let (f, _) = cycle_popping(&unit, cfg.q, WeightMode::Capped, &mut rng)?;
        samples.push(f);
    }
    let batch = SparsifierBatch::new(
        g_norm,
        samples,
        LsSpec::UniformPerSample,
        cfg.q,
        EstimatorKind::SelfNormalized,
    )?;
    build_self_normalized(&batch)
}

/// Angular scores from the least eigenvector of the degree-normalized
/// magnetic Laplacian; the flag marks a degenerate least eigenspace or an
/// uninformative constant score vector.
pub fn spectral_scores(g: &ConnectionGraph, mode: EigensolveMode) -> Result<(Vec<f64>, bool)> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let g_norm = normalized_weight_graph(g)?;
    let pair = match mode {
        EigensolveMode::Exact => {
            let lap = assemble_magnetic_laplacian(&g_norm, 0.0);
            least_eigenpair(&lap, InnerSolve::Dense, 0.0)?
        }
        EigensolveMode::SparsifyEigensolve(cfg) => {
            let sp = sparsified_laplacian(&g_norm, &cfg)?;
            // Spanning-forest sparsifiers can be singular; the factor is
            // built on a hair of regularization, matching the estimator's q
            // when positive.
            let shift = if cfg.q > 0.0 { cfg.q } else { 1e-12 };
            let shifted = assemble_magnetic_laplacian(
                &ConnectionGraph::new(
                    sp.n,
                    sp_support_edges(&sp),
                )?,
                shift,
            );
            let factor = cholesky_sparse_hpd(&shifted)?;
            least_eigenpair(
                &shifted,
                InnerSolve::Pcg {
                    precond: &factor,
                    tol: 1e-12,
                    maxit: 500,
                },
                0.0,
            )?
        }
        EigensolveMode::SparsifyPrecondition(cfg) => {
            let sp = sparsified_laplacian(&g_norm, &cfg)?;
            let shift = if cfg.q > 0.0 { cfg.q } else { 1e-12 };
            let precond_lap = assemble_magnetic_laplacian(
                &ConnectionGraph::new(sp.n, sp_support_edges(&sp))?,
                shift,
            );
            let factor = cholesky_sparse_hpd(&precond_lap)?;
            let lap = assemble_magnetic_laplacian(&g_norm, 0.0);
            least_eigenpair(
                &lap,
                InnerSolve::Pcg {
                    precond: &factor,
                    tol: 1e-10,
                    maxit: 4000,
                },
                0.0,
            )?
        }
    };
    let scores: Vec<f64> = pair
        .vector
        .iter()
        .map(|z| {
            if z.norm() == 0.0 {
                0.0
            } else {
                let a = z.arg();
                if a < 0.0 { a + TAU } else { a }
            }
        })
        .collect();
    let spread = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let degenerate = pair.degenerate || spread < 1e-12;
    Ok((scores, degenerate))
}

fn sp_support_edges(sp: &crate::laplacian::MagneticLaplacian) -> Vec<(usize, usize, f64, f64)> {
    // Reads the sparsifier Laplacian back into edge-list form.
    let mat = sp.matrix();
    let mut edges = Vec::new();
    for u in 0..sp.n {
        for k in mat.row_ptr[u]..mat.row_ptr[u + 1] {
            let v = mat.col_idx[k];
            if v > u {
                let z = mat.values[k];
                let w = z.norm();
                // offdiag = −w·exp(−iθ) ⇒ θ = −arg(−z).
                let theta = -(-z).arg();
                edges.push((u, v, w, theta));
            }
        }
    }
    edges
}

/// Ranks nodes by descending angular score, ties broken by node id; returns
/// (rank vector r with r[u] ∈ 1..=n, tie flag).
pub fn ranking_from_scores(scores: &[f64]) -> (Vec<usize>, bool) {
    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let had_ties = idx
        .windows(2)
        .any(|w| scores[w[0]] == scores[w[1]]);
    let mut rank = vec![0usize; n];
    for (pos, &u) in idx.iter().enumerate() {
        rank[u] = pos + 1;
    }
    (rank, had_ties)
}

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Exact minimization of Σ |sign(κ_uv) − sign(r_σ(u) − r_σ(v))| over the n
/// circular shifts σ(ℓ) = 1 + (ℓ + s) mod n; smallest s wins ties.
pub fn best_circular_shift(rank: &[usize], comparisons: &[Comparison]) -> (usize, usize) {
    let n = rank.len();
    let mut best = (0usize, usize::MAX);
    for s in 0..n {
        let shifted = |r: usize| 1 + (r + s) % n;
        let mut upsets = 0usize;
        for c in comparisons {
            let d = shifted(rank[c.u]) as i64 - shifted(rank[c.v]) as i64;
            upsets += (sign(c.kappa) - sign(d as f64)).unsigned_abs() as usize;
        }
        if upsets < best.1 {
            best = (s, upsets);
        }
    }
    best
}

/// Kendall rank correlation (concordant − discordant)/C(n,2) of two rankings.
pub fn kendall_tau(r1: &[usize], r2: &[usize]) -> Result<f64> {
    if r1.len() != r2.len() {
        return Err(Error::DimensionMismatch {
            expected: r1.len(),
            got: r2.len(),
        });
    }
    let n = r1.len();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two items".into()));
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let a = (r1[i] as i64 - r1[j] as i64).signum();
            let b = (r2[i] as i64 - r2[j] as i64).signum();
            if a * b > 0 {
                concordant += 1;
            } else if a * b < 0 {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok((concordant - discordant) as f64 / pairs)
}

/// Full pipeline: embed, eigensolve, rank, shift; tau against a reference
/// ranking when given.
pub fn sync_rank(
    comparisons: &[Comparison],
    n: usize,
    mode: EigensolveMode,
    reference: Option<&[usize]>,
) -> Result<RankingResult> {
    let g = embed_comparisons(comparisons, n)?;
    let (scores, degenerate) = spectral_scores(&g, mode)?;
    let (base_rank, had_ties) = ranking_from_scores(&scores);
    let (shift, upsets) = best_circular_shift(&base_rank, comparisons);
    let rank: Vec<usize> = base_rank.iter().map(|&r| 1 + (r + shift) % n).collect();
    let tau = match reference {
        Some(h) => Some(kendall_tau(&rank, h)?),
        None => None,
    };
    Ok(RankingResult {
        scores,
        rank,
        shift,
        upsets,
        tau,
        degenerate,
        had_ties,
    })
}
