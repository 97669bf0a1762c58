//! Sparsified Laplacians from sample batches, and sparse Cholesky
//! factorizations tailored to the sampled subgraphs.
//!
//! A batch of t subgraphs turns into the Hermitian estimator with per-edge
//! weight w_uv · n(e)/(t · l(e)), where n(e) counts appearances across the
//! batch and l(e) is the leverage score used for sampling. Capped-measure
//! samples get the self-normalized variant reweighted by
//! w(F) = Π_cycles max(1, 1 − cos θ).
//!
//! The Laplacian of a single MTSF admits a Cholesky factorization with at
//! most n − r + Σ(nᵢ − 3) off-diagonal entries: peel the leaves of each tree,
//! then walk each cycle. Unions of several samples lose that structure and
//! are ordered by greedy minimum degree instead.

use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use crate::laplacian::{MagneticLaplacian, assemble_magnetic_laplacian};
use crate::sampler::{Component, Mtsf};
use num_complex::Complex64;
use std::collections::HashMap;

type C64 = Complex64;

/// Leverage scores attached to a batch.
#[derive(Debug, Clone)]
pub enum LsSpec {
    /// One score per edge of the host graph.
    PerEdge(Vec<f64>),
    /// The uniform heuristic: sample ℓ weighs its edges by |F_ℓ|/m.
    UniformPerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Plain,
    SelfNormalized,
}

/// A batch of independently sampled MTSFs with the data needed to assemble
/// the sparsifier.
#[derive(Debug)]
pub struct SparsifierBatch<'a> {
    pub graph: &'a ConnectionGraph,
    pub samples: Vec<Mtsf>,
    pub ls: LsSpec,
    pub q: f64,
    pub kind: EstimatorKind,
}

impl<'a> SparsifierBatch<'a> {
    pub fn new(
        graph: &'a ConnectionGraph,
        samples: Vec<Mtsf>,
        ls: LsSpec,
        q: f64,
        kind: EstimatorKind,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("batch size t = 0".into()));
        }
        if let LsSpec::PerEdge(scores) = &ls {
            if scores.len() != graph.edge_count() {
                return Err(Error::DimensionMismatch {
                    expected: graph.edge_count(),
                    got: scores.len(),
                });
            }
            for s in &samples {
                for &e in s.edge_ids() {
                    if scores[e] <= 0.0 {
                        return Err(Error::ZeroLeverage(e));
                    }
                }
            }
        }
        Ok(SparsifierBatch {
            graph,
            samples,
            ls,
            q,
            kind,
        })
    }

    pub fn t(&self) -> usize {
        self.samples.len()
    }

    /// Number of times each edge appears across the batch.
    pub fn multiplicities(&self) -> HashMap<usize, usize> {
        let mut n = HashMap::new();
        for s in &self.samples {
            for &e in s.edge_ids() {
                *n.entry(e).or_insert(0usize) += 1;
            }
        }
        n
    }

    /// Importance weights w(F_ℓ) = Π max(1, 1 − cos θ); 1 on weakly
    /// inconsistent samples.
    pub fn importance_weights(&self) -> Vec<f64> {
        self.samples.iter().map(Mtsf::importance_weight).collect()
    }

    fn per_edge_coefficients(&self) -> HashMap<usize, f64> {
        let t = self.t() as f64;
        let m = self.graph.edge_count() as f64;
        let weights = match self.kind {
            EstimatorKind::Plain => vec![1.0; self.samples.len()],
            EstimatorKind::SelfNormalized => {
                let w = self.importance_weights();
                let total: f64 = w.iter().sum();
                // Σ_ℓ w_ℓ Δ̃(F_ℓ) / Σ_ℓ w_ℓ, folded into per-sample factors.
                w.into_iter().map(|x| x * t / total).collect()
            }
        };
        let mut coeff: HashMap<usize, f64> = HashMap::new();
        for (s, wl) in self.samples.iter().zip(weights) {
            let unif_ls = s.edge_count() as f64 / m;
            for &e in s.edge_ids() {
                let l = match &self.ls {
                    LsSpec::PerEdge(scores) => scores[e],
                    LsSpec::UniformPerSample => unif_ls,
                };
                *coeff.entry(e).or_insert(0.0) += wl / (t * l);
            }
        }
        coeff
    }

    /// The support of the sparsifier as a reweighted subgraph: edge e gets
    /// weight w_e times the accumulated sampling coefficient.
    pub fn support_graph(&self) -> Result<ConnectionGraph> {
        let coeff = self.per_edge_coefficients();
        let mut edges: Vec<(usize, usize, f64, f64)> = coeff
            .iter()
            .map(|(&e, &c)| {
                let edge = self.graph.edge(e);
                (edge.u, edge.v, edge.weight * c, edge.angle)
            })
            .collect();
        edges.sort_by_key(|&(u, v, _, _)| (u, v));
        ConnectionGraph::new(self.graph.node_count(), edges)
    }
}

/// Assembles the batch sparsifier Δ̃_t with the batch's q stored alongside.
pub fn build_sparsifier(batch: &SparsifierBatch) -> Result<MagneticLaplacian> {
    if batch.kind != EstimatorKind::Plain {
        return Err(Error::InvalidParameter(
            "batch was built for the self-normalized estimator".into(),
        ));
    }
    Ok(assemble_magnetic_laplacian(&batch.support_graph()?, batch.q))
}

/// The self-normalized importance-sampling estimator for capped-measure
/// samples: Σ_ℓ w(F_ℓ) Δ̃(F_ℓ) / Σ_ℓ w(F_ℓ).
pub fn build_self_normalized(batch: &SparsifierBatch) -> Result<MagneticLaplacian> {
    if batch.kind != EstimatorKind::SelfNormalized {
        return Err(Error::InvalidParameter(
            "batch was built for the plain estimator".into(),
        ));
    }
    Ok(assemble_magnetic_laplacian(&batch.support_graph()?, batch.q))
}

/// i.i.d. edge-sampling baseline: batches of edge multisets weighted by the
/// same w·n(e)/(t·l(e)) rule.
pub fn build_iid_sparsifier(
    g: &ConnectionGraph,
    q: f64,
    batches: &[Vec<usize>],
    ls: &[f64],
) -> Result<MagneticLaplacian> {
    if batches.is_empty() {
        return Err(Error::InvalidParameter("batch size t = 0".into()));
    }
    let t = batches.len() as f64;
    let mut coeff: HashMap<usize, f64> = HashMap::new();
    for batch in batches {
        for &e in batch {
            if ls[e] <= 0.0 {
                return Err(Error::ZeroLeverage(e));
            }
            *coeff.entry(e).or_insert(0.0) += 1.0 / (t * ls[e]);
        }
    }
    let mut edges: Vec<(usize, usize, f64, f64)> = coeff
        .iter()
        .map(|(&e, &c)| {
            let edge = g.edge(e);
            (edge.u, edge.v, edge.weight * c, edge.angle)
        })
        .collect();
    edges.sort_by_key(|&(u, v, _, _)| (u, v));
    Ok(assemble_magnetic_laplacian(
        &ConnectionGraph::new(g.node_count(), edges)?,
        q,
    ))
}

/// Batch size sufficient for the (1 ± ε) multiplicative guarantee:
/// t ≥ (37 κ/ε²) · max(2 log(4 d_eff/(δ κ)), √3), rounded up after the max.
pub fn batch_size_bound(d_eff: f64, kappa: f64, eps: f64, delta: f64) -> Result<usize> {
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} outside (0, 1)")));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} outside (0, 1)"
        )));
    }
    if !(0.0 < kappa && kappa <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa = {kappa} outside (0, 1]"
        )));
    }
    if d_eff < kappa {
        return Err(Error::InvalidParameter(format!(
            "d_eff = {d_eff} below kappa = {kappa}"
        )));
    }
    let log_branch = 2.0 * (4.0 * d_eff / (delta * kappa)).ln();
    let value = 37.0 * kappa / (eps * eps) * log_branch.max(3f64.sqrt());
    Ok(value.ceil() as usize)
}

/// Permutation plus sparse upper-triangular factor R with R*R = P A Pᵀ for
/// the Laplacian A = Δ̃ + qI handed to the factorization.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    /// perm[k] = original index eliminated at step k.
    pub perm: Vec<usize>,
    diag: Vec<f64>,
    rows: Vec<Vec<(usize, C64)>>,
    pub offdiag_nnz: usize,
    /// Elementary update count of the numeric factorization.
    pub factor_ops: u64,
    pub q: f64,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Solves (R*R) y = Pb and returns x = Pᵀy in original index order,
    /// along with the substitution operation count.
    pub fn solve_counted(&self, b: &[C64]) -> (Vec<C64>, u64) {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut ops = 0u64;
        // Forward pass R* y = Pb, scattering row contributions.
        let mut y: Vec<C64> = self.perm.iter().map(|&v| b[v]).collect();
        for k in 0..n {
            let yk = y[k] / self.diag[k];
            y[k] = yk;
            for &(j, v) in &self.rows[k] {
                y[j] -= v.conj() * yk;
                ops += 1;
            }
        }
        // Backward pass R x = y.
        for k in (0..n).rev() {
            let mut acc = y[k];
            for &(j, v) in &self.rows[k] {
                acc -= v * y[j];
                ops += 1;
            }
            y[k] = acc / self.diag[k];
        }
        let mut x = vec![C64::ZERO; n];
        for (k, &v) in self.perm.iter().enumerate() {
            x[v] = y[k];
        }
        (x, ops)
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        self.solve_counted(b).0
    }

    pub fn to_permuted(&self, x: &[C64]) -> Vec<C64> {
        self.perm.iter().map(|&v| x[v]).collect()
    }

    pub fn from_permuted(&self, y: &[C64]) -> Vec<C64> {
        let mut x = vec![C64::ZERO; self.n()];
        for (k, &v) in self.perm.iter().enumerate() {
            x[v] = y[k];
        }
        x
    }

    /// Solves R x = b (back substitution) in permuted coordinates.
    pub fn solve_r(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n();
        let mut x = b.to_vec();
        for k in (0..n).rev() {
            let mut acc = x[k];
            for &(j, v) in &self.rows[k] {
                acc -= v * x[j];
            }
            x[k] = acc / self.diag[k];
        }
        x
    }

    /// Solves R* y = b (forward substitution) in permuted coordinates.
    pub fn solve_r_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n();
        let mut y = b.to_vec();
        for k in 0..n {
            let yk = y[k] / self.diag[k];
            y[k] = yk;
            for &(j, v) in &self.rows[k] {
                y[j] -= v.conj() * yk;
            }
        }
        y
    }

    /// y = R x in permuted coordinates.
    pub fn mul_r(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n();
        let mut y = vec![C64::ZERO; n];
        for k in 0..n {
            let mut acc = self.diag[k] * x[k];
            for &(j, v) in &self.rows[k] {
                acc += v * x[j];
            }
            y[k] = acc;
        }
        y
    }

    /// y = R* x in permuted coordinates.
    pub fn mul_r_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n();
        let mut y = vec![C64::ZERO; n];
        for k in 0..n {
            y[k] += self.diag[k] * x[k];
            for &(j, v) in &self.rows[k] {
                y[j] += v.conj() * x[k];
            }
        }
        y
    }

    /// Rows of R in permuted coordinates, diagonal entry first.
    pub fn sparse_rows(&self) -> Vec<Vec<(usize, C64)>> {
        (0..self.n())
            .map(|k| {
                let mut row = Vec::with_capacity(self.rows[k].len() + 1);
                row.push((k, C64::new(self.diag[k], 0.0)));
                row.extend_from_slice(&self.rows[k]);
                row
            })
            .collect()
    }

    /// Dense R in permuted coordinates (small-scale checks only).
    pub fn dense_r(&self) -> crate::dense::CMat {
        let n = self.n();
        let mut r = crate::dense::CMat::zeros(n, n);
        for k in 0..n {
            r[(k, k)] = C64::new(self.diag[k], 0.0);
            for &(j, v) in &self.rows[k] {
                r[(k, j)] = v;
            }
        }
        r
    }
}

/// Solves (Δ̃+qI)x = b through the factor; dimension-checked entry point.
pub fn solve_factored(factor: &CholeskyFactor, b: &[C64]) -> Result<Vec<C64>> {
    if b.len() != factor.n() {
        return Err(Error::DimensionMismatch {
            expected: factor.n(),
            got: b.len(),
        });
    }
    Ok(factor.solve(b))
}

/// Numeric elimination in a prescribed order over a Hermitian matrix given as
/// a diagonal plus off-diagonal adjacency maps.
fn factorize_in_order(
    mut diag: Vec<f64>,
    mut rows: Vec<HashMap<usize, C64>>,
    order: Vec<usize>,
    q: f64,
) -> Result<CholeskyFactor> {
    let n = diag.len();
    debug_assert_eq!(order.len(), n);
    let mut pos = vec![usize::MAX; n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let mut out_rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
    let mut out_diag = vec![0.0; n];
    let mut offdiag_nnz = 0usize;
    let mut ops = 0u64;
    for (k, &v) in order.iter().enumerate() {
        let d = diag[v];
        if !(d > 1e-300) || !d.is_finite() {
            return Err(Error::Singular(format!(
                "pivot {d:.3e} while eliminating node {v}"
            )));
        }
        let sq = d.sqrt();
        out_diag[k] = sq;
        // Drain order of the map is process-random; sort so the update
        // accumulation order (and thus every last bit of the factor) is
        // reproducible across runs.
        let mut nbrs: Vec<(usize, C64)> = rows[v].drain().collect();
        nbrs.sort_unstable_by_key(|&(w, _)| w);
        // R row k = A[v, ·]/√d on uneliminated neighbors.
        let mut row: Vec<(usize, C64)> = nbrs.iter().map(|&(w, a)| (pos[w], a / sq)).collect();
        row.sort_unstable_by_key(|&(j, _)| j);
        offdiag_nnz += row.len();
        out_rows[k] = row;
        // Schur update A' -= u u*/d over the neighbor clique.
        for i in 0..nbrs.len() {
            let (w, aw) = nbrs[i];
            rows[w].remove(&v);
            diag[w] -= aw.norm_sqr() / d;
            ops += 1;
            for &(x, ax) in nbrs.iter().skip(i + 1) {
                let upd = aw.conj() * ax / d;
                *rows[w].entry(x).or_insert(C64::ZERO) -= upd;
                *rows[x].entry(w).or_insert(C64::ZERO) -= upd.conj();
                ops += 1;
            }
        }
    }
    Ok(CholeskyFactor {
        perm: order,
        diag: out_diag,
        rows: out_rows,
        offdiag_nnz,
        factor_ops: ops,
        q,
    })
}

fn laplacian_maps(
    n: usize,
    q: f64,
    edges: impl Iterator<Item = (usize, usize, f64, f64)>,
) -> (Vec<f64>, Vec<HashMap<usize, C64>>) {
    let mut diag = vec![q; n];
    let mut rows: Vec<HashMap<usize, C64>> = vec![HashMap::new(); n];
    for (u, v, w, angle) in edges {
        diag[u] += w;
        diag[v] += w;
        let z = -w * C64::new(0.0, -angle).exp();
        *rows[u].entry(v).or_insert(C64::ZERO) += z;
        *rows[v].entry(u).or_insert(C64::ZERO) += z.conj();
    }
    (diag, rows)
}

/// Upper bound n − r + Σ(nᵢ − 3) on the off-diagonal count of the MTSF
/// factor, from the component structure.
pub fn mtsf_offdiag_bound(f: &Mtsf, g: &ConnectionGraph) -> usize {
    let n = g.node_count() as isize;
    let r = f.tree_count() as isize;
    let cyc: isize = f.cycles().map(|c| c.cycle.len() as isize - 3).sum();
    (n - r + cyc).max(0) as usize
}

/// Cholesky factorization of the MTSF Laplacian (edge weights taken from the
/// host graph) plus q on the diagonal, using the leaf-first elimination order.
pub fn cholesky_mtsf(f: &Mtsf, g: &ConnectionGraph, q: f64) -> Result<CholeskyFactor> {
    let w = |e: usize| g.edge(e).weight;
    cholesky_mtsf_weighted(f, g, q, &w)
}

/// Same factorization with caller-supplied edge weights (the sparsifier path
/// passes the reweighted w·n(e)/(t·l(e)) values).
pub fn cholesky_mtsf_weighted(
    f: &Mtsf,
    g: &ConnectionGraph,
    q: f64,
    weight: &dyn Fn(usize) -> f64,
) -> Result<CholeskyFactor> {
    f.validate(g)?;
    let n = g.node_count();
    let (diag, rows) = laplacian_maps(
        n,
        q,
        f.edge_ids().iter().map(|&e| {
            let edge = g.edge(e);
            (edge.u, edge.v, weight(e), edge.angle)
        }),
    );
    let order = mtsf_elimination_order(f, g);
    let factor = factorize_in_order(diag, rows, order, q)?;
    debug_assert!(factor.offdiag_nnz <= mtsf_offdiag_bound(f, g));
    Ok(factor)
}

/// Leaf-peeling order: every tree is consumed leaves-first down to its last
/// node; cycle-rooted trees are peeled down to the cycle, which is then
/// eliminated walking around it.
fn mtsf_elimination_order(f: &Mtsf, g: &ConnectionGraph) -> Vec<usize> {
    let n = g.node_count();
    let mut deg = vec![0usize; n];
    let mut inc: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (edge, other)
    let mut on_cycle = vec![false; n];
    for comp in &f.components {
        if let Component::CycleTree(t) = comp {
            for &v in &t.cycle {
                on_cycle[v] = true;
            }
        }
    }
    for &e in f.edge_ids() {
        let edge = g.edge(e);
        deg[edge.u] += 1;
        deg[edge.v] += 1;
        inc[edge.u].push((e, edge.v));
        inc[edge.v].push((e, edge.u));
    }
    let mut removed_edge = vec![false; g.edge_count()];
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    // Leaves first (never touching cycle nodes).
    let mut queue: Vec<usize> = (0..n).filter(|&v| deg[v] <= 1 && !on_cycle[v]).collect();
    while let Some(v) = queue.pop() {
        if eliminated[v] {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        for &(e, other) in &inc[v] {
            if removed_edge[e] || eliminated[other] {
                continue;
            }
            removed_edge[e] = true;
            deg[other] -= 1;
            if deg[other] <= 1 && !on_cycle[other] {
                queue.push(other);
            }
        }
    }
    // Then each cycle in path order.
    for comp in &f.components {
        if let Component::CycleTree(t) = comp {
            order.extend_from_slice(&t.cycle);
        }
    }
    debug_assert_eq!(order.len(), n);
    order
}

/// Factorization of a general sparse regularized Laplacian (union-of-samples
/// sparsifiers) with a greedy minimum-degree ordering.
pub fn cholesky_sparse_hpd(lap: &MagneticLaplacian) -> Result<CholeskyFactor> {
    let n = lap.n;
    let mat = lap.matrix();
    let mut diag = vec![lap.q; n];
    let mut rows: Vec<HashMap<usize, C64>> = vec![HashMap::new(); n];
    for u in 0..n {
        for k in mat.row_ptr[u]..mat.row_ptr[u + 1] {
            let v = mat.col_idx[k];
            if v == u {
                diag[u] += mat.values[k].re;
            } else {
                rows[u].insert(v, mat.values[k]);
            }
        }
    }
    let order = min_degree_order(&rows);
    factorize_in_order(diag, rows, order, lap.q)
}

fn min_degree_order(rows: &[HashMap<usize, C64>]) -> Vec<usize> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let n = rows.len();
    let mut adj: Vec<std::collections::HashSet<usize>> =
        rows.iter().map(|r| r.keys().copied().collect()).collect();
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((d, v))) = heap.pop() {
        if eliminated[v] || adj[v].len() != d {
            continue; // stale entry
        }
        eliminated[v] = true;
        order.push(v);
        let mut nbrs: Vec<usize> = adj[v].iter().copied().collect();
        nbrs.sort_unstable();
        for &w in &nbrs {
            adj[w].remove(&v);
        }
        for i in 0..nbrs.len() {
            for j in i + 1..nbrs.len() {
                let (a, b) = (nbrs[i], nbrs[j]);
                if adj[a].insert(b) {
                    adj[b].insert(a);
                }
            }
        }
        for &w in &nbrs {
            heap.push(Reverse((adj[w].len(), w)));
        }
    }
    order
}
