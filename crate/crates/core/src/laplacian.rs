//! Magnetic and combinatorial Laplacians and the twisted incidence operator.
//!
//! For an edge uv with weight w and angle θ(uv), the magnetic Laplacian has
//! diagonal entry Σ_v w_uv at u and off-diagonal entry −w·exp(−iθ(uv)) at
//! (u, v). With all angles zero this is the combinatorial Laplacian.

use crate::dense::CMat;
use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use num_complex::Complex64;

/// Compressed-row Hermitian sparse matrix. Both triangles are stored so walks
/// and matrix-vector products get fast row access.
#[derive(Debug, Clone)]
pub struct SparseHermitian {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SparseHermitian {
    /// Builds from upper-triangle triplets `(u, v, z)` with `u != v` plus a
    /// full diagonal; the mirrored entry conj(z) at (v, u) is added here.
    pub fn from_triplets(n: usize, diag: &[f64], upper: &[(usize, usize, Complex64)]) -> Self {
        let mut counts = vec![0usize; n];
        for v in 0..n {
            if diag[v] != 0.0 {
                counts[v] += 1;
            }
        }
        for &(u, v, _) in upper {
            counts[u] += 1;
            counts[v] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        for v in 0..n {
            row_ptr[v + 1] = row_ptr[v] + counts[v];
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![Complex64::ZERO; nnz];
        let mut fill = row_ptr.clone();
        for v in 0..n {
            if diag[v] != 0.0 {
                col_idx[fill[v]] = v;
                values[fill[v]] = Complex64::new(diag[v], 0.0);
                fill[v] += 1;
            }
        }
        for &(u, v, z) in upper {
            col_idx[fill[u]] = v;
            values[fill[u]] = z;
            fill[u] += 1;
            col_idx[fill[v]] = u;
            values[fill[v]] = z.conj();
            fill[v] += 1;
        }
        SparseHermitian {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n);
        for u in 0..self.n {
            let mut acc = Complex64::ZERO;
            for k in self.row_ptr[u]..self.row_ptr[u + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[u] = acc;
        }
    }

    pub fn entry(&self, u: usize, v: usize) -> Complex64 {
        for k in self.row_ptr[u]..self.row_ptr[u + 1] {
            if self.col_idx[k] == v {
                return self.values[k];
            }
        }
        Complex64::ZERO
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for u in 0..self.n {
            for k in self.row_ptr[u]..self.row_ptr[u + 1] {
                m[(u, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }
}

/// The magnetic Laplacian Δ of a connection graph, with the regularization q
/// stored separately so Δ and Δ + qI are both addressable.
#[derive(Debug, Clone)]
pub struct MagneticLaplacian {
    pub n: usize,
    pub q: f64,
    mat: SparseHermitian,
}

impl MagneticLaplacian {
    pub fn matrix(&self) -> &SparseHermitian {
        &self.mat
    }

    pub fn entry(&self, u: usize, v: usize) -> Complex64 {
        self.mat.entry(u, v)
    }

    /// y = Δ x
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.mat.apply(x, y);
    }

    /// y = (Δ + qI) x
    pub fn apply_regularized(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.mat.apply(x, y);
        if self.q != 0.0 {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi += self.q * xi;
            }
        }
    }

    /// Dense Δ (without q).
    pub fn to_dense(&self) -> CMat {
        self.mat.to_dense()
    }

    /// Dense Δ + qI.
    pub fn to_dense_regularized(&self) -> CMat {
        let mut m = self.mat.to_dense();
        for i in 0..self.n {
            m[(i, i)] += Complex64::new(self.q, 0.0);
        }
        m
    }

    /// Gershgorin upper bound on the largest eigenvalue of Δ + qI.
    pub fn norm_upper_bound(&self) -> f64 {
        let mut best: f64 = 0.0;
        for u in 0..self.n {
            let mut row = 0.0;
            for k in self.mat.row_ptr[u]..self.mat.row_ptr[u + 1] {
                if self.mat.col_idx[k] == u {
                    row += self.mat.values[k].re;
                } else {
                    row += self.mat.values[k].norm();
                }
            }
            best = best.max(row);
        }
        best + self.q
    }

    /// f* Δ f, real by Hermitian symmetry.
    pub fn quadratic_form(&self, f: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::ZERO; self.n];
        self.mat.apply(f, &mut y);
        f.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Assembles the magnetic Laplacian of `g` with regularization `q`.
pub fn assemble_magnetic_laplacian(g: &ConnectionGraph, q: f64) -> MagneticLaplacian {
    assert!(q >= 0.0, "q must be nonnegative");
    let n = g.node_count();
    let mut diag = vec![0.0; n];
    let mut upper = Vec::with_capacity(g.edge_count());
    for e in g.edges() {
        diag[e.u] += e.weight;
        diag[e.v] += e.weight;
        // Off-diagonal at (u, v): −w · exp(−iθ(uv)).
        let z = -e.weight * Complex64::new(0.0, -e.angle).exp();
        upper.push((e.u, e.v, z));
    }
    MagneticLaplacian {
        n,
        q,
        mat: SparseHermitian::from_triplets(n, &diag, &upper),
    }
}

/// Assembles the combinatorial Laplacian (all phases dropped) as the real
/// special case of the magnetic assembly.
pub fn assemble_combinatorial_laplacian(g: &ConnectionGraph, q: f64) -> MagneticLaplacian {
    assert!(q >= 0.0, "q must be nonnegative");
    let n = g.node_count();
    let mut diag = vec![0.0; n];
    let mut upper = Vec::with_capacity(g.edge_count());
    for e in g.edges() {
        diag[e.u] += e.weight;
        diag[e.v] += e.weight;
        upper.push((e.u, e.v, Complex64::new(-e.weight, 0.0)));
    }
    MagneticLaplacian {
        n,
        q,
        mat: SparseHermitian::from_triplets(n, &diag, &upper),
    }
}

/// The twisted incidence operator B (m×n, two entries per row) together with
/// the real oriented incidence B₀. Row e = uv carries exp(+iθ(uv)/2) at u and
/// −exp(−iθ(uv)/2) at v, so B*WB reproduces the magnetic Laplacian.
#[derive(Debug, Clone)]
pub struct IncidenceOperator {
    pub n: usize,
    pub m: usize,
    rows: Vec<(usize, usize, Complex64, Complex64)>,
    weights: Vec<f64>,
}

impl IncidenceOperator {
    pub fn new(g: &ConnectionGraph) -> Self {
        let rows = g
            .edges()
            .iter()
            .map(|e| {
                let half = 0.5 * e.angle;
                (
                    e.u,
                    e.v,
                    Complex64::new(0.0, half).exp(),
                    -Complex64::new(0.0, -half).exp(),
                )
            })
            .collect();
        IncidenceOperator {
            n: g.node_count(),
            m: g.edge_count(),
            weights: g.edges().iter().map(|e| e.weight).collect(),
            rows,
        }
    }

    /// Entries of row e as (u, B[e,u], v, B[e,v]).
    pub fn row(&self, e: usize) -> (usize, Complex64, usize, Complex64) {
        let (u, v, bu, bv) = self.rows[e];
        (u, bu, v, bv)
    }

    /// y = B x  (m-vector from n-vector).
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (e, &(u, v, bu, bv)) in self.rows.iter().enumerate() {
            y[e] = bu * x[u] + bv * x[v];
        }
    }

    /// y = B* x  (n-vector from m-vector).
    pub fn apply_adjoint(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.fill(Complex64::ZERO);
        for (e, &(u, v, bu, bv)) in self.rows.iter().enumerate() {
            y[u] += bu.conj() * x[e];
            y[v] += bv.conj() * x[e];
        }
    }

    /// Dense B.
    pub fn to_dense(&self) -> CMat {
        let mut b = CMat::zeros(self.m, self.n);
        for (e, &(u, v, bu, bv)) in self.rows.iter().enumerate() {
            b[(e, u)] = bu;
            b[(e, v)] = bv;
        }
        b
    }

    /// Dense real oriented incidence B₀ (entries ±1) as a complex matrix.
    pub fn to_dense_b0(&self) -> CMat {
        let mut b = CMat::zeros(self.m, self.n);
        for (e, &(u, v, _, _)) in self.rows.iter().enumerate() {
            b[(e, u)] = Complex64::ONE;
            b[(e, v)] = -Complex64::ONE;
        }
        b
    }

    /// B*WB assembled entrywise; used to cross-check the Laplacian assembly.
    pub fn gram(&self) -> CMat {
        let mut g = CMat::zeros(self.n, self.n);
        for (e, &(u, v, bu, bv)) in self.rows.iter().enumerate() {
            let w = self.weights[e];
            g[(u, u)] += w * (bu.conj() * bu);
            g[(v, v)] += w * (bv.conj() * bv);
            g[(u, v)] += w * (bu.conj() * bv);
            g[(v, u)] += w * (bv.conj() * bu);
        }
        g
    }
}

/// Verifies Assumption 1: Δ + qI is nonsingular, i.e. q > 0 or the connection
/// is non-trivial on every component (checked through a cycle-basis scan).
pub fn check_assumption1(g: &ConnectionGraph, q: f64) -> Result<()> {
    if q > 0.0 {
        return Ok(());
    }
    if g.connection_is_trivial(1e-12) {
        return Err(Error::AssumptionViolated);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::eigh;
    use std::f64::consts::PI;

    fn single_edge(theta: f64) -> ConnectionGraph {
        ConnectionGraph::new(2, vec![(0, 1, 1.0, theta)]).unwrap()
    }

    #[test]
    fn single_edge_trivial_connection() {
        let lap = assemble_magnetic_laplacian(&single_edge(0.0), 0.0);
        assert_eq!(lap.entry(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(lap.entry(0, 1), Complex64::new(-1.0, 0.0));
        assert_eq!(lap.entry(1, 0), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn single_edge_pi_phase() {
        let lap = assemble_magnetic_laplacian(&single_edge(PI), 0.0);
        // exp(-i·π) = −1, so the off-diagonal flips sign: [[1,1],[1,1]].
        assert!((lap.entry(0, 1) - Complex64::ONE).norm() < 1e-12);
        let (vals, _) = eigh(&lap.to_dense()).unwrap();
        assert!(vals[0].abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_lambda_min_matches_dense_oracle() {
        let g = ConnectionGraph::new(
            3,
            vec![
                (0, 1, 1.0, PI / 3.0),
                (1, 2, 1.0, PI / 3.0),
                (2, 0, 1.0, PI / 3.0),
            ],
        )
        .unwrap();
        let lap = assemble_magnetic_laplacian(&g, 0.0);
        let (vals, _) = eigh(&lap.to_dense()).unwrap();
        // Independent route: eigenvalues of the circulant-like 3×3 matrix with
        // off-diagonal −exp(−iπ/3): 2 − 2cos(2πk/3 + π/3) over k = 0, 1, 2.
        let mut expect: Vec<f64> = (0..3)
            .map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / 3.0 + PI / 3.0).cos())
            .collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in vals.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(vals[0] > 1e-3, "inconsistent cycle lifts lambda_min");
    }

    #[test]
    fn q_shifts_only_the_diagonal() {
        let g = single_edge(0.7);
        let a = assemble_magnetic_laplacian(&g, 0.0);
        let b = assemble_magnetic_laplacian(&g, 0.5);
        assert_eq!(a.entry(0, 1), b.entry(0, 1));
        let x = vec![Complex64::ONE, Complex64::new(0.0, 1.0)];
        let mut ya = vec![Complex64::ZERO; 2];
        let mut yb = vec![Complex64::ZERO; 2];
        a.apply(&x, &mut ya);
        b.apply_regularized(&x, &mut yb);
        for i in 0..2 {
            assert!((yb[i] - ya[i] - 0.5 * x[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn combinatorial_row_sums_vanish() {
        let g = ConnectionGraph::new(
            4,
            vec![
                (0, 1, 1.3, 0.4),
                (1, 2, 0.5, 1.0),
                (2, 3, 2.0, 2.0),
                (3, 0, 1.0, 3.0),
                (0, 2, 0.7, 0.1),
            ],
        )
        .unwrap();
        let lap = assemble_combinatorial_laplacian(&g, 0.0);
        let ones = vec![Complex64::ONE; 4];
        let mut y = vec![Complex64::ZERO; 4];
        lap.apply(&ones, &mut y);
        for v in y {
            assert!(v.norm() < 1e-12);
        }
        // All-zero angles: magnetic assembly equals the combinatorial one.
        let zeroed = ConnectionGraph::new(
            4,
            g.edges()
                .iter()
                .map(|e| (e.u, e.v, e.weight, 0.0))
                .collect(),
        )
        .unwrap();
        let mag = assemble_magnetic_laplacian(&zeroed, 0.0);
        for u in 0..4 {
            for v in 0..4 {
                assert!((mag.entry(u, v) - lap.entry(u, v)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn incidence_gram_reproduces_laplacian() {
        let g = ConnectionGraph::new(
            4,
            vec![
                (0, 1, 1.5, 0.3),
                (1, 2, 1.0, 5.1),
                (2, 0, 2.5, 2.2),
                (2, 3, 1.0, 0.9),
            ],
        )
        .unwrap();
        let lap = assemble_magnetic_laplacian(&g, 0.0);
        let b = IncidenceOperator::new(&g);
        let gram = b.gram();
        for u in 0..4 {
            for v in 0..4 {
                assert!((gram[(u, v)] - lap.entry(u, v)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn incidence_reduces_to_b0_for_zero_angles() {
        let g = ConnectionGraph::new(3, vec![(0, 1, 1.0, 0.0), (1, 2, 1.0, 0.0)]).unwrap();
        let b = IncidenceOperator::new(&g);
        let dense = b.to_dense();
        let b0 = b.to_dense_b0();
        for e in 0..2 {
            for v in 0..3 {
                assert!((dense[(e, v)] - b0[(e, v)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn spanning_tree_connection_is_trivializable() {
        // Random-looking angles on a tree: lambda_min stays at zero.
        let g = ConnectionGraph::new(
            5,
            vec![
                (0, 1, 1.0, 2.3),
                (1, 2, 1.0, 0.9),
                (1, 3, 1.0, 4.4),
                (3, 4, 1.0, 1.7),
            ],
        )
        .unwrap();
        let lap = assemble_magnetic_laplacian(&g, 0.0);
        let (vals, _) = eigh(&lap.to_dense()).unwrap();
        assert!(vals[0].abs() < 1e-10);
        assert!(check_assumption1(&g, 0.0).is_err());
        assert!(check_assumption1(&g, 0.1).is_ok());
    }

    #[test]
    fn quadratic_form_sine_identity() {
        let g = ConnectionGraph::new(
            4,
            vec![
                (0, 1, 1.2, 0.8),
                (1, 2, 0.7, 2.9),
                (2, 3, 1.1, 4.0),
                (3, 0, 0.9, 1.3),
                (0, 2, 1.4, 5.5),
            ],
        )
        .unwrap();
        let lap = assemble_magnetic_laplacian(&g, 0.0);
        let h = [0.25, 1.75, 3.2, 5.0];
        let f: Vec<Complex64> = h.iter().map(|&x| Complex64::new(0.0, x).exp()).collect();
        let form = lap.quadratic_form(&f);
        // Direct evaluation of the edge sum defining the form.
        let direct: f64 = g
            .edges()
            .iter()
            .map(|e| {
                let d = f[e.u] - Complex64::new(0.0, -e.angle).exp() * f[e.v];
                e.weight * d.norm_sqr()
            })
            .sum();
        assert!((form - direct).abs() <= 1e-8 * direct.max(1.0));
        // Same number through the sin² identity with the half-angle.
        let sines: f64 = g
            .edges()
            .iter()
            .map(|e| {
                let s = 0.5 * (e.angle + h[e.u] - h[e.v]);
                4.0 * e.weight * s.sin().powi(2)
            })
            .sum();
        assert!((form - sines).abs() <= 1e-8 * form.max(1.0));
    }
}
