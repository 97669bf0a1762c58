//! Exact small-scale ground truth.
//!
//! Dense linear algebra only, kept fully independent of the sparse sampling
//! and solver paths so the two sides can cross-check each other: the DPP
//! correlation kernel K = B(Δ+qI)⁻¹B*, exact leverage scores and summary
//! statistics, the multi-type spanning forest probability mass, brute-force
//! enumeration of all MTSFs, and the determinant normalization identity
//! det(Δ+qI) = Σ_F q^{#trees(F)} Π_cycles (2 − 2cos θ).

use crate::dense::{CMat, cholesky, determinant, eigh, hpd_inverse};
use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use crate::laplacian::{IncidenceOperator, assemble_magnetic_laplacian, check_assumption1};
use crate::sampler::Mtsf;

/// Maximum edge count accepted by the exhaustive enumeration.
pub const ENUMERATION_GUARD: usize = 20;

/// The m×m correlation kernel of the MTSF point process, with its diagonal
/// (the magnetic leverage scores) and summary statistics.
#[derive(Debug, Clone)]
pub struct DppKernel {
    pub q: f64,
    pub matrix: CMat,
    /// Diagonal entries, the per-edge inclusion probabilities.
    pub leverage: Vec<f64>,
    /// trace(K): the expected number of sampled edges.
    pub d_eff: f64,
    /// Largest eigenvalue of K.
    pub kappa: f64,
    /// Tr(Δ(Δ+qI)⁻²). The variance of the edge count is q times this trace;
    /// the two coincide at q = 1.
    pub var_edges: f64,
    /// Var|F| = Tr(K) − Tr(K²).
    pub cardinality_variance: f64,
}

impl DppKernel {
    /// Intrinsic-dimension ratio d_eff/κ.
    pub fn intrinsic_ratio(&self) -> f64 {
        self.d_eff / self.kappa
    }
}

/// Builds the exact kernel by dense inversion of Δ + qI. The kernel rows are
/// assembled through the two-entry incidence rows, and κ comes from the n×n
/// eigenproblem (the nonzero spectrum of B(Δ+qI)⁻¹B* is that of Δ(Δ+qI)⁻¹),
/// so the cost stays O(m² + n³) rather than O(m³).
pub fn exact_kernel(g: &ConnectionGraph, q: f64) -> Result<DppKernel> {
    check_assumption1(g, q)?;
    let lap = assemble_magnetic_laplacian(g, q);
    let minv = hpd_inverse(&lap.to_dense_regularized())
        .map_err(|_| Error::AssumptionViolated)?;
    let inc = IncidenceOperator::new(g);
    let m = g.edge_count();
    let n = g.node_count();
    // X = (Δ+qI)⁻¹ B*, column per edge.
    let mut x = CMat::zeros(n, m);
    for e in 0..m {
        let (u, bu, v, bv) = inc.row(e);
        for r in 0..n {
            x[(r, e)] = minv[(r, u)] * bu.conj() + minv[(r, v)] * bv.conj();
        }
    }
    // K = B X, row per edge.
    let mut k = CMat::zeros(m, m);
    for e in 0..m {
        let (u, bu, v, bv) = inc.row(e);
        for f in 0..m {
            k[(e, f)] = bu * x[(u, f)] + bv * x[(v, f)];
        }
    }
    let leverage: Vec<f64> = (0..m).map(|e| k[(e, e)].re).collect();
    let d_eff = leverage.iter().sum();
    let delta = lap.to_dense();
    let (vals, _) = eigh(&delta)?;
    let lambda_max = *vals.last().expect("spectrum is nonempty");
    let kappa = lambda_max / (lambda_max + q);
    // Tr(K²) = ‖K‖_F² for Hermitian K.
    let tr_k2 = k.frobenius_norm().powi(2);
    let var_edges = delta.matmul(&minv).matmul(&minv).trace_real();
    Ok(DppKernel {
        q,
        matrix: k,
        leverage,
        d_eff,
        kappa,
        var_edges,
        cardinality_variance: d_eff - tr_k2,
    })
}

/// det(Δ + qI) as a real number (the imaginary part of the LU determinant of
/// a Hermitian matrix vanishes up to roundoff).
pub fn regularized_determinant(g: &ConnectionGraph, q: f64) -> f64 {
    let m = assemble_magnetic_laplacian(g, q).to_dense_regularized();
    let d = determinant(&m);
    debug_assert!(d.im.abs() <= 1e-8 * d.norm().max(1.0));
    d.re
}

/// Probability mass of a given rooted MTSF under the DPP:
/// q^{#trees} Π_cycles (2 − 2cos θ) / det(Δ + qI).
///
/// This is the mass of one rooted outcome, which is what the sampler emits;
/// the distinct rootings of the same edge set are equally likely, so the
/// probability of observing the edge set alone is this value times the
/// product of the tree component sizes.
pub fn mtsf_probability(g: &ConnectionGraph, q: f64, f: &Mtsf) -> Result<f64> {
    f.validate(g)?;
    let det = regularized_determinant(g, q);
    if det <= 0.0 {
        return Err(Error::AssumptionViolated);
    }
    Ok(unnormalized_weight(q, f.tree_count(), f.cycles().map(|c| c.cycle_angle)) / det)
}

fn unnormalized_weight(q: f64, trees: usize, cycle_angles: impl Iterator<Item = f64>) -> f64 {
    let qpow = if trees == 0 {
        1.0
    } else if q == 0.0 {
        0.0
    } else {
        q.powi(trees as i32)
    };
    qpow * cycle_angles.map(|t| 2.0 - 2.0 * t.cos()).product::<f64>()
}

/// One enumerated MTSF edge set with its component data and total mass.
#[derive(Debug, Clone)]
pub struct EnumeratedMtsf {
    pub edges: Vec<usize>,
    pub tree_count: usize,
    pub cycle_angles: Vec<f64>,
    /// Number of rootings: the product of the tree component sizes. Every
    /// rooting of this edge set has the same mass, and the determinant
    /// identity counts rooted forests.
    pub rootings: usize,
    /// Mass of one rooted outcome: q^{#trees} Π (2 − 2cos θ).
    pub rooted_weight: f64,
    /// Total mass of the edge set: rootings × rooted_weight. Dividing by
    /// det(Δ+qI) gives the probability that the DPP draws this edge set.
    pub weight: f64,
}

impl EnumeratedMtsf {
    /// Unnormalized mass of this edge set under the capped measure, where
    /// each cycle weight 2 − 2cos θ is replaced by min(2, 2 − 2cos θ).
    pub fn capped_weight(&self, q: f64) -> f64 {
        let qpow = if self.tree_count == 0 {
            1.0
        } else if q == 0.0 {
            0.0
        } else {
            q.powi(self.tree_count as i32)
        };
        self.rootings as f64
            * qpow
            * self
                .cycle_angles
                .iter()
                .map(|t| (2.0 - 2.0 * t.cos()).min(2.0))
                .product::<f64>()
    }
}

/// Enumerates every MTSF of `g` (subsets of edges whose components carry at
/// most one cycle each, isolated nodes counting as trees).
pub fn enumerate_mtsfs(g: &ConnectionGraph, q: f64) -> Result<Vec<EnumeratedMtsf>> {
    let m = g.edge_count();
    if m > ENUMERATION_GUARD {
        return Err(Error::SizeGuard(format!(
            "enumeration over 2^{m} subsets refused (limit m <= {ENUMERATION_GUARD})"
        )));
    }
    let n = g.node_count();
    let mut out = Vec::new();
    let mut parent = vec![0usize; n];
    let mut size = vec![1usize; n];
    let mut cycles = vec![0u8; n];
    'subset: for mask in 0u32..(1u32 << m) {
        for v in 0..n {
            parent[v] = v;
            size[v] = 1;
            cycles[v] = 0;
        }
        let mut merges = 0usize;
        for e in 0..m {
            if mask & (1 << e) == 0 {
                continue;
            }
            let edge = g.edge(e);
            let (ru, rv) = (find(&mut parent, edge.u), find(&mut parent, edge.v));
            if ru == rv {
                cycles[ru] += 1;
                if cycles[ru] > 1 {
                    continue 'subset;
                }
            } else {
                let c = cycles[ru] + cycles[rv];
                if c > 1 {
                    continue 'subset;
                }
                parent[ru] = rv;
                size[rv] += size[ru];
                cycles[rv] = c;
                merges += 1;
            }
        }
        let components = n - merges;
        let mut cyclic_components = 0usize;
        let mut rootings = 1usize;
        for v in 0..n {
            if find(&mut parent, v) == v {
                if cycles[v] == 1 {
                    cyclic_components += 1;
                } else {
                    rootings *= size[v];
                }
            }
        }
        let tree_count = components - cyclic_components;
        if q == 0.0 && tree_count > 0 {
            // Zero mass; skip the cycle extraction work.
            continue;
        }
        let edges: Vec<usize> = (0..m).filter(|e| mask & (1 << e) != 0).collect();
        let cycle_angles = subset_cycle_angles(g, &edges);
        debug_assert_eq!(cycle_angles.len(), cyclic_components);
        let rooted_weight = unnormalized_weight(q, tree_count, cycle_angles.iter().copied());
        out.push(EnumeratedMtsf {
            edges,
            tree_count,
            cycle_angles,
            rootings,
            rooted_weight,
            weight: rootings as f64 * rooted_weight,
        });
    }
    Ok(out)
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// Angles of the unique cycles of an MTSF edge subset, found by peeling
/// degree-one nodes until only the cycles remain.
fn subset_cycle_angles(g: &ConnectionGraph, edges: &[usize]) -> Vec<f64> {
    let n = g.node_count();
    let mut deg = vec![0usize; n];
    let mut inc: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &e in edges {
        let edge = g.edge(e);
        deg[edge.u] += 1;
        deg[edge.v] += 1;
        inc[edge.u].push(e);
        inc[edge.v].push(e);
    }
    let mut alive: Vec<bool> = edges.iter().map(|_| true).collect();
    let index_of = |e: usize| edges.binary_search(&e).unwrap();
    let mut queue: Vec<usize> = (0..n).filter(|&v| deg[v] == 1).collect();
    while let Some(v) = queue.pop() {
        if deg[v] != 1 {
            continue;
        }
        let &e = inc[v]
            .iter()
            .find(|&&e| alive[index_of(e)])
            .expect("degree-one node has a live edge");
        alive[index_of(e)] = false;
        let edge = g.edge(e);
        let other = if edge.u == v { edge.v } else { edge.u };
        deg[v] -= 1;
        deg[other] -= 1;
        if deg[other] == 1 {
            queue.push(other);
        }
    }
    // Remaining live edges are disjoint simple cycles; walk each.
    let mut seen = vec![false; edges.len()];
    let mut angles = Vec::new();
    for (i, &e) in edges.iter().enumerate() {
        if !alive[i] || seen[i] {
            continue;
        }
        let start = g.edge(e).u;
        let mut theta = 0.0;
        let mut cur = start;
        loop {
            let &enext = inc[cur]
                .iter()
                .find(|&&x| {
                    let xi = index_of(x);
                    alive[xi] && !seen[xi]
                })
                .expect("cycle node has an unvisited live edge");
            seen[index_of(enext)] = true;
            theta += g.signed_angle(enext, cur);
            let edge = g.edge(enext);
            cur = if edge.u == cur { edge.v } else { edge.u };
            if cur == start {
                break;
            }
        }
        angles.push(theta);
    }
    angles
}

/// Exact inclusion probabilities Pr(e ∈ F) from the enumeration.
pub fn marginals_from_enumeration(g: &ConnectionGraph, q: f64) -> Result<Vec<f64>> {
    let list = enumerate_mtsfs(g, q)?;
    let total: f64 = list.iter().map(|f| f.weight).sum();
    let mut marg = vec![0.0; g.edge_count()];
    for f in &list {
        for &e in &f.edges {
            marg[e] += f.weight;
        }
    }
    for v in marg.iter_mut() {
        *v /= total;
    }
    Ok(marg)
}

/// Expected number of RandomSuccessor calls of the cycle-popping walk:
/// Tr Δ_N⁻¹ with Δ_N = (D + qI)⁻¹(Δ + qI).
pub fn expected_walk_steps(g: &ConnectionGraph, q: f64) -> Result<f64> {
    check_assumption1(g, q)?;
    let lap = assemble_magnetic_laplacian(g, q);
    let m = lap.to_dense_regularized();
    let ch = cholesky(&m).map_err(|_| Error::AssumptionViolated)?;
    let inv = ch.solve_matrix(&CMat::identity(g.node_count()));
    Ok((0..g.node_count())
        .map(|v| inv[(v, v)].re * (g.weighted_degree(v) + q))
        .sum())
}

/// Expected edge count Tr(Δ(Δ+qI)⁻¹) of the MTSF measure.
pub fn expected_edge_count(g: &ConnectionGraph, q: f64) -> Result<f64> {
    check_assumption1(g, q)?;
    let lap = assemble_magnetic_laplacian(g, q);
    let minv = hpd_inverse(&lap.to_dense_regularized())
        .map_err(|_| Error::AssumptionViolated)?;
    Ok(lap.to_dense().matmul(&minv).trace_real())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::assemble_combinatorial_laplacian;
    use crate::rng::SplitMix64;
    use std::f64::consts::PI;

    fn triangle(theta: f64) -> ConnectionGraph {
        ConnectionGraph::new(
            3,
            vec![
                (0, 1, 1.0, theta),
                (1, 2, 1.0, theta),
                (2, 0, 1.0, theta),
            ],
        )
        .unwrap()
    }

    /// Small random connection graph: a spanning path plus extra random edges.
    fn random_graph(seed: u64, n: usize, extra: usize) -> ConnectionGraph {
        let mut s = SplitMix64::from_key(&[seed, 0x6772]);
        let mut edges: Vec<(usize, usize, f64, f64)> = (0..n - 1)
            .map(|i| (i, i + 1, 1.0, s.next_f64() * std::f64::consts::TAU))
            .collect();
        let mut tries = 0;
        while edges.len() < n - 1 + extra && tries < 200 {
            tries += 1;
            let u = s.next_below(n as u64) as usize;
            let v = s.next_below(n as u64) as usize;
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if edges
                .iter()
                .any(|&(a, b, _, _)| (a.min(b), a.max(b)) == key)
            {
                continue;
            }
            edges.push((key.0, key.1, 1.0, s.next_f64() * std::f64::consts::TAU));
        }
        ConnectionGraph::new(n, edges).unwrap()
    }

    #[test]
    fn determinant_identity_on_random_graphs() {
        for seed in 0..12u64 {
            let g = random_graph(seed, 5, 3);
            for &q in &[0.0, 0.5, 2.0] {
                let det = regularized_determinant(&g, q);
                let sum: f64 = enumerate_mtsfs(&g, q)
                    .unwrap()
                    .iter()
                    .map(|f| f.weight)
                    .sum();
                assert!(
                    (sum - det).abs() <= 1e-8 * det.abs().max(1e-12),
                    "seed {seed} q {q}: sum {sum} vs det {det}"
                );
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one_on_triangle() {
        let g = triangle(PI / 5.0);
        let q = 1.0;
        let det = regularized_determinant(&g, q);
        let total: f64 = enumerate_mtsfs(&g, q)
            .unwrap()
            .iter()
            .map(|f| f.weight / det)
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trivial_connection_small_q_recovers_spanning_trees() {
        let g = triangle(0.0);
        let q = 1e-8;
        let list = enumerate_mtsfs(&g, q).unwrap();
        let det = regularized_determinant(&g, q);
        // The three spanning trees carry almost all the mass, 1/3 each.
        let mut tree_mass = 0.0;
        for f in &list {
            if f.edges.len() == 2 {
                let p = f.weight / det;
                assert!((p - 1.0 / 3.0).abs() < 1e-6);
                tree_mass += p;
            }
        }
        assert!((tree_mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn consistent_cycles_carry_zero_mass() {
        let g = triangle(0.0);
        let list = enumerate_mtsfs(&g, 0.5).unwrap();
        for f in &list {
            if !f.cycle_angles.is_empty() {
                assert!(f.weight.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn marginals_match_kernel_diagonal() {
        for seed in [3u64, 7, 11] {
            let g = random_graph(seed, 5, 2);
            for &q in &[0.0, 0.7] {
                if q == 0.0 && g.connection_is_trivial(1e-12) {
                    continue;
                }
                let k = exact_kernel(&g, q).unwrap();
                let marg = marginals_from_enumeration(&g, q).unwrap();
                for e in 0..g.edge_count() {
                    assert!(
                        (marg[e] - k.leverage[e]).abs() < 1e-10,
                        "seed {seed} q {q} edge {e}: {} vs {}",
                        marg[e],
                        k.leverage[e]
                    );
                }
            }
        }
    }

    #[test]
    fn mtsf_probability_matches_enumeration_masses() {
        use crate::rng::replicate_rng;
        use crate::sampler::{WeightMode, cycle_popping};
        let g = random_graph(4, 6, 3);
        let q = 0.9;
        let det = regularized_determinant(&g, q);
        let list = enumerate_mtsfs(&g, q).unwrap();
        let mut rng = replicate_rng(99, 0);
        for _ in 0..50 {
            let (f, _) = cycle_popping(&g, q, WeightMode::Capped, &mut rng).unwrap();
            let p = mtsf_probability(&g, q, &f).unwrap();
            let entry = list
                .iter()
                .find(|e| e.edges == f.edge_ids())
                .expect("sampled edge set appears in the enumeration");
            // The sampler emits one rooted outcome of this edge set.
            assert!((p - entry.rooted_weight / det).abs() < 1e-12);
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn consistent_cycle_mtsf_has_zero_probability() {
        use crate::sampler::{Component, CycleRootedTree, Mtsf, RootedTree};
        // Triangle with a consistent cycle plus a pendant edge.
        let g = ConnectionGraph::new(
            4,
            vec![
                (0, 1, 1.0, 0.4),
                (1, 2, 1.0, 0.3),
                (2, 0, 1.0, -0.7),
                (2, 3, 1.0, 1.0),
            ],
        )
        .unwrap();
        let f = Mtsf::from_parts(
            vec![
                Component::CycleTree(CycleRootedTree {
                    cycle: vec![0, 1, 2],
                    cycle_angle: 0.0,
                    capped: false,
                    edges: vec![0, 1, 2],
                }),
                Component::Tree(RootedTree {
                    root: 3,
                    edges: vec![],
                }),
            ],
            0.5,
            &g,
        )
        .unwrap();
        let p = mtsf_probability(&g, 0.5, &f).unwrap();
        assert!(p.abs() < 1e-15, "consistent cycle carries mass {p}");
        // A malformed subgraph is rejected outright.
        let bad = Mtsf::from_parts(
            vec![Component::Tree(RootedTree {
                root: 0,
                edges: vec![0, 1, 2],
            })],
            0.5,
            &g,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn kernel_is_contained_in_unit_interval_and_projects_at_q0() {
        let g = random_graph(2, 6, 3);
        assert!(!g.connection_is_trivial(1e-12));
        let k = exact_kernel(&g, 0.0).unwrap();
        let (vals, _) = eigh(&k.matrix).unwrap();
        assert!(vals[0] > -1e-8);
        assert!(*vals.last().unwrap() < 1.0 + 1e-8);
        // Projection: K² = K, trace = n.
        let k2 = k.matrix.matmul(&k.matrix);
        assert!(k2.sub(&k.matrix).frobenius_norm() < 1e-8);
        assert!((k.d_eff - g.node_count() as f64).abs() < 1e-8);
    }

    #[test]
    fn enumeration_moments_match_kernel_traces() {
        // Dual route: E|F| and Var|F| from the enumerated law must equal the
        // kernel traces d_eff and Tr K − Tr K².
        let g = random_graph(5, 5, 3);
        let q = 0.8;
        let k = exact_kernel(&g, q).unwrap();
        let list = enumerate_mtsfs(&g, q).unwrap();
        let det = regularized_determinant(&g, q);
        let mean: f64 = list
            .iter()
            .map(|f| f.weight / det * f.edges.len() as f64)
            .sum();
        let var: f64 = list
            .iter()
            .map(|f| f.weight / det * (f.edges.len() as f64 - mean).powi(2))
            .sum();
        assert!((mean - k.d_eff).abs() < 1e-9, "{mean} vs {}", k.d_eff);
        assert!(
            (var - k.cardinality_variance).abs() < 1e-9,
            "{var} vs {}",
            k.cardinality_variance
        );
        // And the variance is q times the Tr(Δ(Δ+qI)⁻²) statistic.
        assert!((k.cardinality_variance - q * k.var_edges).abs() < 1e-9);
    }

    #[test]
    fn kernel_statistics_decrease_in_q() {
        let g = random_graph(9, 6, 4);
        let grid = [0.01, 0.1, 1.0, 10.0];
        let kernels: Vec<_> = grid
            .iter()
            .map(|&q| exact_kernel(&g, q).unwrap())
            .collect();
        for w in kernels.windows(2) {
            assert!(w[1].d_eff <= w[0].d_eff + 1e-12);
            assert!(w[1].kappa <= w[0].kappa + 1e-12);
            assert!(w[1].intrinsic_ratio() <= w[0].intrinsic_ratio() + 1e-9);
        }
        // Leverage scores are pointwise nonincreasing too.
        for e in 0..g.edge_count() {
            for w in kernels.windows(2) {
                assert!(w[1].leverage[e] <= w[0].leverage[e] + 1e-12);
            }
        }
    }

    #[test]
    fn singular_cases_error() {
        // A tree carries a trivializable connection: q = 0 is rejected.
        let tree = ConnectionGraph::new(2, vec![(0, 1, 1.0, PI)]).unwrap();
        assert!(matches!(
            exact_kernel(&tree, 0.0),
            Err(Error::AssumptionViolated)
        ));
        assert!(matches!(
            expected_walk_steps(&tree, 0.0),
            Err(Error::AssumptionViolated)
        ));
        // With q > 0 the kernel exists and is the full-support projection scale.
        let k = exact_kernel(&tree, 0.5).unwrap();
        assert_eq!(k.leverage.len(), 1);
        assert!(k.leverage[0] > 0.0 && k.leverage[0] < 1.0);
    }

    #[test]
    fn walk_steps_identities() {
        // Trivial connection: E[T] = Tr(D(Λ+qI)⁻¹) + Tr(q(Λ+qI)⁻¹).
        let g = ConnectionGraph::new(
            4,
            vec![
                (0, 1, 1.0, 0.0),
                (1, 2, 1.0, 0.0),
                (2, 3, 1.0, 0.0),
                (3, 0, 1.0, 0.0),
                (0, 2, 1.0, 0.0),
            ],
        )
        .unwrap();
        let q = 0.6;
        let direct = expected_walk_steps(&g, q).unwrap();
        let lam = assemble_combinatorial_laplacian(&g, q);
        let inv = hpd_inverse(&lam.to_dense_regularized()).unwrap();
        let alt: f64 = (0..4)
            .map(|v| inv[(v, v)].re * g.weighted_degree(v) + q * inv[(v, v)].re)
            .sum();
        assert!((direct - alt).abs() < 1e-10);
        // q → ∞: every step roots immediately, E[T] → n.
        let big = expected_walk_steps(&g, 1e9).unwrap();
        assert!((big - 4.0).abs() < 1e-6);
    }

    #[test]
    fn enumeration_guard() {
        let g = random_graph(1, 12, 10);
        if g.edge_count() > ENUMERATION_GUARD {
            assert!(matches!(
                enumerate_mtsfs(&g, 1.0),
                Err(Error::SizeGuard(_))
            ));
        }
        let big = crate::generators::gen_er(30, 0.5, 4, crate::generators::Connectivity::AcceptAsIs)
            .unwrap();
        assert!(matches!(
            enumerate_mtsfs(&big, 1.0),
            Err(Error::SizeGuard(_))
        ));
    }
}
