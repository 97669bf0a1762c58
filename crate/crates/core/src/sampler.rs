//! Random-walk samplers for spanning subgraphs.
//!
//! `cycle_popping` runs a walk on the graph augmented with an absorbing root
//! reached from any node with probability q/(q + d(v)). Branches grow until
//! they hit the forest, the root, or themselves; a self-intersection closes an
//! oriented cycle η which survives with probability α(η) = (2 − 2cos θ(η))/2
//! and is otherwise popped. Deleting the absorbing root afterwards leaves a
//! multi-type spanning forest whose trees are rooted where the walk was
//! absorbed.
//!
//! With a trivial connection every cycle is popped and the output is a
//! spanning forest (a spanning tree as q → 0, which `wilson_st` samples
//! directly); with q = 0 and a non-trivial connection the output is a
//! cycle-rooted spanning forest with exactly n edges.

use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use rand::{Rng, RngExt};

/// Default walk-step budget; converts a non-terminating configuration
/// (trivial connection with q = 0) into a diagnostic error.
pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000_000;

/// Cycle-weight handling for `cycle_popping`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Acceptance α(η) = (2 − 2cos θ(η))/2; errors if some cycle has α > 1.
    Exact,
    /// Acceptance min(1, α(η)): samples the capped measure, to be corrected
    /// by importance weights downstream.
    Capped,
}

#[derive(Debug, Clone)]
pub struct RootedTree {
    pub root: usize,
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CycleRootedTree {
    /// Nodes of the cycle in walk orientation.
    pub cycle: Vec<usize>,
    /// Total angle θ(η) along the oriented cycle.
    pub cycle_angle: f64,
    /// True when the acceptance probability was capped at 1.
    pub capped: bool,
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum Component {
    Tree(RootedTree),
    CycleTree(CycleRootedTree),
}

/// A sampled multi-type spanning forest.
#[derive(Debug, Clone)]
pub struct Mtsf {
    pub components: Vec<Component>,
    /// Regularization strength the sample was drawn at.
    pub q: f64,
    edges: Vec<usize>,
}

impl Mtsf {
    /// Assembles an MTSF from explicit components, validating the structural
    /// invariants against the host graph. Lets callers rebuild samples from
    /// serialized edge lists or pose hypothetical subgraphs to the oracle.
    pub fn from_parts(components: Vec<Component>, q: f64, g: &ConnectionGraph) -> Result<Self> {
        let mut edges: Vec<usize> = components
            .iter()
            .flat_map(|c| match c {
                Component::Tree(t) => t.edges.iter(),
                Component::CycleTree(t) => t.edges.iter(),
            })
            .copied()
            .collect();
        edges.sort_unstable();
        let out = Mtsf {
            components,
            q,
            edges,
        };
        out.validate(g)?;
        for c in out.cycles() {
            let (theta, _) = crate::graph::holonomy(g, &c.cycle)?;
            let diff = crate::graph::normalize_angle(theta - c.cycle_angle);
            if diff.min(std::f64::consts::TAU - diff) > 1e-9 {
                return Err(Error::InvalidMtsf(format!(
                    "declared cycle angle {} does not match the holonomy {theta}",
                    c.cycle_angle
                )));
            }
        }
        Ok(out)
    }

    /// Sorted edge ids of the subgraph.
    pub fn edge_ids(&self) -> &[usize] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn tree_count(&self) -> usize {
        self.components
            .iter()
            .filter(|c| matches!(c, Component::Tree(_)))
            .count()
    }

    pub fn cycles(&self) -> impl Iterator<Item = &CycleRootedTree> {
        self.components.iter().filter_map(|c| match c {
            Component::CycleTree(t) => Some(t),
            Component::Tree(_) => None,
        })
    }

    /// Importance weight Π max(1, 1 − cos θ(η)) over the cycles.
    pub fn importance_weight(&self) -> f64 {
        self.cycles()
            .map(|c| (1.0 - c.cycle_angle.cos()).max(1.0))
            .product()
    }

    /// Checks the structural invariants against the host graph: components
    /// partition the nodes, each component carries at most one cycle, and
    /// |edges| = n − #trees.
    pub fn validate(&self, g: &ConnectionGraph) -> Result<()> {
        let n = g.node_count();
        let mut touched = vec![false; n];
        let mut edge_total = 0usize;
        for comp in &self.components {
            let (edges, cyc) = match comp {
                Component::Tree(t) => (&t.edges, None),
                Component::CycleTree(t) => (&t.edges, Some(t)),
            };
            edge_total += edges.len();
            let mut nodes = std::collections::BTreeSet::new();
            for &e in edges {
                let edge = g.edge(e);
                nodes.insert(edge.u);
                nodes.insert(edge.v);
            }
            if let Component::Tree(t) = comp {
                nodes.insert(t.root);
            }
            for &v in &nodes {
                if touched[v] {
                    return Err(Error::InvalidMtsf(format!(
                        "node {v} appears in two components"
                    )));
                }
                touched[v] = true;
            }
            match cyc {
                None => {
                    if edges.len() + 1 != nodes.len() {
                        return Err(Error::InvalidMtsf("tree component is not a tree".into()));
                    }
                }
                Some(t) => {
                    if edges.len() != nodes.len() {
                        return Err(Error::InvalidMtsf(
                            "cycle-rooted component must have #edges = #nodes".into(),
                        ));
                    }
                    if t.cycle.len() < 3 {
                        return Err(Error::InvalidMtsf("cycle shorter than 3".into()));
                    }
                }
            }
        }
        if !touched.iter().all(|&b| b) {
            return Err(Error::InvalidMtsf("components do not span all nodes".into()));
        }
        if edge_total != n - self.tree_count() {
            return Err(Error::InvalidMtsf(format!(
                "edge count {edge_total} != n − #trees = {}",
                n - self.tree_count()
            )));
        }
        Ok(())
    }
}

/// Counters describing one sampler run.
#[derive(Debug, Clone, Copy, Default)]
pub struct WalkStats {
    /// Total number of RandomSuccessor draws T.
    pub steps: u64,
    pub cycles_popped: u64,
    pub cycles_accepted: u64,
    pub bernoulli_draws: u64,
}

/// One step of the walk kernel: `None` moves to the absorbing root (with
/// probability q/(q + d(v))), otherwise a uniformly chosen neighbor arc.
/// The kernel is defined on neighbor counts and ignores edge weights.
pub fn random_successor<R: Rng>(
    g: &ConnectionGraph,
    q: f64,
    v: usize,
    rng: &mut R,
) -> Result<Option<(usize, usize)>> {
    let d = g.degree(v);
    if d == 0 {
        if q > 0.0 {
            return Ok(None);
        }
        return Err(Error::IsolatedNode(v));
    }
    let total = q + d as f64;
    let x = rng.random::<f64>() * total;
    if x < q {
        return Ok(None);
    }
    let mut idx = (x - q) as usize;
    if idx >= d {
        idx = d - 1;
    }
    let arc = g.neighbors(v)[idx];
    Ok(Some((arc.to, arc.edge)))
}

pub fn cycle_popping<R: Rng>(
    g: &ConnectionGraph,
    q: f64,
    mode: WeightMode,
    rng: &mut R,
) -> Result<(Mtsf, WalkStats)> {
    cycle_popping_with_budget(g, q, mode, DEFAULT_STEP_BUDGET, rng)
}

pub fn cycle_popping_with_budget<R: Rng>(
    g: &ConnectionGraph,
    q: f64,
    mode: WeightMode,
    budget: u64,
    rng: &mut R,
) -> Result<(Mtsf, WalkStats)> {
    if q < 0.0 {
        return Err(Error::InvalidParameter("q must be nonnegative".into()));
    }
    if let Some(e) = g.has_unit_weights() {
        return Err(Error::NonUnitWeights(e, g.edge(e).weight));
    }
    let n = g.node_count();
    let mut stats = WalkStats::default();
    // Successor arc of each spanned node: (to, edge, signed angle); None while
    // unspanned. Roots are recorded separately once the walk is absorbed.
    let mut next: Vec<Option<(usize, usize, f64)>> = vec![None; n];
    let mut in_forest = vec![false; n];
    let mut is_root = vec![false; n];
    let mut stamp = vec![0u32; n];
    let mut pos = vec![0usize; n];
    let mut branch: Vec<usize> = Vec::new();
    let mut arcs: Vec<(usize, f64)> = Vec::new(); // arc branch[i] -> branch[i+1]
    let mut generation = 0u32;

    for start in 0..n {
        if in_forest[start] {
            continue;
        }
        generation += 1;
        branch.clear();
        arcs.clear();
        branch.push(start);
        stamp[start] = generation;
        pos[start] = 0;
        let mut cur = start;
        loop {
            stats.steps += 1;
            if stats.steps > budget {
                return Err(Error::StepBudgetExceeded(budget));
            }
            match random_successor(g, q, cur, rng)? {
                None => {
                    // Absorbed: the branch tip becomes a root of the forest.
                    commit_branch(&branch, &arcs, None, &mut next, &mut in_forest);
                    is_root[cur] = true;
                    break;
                }
                Some((to, edge)) => {
                    let ang = g.signed_angle(edge, cur);
                    if in_forest[to] {
                        commit_branch(&branch, &arcs, Some((to, edge, ang)), &mut next, &mut in_forest);
                        break;
                    }
                    if stamp[to] == generation {
                        // Self-intersection: the suffix from `to` plus the
                        // closing arc is an oriented cycle. The angle is
                        // recomputed from the stored branch.
                        let at = pos[to];
                        let theta: f64 =
                            arcs[at..].iter().map(|a| a.1).sum::<f64>() + ang;
                        let alpha_exact = 0.5 * (2.0 - 2.0 * theta.cos());
                        if mode == WeightMode::Exact && alpha_exact > 1.0 + 1e-12 {
                            return Err(Error::StronglyInconsistentCycle {
                                node: to,
                                weight: 2.0 - 2.0 * theta.cos(),
                            });
                        }
                        let alpha = alpha_exact.min(1.0);
                        stats.bernoulli_draws += 1;
                        if rng.random::<f64>() < alpha {
                            stats.cycles_accepted += 1;
                            commit_branch(
                                &branch,
                                &arcs,
                                Some((to, edge, ang)),
                                &mut next,
                                &mut in_forest,
                            );
                            break;
                        }
                        stats.cycles_popped += 1;
                        for &node in &branch[at + 1..] {
                            stamp[node] = 0;
                        }
                        branch.truncate(at + 1);
                        arcs.truncate(at);
                        cur = to;
                    } else {
                        arcs.push((edge, ang));
                        branch.push(to);
                        stamp[to] = generation;
                        pos[to] = branch.len() - 1;
                        cur = to;
                    }
                }
            }
        }
    }
    let mtsf = decompose(g, q, mode, &next, &is_root);
    debug_assert!(mtsf.validate(g).is_ok());
    Ok((mtsf, stats))
}

fn commit_branch(
    branch: &[usize],
    arcs: &[(usize, f64)],
    tail: Option<(usize, usize, f64)>,
    next: &mut [Option<(usize, usize, f64)>],
    in_forest: &mut [bool],
) {
    for (i, &(edge, ang)) in arcs.iter().enumerate() {
        next[branch[i]] = Some((branch[i + 1], edge, ang));
    }
    if let Some((to, edge, ang)) = tail {
        next[*branch.last().unwrap()] = Some((to, edge, ang));
    }
    for &v in branch {
        in_forest[v] = true;
    }
}

/// Splits the oriented forest encoded by successor arcs into components.
fn decompose(
    g: &ConnectionGraph,
    q: f64,
    mode: WeightMode,
    next: &[Option<(usize, usize, f64)>],
    is_root: &[bool],
) -> Mtsf {
    let n = g.node_count();
    // Component labels by following arcs (undirected reachability is not
    // needed: every node's arc chain ends at a root or enters a cycle, and
    // nodes sharing that terminal share the component).
    let mut label = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut path = Vec::new();
    for v0 in 0..n {
        if label[v0] != usize::MAX {
            continue;
        }
        path.clear();
        let mut v = v0;
        while label[v] == usize::MAX {
            label[v] = usize::MAX - 1; // on current path
            path.push(v);
            match next[v] {
                Some((to, _, _)) => v = to,
                None => break,
            }
        }
        let target = if label[v] == usize::MAX - 1 {
            // The chain ended inside the current path: a fresh component,
            // either rooted (chain stopped) or closing a new cycle.
            comps.push(Vec::new());
            comps.len() - 1
        } else {
            label[v]
        };
        for &u in &path {
            label[u] = target;
            comps[target].push(u);
        }
    }
    let mut components = Vec::with_capacity(comps.len());
    let mut on_cycle = vec![false; n];
    let mut all_edges = Vec::new();
    for nodes in &comps {
        let mut edges: Vec<usize> = nodes.iter().filter_map(|&u| next[u].map(|a| a.1)).collect();
        edges.sort_unstable();
        all_edges.extend_from_slice(&edges);
        let root = nodes.iter().copied().find(|&u| is_root[u]);
        match root {
            Some(r) => components.push(Component::Tree(RootedTree { root: r, edges })),
            None => {
                // Find the unique cycle: follow arcs n steps to land on it.
                let mut v = nodes[0];
                for _ in 0..=nodes.len() {
                    v = next[v].unwrap().0;
                }
                let mut cycle = vec![v];
                let mut theta = next[v].unwrap().2;
                let mut w = next[v].unwrap().0;
                while w != v {
                    cycle.push(w);
                    theta += next[w].unwrap().2;
                    w = next[w].unwrap().0;
                }
                for &c in &cycle {
                    on_cycle[c] = true;
                }
                let capped =
                    mode == WeightMode::Capped && 1.0 - theta.cos() > 1.0 + 1e-12;
                components.push(Component::CycleTree(CycleRootedTree {
                    cycle,
                    cycle_angle: theta,
                    capped,
                    edges,
                }));
            }
        }
    }
    all_edges.sort_unstable();
    Mtsf {
        components,
        q,
        edges: all_edges,
    }
}

/// Uniform spanning tree by Wilson's algorithm: a root is drawn uniformly and
/// loop-erased walks are grafted from every remaining node in ascending id
/// order. The returned component keeps the root for bookkeeping; the
/// distribution over edge sets is the uniform spanning-tree measure.
pub fn wilson_st<R: Rng>(g: &ConnectionGraph, rng: &mut R) -> Result<(Mtsf, WalkStats)> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = g.node_count();
    let mut stats = WalkStats::default();
    let root = rng.random_range(0..n);
    let mut in_tree = vec![false; n];
    in_tree[root] = true;
    let mut next: Vec<Option<(usize, usize, f64)>> = vec![None; n];
    for start in 0..n {
        if in_tree[start] {
            continue;
        }
        // Walk with pointer overwrite: revisiting a node erases its loop.
        let mut v = start;
        while !in_tree[v] {
            stats.steps += 1;
            let (to, edge) = random_successor(g, 0.0, v, rng)?.expect("q = 0 never roots");
            next[v] = Some((to, edge, g.signed_angle(edge, v)));
            v = to;
        }
        let mut v = start;
        while !in_tree[v] {
            in_tree[v] = true;
            v = next[v].unwrap().0;
        }
    }
    // Erased loops leave stale arcs on nodes that ended outside the tree walk;
    // only arcs of in-tree chains are real. Rebuild edge list from the tree.
    let mut edges: Vec<usize> = (0..n)
        .filter(|&v| v != root)
        .map(|v| next[v].expect("non-root tree node has an arc").1)
        .collect();
    edges.sort_unstable();
    let mtsf = Mtsf {
        components: vec![Component::Tree(RootedTree {
            root,
            edges: edges.clone(),
        })],
        q: 0.0,
        edges,
    };
    debug_assert!(mtsf.validate(g).is_ok());
    Ok((mtsf, stats))
}

/// Baseline sampler: `target_count` edges drawn i.i.d. proportionally to the
/// given scores. Returns a multiset of edge ids.
pub fn iid_edges<R: Rng>(
    g: &ConnectionGraph,
    scores: &[f64],
    target_count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if scores.len() != g.edge_count() {
        return Err(Error::DimensionMismatch {
            expected: g.edge_count(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidParameter(
            "leverage scores must be finite and nonnegative".into(),
        ));
    }
    let mut cum = Vec::with_capacity(scores.len());
    let mut total = 0.0;
    for &s in scores {
        total += s;
        cum.push(total);
    }
    if total <= 0.0 {
        return Err(Error::InvalidParameter(
            "leverage scores sum to zero".into(),
        ));
    }
    let mut out = Vec::with_capacity(target_count);
    for _ in 0..target_count {
        let x = rng.random::<f64>() * total;
        let idx = cum.partition_point(|&c| c <= x).min(scores.len() - 1);
        out.push(idx);
    }
    Ok(out)
}
