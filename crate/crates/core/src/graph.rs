//! Connection graphs: weighted simple undirected graphs where each oriented
//! edge carries a phase angle, conjugated (negated mod 2π) under orientation
//! flip.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

/// One stored edge. The stored orientation `u -> v` is a convention: querying
/// the edge in the reverse direction yields angle `-angle (mod 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    /// Angle θ(uv) of the stored orientation, normalized to [0, 2π).
    pub angle: f64,
}

/// Adjacency entry: the neighbor, the edge id, and whether the stored
/// orientation points away from the node holding this entry.
#[derive(Debug, Clone, Copy)]
pub struct Arc {
    pub to: usize,
    pub edge: usize,
    pub forward: bool,
}

/// A weighted simple undirected graph with a U(1) connection.
///
/// Immutable after construction; shareable across threads.
#[derive(Debug, Clone)]
pub struct ConnectionGraph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<Arc>>,
    connected: bool,
}

pub fn normalize_angle(a: f64) -> f64 {
    let mut x = a % TAU;
    if x < 0.0 {
        x += TAU;
    }
    // Map a residue that rounds to 2π back to 0.
    if x >= TAU {
        x = 0.0;
    }
    x
}

impl ConnectionGraph {
    /// Builds a graph from `(u, v, weight, angle)` tuples.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut seen: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
        let mut out = Vec::with_capacity(edges.len());
        for (idx, &(u, v, w, a)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} references node {} but n = {n}",
                    u.max(v)
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} has non-positive weight {w}"
                )));
            }
            let key = (u.min(v), u.max(v));
            if let Some(prev) = seen.insert(key, idx) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge {{{}, {}}} (first at {prev}, again at {idx})",
                    key.0, key.1
                )));
            }
            out.push(Edge {
                u,
                v,
                weight: w,
                angle: normalize_angle(a),
            });
        }
        let mut adj = vec![Vec::new(); n];
        for (e, edge) in out.iter().enumerate() {
            adj[edge.u].push(Arc {
                to: edge.v,
                edge: e,
                forward: true,
            });
            adj[edge.v].push(Arc {
                to: edge.u,
                edge: e,
                forward: false,
            });
        }
        let connected = connected_from_adj(n, &adj);
        Ok(ConnectionGraph {
            n,
            edges: out,
            adj,
            connected,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn neighbors(&self, v: usize) -> &[Arc] {
        &self.adj[v]
    }

    /// Number of neighbors (unweighted degree).
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn weighted_degree(&self, v: usize) -> f64 {
        self.adj[v].iter().map(|a| self.edges[a.edge].weight).sum()
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn has_unit_weights(&self) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| (e.weight - 1.0).abs() > 1e-12)
    }

    /// Angle of edge `e` oriented away from `from`.
    pub fn angle_from(&self, e: usize, from: usize) -> f64 {
        let edge = &self.edges[e];
        if edge.u == from {
            edge.angle
        } else {
            debug_assert_eq!(edge.v, from);
            normalize_angle(-edge.angle)
        }
    }

    /// Signed angle of edge `e` in direction `from -> to` without remapping
    /// to [0, 2π); sums of these are what holonomies accumulate.
    pub fn signed_angle(&self, e: usize, from: usize) -> f64 {
        let edge = &self.edges[e];
        if edge.u == from { edge.angle } else { -edge.angle }
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adj[u].iter().find(|a| a.to == v).map(|a| a.edge)
    }

    /// Returns a copy with every edge weight replaced by `f(edge_id)`.
    pub fn reweighted(&self, f: impl Fn(usize) -> f64) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| (e.u, e.v, f(i), e.angle))
            .collect();
        ConnectionGraph::new(self.n, edges)
    }

    /// True when the connection is trivial on every component: there is a node
    /// potential h with θ(uv) ≡ h(u) − h(v) (mod 2π). Always true on forests.
    pub fn connection_is_trivial(&self, tol: f64) -> bool {
        let mut pot = vec![f64::NAN; self.n];
        let mut stack = Vec::new();
        for root in 0..self.n {
            if !pot[root].is_nan() {
                continue;
            }
            pot[root] = 0.0;
            stack.push(root);
            while let Some(u) = stack.pop() {
                for arc in &self.adj[u] {
                    let a = self.signed_angle(arc.edge, u);
                    if pot[arc.to].is_nan() {
                        pot[arc.to] = pot[u] - a;
                        stack.push(arc.to);
                    } else {
                        // Non-tree edge: the residual holonomy must vanish mod 2π.
                        let res = normalize_angle(a - (pot[u] - pot[arc.to]));
                        if res.min(TAU - res) > tol {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Connected component labels and the id of the largest component.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.n];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for root in 0..self.n {
            if label[root] != usize::MAX {
                continue;
            }
            let c = sizes.len();
            sizes.push(0usize);
            label[root] = c;
            stack.push(root);
            while let Some(u) = stack.pop() {
                sizes[c] += 1;
                for arc in &self.adj[u] {
                    if label[arc.to] == usize::MAX {
                        label[arc.to] = c;
                        stack.push(arc.to);
                    }
                }
            }
        }
        let largest = (0..sizes.len()).max_by_key(|&c| sizes[c]).unwrap_or(0);
        (label, largest)
    }

    /// Restriction to the largest connected component, with nodes relabeled.
    pub fn largest_component(&self) -> Self {
        let (label, keep) = self.components();
        let mut remap = vec![usize::MAX; self.n];
        let mut next = 0;
        for v in 0..self.n {
            if label[v] == keep {
                remap[v] = next;
                next += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| label[e.u] == keep)
            .map(|e| (remap[e.u], remap[e.v], e.weight, e.angle))
            .collect();
        ConnectionGraph::new(next, edges).expect("component of a valid graph is valid")
    }

    /// Parses the edge-list text format: one `u v weight angle` per line,
    /// `#` starts a comment line.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut max_node = 0usize;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let mut it = l.split_whitespace();
            let mut field = |name: &str| -> Result<&str> {
                it.next().ok_or_else(|| Error::EdgeListParse {
                    line,
                    msg: format!("missing field `{name}`"),
                })
            };
            let u: usize = field("u")?.parse().map_err(|e| Error::EdgeListParse {
                line,
                msg: format!("bad node id: {e}"),
            })?;
            let v: usize = field("v")?.parse().map_err(|e| Error::EdgeListParse {
                line,
                msg: format!("bad node id: {e}"),
            })?;
            let w: f64 = field("weight")?.parse().map_err(|e| Error::EdgeListParse {
                line,
                msg: format!("bad weight: {e}"),
            })?;
            let a: f64 = field("angle")?.parse().map_err(|e| Error::EdgeListParse {
                line,
                msg: format!("bad angle: {e}"),
            })?;
            if u == v {
                return Err(Error::EdgeListParse {
                    line,
                    msg: format!("self-loop at node {u}"),
                });
            }
            let key = (u.min(v), u.max(v));
            if let Some(first) = seen.insert(key, line) {
                return Err(Error::DuplicateEdge {
                    u: key.0,
                    v: key.1,
                    line: first.min(line),
                });
            }
            max_node = max_node.max(u).max(v);
            edges.push((u, v, w, a));
        }
        if edges.is_empty() {
            return Err(Error::InvalidGraph("edge list is empty".into()));
        }
        ConnectionGraph::new(max_node + 1, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# u v weight angle");
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {} {}", e.u, e.v, e.weight, e.angle);
        }
        s
    }
}

fn connected_from_adj(n: usize, adj: &[Vec<Arc>]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for arc in &adj[u] {
            if !seen[arc.to] {
                seen[arc.to] = true;
                count += 1;
                stack.push(arc.to);
            }
        }
    }
    count == n
}

/// Holonomy of an oriented cycle given as a closed walk of distinct nodes:
/// the total angle θ(η) and the cycle weight 2 − 2 cos θ(η).
pub fn holonomy(g: &ConnectionGraph, cycle: &[usize]) -> Result<(f64, f64)> {
    if cycle.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "cycle needs at least 3 nodes, got {}",
            cycle.len()
        )));
    }
    let mut sorted = cycle.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("cycle repeats a node".into()));
    }
    let mut theta = 0.0;
    for i in 0..cycle.len() {
        let a = cycle[i];
        let b = cycle[(i + 1) % cycle.len()];
        let e = g
            .edge_between(a, b)
            .ok_or_else(|| Error::InvalidParameter(format!("no edge between {a} and {b}")))?;
        theta += g.signed_angle(e, a);
    }
    Ok((theta, 2.0 - 2.0 * theta.cos()))
}

#[cfg(test)]
mod tests {
    use super::*;
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

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert!(ConnectionGraph::new(2, vec![(0, 0, 1.0, 0.0)]).is_err());
        assert!(ConnectionGraph::new(2, vec![(0, 1, 1.0, 0.0), (1, 0, 2.0, 0.0)]).is_err());
        assert!(ConnectionGraph::new(2, vec![(0, 1, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn reverse_direction_negates_angle() {
        let g = ConnectionGraph::new(2, vec![(0, 1, 1.0, 1.0)]).unwrap();
        assert!((g.angle_from(0, 0) - 1.0).abs() < 1e-15);
        assert!((g.angle_from(0, 1) - (TAU - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn holonomy_triangle() {
        let g = triangle(PI / 3.0);
        let (theta, w) = holonomy(&g, &[0, 1, 2]).unwrap();
        assert!((theta - PI).abs() < 1e-12);
        assert!((w - 4.0).abs() < 1e-12);
        // Orientation flip leaves the weight unchanged.
        let (theta_r, w_r) = holonomy(&g, &[2, 1, 0]).unwrap();
        assert!((theta_r + PI).abs() < 1e-12);
        assert!((w - w_r).abs() < 1e-12);
    }

    #[test]
    fn holonomy_consistent_cycle_is_zero() {
        // Planted potential: theta(uv) = h(u) - h(v).
        let h = [0.3, 1.1, 2.9];
        let g = ConnectionGraph::new(
            3,
            vec![
                (0, 1, 1.0, h[0] - h[1]),
                (1, 2, 1.0, h[1] - h[2]),
                (2, 0, 1.0, h[2] - h[0]),
            ],
        )
        .unwrap();
        let (_, w) = holonomy(&g, &[0, 1, 2]).unwrap();
        assert!(w < 1e-10);
        assert!(g.connection_is_trivial(1e-9));
    }

    #[test]
    fn holonomy_rejects_bad_input() {
        let g = triangle(0.1);
        assert!(holonomy(&g, &[0, 1]).is_err());
        assert!(holonomy(&g, &[0, 1, 1]).is_err());
        let path = ConnectionGraph::new(3, vec![(0, 1, 1.0, 0.0), (1, 2, 1.0, 0.0)]).unwrap();
        assert!(holonomy(&path, &[0, 1, 2]).is_err());
    }

    #[test]
    fn trivial_connection_detection() {
        assert!(triangle(0.0).connection_is_trivial(1e-9));
        assert!(!triangle(PI / 3.0).connection_is_trivial(1e-9));
        // A tree always carries a trivializable connection.
        let tree = ConnectionGraph::new(3, vec![(0, 1, 1.0, 2.1), (1, 2, 1.0, 0.7)]).unwrap();
        assert!(tree.connection_is_trivial(1e-9));
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let text = "# comment\n0 1 1.0 0.5\n1 2 2.0 0.25\n";
        let g = ConnectionGraph::parse_edge_list(text).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        let again = ConnectionGraph::parse_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(again.edge_count(), 2);
        assert!((again.edge(1).weight - 2.0).abs() < 1e-15);

        let dup = "0 1 1 0\n1 0 1 0\n";
        match ConnectionGraph::parse_edge_list(dup) {
            Err(Error::DuplicateEdge { u: 0, v: 1, line: 1 }) => {}
            other => panic!("expected duplicate edge error, got {other:?}"),
        }
        assert!(ConnectionGraph::parse_edge_list("0 1 1\n").is_err());
    }

    #[test]
    fn largest_component_extraction() {
        let g = ConnectionGraph::new(
            5,
            vec![(0, 1, 1.0, 0.0), (1, 2, 1.0, 0.0), (3, 4, 1.0, 0.0)],
        )
        .unwrap();
        assert!(!g.is_connected());
        let big = g.largest_component();
        assert_eq!(big.node_count(), 3);
        assert!(big.is_connected());
    }
}
