//! Seeded random connection graphs with planted rankings.
//!
//! Edge presence and edge noise are derived from per-pair SplitMix64 streams
//! keyed by `(seed, u, v)`, so instances are reproducible and independent of
//! generation order. The planted ranking h is a uniform permutation of 1..=n
//! drawn from a separate stream of the same master seed.

use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const RANKING_DOMAIN: u64 = 0x7261_6e6b; // "rank"
const RESAMPLE_DOMAIN: u64 = 0x7265_7472; // "retr"

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum Model {
    Er { n: usize, p: f64 },
    Mun { n: usize, p: f64, eta: f64 },
    Ero { n: usize, p: f64, eta: f64 },
    Barbell { n: usize, eta: f64 },
}

/// What to do when a random draw comes out disconnected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    /// Redraw with a derived seed, at most [`MAX_RESAMPLE`] times.
    #[default]
    RejectResample,
    LargestComponent,
    AcceptAsIs,
}

pub const MAX_RESAMPLE: usize = 100;

/// A generated graph together with its planted ranking.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub graph: ConnectionGraph,
    /// h(u) ∈ 1..=n, a permutation: the planted ranking score of node u.
    pub ranking: Vec<usize>,
    pub model: Model,
    pub seed: u64,
    /// For outlier-type noise: which edges carry pure noise.
    pub outliers: Option<Vec<bool>>,
}

fn planted_ranking(n: usize, seed: u64) -> Vec<usize> {
    let mut h: Vec<usize> = (1..=n).collect();
    let mut s = SplitMix64::from_key(&[seed, RANKING_DOMAIN]);
    for i in (1..n).rev() {
        let j = s.next_below(i as u64 + 1) as usize;
        h.swap(i, j);
    }
    h
}

fn retry_seed(seed: u64, attempt: usize) -> u64 {
    if attempt == 0 {
        seed
    } else {
        SplitMix64::from_key(&[seed, RESAMPLE_DOMAIN, attempt as u64]).next_u64()
    }
}

/// Erdős–Rényi graph with angles zero on every edge.
pub fn gen_er(n: usize, p: f64, seed: u64, conn: Connectivity) -> Result<ConnectionGraph> {
    check_er_params(n, p)?;
    build_with_policy(conn, seed, |s| {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let mut stream = crate::rng::edge_stream(s, u, v);
                if stream.next_f64() < p {
                    edges.push((u, v, 1.0, 0.0));
                }
            }
        }
        ConnectionGraph::new(n, edges)
    })
}

/// Multiplicative Uniform Noise model: each present edge uv carries the angle
/// (h_u − h_v)(1 + η ε)/(π(n−1)) with ε ~ U([0, 1]).
pub fn gen_mun(
    n: usize,
    p: f64,
    eta: f64,
    seed: u64,
    conn: Connectivity,
) -> Result<PlantedInstance> {
    check_er_params(n, p)?;
    check_eta(eta)?;
    let h = planted_ranking(n, seed);
    let graph = build_with_policy(conn, seed, |s| {
        let mut edges = Vec::new();
        let denom = PI * (n as f64 - 1.0);
        for u in 0..n {
            for v in u + 1..n {
                let mut stream = crate::rng::edge_stream(s, u, v);
                if stream.next_f64() < p {
                    let eps = stream.next_f64();
                    let angle = (h[u] as f64 - h[v] as f64) * (1.0 + eta * eps) / denom;
                    edges.push((u, v, 1.0, angle));
                }
            }
        }
        ConnectionGraph::new(n, edges)
    })?;
    Ok(PlantedInstance {
        graph,
        ranking: h,
        model: Model::Mun { n, p, eta },
        seed,
        outliers: None,
    })
}

/// Erdős–Rényi Outliers model: each present edge is planted with probability
/// 1 − η, otherwise its angle is ε/(π(n−1)) with ε uniform on −(n−1)..=(n−1).
pub fn gen_ero(
    n: usize,
    p: f64,
    eta: f64,
    seed: u64,
    conn: Connectivity,
) -> Result<PlantedInstance> {
    check_er_params(n, p)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "outlier probability eta = {eta} outside [0, 1]"
        )));
    }
    let h = planted_ranking(n, seed);
    let mut outliers = Vec::new();
    let graph = build_with_policy(conn, seed, |s| {
        outliers.clear();
        let mut edges = Vec::new();
        let denom = PI * (n as f64 - 1.0);
        for u in 0..n {
            for v in u + 1..n {
                let mut stream = crate::rng::edge_stream(s, u, v);
                if stream.next_f64() < p {
                    let (angle, noisy) = ero_angle(&mut stream, eta, h[u], h[v], n, denom);
                    outliers.push(noisy);
                    edges.push((u, v, 1.0, angle));
                }
            }
        }
        ConnectionGraph::new(n, edges)
    })?;
    Ok(PlantedInstance {
        graph,
        ranking: h,
        model: Model::Ero { n, p, eta },
        seed,
        outliers: Some(outliers),
    })
}

fn ero_angle(
    stream: &mut SplitMix64,
    eta: f64,
    hu: usize,
    hv: usize,
    n: usize,
    denom: f64,
) -> (f64, bool) {
    if stream.next_f64() < 1.0 - eta {
        ((hu as f64 - hv as f64) / denom, false)
    } else {
        let span = 2 * n as u64 - 1; // {−n+1, …, n−1}
        let eps = stream.next_below(span) as i64 - (n as i64 - 1);
        (eps as f64 / denom, true)
    }
}

/// Two n/2-cliques joined by a single edge, with a planted connection and
/// outlier noise at rate η (η = 0 gives the consistent planted connection).
pub fn gen_barbell(n: usize, eta: f64, seed: u64) -> Result<PlantedInstance> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "barbell size must be even and at least 4, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "outlier probability eta = {eta} outside [0, 1]"
        )));
    }
    let h = planted_ranking(n, seed);
    let half = n / 2;
    let denom = PI * (n as f64 - 1.0);
    let mut edges = Vec::new();
    let mut outliers = Vec::new();
    let push = |u: usize, v: usize, outl: &mut Vec<bool>, edg: &mut Vec<_>| {
        let mut stream = crate::rng::edge_stream(seed, u, v);
        let (angle, noisy) = ero_angle(&mut stream, eta, h[u], h[v], n, denom);
        outl.push(noisy);
        edg.push((u, v, 1.0, angle));
    };
    for base in [0, half] {
        for u in base..base + half {
            for v in u + 1..base + half {
                push(u, v, &mut outliers, &mut edges);
            }
        }
    }
    push(0, half, &mut outliers, &mut edges);
    let graph = ConnectionGraph::new(n, edges)?;
    Ok(PlantedInstance {
        graph,
        ranking: h,
        model: Model::Barbell { n, eta },
        seed,
        outliers: Some(outliers),
    })
}

fn check_er_params(n: usize, p: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "edge probability p = {p} outside [0, 1]"
        )));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if eta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise level eta = {eta} must be nonnegative"
        )));
    }
    Ok(())
}

fn build_with_policy(
    conn: Connectivity,
    seed: u64,
    mut draw: impl FnMut(u64) -> Result<ConnectionGraph>,
) -> Result<ConnectionGraph> {
    match conn {
        Connectivity::AcceptAsIs => draw(seed),
        Connectivity::LargestComponent => {
            let g = draw(seed)?;
            if g.edge_count() == 0 {
                return Err(Error::Disconnected);
            }
            Ok(if g.is_connected() {
                g
            } else {
                g.largest_component()
            })
        }
        Connectivity::RejectResample => {
            for attempt in 0..MAX_RESAMPLE {
                let g = draw(retry_seed(seed, attempt))?;
                if g.is_connected() {
                    return Ok(g);
                }
            }
            Err(Error::ConnectivityRetriesExhausted(MAX_RESAMPLE))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::holonomy;

    #[test]
    fn er_complete_when_p_is_one() {
        let g = gen_er(4, 1.0, 1, Connectivity::RejectResample).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert!(g.is_connected());
    }

    #[test]
    fn er_edge_count_near_binomial_mean() {
        let g = gen_er(2000, 0.01, 42, Connectivity::AcceptAsIs).unwrap();
        let pairs = 2000.0 * 1999.0 / 2.0;
        let mean = pairs * 0.01;
        let sd = f64::sqrt(pairs * 0.01 * 0.99);
        let m = g.edge_count() as f64;
        assert!((m - mean).abs() <= 4.0 * sd, "m = {m}, mean = {mean}");
    }

    #[test]
    fn er_rejects_empty_when_connectivity_required() {
        match gen_er(5, 0.0, 3, Connectivity::RejectResample) {
            Err(Error::ConnectivityRetriesExhausted(_)) => {}
            other => panic!("expected resample exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let a = gen_mun(50, 0.2, 0.3, 7, Connectivity::AcceptAsIs).unwrap();
        let b = gen_mun(50, 0.2, 0.3, 7, Connectivity::AcceptAsIs).unwrap();
        assert_eq!(a.graph.edges(), b.graph.edges());
        assert_eq!(a.ranking, b.ranking);
        let c = gen_mun(50, 0.2, 0.3, 8, Connectivity::AcceptAsIs).unwrap();
        assert_ne!(a.graph.edges(), c.graph.edges());
    }

    #[test]
    fn mun_noiseless_is_consistent() {
        let inst = gen_mun(30, 0.3, 0.0, 5, Connectivity::RejectResample).unwrap();
        assert!(inst.graph.connection_is_trivial(1e-10));
        // Every triangle in the graph has holonomy weight ~ 0.
        let g = &inst.graph;
        let n = g.node_count();
        let mut found = 0;
        'outer: for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    if g.edge_between(a, b).is_some()
                        && g.edge_between(b, c).is_some()
                        && g.edge_between(c, a).is_some()
                    {
                        let (_, w) = holonomy(g, &[a, b, c]).unwrap();
                        assert!(w < 1e-10);
                        found += 1;
                        if found > 20 {
                            break 'outer;
                        }
                    }
                }
            }
        }
        assert!(found > 0, "test graph should contain triangles");
    }

    #[test]
    fn mun_angle_bound() {
        let eta = 0.4;
        let inst = gen_mun(40, 0.3, eta, 11, Connectivity::AcceptAsIs).unwrap();
        let bound = (1.0 + eta) / PI + 1e-12;
        for e in inst.graph.edges() {
            let a = e.angle.min(std::f64::consts::TAU - e.angle);
            assert!(a <= bound, "angle {a} exceeds {bound}");
        }
    }

    #[test]
    fn ero_eta_extremes() {
        let all_noise = gen_ero(30, 0.3, 1.0, 2, Connectivity::AcceptAsIs).unwrap();
        assert!(all_noise.outliers.unwrap().iter().all(|&b| b));
        let no_noise = gen_ero(30, 0.3, 0.0, 2, Connectivity::AcceptAsIs).unwrap();
        assert!(no_noise.outliers.unwrap().iter().all(|&b| !b));
        assert!(no_noise.graph.connection_is_trivial(1e-10));
    }

    #[test]
    fn ero_outlier_rate_at_scale() {
        // The preconditioning-scale instance: a thousandth of the edges are
        // outliers, within four binomial standard deviations.
        let inst = gen_ero(2000, 0.01, 1e-3, 8, Connectivity::AcceptAsIs).unwrap();
        let outliers = inst.outliers.as_ref().unwrap();
        let m = outliers.len() as f64;
        let count = outliers.iter().filter(|&&b| b).count() as f64;
        let sd = f64::sqrt(m * 1e-3 * (1.0 - 1e-3));
        assert!((count - m * 1e-3).abs() <= 4.0 * sd, "{count} of {m}");
    }

    #[test]
    fn mun_and_ero_coincide_without_noise() {
        let a = gen_mun(25, 0.4, 0.0, 9, Connectivity::AcceptAsIs).unwrap();
        let b = gen_ero(25, 0.4, 0.0, 9, Connectivity::AcceptAsIs).unwrap();
        assert_eq!(a.graph.edge_count(), b.graph.edge_count());
        for (x, y) in a.graph.edges().iter().zip(b.graph.edges()) {
            assert_eq!((x.u, x.v), (y.u, y.v));
            assert!((x.angle - y.angle).abs() < 1e-12);
        }
    }

    #[test]
    fn barbell_edge_count() {
        let inst = gen_barbell(500, 0.0, 1).unwrap();
        assert_eq!(inst.graph.edge_count(), 62_251);
        assert!(inst.graph.is_connected());
        assert!(inst.graph.connection_is_trivial(1e-9));
        assert!(gen_barbell(7, 0.0, 1).is_err());
    }

    #[test]
    fn ranking_is_permutation() {
        let inst = gen_mun(64, 0.2, 0.1, 99, Connectivity::AcceptAsIs).unwrap();
        let mut sorted = inst.ranking.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (1..=64).collect::<Vec<_>>());
    }
}
