//! Small parameter-explorable scenes backing the browser demo: sample a
//! spanning subgraph and report its geometry, color edges by leverage score,
//! and run the ranking pipeline on a noisy planted instance. Everything is
//! plain data with serde output so the wasm layer stays a thin wrapper.

use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use crate::oracle::exact_kernel;
use crate::rng::{edge_stream, replicate_rng};
use crate::sampler::{WeightMode, cycle_popping, wilson_st};
use crate::syncrank::{EigensolveMode, comparisons_from_connection, sync_rank};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

const MAX_DEMO_NODES: usize = 900;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum DemoFamily {
    Grid { rows: usize, cols: usize },
    Er { n: usize, p: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoGraph {
    pub nodes: Vec<(f64, f64)>,
    pub edges: Vec<(usize, usize)>,
    /// Edge angles in [0, 2π) for hue mapping.
    pub angles: Vec<f64>,
}

/// Builds the demo graph: planted zero angles, each edge independently
/// replaced by a uniform random phase with probability `eta`.
pub fn build_demo_graph(
    family: DemoFamily,
    eta: f64,
    seed: u64,
) -> Result<(ConnectionGraph, Vec<(f64, f64)>)> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "noise level {eta} outside [0, 1]"
        )));
    }
    let noise = |s: u64, u: usize, v: usize| -> f64 {
        let mut st = edge_stream(s, u, v);
        if st.next_f64() < eta {
            st.next_f64() * TAU - PI
        } else {
            0.0
        }
    };
    match family {
        DemoFamily::Grid { rows, cols } => {
            if rows < 2 || cols < 2 || rows * cols > MAX_DEMO_NODES {
                return Err(Error::InvalidParameter(format!(
                    "grid {rows}×{cols} outside the demo range"
                )));
            }
            let id = |r: usize, c: usize| r * cols + c;
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        let (u, v) = (id(r, c), id(r, c + 1));
                        edges.push((u, v, 1.0, noise(seed, u, v)));
                    }
                    if r + 1 < rows {
                        let (u, v) = (id(r, c), id(r + 1, c));
                        edges.push((u, v, 1.0, noise(seed, u, v)));
                    }
                }
            }
            let g = ConnectionGraph::new(rows * cols, edges)?;
            let pos = (0..rows * cols)
                .map(|i| {
                    let (r, c) = (i / cols, i % cols);
                    (
                        0.06 + 0.88 * c as f64 / (cols - 1) as f64,
                        0.06 + 0.88 * r as f64 / (rows - 1) as f64,
                    )
                })
                .collect();
            Ok((g, pos))
        }
        DemoFamily::Er { n, p } => {
            if n < 3 || n > MAX_DEMO_NODES || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "er({n}, {p}) outside the demo range"
                )));
            }
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    let mut st = edge_stream(seed ^ 0x6465_6d6f, u, v);
                    if st.next_f64() < p {
                        edges.push((u, v, 1.0, noise(seed, u, v)));
                    }
                }
            }
            let g = ConnectionGraph::new(n, edges)?;
            let g = if g.is_connected() {
                g
            } else {
                g.largest_component()
            };
            let n_eff = g.node_count();
            let pos = (0..n_eff)
                .map(|i| {
                    let a = TAU * i as f64 / n_eff as f64;
                    (0.5 + 0.44 * a.cos(), 0.5 + 0.44 * a.sin())
                })
                .collect();
            Ok((g, pos))
        }
    }
}

fn demo_graph_out(g: &ConnectionGraph, pos: Vec<(f64, f64)>) -> DemoGraph {
    DemoGraph {
        nodes: pos,
        edges: g.edges().iter().map(|e| (e.u, e.v)).collect(),
        angles: g.edges().iter().map(|e| e.angle).collect(),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DemoSampler {
    /// Cycle-popping walk at the given q (capped cycle weights).
    CyclePopping,
    /// Uniform spanning tree via Wilson's algorithm.
    SpanningTree,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleScene {
    pub graph: DemoGraph,
    pub sampled_edges: Vec<usize>,
    pub cycle_edges: Vec<usize>,
    pub roots: Vec<usize>,
    pub tree_count: usize,
    pub cycle_count: usize,
    pub steps: u64,
    pub cycles_popped: u64,
    pub importance_weight: f64,
}

/// Draws one spanning subgraph and returns it with drawing geometry.
pub fn sample_scene(
    family: DemoFamily,
    eta: f64,
    q: f64,
    sampler: DemoSampler,
    seed: u64,
    replicate: u64,
) -> Result<SampleScene> {
    let (g, pos) = build_demo_graph(family, eta, seed)?;
    let mut rng = replicate_rng(seed, replicate);
    let (mtsf, stats) = match sampler {
        DemoSampler::SpanningTree => wilson_st(&g, &mut rng)?,
        DemoSampler::CyclePopping => {
            // A trivial connection with q = 0 cannot terminate; surface the
            // configuration problem instead of burning the step budget.
            if q == 0.0 && g.connection_is_trivial(1e-12) {
                return Err(Error::AssumptionViolated);
            }
            cycle_popping(&g, q, WeightMode::Capped, &mut rng)?
        }
    };
    let mut cycle_edges = Vec::new();
    let mut roots = Vec::new();
    for comp in &mtsf.components {
        match comp {
            crate::sampler::Component::Tree(t) => roots.push(t.root),
            crate::sampler::Component::CycleTree(t) => {
                for i in 0..t.cycle.len() {
                    let a = t.cycle[i];
                    let b = t.cycle[(i + 1) % t.cycle.len()];
                    if let Some(e) = g.edge_between(a, b) {
                        cycle_edges.push(e);
                    }
                }
            }
        }
    }
    Ok(SampleScene {
        sampled_edges: mtsf.edge_ids().to_vec(),
        cycle_count: mtsf.cycles().count(),
        tree_count: mtsf.tree_count(),
        importance_weight: mtsf.importance_weight(),
        cycle_edges,
        roots,
        steps: stats.steps,
        cycles_popped: stats.cycles_popped,
        graph: demo_graph_out(&g, pos),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LeverageScene {
    pub graph: DemoGraph,
    pub scores: Vec<f64>,
    pub d_eff: f64,
    pub kappa: f64,
    pub suggested_batch: usize,
}

/// Exact leverage scores for edge coloring, with the kernel statistics and
/// the batch-size bound at (ε, δ) = (0.5, 0.1).
pub fn leverage_scene(family: DemoFamily, eta: f64, q: f64, seed: u64) -> Result<LeverageScene> {
    let (g, pos) = build_demo_graph(family, eta, seed)?;
    if g.node_count() > 400 {
        return Err(Error::SizeGuard(
            "leverage scene limited to 400 nodes".into(),
        ));
    }
    let kernel = exact_kernel(&g, q)?;
    let suggested_batch =
        crate::sparsifier::batch_size_bound(kernel.d_eff, kernel.kappa, 0.5, 0.1)?;
    Ok(LeverageScene {
        scores: kernel.leverage,
        d_eff: kernel.d_eff,
        kappa: kernel.kappa,
        suggested_batch,
        graph: demo_graph_out(&g, pos),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SyncRankScene {
    pub planted: Vec<usize>,
    pub recovered: Vec<usize>,
    pub tau: f64,
    pub upsets: usize,
    pub shift: usize,
    pub scores: Vec<f64>,
    pub edge_count: usize,
}

/// Planted-ranking recovery on a MUN instance with the exact eigensolver.
pub fn syncrank_scene(n: usize, p: f64, eta: f64, seed: u64) -> Result<SyncRankScene> {
    if !(4..=400).contains(&n) {
        return Err(Error::InvalidParameter(
            "demo ranking limited to 4..=400 nodes".into(),
        ));
    }
    let inst = crate::generators::gen_mun(
        n,
        p,
        eta,
        seed,
        crate::generators::Connectivity::RejectResample,
    )?;
    let comparisons = comparisons_from_connection(&inst.graph);
    let res = sync_rank(&comparisons, n, EigensolveMode::Exact, Some(&inst.ranking))?;
    Ok(SyncRankScene {
        planted: inst.ranking,
        recovered: res.rank,
        tau: res.tau.unwrap_or(f64::NAN),
        upsets: res.upsets,
        shift: res.shift,
        scores: res.scores,
        edge_count: inst.graph.edge_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_scene_samples_and_draws() {
        let scene = sample_scene(
            DemoFamily::Grid { rows: 6, cols: 6 },
            0.4,
            0.3,
            DemoSampler::CyclePopping,
            11,
            0,
        )
        .unwrap();
        assert_eq!(scene.graph.nodes.len(), 36);
        assert_eq!(
            scene.sampled_edges.len(),
            36 - scene.tree_count
        );
        // Deterministic under (seed, replicate).
        let again = sample_scene(
            DemoFamily::Grid { rows: 6, cols: 6 },
            0.4,
            0.3,
            DemoSampler::CyclePopping,
            11,
            0,
        )
        .unwrap();
        assert_eq!(scene.sampled_edges, again.sampled_edges);
    }

    #[test]
    fn trivial_q0_scene_is_rejected() {
        assert!(matches!(
            sample_scene(
                DemoFamily::Grid { rows: 4, cols: 4 },
                0.0,
                0.0,
                DemoSampler::CyclePopping,
                3,
                0
            ),
            Err(Error::AssumptionViolated)
        ));
        // Wilson does not need a connection at all.
        let st = sample_scene(
            DemoFamily::Grid { rows: 4, cols: 4 },
            0.0,
            0.0,
            DemoSampler::SpanningTree,
            3,
            0,
        )
        .unwrap();
        assert_eq!(st.sampled_edges.len(), 15);
        assert_eq!(st.cycle_count, 0);
    }

    #[test]
    fn leverage_scene_statistics() {
        let scene = leverage_scene(DemoFamily::Grid { rows: 5, cols: 5 }, 0.5, 0.2, 4).unwrap();
        assert_eq!(scene.scores.len(), scene.graph.edges.len());
        let sum: f64 = scene.scores.iter().sum();
        assert!((sum - scene.d_eff).abs() < 1e-9);
        assert!(scene.kappa <= 1.0 + 1e-9);
        assert!(scene.suggested_batch > 0);
    }

    #[test]
    fn er_scene_connects() {
        let scene = sample_scene(
            DemoFamily::Er { n: 40, p: 0.15 },
            0.3,
            0.5,
            DemoSampler::CyclePopping,
            7,
            2,
        )
        .unwrap();
        assert_eq!(scene.graph.nodes.len(), scene.tree_count + scene.sampled_edges.len());
    }

    #[test]
    fn syncrank_scene_recovers_noiseless() {
        let scene = syncrank_scene(30, 0.4, 0.0, 9).unwrap();
        assert!((scene.tau - 1.0).abs() < 1e-12);
        assert_eq!(scene.planted, scene.recovered);
    }
}
