//! Experiment runners behind the `maglap` binary.
//!
//! Every run resolves its configuration, executes, and returns a map of
//! output files. Result files are deterministic under (config, seed); the
//! sole exceptions are `meta.json` (wall-clock timing, version) and the
//! bench subcommand, whose measured times are the result itself. The
//! resolved config is always emitted alongside the results and reloads
//! bit-exactly through `--config`.

use anyhow::{Context, Result, anyhow, bail};
use maglap::generators::{self, Connectivity};
use maglap::graph::ConnectionGraph;
use maglap::laplacian::assemble_magnetic_laplacian;
use maglap::leverage;
use maglap::rng::replicate_rng;
use maglap::sampler::{self, WeightMode};
use maglap::solvers;
use maglap::sparsifier::{self, EstimatorKind, LsSpec, SparsifierBatch};
use maglap::syncrank;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

pub type OutputFiles = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GraphSource {
    File {},
    Er { n: usize, p: f64 },
    Mun { n: usize, p: f64, eta: f64 },
    Ero { n: usize, p: f64, eta: f64 },
    Barbell { n: usize, eta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    St,
    Sf,
    Crsf,
    Mtsf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliWeightMode {
    Exact,
    Capped,
}

impl From<CliWeightMode> for WeightMode {
    fn from(m: CliWeightMode) -> WeightMode {
        match m {
            CliWeightMode::Exact => WeightMode::Exact,
            CliWeightMode::Capped => WeightMode::Capped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsMethod {
    Exact,
    Uniform,
    Jl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigMode {
    Exact,
    SparsifyEigensolve,
    SparsifyPrecondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum CommandConfig {
    Gen {
        model: GraphSource,
    },
    Sample {
        model: GraphSource,
        mode: SamplerMode,
        q: f64,
        weight_mode: CliWeightMode,
        replicates: usize,
    },
    Ls {
        model: GraphSource,
        method: LsMethod,
        q: f64,
        /// Sample size backing the uniform normalization.
        sample_size: Option<usize>,
    },
    Sparsify {
        model: GraphSource,
        mode: SamplerMode,
        ls: LsMethod,
        q: f64,
        weight_mode: CliWeightMode,
        /// Explicit batch size, or derived from (epsilon, delta) when absent.
        t: Option<usize>,
        epsilon: Option<f64>,
        delta: Option<f64>,
    },
    Precond {
        model: GraphSource,
        mode: SamplerMode,
        ls: LsMethod,
        q: f64,
        t: usize,
    },
    Ssl {
        model: GraphSource,
        q: f64,
    },
    Syncrank {
        n: usize,
        eig: EigMode,
        t: usize,
        q: f64,
    },
    Bench {
        model: GraphSource,
        qs: Vec<f64>,
        runs: usize,
    },
}

/// Fully resolved experiment: round-trips through JSON bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: CommandConfig,
    pub seed: u64,
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// External inputs a run may need (edge lists, labels, comparisons) that are
/// referenced by the `file` graph source or by the subcommand itself.
#[derive(Debug, Default, Clone)]
pub struct Inputs {
    pub graph: Option<String>,
    pub labels: Option<String>,
    pub comparisons: Option<String>,
    pub reference: Option<String>,
}

fn build_graph(
    model: &GraphSource,
    seed: u64,
    inputs: &Inputs,
) -> Result<(ConnectionGraph, Option<Vec<usize>>)> {
    Ok(match model {
        GraphSource::File {} => {
            let text = inputs
                .graph
                .as_ref()
                .ok_or_else(|| anyhow!("graph source `file` needs --graph <path>"))?;
            (ConnectionGraph::parse_edge_list(text)?, None)
        }
        GraphSource::Er { n, p } => (
            generators::gen_er(*n, *p, seed, Connectivity::RejectResample)?,
            None,
        ),
        GraphSource::Mun { n, p, eta } => {
            let inst = generators::gen_mun(*n, *p, *eta, seed, Connectivity::RejectResample)?;
            (inst.graph, Some(inst.ranking))
        }
        GraphSource::Ero { n, p, eta } => {
            let inst = generators::gen_ero(*n, *p, *eta, seed, Connectivity::RejectResample)?;
            (inst.graph, Some(inst.ranking))
        }
        GraphSource::Barbell { n, eta } => {
            let inst = generators::gen_barbell(*n, *eta, seed)?;
            (inst.graph, Some(inst.ranking))
        }
    })
}

/// Runs `f` for replicates 0..n on a bounded pool; results keep the
/// replicate order regardless of scheduling.
pub fn run_replicates<T: Send>(
    n: usize,
    threads: usize,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let workers = threads.max(1).min(n.max(1));
    let mut out: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<T>>>> =
        (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let r = f(i as u64);
                    *slots[i].lock().unwrap() = Some(r);
                }
            });
        }
    });
    for (i, slot) in slots.into_iter().enumerate() {
        out[i] = slot.into_inner().unwrap();
    }
    out.into_iter()
        .map(|r| r.expect("replicate ran"))
        .collect()
}

fn sample_one(
    g: &ConnectionGraph,
    mode: SamplerMode,
    q: f64,
    wm: WeightMode,
    seed: u64,
    rep: u64,
) -> Result<(sampler::Mtsf, sampler::WalkStats)> {
    let mut rng = replicate_rng(seed, rep);
    Ok(match mode {
        SamplerMode::St => sampler::wilson_st(g, &mut rng)?,
        SamplerMode::Sf => {
            if q <= 0.0 {
                bail!("spanning-forest sampling needs q > 0");
            }
            let dropped = g.reweighted(|_| 1.0)?;
            let zeroed = ConnectionGraph::new(
                dropped.node_count(),
                dropped
                    .edges()
                    .iter()
                    .map(|e| (e.u, e.v, 1.0, 0.0))
                    .collect(),
            )?;
            sampler::cycle_popping(&zeroed, q, WeightMode::Exact, &mut rng)?
        }
        SamplerMode::Crsf => sampler::cycle_popping(&unit(g)?, 0.0, wm, &mut rng)?,
        SamplerMode::Mtsf => sampler::cycle_popping(&unit(g)?, q, wm, &mut rng)?,
    })
}

fn unit(g: &ConnectionGraph) -> maglap::Result<ConnectionGraph> {
    g.reweighted(|_| 1.0)
}

fn leverage_scores(
    g: &ConnectionGraph,
    method: LsMethod,
    q: f64,
    seed: u64,
    sample_size: usize,
) -> Result<leverage::LeverageScores> {
    Ok(match method {
        LsMethod::Exact => leverage::exact_ls(&unit(g)?, q)?,
        LsMethod::Uniform => leverage::uniform_ls(sample_size.max(1), g.edge_count())?,
        LsMethod::Jl => leverage::jl_ls(&unit(g)?, q, seed)?,
    })
}

#[derive(Serialize)]
struct RunMeta<'a> {
    version: &'a str,
    elapsed_ms: u128,
}

/// Executes the experiment and returns the output files.
pub fn run_experiment(config: &ExperimentConfig, inputs: &Inputs) -> Result<OutputFiles> {
    let started = Instant::now();
    let mut files = OutputFiles::new();
    files.insert("config.json".into(), config.to_json());
    let seed = config.seed;
    match &config.command {
        CommandConfig::Gen { model } => {
            let (g, ranking) = build_graph(model, seed, inputs)?;
            files.insert("graph.edges".into(), g.to_edge_list());
            if let Some(h) = ranking {
                let mut s = String::from("# node h(node)\n");
                for (u, hv) in h.iter().enumerate() {
                    let _ = writeln!(s, "{u} {hv}");
                }
                files.insert("ranking.txt".into(), s);
            }
        }
        CommandConfig::Sample {
            model,
            mode,
            q,
            weight_mode,
            replicates,
        } => {
            let (g, _) = build_graph(model, seed, inputs)?;
            let results = run_replicates(*replicates, config.threads, |rep| {
                sample_one(&g, *mode, *q, (*weight_mode).into(), seed, rep)
            })?;
            let mut lines = String::new();
            let mut stats = Vec::new();
            for (f, st) in &results {
                let ids: Vec<String> = f.edge_ids().iter().map(|e| e.to_string()).collect();
                let _ = writeln!(lines, "{}", ids.join(" "));
                stats.push(serde_json::json!({
                    "edges": f.edge_count(),
                    "trees": f.tree_count(),
                    "cycles": f.cycles().count(),
                    "steps": st.steps,
                    "cycles_popped": st.cycles_popped,
                    "cycles_accepted": st.cycles_accepted,
                    "bernoulli_draws": st.bernoulli_draws,
                    "importance_weight": f.importance_weight(),
                }));
            }
            files.insert("samples.txt".into(), lines);
            files.insert(
                "stats.json".into(),
                serde_json::to_string_pretty(&stats)?,
            );
        }
        CommandConfig::Ls {
            model,
            method,
            q,
            sample_size,
        } => {
            let (g, _) = build_graph(model, seed, inputs)?;
            let fallback = g.node_count().saturating_sub(1).max(1);
            let ls = leverage_scores(&g, *method, *q, seed, sample_size.unwrap_or(fallback))?;
            let mut s = String::from("# edge_id score\n");
            for (e, sc) in ls.scores.iter().enumerate() {
                let _ = writeln!(s, "{e} {sc}");
            }
            files.insert("scores.txt".into(), s);
        }
        CommandConfig::Sparsify {
            model,
            mode,
            ls,
            q,
            weight_mode,
            t,
            epsilon,
            delta,
        } => {
            let (g, _) = build_graph(model, seed, inputs)?;
            let t = match (t, epsilon, delta) {
                (Some(t), _, _) => *t,
                (None, Some(eps), Some(delta)) => {
                    let kernel = maglap::oracle::exact_kernel(&unit(&g)?, *q)
                        .context("batch-size bound needs the exact kernel at this scale; pass --t instead")?;
                    sparsifier::batch_size_bound(kernel.d_eff, kernel.kappa, *eps, *delta)?
                }
                _ => bail!("pass either --t or both --epsilon and --delta"),
            };
            let samples = run_replicates(t, config.threads, |rep| {
                Ok(sample_one(&g, *mode, *q, (*weight_mode).into(), seed, rep)?.0)
            })?;
            let kind = if *weight_mode == CliWeightMode::Capped {
                EstimatorKind::SelfNormalized
            } else {
                EstimatorKind::Plain
            };
            let weights: Vec<f64> = samples.iter().map(|s| s.importance_weight()).collect();
            let ls_spec = match ls {
                LsMethod::Uniform => LsSpec::UniformPerSample,
                m => LsSpec::PerEdge(
                    leverage_scores(&g, *m, *q, seed, samples[0].edge_count())?.scores,
                ),
            };
            let batch = SparsifierBatch::new(&g, samples, ls_spec, *q, kind)?;
            let support = batch.support_graph()?;
            let meta = serde_json::json!({
                "t": t,
                "union_edges": support.edge_count(),
                "importance_weights": {
                    "min": weights.iter().cloned().fold(f64::INFINITY, f64::min),
                    "max": weights.iter().cloned().fold(0.0, f64::max),
                    "mean": weights.iter().sum::<f64>() / weights.len() as f64,
                },
            });
            files.insert("sparsifier.edges".into(), support.to_edge_list());
            files.insert("sparsifier.json".into(), serde_json::to_string_pretty(&meta)?);
        }
        CommandConfig::Precond {
            model,
            mode,
            ls,
            q,
            t,
        } => {
            let (g, _) = build_graph(model, seed, inputs)?;
            if *q <= 0.0 && *mode != SamplerMode::Crsf {
                bail!("preconditioning needs q > 0 unless sampling CRSFs");
            }
            let samples = run_replicates(*t, config.threads, |rep| {
                Ok(sample_one(&g, *mode, *q, WeightMode::Capped, seed, rep)?.0)
            })?;
            let ls_spec = match ls {
                LsMethod::Uniform => LsSpec::UniformPerSample,
                m => LsSpec::PerEdge(
                    leverage_scores(&g, *m, *q, seed, samples[0].edge_count())?.scores,
                ),
            };
            let batch = SparsifierBatch::new(&g, samples, ls_spec, *q, EstimatorKind::Plain)?;
            let sp = sparsifier::build_sparsifier(&batch)?;
            let factor = sparsifier::cholesky_sparse_hpd(&sp)?;
            let lap = assemble_magnetic_laplacian(&g, *q);
            let mut s = maglap::rng::SplitMix64::from_key(&[seed, 0x70]);
            let b: Vec<Complex64> = (0..g.node_count())
                .map(|_| Complex64::new(s.next_f64() - 0.5, s.next_f64() - 0.5))
                .collect();
            let report = solvers::precondition_report(&lap, &factor, &b, 1e-8, 50_000)?;
            files.insert("precond.json".into(), serde_json::to_string_pretty(&report)?);
        }
        CommandConfig::Ssl { model, q } => {
            let (g, _) = build_graph(model, seed, inputs)?;
            let text = inputs
                .labels
                .as_ref()
                .ok_or_else(|| anyhow!("ssl needs --labels <path> with `node re im` lines"))?;
            let mut y = vec![Complex64::ZERO; g.node_count()];
            for (i, line) in text.lines().enumerate() {
                let l = line.trim();
                if l.is_empty() || l.starts_with('#') {
                    continue;
                }
                let parts: Vec<&str> = l.split_whitespace().collect();
                if parts.len() != 3 {
                    bail!("labels line {} needs `node re im`", i + 1);
                }
                let node: usize = parts[0].parse()?;
                if node >= y.len() {
                    bail!("labels line {}: node {node} out of range", i + 1);
                }
                y[node] = Complex64::new(parts[1].parse()?, parts[2].parse()?);
            }
            let f = solvers::ssl_solve(&g, *q, &y, seed)?;
            let mut s = String::from("# node re im\n");
            for (u, z) in f.iter().enumerate() {
                let _ = writeln!(s, "{u} {} {}", z.re, z.im);
            }
            files.insert("solution.txt".into(), s);
        }
        CommandConfig::Syncrank { n, eig, t, q } => {
            let text = inputs
                .comparisons
                .as_ref()
                .ok_or_else(|| anyhow!("syncrank needs --comparisons <path> with `u v kappa` lines"))?;
            let mut comparisons = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let l = line.trim();
                if l.is_empty() || l.starts_with('#') {
                    continue;
                }
                let parts: Vec<&str> = l.split_whitespace().collect();
                if parts.len() != 3 {
                    bail!("comparisons line {} needs `u v kappa`", i + 1);
                }
                comparisons.push(syncrank::Comparison {
                    u: parts[0].parse()?,
                    v: parts[1].parse()?,
                    kappa: parts[2].parse()?,
                });
            }
            let reference: Option<Vec<usize>> = match &inputs.reference {
                Some(text) => {
                    let mut h = vec![0usize; *n];
                    for line in text.lines() {
                        let l = line.trim();
                        if l.is_empty() || l.starts_with('#') {
                            continue;
                        }
                        let parts: Vec<&str> = l.split_whitespace().collect();
                        let node: usize = parts[0].parse()?;
                        h[node] = parts[1].parse()?;
                    }
                    Some(h)
                }
                None => None,
            };
            let cfg = syncrank::SparsifyConfig { t: *t, q: *q, seed };
            let mode = match eig {
                EigMode::Exact => syncrank::EigensolveMode::Exact,
                EigMode::SparsifyEigensolve => syncrank::EigensolveMode::SparsifyEigensolve(cfg),
                EigMode::SparsifyPrecondition => {
                    syncrank::EigensolveMode::SparsifyPrecondition(cfg)
                }
            };
            let res = syncrank::sync_rank(&comparisons, *n, mode, reference.as_deref())?;
            let mut csv = String::from("# node,score,rank\n");
            for u in 0..*n {
                let _ = writeln!(csv, "{u},{},{}", res.scores[u], res.rank[u]);
            }
            let metrics = serde_json::json!({
                "upsets": res.upsets,
                "shift": res.shift,
                "tau": res.tau,
                "degenerate": res.degenerate,
                "had_ties": res.had_ties,
            });
            files.insert("ranking.csv".into(), csv);
            files.insert("metrics.json".into(), serde_json::to_string_pretty(&metrics)?);
        }
        CommandConfig::Bench { model, qs, runs } => {
            let (g, _) = build_graph(model, seed, inputs)?;
            let gu = unit(&g)?;
            let mut csv =
                String::from("# sampler timing: mode,q,mean_seconds,std_seconds,runs\n");
            for &q in qs {
                let stats = time_sampler(*runs, |rep| {
                    let mut rng = replicate_rng(seed, rep);
                    sampler::cycle_popping(&gu, q, WeightMode::Capped, &mut rng)?;
                    Ok(())
                })?;
                let _ = writeln!(csv, "sf,{q},{},{},{runs}", stats.0, stats.1);
            }
            let stats = time_sampler(*runs, |rep| {
                let mut rng = replicate_rng(seed, rep);
                sampler::wilson_st(&gu, &mut rng)?;
                Ok(())
            })?;
            let _ = writeln!(csv, "st,0,{},{},{runs}", stats.0, stats.1);
            files.insert("bench.csv".into(), csv);
        }
    }
    let meta = RunMeta {
        version: env!("CARGO_PKG_VERSION"),
        elapsed_ms: started.elapsed().as_millis(),
    };
    files.insert("meta.json".into(), serde_json::to_string_pretty(&meta)?);
    Ok(files)
}

/// Times the sampler call only; RNG setup happens inside `f` but costs
/// nanoseconds next to the walk.
fn time_sampler(runs: usize, f: impl Fn(u64) -> maglap::Result<()>) -> Result<(f64, f64)> {
    let mut times = Vec::with_capacity(runs);
    for rep in 0..runs {
        let t0 = Instant::now();
        f(rep as u64)?;
        times.push(t0.elapsed().as_secs_f64());
    }
    let mean = times.iter().sum::<f64>() / runs as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / runs as f64;
    Ok((mean, var.sqrt()))
}
