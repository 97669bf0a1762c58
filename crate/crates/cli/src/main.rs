use anyhow::{Context, Result, bail};
use clap::{Args, Parser, Subcommand, ValueEnum};
use maglap_cli::{
    CliWeightMode, CommandConfig, EigMode, ExperimentConfig, GraphSource, Inputs, LsMethod,
    SamplerMode, run_experiment,
};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "maglap",
    about = "Magnetic Laplacian sparsification via multi-type spanning forests",
    version
)]
struct Cli {
    /// Master seed; replicate ℓ uses stream (seed, ℓ).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "maglap-out")]
    out: PathBuf,
    /// Worker threads for replicate sampling.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Load a resolved config JSON instead of command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Edge-list file for `--model file` (format: `u v weight angle`).
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Labels file for `ssl` (format: `node re im`).
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
    /// Comparisons file for `syncrank` (format: `u v kappa`).
    #[arg(long, global = true)]
    comparisons: Option<PathBuf>,
    /// Reference ranking file for `syncrank` (format: `node h`).
    #[arg(long, global = true)]
    reference: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    File,
    Er,
    Mun,
    Ero,
    Barbell,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Graph source.
    #[arg(long, value_enum, default_value_t = ModelKind::File)]
    model: ModelKind,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
}

impl ModelArgs {
    fn resolve(&self) -> GraphSource {
        match self.model {
            ModelKind::File => GraphSource::File {},
            ModelKind::Er => GraphSource::Er { n: self.n, p: self.p },
            ModelKind::Mun => GraphSource::Mun {
                n: self.n,
                p: self.p,
                eta: self.eta,
            },
            ModelKind::Ero => GraphSource::Ero {
                n: self.n,
                p: self.p,
                eta: self.eta,
            },
            ModelKind::Barbell => GraphSource::Barbell {
                n: self.n,
                eta: self.eta,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    St,
    Sf,
    Crsf,
    Mtsf,
}

impl From<ModeArg> for SamplerMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::St => SamplerMode::St,
            ModeArg::Sf => SamplerMode::Sf,
            ModeArg::Crsf => SamplerMode::Crsf,
            ModeArg::Mtsf => SamplerMode::Mtsf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Exact,
    Capped,
}

#[derive(Clone, Copy, ValueEnum)]
enum LsArg {
    Exact,
    Uniform,
    Jl,
}

impl From<LsArg> for LsMethod {
    fn from(m: LsArg) -> Self {
        match m {
            LsArg::Exact => LsMethod::Exact,
            LsArg::Uniform => LsMethod::Uniform,
            LsArg::Jl => LsMethod::Jl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EigArg {
    Exact,
    #[value(name = "sparsify-and-eigensolve")]
    SparsifyEigensolve,
    #[value(name = "sparsify-and-precondition")]
    SparsifyPrecondition,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic connection graph and its planted ranking.
    Gen {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Sample spanning subgraphs (one edge-id list per line).
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Mtsf)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        #[arg(long, value_enum, default_value_t = WeightArg::Capped)]
        weight_mode: WeightArg,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
    },
    /// Leverage scores (`edge_id score` lines).
    Ls {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = LsArg::Exact)]
        method: LsArg,
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        /// Sample size for the uniform normalization (default n−1).
        #[arg(long)]
        sample_size: Option<usize>,
    },
    /// Assemble a sparsifier from a batch of samples.
    Sparsify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Mtsf)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = LsArg::Exact)]
        ls: LsArg,
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        #[arg(long, value_enum, default_value_t = WeightArg::Capped)]
        weight_mode: WeightArg,
        /// Batch size; omit to derive it from --epsilon/--delta.
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Preconditioner quality report for (Δ+qI).
    Precond {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Sf)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = LsArg::Uniform)]
        ls: LsArg,
        #[arg(long, default_value_t = 0.1)]
        q: f64,
        #[arg(long, default_value_t = 3)]
        t: usize,
    },
    /// Laplacian-regularized least squares (Δ+qI)f = q·y.
    Ssl {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
    },
    /// Ranking from pairwise comparisons.
    Syncrank {
        /// Number of items.
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = EigArg::Exact)]
        eig: EigArg,
        /// Sparsifier batch size for the sparsify modes.
        #[arg(long, default_value_t = 3)]
        t: usize,
        #[arg(long, default_value_t = 0.0)]
        q: f64,
    },
    /// Sampling-time comparison of SF cycle popping vs Wilson trees.
    Bench {
        #[command(flatten)]
        model: ModelArgs,
        /// Regularization values to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 1.0, 10.0])]
        qs: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        runs: usize,
    },
}

fn command_config(cmd: Command) -> CommandConfig {
    match cmd {
        Command::Gen { model } => CommandConfig::Gen {
            model: model.resolve(),
        },
        Command::Sample {
            model,
            mode,
            q,
            weight_mode,
            replicates,
        } => CommandConfig::Sample {
            model: model.resolve(),
            mode: mode.into(),
            q,
            weight_mode: match weight_mode {
                WeightArg::Exact => CliWeightMode::Exact,
                WeightArg::Capped => CliWeightMode::Capped,
            },
            replicates,
        },
        Command::Ls {
            model,
            method,
            q,
            sample_size,
        } => CommandConfig::Ls {
            model: model.resolve(),
            method: method.into(),
            q,
            sample_size,
        },
        Command::Sparsify {
            model,
            mode,
            ls,
            q,
            weight_mode,
            t,
            epsilon,
            delta,
        } => CommandConfig::Sparsify {
            model: model.resolve(),
            mode: mode.into(),
            ls: ls.into(),
            q,
            weight_mode: match weight_mode {
                WeightArg::Exact => CliWeightMode::Exact,
                WeightArg::Capped => CliWeightMode::Capped,
            },
            t,
            epsilon,
            delta,
        },
        Command::Precond { model, mode, ls, q, t } => CommandConfig::Precond {
            model: model.resolve(),
            mode: mode.into(),
            ls: ls.into(),
            q,
            t,
        },
        Command::Ssl { model, q } => CommandConfig::Ssl {
            model: model.resolve(),
            q,
        },
        Command::Syncrank { n, eig, t, q } => CommandConfig::Syncrank {
            n,
            eig: match eig {
                EigArg::Exact => EigMode::Exact,
                EigArg::SparsifyEigensolve => EigMode::SparsifyEigensolve,
                EigArg::SparsifyPrecondition => EigMode::SparsifyPrecondition,
            },
            t,
            q,
        },
        Command::Bench { model, qs, runs } => CommandConfig::Bench {
            model: model.resolve(),
            qs,
            runs,
        },
    }
}

fn read_input(path: &Option<PathBuf>, what: &str) -> Result<Option<String>> {
    match path {
        Some(p) => Ok(Some(
            std::fs::read_to_string(p).with_context(|| format!("reading {what} {p:?}"))?,
        )),
        None => Ok(None),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = match (&cli.config, cli.command) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {path:?}"))?;
            ExperimentConfig::from_json(&text)?
        }
        (None, Some(cmd)) => ExperimentConfig {
            command: command_config(cmd),
            seed: cli.seed,
            threads: cli.threads,
        },
        (None, None) => bail!("a subcommand or --config is required"),
    };
    let inputs = Inputs {
        graph: read_input(&cli.graph, "graph")?,
        labels: read_input(&cli.labels, "labels")?,
        comparisons: read_input(&cli.comparisons, "comparisons")?,
        reference: read_input(&cli.reference, "reference")?,
    };
    let files = run_experiment(&config, &inputs)?;
    write_outputs(&cli.out, &files)?;
    println!("wrote {} files to {}", files.len(), cli.out.display());
    Ok(())
}

fn write_outputs(dir: &Path, files: &maglap_cli::OutputFiles) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, content) in files {
        std::fs::write(dir.join(name), content)?;
    }
    Ok(())
}
