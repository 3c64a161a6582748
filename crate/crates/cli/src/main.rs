use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sbm_spectral::clustering::Algorithm;
use sbm_spectral::experiment::{
    cluster_graph, read_records, run_experiment, summarize_table, tau_trace, write_records, write_summary,
    write_table, ExperimentConfig, Pipeline, TauMode,
};
use sbm_spectral::graph::{dgp_preset, sample_adjacency, AdjacencyMatrix};
use sbm_spectral::model::edge_prob_matrix;
use sbm_spectral::par::with_threads;
use sbm_spectral::rng::{Domain, RngSeed};
use sbm_spectral::tuning::TuneConfig;
use sbm_spectral::clustering::KMeansConfig;

/// Spectral clustering of block-model graphs with data-driven regularization.
#[derive(Parser)]
#[command(name = "sbm-spectral", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one graph from a DGP preset and write its edge list.
    Generate(GenerateArgs),
    /// Cluster the graph in an edge-list file; writes one 1-based label per node.
    Cluster(ClusterArgs),
    /// Write the Q criterion over the tau grid as `tau,q`.
    TuneTau(TuneArgs),
    /// Monte-Carlo experiment over seeded replications.
    Experiment(ExperimentArgs),
    /// Aggregate experiment records into the comparison table.
    Table(TableArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1)]
    dgp: u8,
    #[arg(long = "n-per-k", default_value_t = 50)]
    n_per_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replication index, i.e. the random stream.
    #[arg(long, default_value_t = 0)]
    rep: u64,
    /// Edge list destination; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the true 1-based community of each node.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct ClusteringOpts {
    /// Edge-list file with a `# n=<n>` header.
    #[arg(long)]
    input: PathBuf,
    /// Number of communities.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "modified")]
    algo: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    opts: ClusteringOpts,
    /// plain, tau, tau-prime, tau-dprime or adaptive.
    #[arg(long, default_value = "tau")]
    variant: String,
    /// jy, dbar, dbar4 or a number.
    #[arg(long, default_value = "jy")]
    tau: String,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    opts: ClusteringOpts,
    /// tau, tau-prime or tau-dprime.
    #[arg(long, default_value = "tau")]
    variant: String,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key=value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dgp: Option<String>,
    #[arg(long = "n-per-k")]
    n_per_k: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated list of plain, tau, tau-prime, tau-dprime, adaptive.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    algo: Option<String>,
    /// grid, jy, dbar, dbar4 or a number.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    restarts: Option<String>,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Leave `runtime_ms` empty so the CSV is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
    /// Records CSV; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV; standard error if absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    /// `<tau mode>=<records.csv>`, for example `jy=runs/dgp1.csv`. Repeatable.
    #[arg(long, required = true)]
    input: Vec<String>,
    /// `<dgp>:<n/K>:<tau mode>` cell that must be present. Repeatable.
    #[arg(long)]
    require: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => {
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        _ => Box::new(io::stdout().lock()),
    })
}

fn read_graph(path: &Path) -> Result<AdjacencyMatrix> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(AdjacencyMatrix::read_edge_list(BufReader::new(f))?)
}

fn tune_config(opts: &ClusteringOpts) -> Result<TuneConfig> {
    if opts.restarts == 0 {
        bail!("--restarts must be positive");
    }
    Ok(TuneConfig {
        algorithm: opts.algo.parse::<Algorithm>()?,
        kmeans: KMeansConfig {
            restarts: opts.restarts,
            ..KMeansConfig::default()
        },
    })
}

fn generate(args: GenerateArgs) -> Result<()> {
    let seed = RngSeed::new(args.seed, args.rep);
    let inst = dgp_preset(args.dgp, args.n_per_k, seed)?;
    let p = edge_prob_matrix(&inst.model, &inst.membership)?;
    let a = sample_adjacency(&p, seed)?;
    let mut w = output(args.out.as_deref())?;
    a.write_edge_list(&mut w)?;
    w.flush()?;
    if let Some(path) = args.labels {
        let mut w = output(Some(&path))?;
        for &g in inst.membership.labels() {
            writeln!(w, "{}", g + 1)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let a = read_graph(&args.opts.input)?;
    let pipeline: Pipeline = args.variant.parse()?;
    let mode: TauMode = args.tau.parse()?;
    if mode == TauMode::Grid {
        bail!("--tau grid yields many clusterings; use tune-tau or experiment");
    }
    let tune = tune_config(&args.opts)?;
    let seed = RngSeed::new(args.opts.seed, 0).derive_u64(Domain::Clustering);
    let fits = cluster_graph(&a, args.opts.k, pipeline, mode, &tune, seed)?;
    let (tau, res) = fits.into_iter().next().context("no clustering produced")?;
    eprintln!("tau = {tau}");
    let mut w = output(args.opts.out.as_deref())?;
    for g in res.labels {
        writeln!(w, "{}", g + 1)?;
    }
    w.flush()?;
    Ok(())
}

fn tune_tau(args: TuneArgs) -> Result<()> {
    let a = read_graph(&args.opts.input)?;
    let variant = match args.variant.parse::<Pipeline>()? {
        Pipeline::Single(v) => v,
        Pipeline::Adaptive => bail!("tune-tau takes a single Laplacian variant"),
    };
    let tune = tune_config(&args.opts)?;
    let seed = RngSeed::new(args.opts.seed, 0).derive_u64(Domain::Clustering);
    let sel = tau_trace(&a, args.opts.k, variant, &tune, seed)?;
    let mut w = output(args.opts.out.as_deref())?;
    writeln!(w, "tau,q")?;
    for (tau, q) in sel.curve() {
        writeln!(w, "{tau},{q}")?;
    }
    w.flush()?;
    eprintln!("selected tau = {}", sel.tau_star);
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_file(&text)?;
    }
    let flags = [
        ("dgp", &args.dgp),
        ("n-per-k", &args.n_per_k),
        ("reps", &args.reps),
        ("seed", &args.seed),
        ("variant", &args.variant),
        ("algo", &args.algo),
        ("tau", &args.tau),
        ("restarts", &args.restarts),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if args.no_timing {
        cfg.no_timing = true;
    }
    cfg.validate()?;
    let out = with_threads(args.threads, |exec| run_experiment(&cfg, exec))??;
    let mut w = output(args.out.as_deref())?;
    write_records(&mut w, &out.records)?;
    w.flush()?;
    match &args.summary {
        Some(path) => write_summary(output(Some(path))?, &out.summary)?,
        None => write_summary(io::stderr().lock(), &out.summary)?,
    }
    Ok(())
}

fn table(args: TableArgs) -> Result<()> {
    let mut inputs = Vec::new();
    for spec in &args.input {
        let (mode, path) = spec.split_once('=').context("--input expects <tau mode>=<path>")?;
        let f = File::open(path).with_context(|| format!("opening {path}"))?;
        inputs.push((mode.parse::<TauMode>()?, read_records(BufReader::new(f))?));
    }
    let mut required = Vec::new();
    for spec in &args.require {
        let parts: Vec<&str> = spec.split(':').collect();
        let [dgp, npk, mode] = parts[..] else {
            bail!("--require expects <dgp>:<n/K>:<tau mode>, got `{spec}`");
        };
        required.push((dgp.parse()?, npk.parse()?, mode.parse()?));
    }
    let rows = summarize_table(&inputs, &required)?;
    write_table(output(args.out.as_deref())?, &rows)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Cluster(a) => cluster(a),
        Command::TuneTau(a) => tune_tau(a),
        Command::Experiment(a) => experiment(a),
        Command::Table(a) => table(a),
    }
}
