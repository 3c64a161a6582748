//! Monte-Carlo harness: replications over the DGP presets, CSV records and
//! summaries.
//!
//! Replication `r` draws everything from stream `r` of the master seed, so a
//! batch gives the same records whatever the number of worker threads.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use crate::clustering::{spectral_cluster, Algorithm, ClusteringResult, KMeansConfig, SpectralConfig};
use crate::error::{Error, Result};
use crate::graph::{dgp_preset, sample_adjacency, AdjacencyMatrix};
use crate::laplacian::{degrees, Variant};
use crate::metrics::{ccp, nmi};
use crate::model::edge_prob_matrix;
use crate::par::Exec;
use crate::rng::{Domain, RngSeed};
use crate::tuning::{adaptive_from_first_stage, estimate_theta, select_tau, TauSelection, TuneConfig};

pub const CSV_HEADER: [&str; 11] = [
    "rep", "dgp", "n", "K", "variant", "algo", "tau", "ccp", "nmi", "excluded", "runtime_ms",
];

/// How τ is chosen for the regularized variants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauMode {
    /// Every point of the candidate grid.
    Grid,
    /// The grid point minimizing the Q criterion.
    Jy,
    /// The sample mean degree.
    Dbar,
    /// A quarter of the sample mean degree.
    Dbar4,
    Fixed(f64),
}

impl TauMode {
    pub fn label(self) -> String {
        match self {
            TauMode::Grid => "grid".into(),
            TauMode::Jy => "jy".into(),
            TauMode::Dbar => "dbar".into(),
            TauMode::Dbar4 => "dbar4".into(),
            TauMode::Fixed(t) => format!("{t}"),
        }
    }
}

impl fmt::Display for TauMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for TauMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" | "grid_scan" => Ok(TauMode::Grid),
            "jy" | "jy_select" => Ok(TauMode::Jy),
            "dbar" => Ok(TauMode::Dbar),
            "dbar4" | "dbar_over_4" => Ok(TauMode::Dbar4),
            other => match other.parse::<f64>() {
                Ok(t) if t.is_finite() && t >= 0.0 => Ok(TauMode::Fixed(t)),
                _ => Err(Error::Config(format!("unknown tau mode `{other}`"))),
            },
        }
    }
}

/// A pipeline of the experiment: one Laplacian variant, or the two-stage
/// adaptive procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Single(Variant),
    Adaptive,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Single(v) => v.name(),
            Pipeline::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "adaptive" => Ok(Pipeline::Adaptive),
            other => Ok(Pipeline::Single(other.parse()?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dgp: u8,
    pub n_per_community: usize,
    pub reps: u64,
    pub seed: u64,
    pub pipelines: Vec<Pipeline>,
    pub algorithm: Algorithm,
    pub tau_mode: TauMode,
    pub restarts: usize,
    pub max_iter: usize,
    /// Write an empty `runtime_ms` so that output is reproducible byte for byte.
    pub no_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let km = KMeansConfig::default();
        Self {
            dgp: 1,
            n_per_community: 50,
            reps: 1,
            seed: 0,
            pipelines: vec![Pipeline::Single(Variant::Tau)],
            algorithm: Algorithm::default(),
            tau_mode: TauMode::Jy,
            restarts: km.restarts,
            max_iter: km.max_iter,
            no_timing: false,
        }
    }
}

impl ExperimentConfig {
    /// Sets one key; keys mirror the CLI flags (`n-per-k` and `n_per_k` both work).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what} `{value}`"));
        match key.trim().replace('_', "-").as_str() {
            "dgp" => self.dgp = value.parse().map_err(|_| bad("dgp"))?,
            "n-per-k" => self.n_per_community = value.parse().map_err(|_| bad("n-per-k"))?,
            "reps" => self.reps = value.parse().map_err(|_| bad("reps"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "variant" => {
                self.pipelines = value
                    .split(',')
                    .map(|v| v.trim().parse())
                    .collect::<Result<Vec<_>>>()?;
            }
            "algo" => self.algorithm = value.parse()?,
            "tau" => self.tau_mode = value.parse()?,
            "restarts" => self.restarts = value.parse().map_err(|_| bad("restarts"))?,
            "max-iter" => self.max_iter = value.parse().map_err(|_| bad("max-iter"))?,
            "no-timing" => self.no_timing = value.parse().map_err(|_| bad("no-timing"))?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` file. Blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
            self.set(k, v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.dgp) {
            return Err(Error::Config(format!("dgp must be 1..4, got {}", self.dgp)));
        }
        if self.n_per_community < 2 {
            return Err(Error::Config("n-per-k must be at least 2".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.pipelines.is_empty() {
            return Err(Error::Config("no variant given".into()));
        }
        if self.restarts == 0 || self.max_iter == 0 {
            return Err(Error::Config("restarts and max-iter must be positive".into()));
        }
        Ok(())
    }

    pub fn tune_config(&self) -> TuneConfig {
        TuneConfig {
            algorithm: self.algorithm,
            kmeans: KMeansConfig {
                restarts: self.restarts,
                max_iter: self.max_iter,
                exec: Exec::Sequential,
                ..KMeansConfig::default()
            },
        }
    }
}

/// Why a record carries no metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exclusion {
    No,
    /// Plain Laplacian undefined: some node has degree zero.
    ZeroDegree,
    /// The pipeline returned an error.
    Failed,
}

impl Exclusion {
    pub fn as_str(self) -> &'static str {
        match self {
            Exclusion::No => "no",
            Exclusion::ZeroDegree => "zero-degree",
            Exclusion::Failed => "failed",
        }
    }
}

impl FromStr for Exclusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no" => Ok(Exclusion::No),
            "zero-degree" => Ok(Exclusion::ZeroDegree),
            "failed" => Ok(Exclusion::Failed),
            other => Err(Error::Parse(format!("unknown exclusion `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub rep: u64,
    pub dgp: u8,
    pub n: usize,
    pub k: usize,
    pub variant: String,
    pub algo: String,
    /// τ used for the final clustering; 0 for the plain Laplacian.
    pub tau: Option<f64>,
    pub ccp: Option<f64>,
    pub nmi: Option<f64>,
    pub excluded: Exclusion,
    /// Wall time of this pipeline within the replication.
    pub runtime_ms: Option<f64>,
}

impl ExperimentRecord {
    pub fn included(&self) -> bool {
        self.excluded == Exclusion::No
    }
}

/// Stage-one selection on the degree-shift Laplacian, shared by every
/// pipeline of a replication that needs it.
struct Shared<'a> {
    a: &'a AdjacencyMatrix,
    k: usize,
    tune: TuneConfig,
    seed: u64,
    first: Option<Result<TauSelection>>,
}

impl Shared<'_> {
    fn first_stage(&mut self) -> Result<&TauSelection> {
        if self.first.is_none() {
            let sel = select_tau(self.a, self.k, Variant::TauPrime, None, &self.tune, self.seed, Exec::Sequential);
            self.first = Some(sel);
        }
        match self.first.as_ref().expect("just filled") {
            Ok(sel) => Ok(sel),
            Err(e) => Err(Error::Config(format!("first stage failed: {e}"))),
        }
    }
}

/// All records of one replication, pipelines in configuration order.
pub fn run_replication(config: &ExperimentConfig, rep: u64) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let seed = RngSeed::new(config.seed, rep);
    let inst = dgp_preset(config.dgp, config.n_per_community, seed)?;
    let p = edge_prob_matrix(&inst.model, &inst.membership)?;
    let a = sample_adjacency(&p, seed)?;
    let truth = inst.membership.labels();
    let k = inst.model.k();
    let mut shared = Shared {
        a: &a,
        k,
        tune: config.tune_config(),
        seed: seed.derive_u64(Domain::Clustering),
        first: None,
    };
    let base = ExperimentRecord {
        rep,
        dgp: config.dgp,
        n: a.n(),
        k,
        variant: String::new(),
        algo: config.algorithm.name().to_string(),
        tau: None,
        ccp: None,
        nmi: None,
        excluded: Exclusion::No,
        runtime_ms: None,
    };
    let mut out = Vec::new();
    for &pipeline in &config.pipelines {
        let start = Instant::now();
        let outcome = run_pipeline(pipeline, config.tau_mode, &mut shared);
        let runtime = (!config.no_timing).then(|| start.elapsed().as_secs_f64() * 1e3);
        let template = ExperimentRecord {
            variant: pipeline.name().to_string(),
            runtime_ms: runtime,
            ..base.clone()
        };
        match outcome {
            Ok(fits) => {
                for (tau, res) in fits {
                    out.push(ExperimentRecord {
                        tau: Some(tau),
                        ccp: Some(ccp(&res.labels, truth)?),
                        nmi: Some(nmi(&res.labels, truth)?),
                        ..template.clone()
                    });
                }
            }
            Err(Error::SingularDegree { .. }) if pipeline == Pipeline::Single(Variant::Plain) => {
                out.push(ExperimentRecord {
                    tau: Some(0.0),
                    excluded: Exclusion::ZeroDegree,
                    ..template
                });
            }
            Err(_) => out.push(ExperimentRecord {
                excluded: Exclusion::Failed,
                ..template
            }),
        }
    }
    Ok(out)
}

/// Clusters a given graph with one pipeline, choosing τ as an experiment
/// would. Grid mode yields one entry per grid point.
pub fn cluster_graph(
    a: &AdjacencyMatrix,
    k: usize,
    pipeline: Pipeline,
    mode: TauMode,
    tune: &TuneConfig,
    seed: u64,
) -> Result<Vec<(f64, ClusteringResult)>> {
    let mut shared = Shared {
        a,
        k,
        tune: *tune,
        seed,
        first: None,
    };
    run_pipeline(pipeline, mode, &mut shared)
}

/// The Q trace over the τ grid for one regularized variant. For the
/// weighted ridge, `θ̂` comes from a first-stage selection on the
/// degree-shift Laplacian.
pub fn tau_trace(a: &AdjacencyMatrix, k: usize, variant: Variant, tune: &TuneConfig, seed: u64) -> Result<TauSelection> {
    let theta = match variant {
        Variant::Plain => return Err(Error::Config("the plain Laplacian has no tau".into())),
        Variant::TauDoublePrime => {
            let first = select_tau(a, k, Variant::TauPrime, None, tune, seed, Exec::Sequential)?;
            Some(estimate_theta(a, &first.result().labels, k)?)
        }
        _ => None,
    };
    select_tau(a, k, variant, theta.as_deref(), tune, seed, Exec::Sequential)
}

/// `(τ, clustering)` pairs produced by one pipeline.
fn run_pipeline(pipeline: Pipeline, mode: TauMode, shared: &mut Shared<'_>) -> Result<Vec<(f64, ClusteringResult)>> {
    let (a, k, seed) = (shared.a, shared.k, shared.seed);
    let variant = match pipeline {
        Pipeline::Adaptive => {
            let first = shared.first_stage()?.clone();
            let res = adaptive_from_first_stage(a, k, first, &shared.tune, seed, Exec::Sequential)?;
            return Ok(vec![(res.second.tau_star, res.result().clone())]);
        }
        Pipeline::Single(Variant::Plain) => {
            let cfg = spectral_config(shared, Variant::Plain, 0.0);
            return Ok(vec![(0.0, spectral_cluster(a, k, &cfg, None, seed)?)]);
        }
        Pipeline::Single(v) => v,
    };
    // θ̂ for the weighted ridge comes from the stage-one labels.
    let theta = match variant {
        Variant::TauDoublePrime => Some(estimate_theta(a, &shared.first_stage()?.result().labels, k)?),
        _ => None,
    };
    let theta = theta.as_deref();
    let d_bar = degrees(a).mean();
    let tau = match mode {
        TauMode::Grid | TauMode::Jy => {
            let sel = if variant == Variant::TauPrime {
                shared.first_stage()?.clone()
            } else {
                select_tau(a, k, variant, theta, &shared.tune, seed, Exec::Sequential)?
            };
            if mode == TauMode::Jy {
                return Ok(vec![(sel.tau_star, sel.result().clone())]);
            }
            return Ok(sel.trace.into_iter().map(|e| (e.tau, e.clustering)).collect());
        }
        TauMode::Dbar => d_bar,
        TauMode::Dbar4 => d_bar / 4.0,
        TauMode::Fixed(t) => t,
    };
    let cfg = spectral_config(shared, variant, tau);
    Ok(vec![(tau, spectral_cluster(a, k, &cfg, theta, seed)?)])
}

fn spectral_config(shared: &Shared<'_>, variant: Variant, tau: f64) -> SpectralConfig {
    SpectralConfig {
        variant,
        tau,
        algorithm: shared.tune.algorithm,
        kmeans: shared.tune.kmeans,
    }
}

/// Mean outcome of one (pipeline, τ slot) over the replications.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    /// Position in the τ grid for grid scans, otherwise 0.
    pub slot: usize,
    pub mean_tau: f64,
    pub mean_ccp: f64,
    pub mean_nmi: f64,
    pub included: usize,
    pub total: usize,
    /// Share of replications in which every degree was positive.
    pub ratio: f64,
}

/// Per-(variant, slot) means over included records. Slot `j` is the `j`-th
/// record of a variant within a replication, which for a grid scan is the
/// `j`-th grid point.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    #[derive(Default)]
    struct Acc {
        tau: f64,
        ccp: f64,
        nmi: f64,
        included: usize,
        total: usize,
        zero_degree: usize,
    }
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut acc: BTreeMap<(String, usize), Acc> = BTreeMap::new();
    let mut seen: BTreeMap<(u64, String), usize> = BTreeMap::new();
    for r in records {
        let slot_ref = seen.entry((r.rep, r.variant.clone())).or_insert(0);
        let key = (r.variant.clone(), *slot_ref);
        *slot_ref += 1;
        let a = acc.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            Acc::default()
        });
        a.total += 1;
        if r.excluded == Exclusion::ZeroDegree {
            a.zero_degree += 1;
        }
        if let (true, Some(c), Some(m)) = (r.included(), r.ccp, r.nmi) {
            a.included += 1;
            a.ccp += c;
            a.nmi += m;
            a.tau += r.tau.unwrap_or(0.0);
        }
    }
    order
        .into_iter()
        .map(|key| {
            let a = &acc[&key];
            let inc = a.included.max(1) as f64;
            let (mean_ccp, mean_nmi, mean_tau) = if a.included == 0 {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                (a.ccp / inc, a.nmi / inc, a.tau / inc)
            };
            SummaryRow {
                variant: key.0,
                slot: key.1,
                mean_tau,
                mean_ccp,
                mean_nmi,
                included: a.included,
                total: a.total,
                ratio: 1.0 - a.zero_degree as f64 / a.total as f64,
            }
        })
        .collect()
}

pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every replication and returns records in replication order.
pub fn run_experiment(config: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    config.validate()?;
    let per_rep = exec.map(config.reps as usize, |r| run_replication(config, r as u64));
    let mut records = Vec::new();
    for recs in per_rep {
        records.extend(recs?);
    }
    let summary = summarize(&records);
    Ok(ExperimentOutput { records, summary })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// Writes records with the fixed header. Floats use the shortest
/// representation that reads back to the same value.
pub fn write_records<W: Write>(w: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record([
            r.rep.to_string(),
            r.dgp.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            r.variant.clone(),
            r.algo.clone(),
            opt(r.tau),
            opt(r.ccp),
            opt(r.nmi),
            r.excluded.as_str().to_string(),
            opt(r.runtime_ms),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let num = |s: &str, what: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::Parse(format!("bad {what} `{s}`")))
        }
    };
    let int = |s: &str, what: &str| -> Result<u64> { s.parse().map_err(|_| Error::Parse(format!("bad {what} `{s}`"))) };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        out.push(ExperimentRecord {
            rep: int(&row[0], "rep")?,
            dgp: int(&row[1], "dgp")? as u8,
            n: int(&row[2], "n")? as usize,
            k: int(&row[3], "K")? as usize,
            variant: row[4].to_string(),
            algo: row[5].to_string(),
            tau: num(&row[6], "tau")?,
            ccp: num(&row[7], "ccp")?,
            nmi: num(&row[8], "nmi")?,
            excluded: row[9].parse()?,
            runtime_ms: num(&row[10], "runtime_ms")?,
        });
    }
    Ok(out)
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["variant", "slot", "mean_tau", "mean_ccp", "mean_nmi", "included", "total", "ratio"])?;
    for r in rows {
        out.write_record([
            r.variant.clone(),
            r.slot.to_string(),
            format!("{}", r.mean_tau),
            format!("{}", r.mean_ccp),
            format!("{}", r.mean_nmi),
            r.included.to_string(),
            r.total.to_string(),
            format!("{}", r.ratio),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One cell of the comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub dgp: u8,
    pub n_per_community: usize,
    pub mode: TauMode,
    pub variant: String,
    pub reps: usize,
    pub ccp: f64,
    pub nmi: f64,
}

/// Mean CCP and NMI per (DGP, n/K, τ mode, variant). Each input is the record
/// set of one run together with its τ mode. `required` cells that have no
/// included records give `MissingCell`.
pub fn summarize_table(
    inputs: &[(TauMode, Vec<ExperimentRecord>)],
    required: &[(u8, usize, TauMode)],
) -> Result<Vec<TableRow>> {
    // (dgp, n/K, variant, algo), mode, Σccp, Σnmi, count
    type Cell = ((u8, usize, String, String), TauMode, f64, f64, usize);
    let mut cells: Vec<Cell> = Vec::new();
    for (mode, records) in inputs {
        for r in records.iter().filter(|r| r.included()) {
            let (Some(c), Some(m)) = (r.ccp, r.nmi) else { continue };
            let key = (r.dgp, r.n / r.k.max(1), mode.label(), r.variant.clone());
            match cells.iter_mut().find(|c| c.0 == key) {
                Some(cell) => {
                    cell.2 += c;
                    cell.3 += m;
                    cell.4 += 1;
                }
                None => cells.push((key, *mode, c, m, 1)),
            }
        }
    }
    for &(dgp, npk, mode) in required {
        if !cells.iter().any(|c| c.0 .0 == dgp && c.0 .1 == npk && c.0 .2 == mode.label()) {
            return Err(Error::MissingCell(format!("dgp {dgp}, n/K {npk}, tau {mode}")));
        }
    }
    Ok(cells
        .into_iter()
        .map(|((dgp, npk, _, variant), mode, c, m, cnt)| TableRow {
            dgp,
            n_per_community: npk,
            mode,
            variant,
            reps: cnt,
            ccp: c / cnt as f64,
            nmi: m / cnt as f64,
        })
        .collect())
}

pub fn write_table<W: Write>(w: W, rows: &[TableRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dgp", "n_per_k", "tau", "variant", "reps", "ccp", "nmi"])?;
    for r in rows {
        out.write_record([
            r.dgp.to_string(),
            r.n_per_community.to_string(),
            r.mode.label(),
            r.variant.clone(),
            r.reps.to_string(),
            format!("{:.4}", r.ccp),
            format!("{:.4}", r.nmi),
        ])?;
    }
    out.flush()?;
    Ok(())
}
