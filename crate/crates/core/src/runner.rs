//! Command-line experiment runner: spec resolution, data loading, protocol
//! dispatch and artifact writing.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use crate::data::{
    load_csv, load_pgm, load_pgm_rows, partition_features, permute_columns, standardize_columns,
    synth_mixture_gaussian, synth_single_gaussian, write_csv,
};
use crate::error::{Error, Result};
use crate::federation::{
    make_clients, run_decentralized, run_server_client, FederationConfig, LocalMode, MergeMode,
};
use crate::kernel::{akpca_fit, kpca_fit, median_heuristic_gamma, KernelSpec};
use crate::linalg::{gram_matrix, top_k_eigen_oracle, DenseMatrix, ORACLE_MAX_ITERS, ORACLE_TOL};
use crate::metrics::RunTrace;
use crate::topology::{complete_graph, ring_graph, star_graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Single,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Server,
    Complete,
    Ring,
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MergeKind {
    Plain,
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Pca,
    Akpca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Pca,
    Kpca,
    Akpca,
}

/// Every field optional; the shape of a config file and of the flag set.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialSpec {
    pub data: Option<PathBuf>,
    pub synth: Option<SynthKind>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub standardize: Option<bool>,
    pub header: Option<bool>,
    pub shuffle_features: Option<bool>,
    pub p: Option<usize>,
    pub topology: Option<TopologyKind>,
    pub hub: Option<usize>,
    pub rounds: Option<usize>,
    pub local_iters: Option<usize>,
    pub tol: Option<f64>,
    pub merge: Option<MergeKind>,
    pub warm_start: Option<bool>,
    pub mode: Option<ModeKind>,
    pub kernel: Option<KernelKind>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub center_kernel: Option<bool>,
    pub update_local_data: Option<bool>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl PartialSpec {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::spec("config", e.to_string()))
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: PartialSpec) -> PartialSpec {
        macro_rules! pick {
            ($($f:ident),*) => { PartialSpec { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            data,
            synth,
            n,
            m,
            standardize,
            header,
            shuffle_features,
            p,
            topology,
            hub,
            rounds,
            local_iters,
            tol,
            merge,
            warm_start,
            mode,
            kernel,
            gamma,
            c,
            center_kernel,
            update_local_data,
            seed,
            out
        )
    }
}

/// A fully resolved experiment. Serializes to a document that is itself a
/// valid config file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub standardize: bool,
    pub header: bool,
    /// Seeded column permutation before splitting.
    pub shuffle_features: bool,
    pub p: usize,
    pub topology: TopologyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hub: Option<usize>,
    pub rounds: usize,
    pub local_iters: usize,
    pub tol: f64,
    pub merge: MergeKind,
    pub warm_start: bool,
    pub mode: ModeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub center_kernel: bool,
    pub update_local_data: bool,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

pub const DEFAULT_SYNTH_N: usize = 200;
pub const DEFAULT_SYNTH_M: usize = 1000;

fn positive(field: &str, v: usize) -> Result<usize> {
    if v == 0 {
        Err(Error::spec(field, "must be at least 1"))
    } else {
        Ok(v)
    }
}

impl ExperimentSpec {
    pub fn resolve(partial: PartialSpec) -> Result<Self> {
        let d = FederationConfig::default();
        let (data, synth) = match (partial.data, partial.synth) {
            (Some(_), Some(_)) => {
                return Err(Error::spec(
                    "data",
                    "give either a data path or a synth kind, not both",
                ))
            }
            (None, None) => return Err(Error::spec("data", "no data source given")),
            pair => pair,
        };
        let (n, m) = if synth.is_some() {
            (
                Some(positive("n", partial.n.unwrap_or(DEFAULT_SYNTH_N))?),
                Some(positive("m", partial.m.unwrap_or(DEFAULT_SYNTH_M))?),
            )
        } else {
            if partial.n.is_some() {
                return Err(Error::spec("n", "only valid with a synth data source"));
            }
            if partial.m.is_some() {
                return Err(Error::spec("m", "only valid with a synth data source"));
            }
            (None, None)
        };
        let header = partial.header.unwrap_or(false);
        if header && synth.is_some() {
            return Err(Error::spec("header", "only valid with a CSV data source"));
        }
        let p = positive("p", partial.p.unwrap_or(2))?;
        let topology = partial.topology.unwrap_or(TopologyKind::Server);
        let hub = match (topology, partial.hub) {
            (TopologyKind::Star, hub) => {
                let hub = hub.unwrap_or(0);
                if hub >= p {
                    return Err(Error::spec(
                        "hub",
                        format!("{hub} is not a client index below p = {p}"),
                    ));
                }
                if p < 2 {
                    return Err(Error::spec("p", "a star needs at least 2 clients"));
                }
                Some(hub)
            }
            (_, Some(_)) => return Err(Error::spec("hub", "only valid with the star topology")),
            (_, None) => None,
        };
        let tol = partial.tol.unwrap_or(d.tol);
        if !(tol >= 0.0) || !tol.is_finite() {
            return Err(Error::spec(
                "tol",
                format!("must be finite and >= 0, got {tol}"),
            ));
        }
        let mode = partial.mode.unwrap_or(ModeKind::Pca);
        let center_kernel = partial.center_kernel.unwrap_or(false);
        let (kernel, gamma, c) = match mode {
            ModeKind::Pca => {
                for (field, set) in [
                    ("kernel", partial.kernel.is_some()),
                    ("gamma", partial.gamma.is_some()),
                    ("c", partial.c.is_some()),
                    ("center_kernel", center_kernel),
                ] {
                    if set {
                        return Err(Error::spec(field, "only valid with mode akpca"));
                    }
                }
                (None, None, None)
            }
            ModeKind::Akpca => resolve_kernel(partial.kernel, partial.gamma, partial.c)?,
        };
        let out = partial
            .out
            .ok_or_else(|| Error::spec("out", "an output directory is required"))?;
        Ok(Self {
            data,
            synth,
            n,
            m,
            standardize: partial.standardize.unwrap_or(false),
            header,
            shuffle_features: partial.shuffle_features.unwrap_or(false),
            p,
            topology,
            hub,
            rounds: positive("rounds", partial.rounds.unwrap_or(d.rounds))?,
            local_iters: positive("local_iters", partial.local_iters.unwrap_or(d.local_iters))?,
            tol,
            merge: partial.merge.unwrap_or(MergeKind::Plain),
            warm_start: partial.warm_start.unwrap_or(d.warm_start),
            mode,
            kernel,
            gamma,
            c,
            center_kernel,
            update_local_data: partial.update_local_data.unwrap_or(d.update_local_data),
            seed: partial.seed.unwrap_or(d.seed),
            out,
        })
    }

    /// Fills data-dependent defaults (the RBF bandwidth).
    pub fn bind_data(&mut self, x: &DenseMatrix) {
        if self.kernel == Some(KernelKind::Rbf) && self.gamma.is_none() {
            self.gamma = Some(median_heuristic_gamma(x));
        }
        if self.kernel == Some(KernelKind::Sigmoid) && self.gamma.is_none() {
            self.gamma = Some(1.0 / x.cols() as f64);
        }
    }

    pub fn local_mode(&self) -> Result<LocalMode> {
        Ok(match self.mode {
            ModeKind::Pca => LocalMode::Pca,
            ModeKind::Akpca => LocalMode::Akpca {
                kernel: kernel_spec(self.kernel, self.gamma, self.c)?,
                center: self.center_kernel,
            },
        })
    }

    pub fn federation_config(&self) -> Result<FederationConfig> {
        Ok(FederationConfig {
            rounds: self.rounds,
            local_iters: self.local_iters,
            tol: self.tol,
            merge_mode: match self.merge {
                MergeKind::Plain => MergeMode::Plain,
                MergeKind::Scaled => MergeMode::WeightScaled,
            },
            warm_start: self.warm_start,
            mode: self.local_mode()?,
            update_local_data: self.update_local_data,
            seed: self.seed,
        })
    }
}

fn resolve_kernel(
    kernel: Option<KernelKind>,
    gamma: Option<f64>,
    c: Option<f64>,
) -> Result<(Option<KernelKind>, Option<f64>, Option<f64>)> {
    let kind = kernel.unwrap_or(KernelKind::Rbf);
    match kind {
        KernelKind::Linear if gamma.is_some() => {
            Err(Error::spec("gamma", "not used by the linear kernel"))
        }
        KernelKind::Linear | KernelKind::Rbf if c.is_some() => {
            Err(Error::spec("c", "only used by the sigmoid kernel"))
        }
        KernelKind::Sigmoid => Ok((Some(kind), gamma, Some(c.unwrap_or(0.0)))),
        _ => Ok((Some(kind), gamma, None)),
    }
    .and_then(|r| {
        if let Some(g) = r.1 {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::spec("gamma", format!("must be positive, got {g}")));
            }
        }
        if let Some(c) = r.2 {
            if !c.is_finite() {
                return Err(Error::spec("c", format!("must be finite, got {c}")));
            }
        }
        Ok(r)
    })
}

fn kernel_spec(kind: Option<KernelKind>, gamma: Option<f64>, c: Option<f64>) -> Result<KernelSpec> {
    let gamma_or = || gamma.ok_or_else(|| Error::spec("gamma", "unresolved kernel bandwidth"));
    match kind.unwrap_or(KernelKind::Rbf) {
        KernelKind::Linear => Ok(KernelSpec::Linear),
        KernelKind::Rbf => KernelSpec::rbf(gamma_or()?),
        KernelKind::Sigmoid => KernelSpec::sigmoid(gamma_or()?, c.unwrap_or(0.0)),
    }
    .map_err(|e| Error::spec("kernel", e.to_string()))
}

fn is_pgm_source(path: &Path) -> bool {
    path.is_dir()
        || path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Loads the data matrix described by the source fields. A directory is read
/// as one flattened PGM image per row (files in name order); a single `.pgm`
/// file is used as the matrix itself; anything else is CSV.
pub fn load_source(
    data: Option<&Path>,
    synth: Option<SynthKind>,
    n: Option<usize>,
    m: Option<usize>,
    header: bool,
    standardize: bool,
    seed: u64,
) -> Result<DenseMatrix> {
    let x = match (data, synth) {
        (Some(path), None) if path.is_dir() => {
            let mut paths: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_pgm_source(p))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Error::spec(
                    "data",
                    format!("no .pgm files in {}", path.display()),
                ));
            }
            load_pgm_rows(&paths)?
        }
        (Some(path), None) if is_pgm_source(path) => load_pgm(path)?,
        (Some(path), None) => load_csv(path, header, false)?,
        (None, Some(kind)) => {
            let (n, m) = (n.unwrap_or(DEFAULT_SYNTH_N), m.unwrap_or(DEFAULT_SYNTH_M));
            match kind {
                SynthKind::Single => synth_single_gaussian(n, m, seed),
                SynthKind::Mixture => synth_mixture_gaussian(n, m, seed),
            }
        }
        _ => return Err(Error::spec("data", "exactly one data source is required")),
    };
    Ok(if standardize {
        standardize_columns(&x)
    } else {
        x
    })
}

impl ExperimentSpec {
    pub fn load_data(&self) -> Result<DenseMatrix> {
        load_source(
            self.data.as_deref(),
            self.synth,
            self.n,
            self.m,
            self.header,
            self.standardize,
            self.seed,
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FederatedSummary {
    pub version: &'static str,
    pub protocol: &'static str,
    pub samples: usize,
    pub features: usize,
    pub clients: usize,
    pub rounds: usize,
    pub final_eigenvalue: f64,
    pub final_distance_error: f64,
    pub total_scalars_sent: u64,
    pub spec: ExperimentSpec,
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `trace.csv`: a `# standardize=…` comment line, then
/// `round,distance_error,scalars_sent,weight_0,…`.
pub fn trace_csv(trace: &RunTrace, p: usize, standardize: bool) -> String {
    let mut s = format!("# standardize={standardize}\nround,distance_error,scalars_sent");
    for i in 0..p {
        s.push_str(&format!(",weight_{i}"));
    }
    s.push('\n');
    for r in &trace.rounds {
        s.push_str(&format!(
            "{},{},{}",
            r.round,
            fmt(r.distance_error),
            r.scalars_sent
        ));
        for w in &r.weights {
            s.push(',');
            s.push_str(&fmt(*w));
        }
        s.push('\n');
    }
    s
}

/// `timing.csv`: `round,elapsed_seconds` (wall clock).
pub fn timing_csv(trace: &RunTrace) -> String {
    let mut s = String::from("round,elapsed_seconds\n");
    for r in &trace.rounds {
        s.push_str(&format!("{},{}\n", r.round, fmt(r.elapsed)));
    }
    s
}

/// Runs one federated experiment and writes `trace.csv`, `timing.csv`,
/// `vector.csv` and `summary.json` into the output directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<FederatedSummary> {
    let mut x = spec.load_data()?;
    if spec.shuffle_features {
        x = permute_columns(&x, spec.seed).0;
    }
    let mut spec = spec.clone();
    spec.bind_data(&x);
    let (n, m) = x.shape();
    if spec.p > m {
        return Err(Error::spec(
            "p",
            format!("{} clients but only {m} features", spec.p),
        ));
    }
    info!(
        "data {n}x{m}, {} clients, topology {:?}",
        spec.p, spec.topology
    );
    let config = spec.federation_config()?;
    let (_, blocks) = partition_features(&x, spec.p)?;
    let mut clients = make_clients(blocks, &config.mode)?;
    let trace = match spec.topology {
        TopologyKind::Server => run_server_client(&mut clients, &config)?,
        TopologyKind::Complete => {
            run_decentralized(&mut clients, &complete_graph(spec.p)?, &config)?
        }
        TopologyKind::Ring => run_decentralized(&mut clients, &ring_graph(spec.p)?, &config)?,
        TopologyKind::Star => {
            let hub = spec.hub.unwrap_or(0);
            run_decentralized(&mut clients, &star_graph(spec.p, hub)?, &config)?
        }
    };
    let final_pair = trace.final_pair.clone().ok_or(Error::NoClients)?;
    let summary = FederatedSummary {
        version: env!("CARGO_PKG_VERSION"),
        protocol: if spec.topology == TopologyKind::Server {
            "server_client"
        } else {
            "decentralized"
        },
        samples: n,
        features: m,
        clients: spec.p,
        rounds: trace.rounds.len(),
        final_eigenvalue: final_pair.value,
        final_distance_error: trace.rounds.last().map_or(0.0, |r| r.distance_error),
        total_scalars_sent: trace.total_scalars(),
        spec: spec.clone(),
    };
    create_out(&spec.out)?;
    write_file(
        &spec.out.join("trace.csv"),
        trace_csv(&trace, spec.p, spec.standardize).as_bytes(),
    )?;
    write_file(&spec.out.join("timing.csv"), timing_csv(&trace).as_bytes())?;
    let vector: String = final_pair.vector.iter().map(|v| fmt(*v) + "\n").collect();
    write_file(&spec.out.join("vector.csv"), vector.as_bytes())?;
    write_json(&spec.out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineSummary {
    pub version: &'static str,
    pub kind: BaselineKind,
    pub k: usize,
    pub samples: usize,
    pub features: usize,
    pub eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    pub center_kernel: bool,
    pub standardize: bool,
    pub seed: u64,
}

/// Centralized reference decompositions.
///
/// `pca` writes the top-`k` eigenvectors of `(1/m) X Xᵀ` as columns,
/// `kpca` the `n x k` score matrix and `akpca` the `k x m` projection.
pub fn run_baseline(args: &BaselineArgs) -> Result<BaselineSummary> {
    let d = &args.data;
    if d.data.is_some() == d.synth.is_some() {
        return Err(Error::spec(
            "data",
            "exactly one of --data and --synth is required",
        ));
    }
    let out = args
        .out
        .as_ref()
        .ok_or_else(|| Error::spec("out", "an output directory is required"))?;
    if args.k == 0 {
        return Err(Error::spec("k", "must be at least 1"));
    }
    let seed = d.seed.unwrap_or(0);
    let x = load_source(
        d.data.as_deref(),
        d.synth,
        d.n,
        d.m,
        d.header,
        d.standardize,
        seed,
    )?;
    let (n, m) = x.shape();
    if args.k > n {
        return Err(Error::spec(
            "k",
            format!("{} exceeds the {n} samples", args.k),
        ));
    }
    let kernel = match args.kind {
        BaselineKind::Pca => {
            if args.kernel.kernel.is_some()
                || args.kernel.gamma.is_some()
                || args.kernel.c.is_some()
            {
                return Err(Error::spec("kernel", "not used by the pca baseline"));
            }
            None
        }
        _ => {
            let (kind, mut gamma, c) =
                resolve_kernel(args.kernel.kernel, args.kernel.gamma, args.kernel.c)?;
            if gamma.is_none() && kind != Some(KernelKind::Linear) {
                gamma = Some(if kind == Some(KernelKind::Rbf) {
                    median_heuristic_gamma(&x)
                } else {
                    1.0 / m as f64
                });
            }
            Some(kernel_spec(kind, gamma, c)?)
        }
    };
    let (components, eigenvalues) = match (args.kind, &kernel) {
        (BaselineKind::Pca, _) => {
            let pairs = top_k_eigen_oracle(
                &gram_matrix(&x, 1.0 / m as f64)?,
                args.k,
                ORACLE_MAX_ITERS,
                ORACLE_TOL,
            )?;
            let mut c = DenseMatrix::zeros(n, args.k);
            for (j, pair) in pairs.iter().enumerate() {
                for (i, v) in pair.vector.iter().enumerate() {
                    c[(i, j)] = *v;
                }
            }
            (c, pairs.iter().map(|p| p.value).collect())
        }
        (BaselineKind::Kpca, Some(spec)) => {
            let fit = kpca_fit(&x, spec, args.k)?;
            (fit.scores, fit.eigenpairs.iter().map(|p| p.value).collect())
        }
        (BaselineKind::Akpca, Some(spec)) => {
            let fit = akpca_fit(&x, spec, args.k, args.kernel.center_kernel)?;
            (
                fit.projection,
                fit.eigenpairs.iter().map(|p| p.value).collect(),
            )
        }
        _ => unreachable!("kernel resolved for kernel baselines"),
    };
    info!("baseline {:?}, eigenvalues {eigenvalues:?}", args.kind);
    let summary = BaselineSummary {
        version: env!("CARGO_PKG_VERSION"),
        kind: args.kind,
        k: args.k,
        samples: n,
        features: m,
        eigenvalues,
        kernel,
        center_kernel: args.kernel.center_kernel,
        standardize: d.standardize,
        seed,
    };
    create_out(out)?;
    let header: Vec<String> = (0..components.cols()).map(|j| format!("c{j}")).collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &components, Some(&header)).map_err(|e| Error::io(out, e))?;
    write_file(&out.join("components.csv"), &buf)?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn run_synth(args: &SynthArgs) -> Result<()> {
    let n = positive("n", args.n.unwrap_or(DEFAULT_SYNTH_N))?;
    let m = positive("m", args.m.unwrap_or(DEFAULT_SYNTH_M))?;
    let seed = args.seed.unwrap_or(0);
    let x = match args.synth {
        SynthKind::Single => synth_single_gaussian(n, m, seed),
        SynthKind::Mixture => synth_mixture_gaussian(n, m, seed),
    };
    match &args.out {
        Some(dir) => {
            create_out(dir)?;
            let path = dir.join("data.csv");
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = std::io::BufWriter::new(file);
            write_csv(&mut w, &x, None)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = std::io::BufWriter::new(stdout.lock());
            write_csv(&mut w, &x, None)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vfedpca",
    version,
    about = "Vertically federated PCA / AKPCA simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a federated experiment.
    Federated(FederatedArgs),
    /// Centralized PCA, KPCA or AKPCA on the unsplit data.
    Baseline(BaselineArgs),
    /// Emit a synthetic dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// CSV file, single PGM image, or directory of PGM images.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub synth: Option<SynthKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Skip the first CSV line.
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long = "c", allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long)]
    pub center_kernel: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FederatedArgs {
    /// JSON experiment file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, value_enum)]
    pub topology: Option<TopologyKind>,
    #[arg(long)]
    pub hub: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub local_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub merge: Option<MergeKind>,
    #[arg(long)]
    pub warm_start: bool,
    #[arg(long, value_enum)]
    pub mode: Option<ModeKind>,
    #[arg(long)]
    pub update_local_data: bool,
    /// Shuffle feature columns (seeded) before splitting them across clients.
    #[arg(long)]
    pub shuffle_features: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl FederatedArgs {
    fn to_partial(&self) -> PartialSpec {
        let flag = |b: bool| b.then_some(true);
        PartialSpec {
            data: self.data.data.clone(),
            synth: self.data.synth,
            n: self.data.n,
            m: self.data.m,
            standardize: flag(self.data.standardize),
            header: flag(self.data.header),
            shuffle_features: flag(self.shuffle_features),
            p: self.p,
            topology: self.topology,
            hub: self.hub,
            rounds: self.rounds,
            local_iters: self.local_iters,
            tol: self.tol,
            merge: self.merge,
            warm_start: flag(self.warm_start),
            mode: self.mode,
            kernel: self.kernel.kernel,
            gamma: self.kernel.gamma,
            c: self.kernel.c,
            center_kernel: flag(self.kernel.center_kernel),
            update_local_data: flag(self.update_local_data),
            seed: self.data.seed,
            out: self.out.clone(),
        }
    }

    /// Flags over the config file over defaults.
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let file = match &self.config {
            Some(path) => PartialSpec::from_json_file(path)?,
            None => PartialSpec::default(),
        };
        ExperimentSpec::resolve(self.to_partial().over(file))
    }
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub kind: BaselineKind,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "single")]
    pub synth: SynthKind,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write `data.csv` here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Federated(args) => {
            let summary = run_experiment(&args.resolve()?)?;
            info!("final distance error {}", summary.final_distance_error);
            Ok(())
        }
        Command::Baseline(args) => run_baseline(args).map(|_| ()),
        Command::Synth(args) => run_synth(args),
    }
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 2 for usage or spec errors, 1 for runtime failures.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_spec_error() {
                2
            } else {
                1
            }
        }
    }
}
