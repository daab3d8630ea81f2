use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dade_cli::artifacts::{check_dim, check_transform_kind};
use dade_cli::feasibility::{run_feasibility, write_feasibility_csv, FeasibilityData};
use dade_cli::spec::{FeasibilitySpec, IndexKind, SweepSpec};
use dade_cli::sweep::{run_sweep, write_sweep_csv, IndexRef, SweepInputs};
use dade_core::calibration::{calibrate, default_pair_count, DEFAULT_SIGNIFICANCE};
use dade_core::estimator::DEFAULT_DELTA_D;
use dade_core::hnsw::{DEFAULT_EF_CONSTRUCTION, DEFAULT_M};
use dade_core::ivf::DEFAULT_KMEANS_ITERS;
use dade_core::synthetic::{generate, SyntheticConfig};
use dade_core::{
    compute_ground_truth, fit_pca, fit_random_orthogonal, read_fvecs, read_ivecs, write_fvecs,
    write_ivecs, CalibrationTable, Error, GroundTruth, HnswIndex, HnswParams, IvfIndex, IvfParams,
    Layout, OrthoTransform, VectorSet,
};

#[derive(Parser)]
#[command(
    name = "dade",
    version,
    about = "Adaptive distance comparisons for ANN search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian dataset from a key-value config.
    Synth(SynthArgs),
    /// Fit an orthogonal transform on base vectors.
    Fit(FitArgs),
    /// Fit per-checkpoint error bounds for a PCA transform.
    Calibrate(CalibrateArgs),
    /// Build an IVF or HNSW index over rotated base vectors.
    Build(BuildArgs),
    /// Exact K nearest neighbors of each query.
    Gt(GtArgs),
    /// Sweep traversal and strategy parameters over one index.
    Sweep(SweepArgs),
    /// Compare DCO strategies under linear scan.
    Feasibility(FeasibilityArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_data: PathBuf,
    #[arg(long)]
    out_queries: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Pca,
    Random,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "pca")]
    kind: KindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    transform: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE)]
    p_s: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA_D)]
    delta_d: usize,
    /// Sampled pairs; defaults to min(100000, N(N-1)/2).
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexArg {
    Ivf,
    Hnsw,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Contiguous,
    Split,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, value_enum)]
    index: IndexArg,
    #[arg(long)]
    transform: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// IVF clusters; defaults to round(sqrt(N)).
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, value_enum, default_value = "contiguous")]
    layout: LayoutArg,
    /// Head width of the split IVF layout.
    #[arg(long, default_value_t = DEFAULT_DELTA_D)]
    delta_d: usize,
    #[arg(long, default_value_t = DEFAULT_KMEANS_ITERS)]
    iters: usize,
    #[arg(long, default_value_t = DEFAULT_M)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_EF_CONSTRUCTION)]
    ef_construction: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GtArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// `key = value` spec file; flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    transform: PathBuf,
    /// Raw base vectors (needed for linear scan and in-memory calibration).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Index file for ivf and hnsw sweeps.
    #[arg(long)]
    index_file: Option<PathBuf>,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    index: Option<String>,
    #[arg(long)]
    dco: Option<String>,
    #[arg(short, long)]
    k: Option<String>,
    /// List or inclusive range `lo:hi:step`.
    #[arg(long)]
    ef: Option<String>,
    #[arg(long)]
    n_probe: Option<String>,
    #[arg(long)]
    decoupled: bool,
    #[arg(long)]
    p_s: Option<String>,
    #[arg(long)]
    eps0: Option<String>,
    #[arg(long)]
    delta_d: Option<String>,
    #[arg(long)]
    d_fixed: Option<String>,
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Omit latency and QPS so the output depends only on the inputs.
    #[arg(long)]
    no_timing: bool,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeasibilityArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Comma-separated subset of fd, ads, dade, fixed-pca, fixed-random.
    #[arg(long)]
    strategies: Option<String>,
    #[arg(short, long)]
    k: Option<String>,
    #[arg(long)]
    p_s: Option<String>,
    #[arg(long)]
    eps0: Option<String>,
    #[arg(long)]
    d_fixed: Option<String>,
    #[arg(long)]
    delta_d: Option<String>,
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_vectors(path: &Path) -> Result<VectorSet> {
    read_fvecs(path).with_context(|| format!("reading {}", path.display()))
}

fn load_transform(path: &Path) -> Result<OrthoTransform> {
    OrthoTransform::load(path).with_context(|| format!("reading transform {}", path.display()))
}

fn load_truth(path: &Path) -> Result<GroundTruth> {
    let lists = read_ivecs(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(GroundTruth::from_ivecs(lists)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn synth(args: SynthArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => SyntheticConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => SyntheticConfig::default(),
    };
    let ds = generate(&cfg)?;
    write_fvecs(&args.out_data, &ds.data)?;
    match (&args.out_queries, &ds.queries) {
        (Some(p), Some(q)) => write_fvecs(p, q)?,
        (Some(_), None) => {
            return Err(Error::Config("config requests no queries (queries = 0)".into()).into())
        }
        _ => {}
    }
    log::info!("wrote {} vectors of D={}", ds.data.len(), ds.data.dim());
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let data = load_vectors(&args.data)?;
    let t = match args.kind {
        KindArg::Pca => fit_pca(&data)?,
        KindArg::Random => fit_random_orthogonal(data.dim(), args.seed, &data)?,
    };
    log::info!(
        "{} transform D={} orthogonality error {:.3e}",
        t.kind(),
        t.dim(),
        t.orthogonality_error()
    );
    t.save(&args.out)?;
    Ok(())
}

fn calibrate_cmd(args: CalibrateArgs) -> Result<()> {
    let t = load_transform(&args.transform)?;
    let data = load_vectors(&args.data)?;
    check_dim("data", data.dim(), "transform", t.dim())?;
    check_transform_kind(dade_cli::DcoKind::Dade, &t)?;
    let rotated = t.apply(&data)?;
    let pairs = args.pairs.unwrap_or_else(|| default_pair_count(data.len()));
    let cal = calibrate(&t, &rotated, args.p_s, args.delta_d, pairs, args.seed)?;
    log::info!(
        "calibrated {} checkpoints from {} pairs",
        cal.checkpoints().len(),
        cal.sample_count()
    );
    cal.save(&args.out)?;
    Ok(())
}

fn build(args: BuildArgs) -> Result<()> {
    let t = load_transform(&args.transform)?;
    let data = load_vectors(&args.data)?;
    check_dim("data", data.dim(), "transform", t.dim())?;
    let rotated = t.apply(&data)?;
    match args.index {
        IndexArg::Ivf => {
            let params = IvfParams {
                n_clusters: args.clusters,
                layout: match args.layout {
                    LayoutArg::Contiguous => Layout::Contiguous,
                    LayoutArg::Split => Layout::Split,
                },
                delta_d: args.delta_d,
                max_iters: args.iters,
                seed: args.seed,
            };
            let idx = IvfIndex::build(&rotated, &params)?;
            log::info!(
                "ivf: {} clusters over {} vectors",
                idx.n_clusters(),
                idx.len()
            );
            idx.save(&args.out)?;
        }
        IndexArg::Hnsw => {
            let params = HnswParams {
                m: args.m,
                ef_construction: args.ef_construction,
                seed: args.seed,
            };
            let idx = HnswIndex::build(rotated, &params)?;
            log::info!("hnsw: {} nodes, top level {}", idx.len(), idx.max_level());
            idx.save(&args.out)?;
        }
    }
    Ok(())
}

fn gt(args: GtArgs) -> Result<()> {
    let data = load_vectors(&args.data)?;
    let queries = load_vectors(&args.queries)?;
    check_dim("queries", queries.dim(), "data", data.dim())?;
    let truth = compute_ground_truth(&data, &queries, args.k)?;
    write_ivecs(&args.out, &truth.to_ivecs())?;
    Ok(())
}

fn apply_overrides<S>(
    spec: &mut S,
    set: impl Fn(&mut S, &str, &str) -> dade_core::Result<()>,
    pairs: &[(&str, &Option<String>)],
) -> Result<()> {
    for (key, value) in pairs {
        if let Some(v) = value {
            set(spec, key, v)?;
        }
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => SweepSpec::parse(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => SweepSpec::default(),
    };
    apply_overrides(
        &mut spec,
        SweepSpec::set,
        &[
            ("index", &args.index),
            ("dco", &args.dco),
            ("k", &args.k),
            ("ef", &args.ef),
            ("n_probe", &args.n_probe),
            ("p_s", &args.p_s),
            ("eps0", &args.eps0),
            ("delta_d", &args.delta_d),
            ("d_fixed", &args.d_fixed),
            ("pairs", &args.pairs),
            ("seed", &args.seed),
        ],
    )?;
    if args.decoupled {
        spec.decoupled = true;
    }
    if args.no_timing {
        spec.timing = false;
    }
    spec.validate()?;

    let t = load_transform(&args.transform)?;
    let data = load_vectors(&args.data)?;
    let queries = load_vectors(&args.queries)?;
    check_dim("data", data.dim(), "transform", t.dim())?;
    check_dim("queries", queries.dim(), "transform", t.dim())?;
    let truth = args.gt.as_deref().map(load_truth).transpose()?;
    let calibration = args
        .calibration
        .as_deref()
        .map(|p| {
            CalibrationTable::load(p)
                .with_context(|| format!("reading calibration {}", p.display()))
        })
        .transpose()?;
    let base = t.apply(&data)?;
    let rotated_queries = t.apply(&queries)?;

    let index_path = || {
        args.index_file
            .as_deref()
            .ok_or_else(|| Error::Config(format!("a {} sweep needs --index-file", spec.index)))
    };
    let (ivf, hnsw);
    let index = match spec.index {
        IndexKind::Ivf => {
            let p = index_path()?;
            ivf = IvfIndex::load(p).with_context(|| format!("reading index {}", p.display()))?;
            check_dim("index", ivf.dim(), "transform", t.dim())?;
            if ivf.len() != data.len() {
                return Err(Error::Config(format!(
                    "index holds N={} vectors but the data has N={}",
                    ivf.len(),
                    data.len()
                ))
                .into());
            }
            IndexRef::Ivf(&ivf)
        }
        IndexKind::Hnsw => {
            let p = index_path()?;
            hnsw = HnswIndex::load(p).with_context(|| format!("reading index {}", p.display()))?;
            check_dim("index", hnsw.dim(), "transform", t.dim())?;
            if hnsw.len() != data.len() {
                return Err(Error::Config(format!(
                    "index holds N={} vectors but the data has N={}",
                    hnsw.len(),
                    data.len()
                ))
                .into());
            }
            IndexRef::Hnsw(&hnsw)
        }
        IndexKind::Linear => IndexRef::Linear,
    };
    let inputs = SweepInputs {
        transform: &t,
        base: &base,
        queries: &rotated_queries,
        truth: truth.as_ref(),
        index,
        calibration: calibration.as_ref(),
    };
    let rows = run_sweep(&inputs, &spec)?;
    let mut out = output(args.out.as_deref())?;
    write_sweep_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn feasibility(args: FeasibilityArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => FeasibilitySpec::parse(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => FeasibilitySpec::default(),
    };
    apply_overrides(
        &mut spec,
        FeasibilitySpec::set,
        &[
            ("strategies", &args.strategies),
            ("k", &args.k),
            ("p_s", &args.p_s),
            ("eps0", &args.eps0),
            ("d_fixed", &args.d_fixed),
            ("delta_d", &args.delta_d),
            ("pairs", &args.pairs),
            ("seed", &args.seed),
        ],
    )?;
    spec.validate()?;
    let data = load_vectors(&args.data)?;
    let queries = load_vectors(&args.queries)?;
    let truth = args.gt.as_deref().map(load_truth).transpose()?;
    let prepared = FeasibilityData::prepare(&data, &queries, truth, spec.k, spec.seed)?;
    let rows = run_feasibility(&prepared, &spec)?;
    let mut out = output(args.out.as_deref())?;
    write_feasibility_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Build(a) => build(a),
        Command::Gt(a) => gt(a),
        Command::Sweep(a) => sweep(a),
        Command::Feasibility(a) => feasibility(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let configuration = err
                .downcast_ref::<Error>()
                .is_some_and(Error::is_configuration);
            ExitCode::from(if configuration { 2 } else { 1 })
        }
    }
}
