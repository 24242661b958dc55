use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causal_tensor::alphabet::{encode, fit_encoder, BinStrategy, PairWords};
use causal_tensor::dynamics::{
    simulate_ou, simulate_symbolic_triad, simulate_ulam, OuConfig, SymbolicTriad, Trajectory, TriadKind, UlamConfig,
};
use causal_tensor::estimation::count_pair;
use causal_tensor::inference::{relation_scores, run_pipeline, PipelineConfig, ScoreKind};
use causal_tensor::io::{load_config, read_csv_path, write_atomic, write_csv, Dataset};
use causal_tensor::rng::{task_rng, GENERATOR_ID};
use causal_tensor::sweep::{ulam_sweep, SweepConfig};
use causal_tensor::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Causal-tensor analysis of multivariate time series.
#[derive(Debug, Parser)]
#[command(name = "ctensor", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate data from a built-in system as CSV plus a `.meta.json` sidecar.
    Simulate {
        #[command(subcommand)]
        system: System,
    },
    /// Infer the causal hypergraph of a CSV dataset.
    Infer(InferArgs),
    /// Sweep the Ulam lattice coupling and emit plot data.
    Sweep(SweepArgs),
    /// Score one ordered pair over a delay range.
    Score(ScoreArgs),
}

#[derive(Debug, Subcommand)]
enum System {
    /// Ring of coupled Ulam maps.
    Ulam(UlamArgs),
    /// Four delay-coupled Ornstein-Uhlenbeck processes.
    Ou(OuArgs),
    /// Binary chain, fork or triangle over x, y, z.
    Triad(TriadArgs),
}

#[derive(Debug, Args)]
struct SimOut {
    /// Output CSV; metadata goes to `<out>.meta.json`.
    #[arg(long, short)]
    out: PathBuf,
    /// TOML file with simulator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "CT_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct UlamArgs {
    #[command(flatten)]
    common: SimOut,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n_maps: Option<usize>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    burn_in: Option<f64>,
}

#[derive(Debug, Args)]
struct OuArgs {
    #[command(flatten)]
    common: SimOut,
    /// Recorded simulated time.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Integration steps per output sample.
    #[arg(long)]
    sample_stride: Option<usize>,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    noise_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Chain,
    Fork,
    Triangle,
}

#[derive(Debug, Args)]
struct TriadArgs {
    #[command(flatten)]
    common: SimOut,
    #[arg(long, value_enum, default_value = "chain")]
    kind: KindArg,
    #[arg(long, default_value_t = 100_000.0)]
    length: f64,
    #[arg(long, default_value_t = 2)]
    delay_xy: usize,
    #[arg(long, default_value_t = 3)]
    delay_yz: usize,
    /// Draw the transition tables from the seed instead of using fixed ones.
    #[arg(long)]
    random_tables: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    EqualWidth,
    Quantile,
    Threshold,
}

/// Pipeline settings shared by `infer` and `score`; flags win over the file.
#[derive(Debug, Args)]
struct PipelineArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "CT_SEED")]
    seed: Option<u64>,
    /// Time between consecutive CSV rows.
    #[arg(long, default_value_t = 1.0)]
    sample_interval: f64,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Cut point for the threshold strategy, after normalization.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    tau_min: Option<i64>,
    #[arg(long)]
    tau_max: Option<i64>,
    #[arg(long)]
    surrogates: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Fixed triad residual tolerance instead of the surrogate threshold.
    #[arg(long)]
    triad_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct InferArgs {
    data: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Directory for graph.json, report.json and graph.dot.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "CT_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    n_maps: Option<usize>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    surrogates: Option<usize>,
    /// Output CSV (stdout if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    data: PathBuf,
    /// Source column.
    #[arg(long)]
    src: String,
    /// Destination column.
    #[arg(long)]
    dst: String,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output CSV (stdout if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// A failed command and its exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl std::fmt::Display) -> Self {
        Self { code, msg: msg.to_string() }
    }

    /// Simulators: 2 for settings, 3 for numerical trouble.
    fn simulate(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        };
        Self::new(code, e)
    }

    /// Analyses: 2 for settings, 3 for unusable data, 4 for numerical trouble.
    fn analysis(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => 2,
            Error::Numerical(_) | Error::SingularChannel { .. } => 4,
            Error::Io(_) => 1,
            _ => 3,
        };
        Self::new(code, e)
    }

    fn input(e: Error) -> Self {
        match e {
            Error::Config(_) => Self::new(2, e),
            _ => Self::new(3, e),
        }
    }

    fn output(e: impl std::fmt::Display) -> Self {
        Self::new(1, e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn read_toml<T: DeserializeOwned + Default>(path: Option<&Path>) -> std::result::Result<T, Failure> {
    let Some(p) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(p).map_err(|e| Failure::new(2, format!("{}: {e}", p.display())))?;
    toml::from_str(&text).map_err(|e| Failure::new(2, format!("{}: {e}", p.display())))
}

/// Counts given as floats so that `1e5` is accepted on the command line.
fn count(name: &str, v: f64) -> std::result::Result<usize, Failure> {
    if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Failure::new(2, format!("--{name} must be a nonnegative integer, got {v}")))
    }
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

#[derive(Serialize)]
struct SimMeta<'a, C: Serialize> {
    system: &'a str,
    seed: u64,
    generator: &'a str,
    version: &'a str,
    columns: &'a [String],
    n_samples: usize,
    sample_interval: f64,
    config: &'a C,
}

fn write_simulation<C: Serialize>(out: &Path, system: &str, seed: u64, cfg: &C, traj: Trajectory) -> CmdResult {
    let data = Dataset::from(traj);
    let meta = SimMeta {
        system,
        seed,
        generator: GENERATOR_ID,
        version: env!("CARGO_PKG_VERSION"),
        columns: &data.names,
        n_samples: data.len(),
        sample_interval: data.sample_interval,
        config: cfg,
    };
    let meta = to_json(&meta);
    let mut buf = Vec::new();
    write_csv(&mut buf, &data).map_err(Failure::output)?;
    write_atomic(out, &buf).map_err(Failure::output)?;
    let mut meta_path = out.as_os_str().to_owned();
    meta_path.push(".meta.json");
    write_atomic(Path::new(&meta_path), &meta).map_err(Failure::output)
}

fn cmd_simulate(system: System) -> CmdResult {
    match system {
        System::Ulam(a) => {
            let mut cfg: UlamConfig = read_toml(a.common.config.as_deref())?;
            if let Some(s) = a.common.seed {
                cfg.seed = s;
            }
            if let Some(v) = a.epsilon {
                cfg.epsilon = v;
            }
            if let Some(v) = a.n_maps {
                cfg.n_maps = v;
            }
            if let Some(v) = a.length {
                cfg.length = count("length", v)?;
            }
            if let Some(v) = a.burn_in {
                cfg.burn_in = count("burn-in", v)?;
            }
            let traj = simulate_ulam(&cfg).map_err(Failure::simulate)?;
            write_simulation(&a.common.out, "ulam", cfg.seed, &cfg, traj)
        }
        System::Ou(a) => {
            let mut cfg: OuConfig = read_toml(a.common.config.as_deref())?;
            if let Some(s) = a.common.seed {
                cfg.seed = s;
            }
            if let Some(v) = a.duration {
                cfg.duration = v;
            }
            if let Some(v) = a.dt {
                cfg.dt = v;
            }
            if let Some(v) = a.sample_stride {
                cfg.sample_stride = v;
            }
            if let Some(v) = a.burn_in {
                cfg.burn_in = v;
            }
            if let Some(v) = a.noise_scale {
                cfg.coefficients.noise_scale = v;
            }
            let traj = simulate_ou(&cfg).map_err(Failure::simulate)?;
            write_simulation(&a.common.out, "ou", cfg.seed, &cfg, traj)
        }
        System::Triad(a) => {
            let seed = a.common.seed.unwrap_or(0);
            let model = match a.common.config.as_deref() {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Failure::new(2, format!("{}: {e}", p.display())))?;
                    toml::from_str::<SymbolicTriad>(&text).map_err(|e| Failure::new(2, format!("{}: {e}", p.display())))?
                }
                None => {
                    let kind = match a.kind {
                        KindArg::Chain => TriadKind::Chain,
                        KindArg::Fork => TriadKind::Fork,
                        KindArg::Triangle => TriadKind::Triangle,
                    };
                    if a.random_tables {
                        SymbolicTriad::random(&mut task_rng(seed, "triad/model"), kind, a.delay_xy, a.delay_yz)
                    } else {
                        SymbolicTriad::example(kind, a.delay_xy, a.delay_yz)
                    }
                }
            };
            let length = count("length", a.length)?;
            let traj = simulate_symbolic_triad(&model, length, seed).map_err(Failure::simulate)?;
            write_simulation(&a.common.out, "triad", seed, &model, traj)
        }
    }
}

fn pipeline_config(a: &PipelineArgs) -> std::result::Result<PipelineConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => load_config(p).map_err(|e| Failure::new(2, e))?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.bins {
        cfg.encoding.bins = v;
    }
    let current = match cfg.encoding.strategy {
        BinStrategy::Threshold(t) => t,
        _ => 0.5,
    };
    match (a.strategy, a.threshold) {
        (Some(StrategyArg::EqualWidth), _) => cfg.encoding.strategy = BinStrategy::EqualWidth,
        (Some(StrategyArg::Quantile), _) => cfg.encoding.strategy = BinStrategy::Quantile,
        (Some(StrategyArg::Threshold), t) => cfg.encoding.strategy = BinStrategy::Threshold(t.unwrap_or(current)),
        (None, Some(t)) => cfg.encoding.strategy = BinStrategy::Threshold(t),
        (None, None) => {}
    }
    if let Some(v) = a.ell {
        cfg.embedding.ell = v;
    }
    if let Some(v) = a.m {
        cfg.embedding.m = v;
    }
    if let Some(v) = a.tau_min {
        cfg.embedding.tau_min = v;
    }
    if let Some(v) = a.tau_max {
        cfg.embedding.tau_max = v;
    }
    if let Some(v) = a.surrogates {
        cfg.significance.n_surrogates = v;
    }
    if let Some(v) = a.alpha {
        cfg.significance.alpha = v;
    }
    if let Some(v) = a.triad_tol {
        cfg.triad.fixed_tol = Some(v);
    }
    cfg.validate().map_err(|e| Failure::new(2, e))?;
    Ok(cfg)
}

fn cmd_infer(a: InferArgs) -> CmdResult {
    let cfg = pipeline_config(&a.pipeline)?;
    let data = read_csv_path(&a.data, a.pipeline.sample_interval).map_err(Failure::input)?;
    let (graph, report) = run_pipeline(&data, &cfg).map_err(Failure::analysis)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::output(format!("{}: {e}", a.out_dir.display())))?;
    write_atomic(&a.out_dir.join("graph.json"), &to_json(&graph.to_json_value())).map_err(Failure::output)?;
    write_atomic(&a.out_dir.join("report.json"), &to_json(&report)).map_err(Failure::output)?;
    write_atomic(&a.out_dir.join("graph.dot"), graph.to_dot().as_bytes()).map_err(Failure::output)?;
    eprintln!(
        "{} edges, {} hyperedges, {} removed by pruning",
        graph.edges.len(),
        graph.hyperedges.len(),
        report.pruning.len()
    );
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match out {
        Some(p) => write_atomic(p, bytes).map_err(Failure::output),
        None => std::io::stdout().write_all(bytes).map_err(Failure::output),
    }
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let mut cfg: SweepConfig = read_toml(a.config.as_deref())?;
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.points {
        cfg.n_points = v;
    }
    if let Some(v) = a.n_maps {
        cfg.n_maps = v;
    }
    if let Some(v) = a.length {
        cfg.length = count("length", v)?;
    }
    if let Some(v) = a.burn_in {
        cfg.burn_in = count("burn-in", v)?;
    }
    if let Some(v) = a.surrogates {
        cfg.significance.n_surrogates = v;
    }
    cfg.validate().map_err(|e| Failure::new(2, e))?;
    let rows = ulam_sweep(&cfg).map_err(Failure::analysis)?;
    let mut s = String::from("epsilon,gamma_tilde,te,best_tau,p_value,significant\n");
    for r in rows {
        let tau = r.best_tau.map(|t| t.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{},{},{}\n", r.epsilon, r.gamma_tilde, r.te, tau, r.p_value, r.significant));
    }
    emit(a.out.as_deref(), s.as_bytes())
}

fn cmd_score(a: ScoreArgs) -> CmdResult {
    let cfg = pipeline_config(&a.pipeline)?;
    let data = read_csv_path(&a.data, a.pipeline.sample_interval).map_err(Failure::input)?;
    let column = |name: &str| {
        data.column(name).ok_or_else(|| Failure::new(3, format!("no column named {name:?} in {}", a.data.display())))
    };
    let (src, dst) = (column(&a.src)?, column(&a.dst)?);
    let enc = cfg.encoding;
    let symbols = |col: &[f64]| {
        fit_encoder(col, enc.bins, enc.strategy, enc.normalization)
            .and_then(|e| encode(col, &e, data.sample_interval))
            .map_err(Failure::analysis)
    };
    let (xs, ys) = (symbols(src)?, symbols(dst)?);
    let spec = cfg.embedding.scan_spec();
    spec.validate().map_err(|e| Failure::new(2, e))?;
    let words = PairWords::new(&xs, &ys, spec.ell, spec.m_plus_1).map_err(Failure::analysis)?;
    let mut s = String::from("tau,gamma_tilde,te\n");
    let mut best: Option<(i64, f64)> = None;
    for tau in spec.taus() {
        let scores = count_pair(&words, tau)
            .and_then(|c| relation_scores(&c, &cfg.score))
            .map_err(|e| Failure::analysis(e.context(format!("tau {tau}"))))?;
        s.push_str(&format!("{tau},{},{}\n", scores.gamma_tilde, scores.te));
        let v = scores.get(cfg.score.kind);
        // Ties keep the earliest (smallest) delay.
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((tau, v));
        }
    }
    emit(a.out.as_deref(), s.as_bytes())?;
    if let Some((tau, v)) = best {
        let label = match cfg.score.kind {
            ScoreKind::GammaTilde => "gamma_tilde",
            ScoreKind::Te => "te",
        };
        eprintln!("{} -> {}: best tau {tau}, {label} {v:.6} bits", a.src, a.dst);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let res = match cli.command {
        Command::Simulate { system } => cmd_simulate(system),
        Command::Infer(a) => cmd_infer(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Score(a) => cmd_score(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
