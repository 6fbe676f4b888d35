use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use leadlag::backtest::{performance_report, run_grid, run_strategy, GridSpec, StrategyConfig, StrategyMethod};
use leadlag::cluster::KMeansParams;
use leadlag::experiment::{run_replicate, run_sweep, SweepSpec};
use leadlag::export;
use leadlag::ingest::{self, EquityParams, FuturesParams, Layout};
use leadlag::leadlag::{ccf_lead_lag_matrix, detect_detailed, rowsum_rank, DetectConfig, Method};
use leadlag::similarity::{similarity_heatmap, HeatmapMeasure};
use leadlag::simulate::MseScope;
use leadlag::{Error, SquareMatrix, TimeSeriesPanel};

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "LEADLAG_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "leadlag", version, about = "Lead-lag detection by clustering subsequences of time series")]
struct Cli {
    /// Output directory [default: $LEADLAG_OUT_DIR, else ./leadlag-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel jobs
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Monte-Carlo recovery experiments on the lagged factor model
    Simulate(SimulateArgs),
    /// Lead-lag matrix of a panel by subsequence clustering
    Detect(DetectArgs),
    /// Cross-correlation benchmark lead-lag matrix
    Ccf(CcfArgs),
    /// Leader/lagger momentum backtest
    Backtest(BacktestArgs),
    /// RowSum ranking from the lead-lag matrix
    Rank(RankArgs),
    /// Clean a raw return or price file into a panel
    Preprocess(PreprocessArgs),
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    /// Panel CSV
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = LayoutArg::Wide)]
    layout: LayoutArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LayoutArg {
    Wide,
    Long,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Layout {
        match l {
            LayoutArg::Wide => Layout::Wide,
            LayoutArg::Long => Layout::Long,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ClusterArgs {
    /// Subsequence length
    #[arg(long, default_value_t = 10)]
    q: usize,
    /// Subsequence shift
    #[arg(long, default_value_t = 1)]
    s: usize,
    /// Number of clusters
    #[arg(long = "K", default_value_t = 11)]
    k_clusters: usize,
    /// Voting threshold
    #[arg(long, default_value_t = 6)]
    theta: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// k-means++ restarts
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// KNN neighbours for the spectral graph [default: ceil(sqrt(N))]
    #[arg(long)]
    knn: Option<usize>,
    /// Gaussian kernel width [default: 1/N]
    #[arg(long)]
    kernel_sigma: Option<f64>,
    /// Standardize each subsequence before clustering
    #[arg(long)]
    standardize: bool,
    /// Treat isolated graph vertices as self-connected instead of failing
    #[arg(long)]
    isolated_fallback: bool,
}

impl ClusterArgs {
    fn detect_config(&self, method: Method) -> DetectConfig {
        DetectConfig {
            q: self.q,
            s: self.s,
            k_clusters: self.k_clusters,
            method,
            theta: self.theta,
            seed: self.seed,
            knn: self.knn,
            kernel_sigma: self.kernel_sigma,
            standardize: self.standardize,
            kmeans: KMeansParams {
                restarts: self.restarts,
                ..KMeansParams::default()
            },
            isolated_fallback: self.isolated_fallback,
            ..DetectConfig::default()
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Number of factors of the preset design
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Number of series
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Series length
    #[arg(long = "T", default_value_t = 100)]
    t: usize,
    #[arg(long, default_value_t = 90)]
    q: usize,
    #[arg(long, default_value_t = 1)]
    s: usize,
    /// Number of clusters [default: 11 k]
    #[arg(long = "K")]
    k_clusters: Option<usize>,
    /// Noise levels, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "1")]
    sigma: Vec<f64>,
    /// Voting thresholds, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "6")]
    theta: Vec<u64>,
    /// Methods, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "KM_Mod")]
    method: Vec<Method>,
    /// Repetitions per noise level
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pairs entering the MSE
    #[arg(long, value_enum, default_value_t = ScopeArg::Masked)]
    scope: ScopeArg,
    /// k-means++ restarts
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    kernel_sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ScopeArg {
    Masked,
    All,
}

#[derive(Args, Debug, Serialize)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "KM_Mod")]
    method: Method,
    #[command(flatten)]
    cluster: ClusterArgs,
    /// Also write the window similarity heatmap
    #[arg(long, value_enum)]
    heatmap: Option<HeatmapArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum HeatmapArg {
    Pearson,
    Dcor,
}

#[derive(Args, Debug, Serialize)]
struct CcfArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Largest lag of the cross-correlation function
    #[arg(long, default_value_t = 5)]
    max_lag: usize,
}

#[derive(Args, Debug, Serialize)]
struct BacktestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Methods (CCF, KM_Mod, KM_Med, SP_Mod, SP_Med), comma-separated
    #[arg(long, value_delimiter = ',', default_value = "KM_Mod")]
    method: Vec<StrategyMethod>,
    /// Trailing window length
    #[arg(long, default_value_t = 21)]
    l: usize,
    #[arg(long, default_value_t = 10)]
    q: usize,
    #[arg(long, default_value_t = 1)]
    s: usize,
    #[arg(long = "K", default_value_t = 11)]
    k_clusters: usize,
    #[arg(long, default_value_t = 6)]
    theta: u64,
    /// Leader fractions, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "0.8")]
    alpha: Vec<f64>,
    /// EWMA lookbacks, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "3")]
    p: Vec<usize>,
    /// Holding horizons, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "1")]
    delta: Vec<usize>,
    #[arg(long, default_value_t = 0.15)]
    target_vol: f64,
    /// Largest lag of the CCF method
    #[arg(long, default_value_t = 5)]
    max_lag: usize,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate the cross product of all list-valued parameters
    #[arg(long)]
    grid: bool,
}

#[derive(Args, Debug, Serialize)]
struct RankArgs {
    #[command(flatten)]
    input: InputArgs,
    /// CCF or a clustering method
    #[arg(long, default_value = "KM_Mod")]
    method: StrategyMethod,
    #[command(flatten)]
    cluster: ClusterArgs,
    #[arg(long, default_value_t = 5)]
    max_lag: usize,
}

#[derive(Args, Debug, Serialize)]
struct PreprocessArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = KindArg::Equity)]
    kind: KindArg,
    /// Id of the market series
    #[arg(long)]
    market: String,
    #[arg(long, default_value_t = 0.10)]
    day_zero_frac: f64,
    /// Equity only
    #[arg(long, default_value_t = 0.50)]
    asset_zero_frac: f64,
    /// Futures only
    #[arg(long, default_value_t = 160)]
    max_zero_days: usize,
    #[arg(long, default_value_t = 0.15)]
    winsor: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Equity,
    Futures,
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("leadlag-out"))
}

fn create(dir: &Path, name: &str) -> leadlag::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn load(input: &InputArgs) -> leadlag::Result<TimeSeriesPanel> {
    ingest::load_csv(&input.input, input.layout.into())?.to_panel()
}

fn simulate(a: &SimulateArgs, dir: &Path) -> leadlag::Result<()> {
    let spec = SweepSpec {
        factors: a.k,
        n: a.n,
        t: a.t,
        q: a.q,
        s: a.s,
        k_clusters: a.k_clusters,
        sigmas: a.sigma.clone(),
        thetas: a.theta.clone(),
        methods: a.method.clone(),
        repetitions: a.reps,
        seed: a.seed,
        scope: match a.scope {
            ScopeArg::Masked => MseScope::Masked,
            ScopeArg::All => MseScope::AllPairs,
        },
        knn: a.knn,
        kernel_sigma: a.kernel_sigma,
        kmeans: KMeansParams {
            restarts: a.restarts,
            ..KMeansParams::default()
        },
    };
    if spec.repetitions == 0 {
        return Err(Error::InvalidParameter("at least one repetition is required".into()));
    }
    let records = run_sweep(&spec)?;
    export::write_sweep(&records, create(dir, "sweep.csv")?)?;
    // matrices of the first repetition, for inspection
    for &sigma in &spec.sigmas {
        for o in run_replicate(&spec, sigma, 0)? {
            let tag = format!("{}_sigma{}_theta{}", o.method, sigma, o.theta);
            let ids = o.lead_lag.ids.clone();
            export::write_square(&o.error, &ids, create(dir, &format!("error_{tag}.csv"))?)?;
            export::write_square(&o.lead_lag.gamma, &ids, create(dir, &format!("gamma_{tag}.csv"))?)?;
        }
    }
    Ok(())
}

fn detect(a: &DetectArgs, dir: &Path) -> leadlag::Result<()> {
    let panel = load(&a.input)?;
    let d = detect_detailed(&panel, &a.cluster.detect_config(a.method))?;
    let ids = panel.ids();
    export::write_square(&d.lead_lag.gamma, ids, create(dir, "gamma.csv")?)?;
    export::write_square(&d.votes.counts, ids, create(dir, "votes.csv")?)?;
    export::write_lags(&d.multisets, ids, create(dir, "lags.csv")?)?;
    export::write_assignment(&d.universe, &d.assignment, ids, create(dir, "assignment.csv")?)?;
    if let Some(h) = a.heatmap {
        let measure = match h {
            HeatmapArg::Pearson => HeatmapMeasure::Pearson,
            HeatmapArg::Dcor => HeatmapMeasure::DistanceCorrelation,
        };
        let m = SquareMatrix::from_rows(&similarity_heatmap(&d.universe, measure))?;
        export::write_heatmap(&m, create(dir, "heatmap.csv")?)?;
    }
    Ok(())
}

fn ccf(a: &CcfArgs, dir: &Path) -> leadlag::Result<()> {
    let panel = load(&a.input)?;
    let m = ccf_lead_lag_matrix(&panel, a.max_lag)?;
    export::write_square(&m.scores, &m.ids, create(dir, "ccf.csv")?)
}

fn single<T: Copy>(name: &str, v: &[T]) -> leadlag::Result<T> {
    match v {
        [x] => Ok(*x),
        _ => Err(Error::InvalidParameter(format!(
            "--{name} takes one value unless --grid is given, got {}",
            v.len()
        ))),
    }
}

#[derive(Serialize)]
struct BasketReports {
    laggers: leadlag::backtest::BacktestReport,
    leaders: leadlag::backtest::BacktestReport,
}

fn backtest(a: &BacktestArgs, dir: &Path) -> leadlag::Result<()> {
    let panel = load(&a.input)?;
    let base = StrategyConfig {
        window_length: a.l,
        q: a.q,
        s: a.s,
        k_clusters: a.k_clusters,
        theta: a.theta,
        method: a.method.first().copied().unwrap_or(StrategyMethod::Cluster(Method::KmMod)),
        leader_fraction: a.alpha.first().copied().unwrap_or(0.8),
        lookback: a.p.first().copied().unwrap_or(3),
        horizon: a.delta.first().copied().unwrap_or(1),
        seed: a.seed,
        ccf_max_lag: a.max_lag,
        target_vol: a.target_vol,
        kmeans: KMeansParams {
            restarts: a.restarts,
            ..KMeansParams::default()
        },
    };
    if a.grid {
        let grid = GridSpec {
            methods: a.method.clone(),
            lookbacks: a.p.clone(),
            horizons: a.delta.clone(),
            leader_fractions: a.alpha.clone(),
        };
        let records = run_grid(&panel, &base, &grid)?;
        return export::write_grid(&records, create(dir, "grid.csv")?);
    }
    single("method", &a.method)?;
    single("alpha", &a.alpha)?;
    single("p", &a.p)?;
    single("delta", &a.delta)?;
    let out = run_strategy(&panel, &base)?;
    export::write_pnl(&out.laggers, create(dir, "pnl_laggers.csv")?)?;
    export::write_pnl(&out.leaders, create(dir, "pnl_leaders.csv")?)?;
    let reports = BasketReports {
        laggers: performance_report(&out.laggers)?,
        leaders: performance_report(&out.leaders)?,
    };
    export::write_json(&reports, create(dir, "report.json")?)
}

fn rank(a: &RankArgs, dir: &Path) -> leadlag::Result<()> {
    let panel = load(&a.input)?;
    let scores = match a.method {
        StrategyMethod::Ccf => ccf_lead_lag_matrix(&panel, a.max_lag)?.scores,
        StrategyMethod::Cluster(m) => {
            let d = detect_detailed(&panel, &a.cluster.detect_config(m))?;
            export::write_square(&d.lead_lag.gamma, panel.ids(), create(dir, "gamma.csv")?)?;
            d.lead_lag.as_real()
        }
    };
    let ranking = rowsum_rank(&scores, panel.ids())?;
    export::write_ranking(&ranking, create(dir, "ranking.csv")?)
}

fn preprocess(a: &PreprocessArgs, dir: &Path) -> leadlag::Result<()> {
    let raw = ingest::load_csv(&a.input.input, a.input.layout.into())?;
    let out = match a.kind {
        KindArg::Equity => ingest::preprocess_equity(
            &raw,
            &a.market,
            &EquityParams {
                day_zero_frac: a.day_zero_frac,
                asset_zero_frac: a.asset_zero_frac,
                winsor: a.winsor,
            },
        )?,
        KindArg::Futures => ingest::preprocess_futures(
            &raw,
            &a.market,
            &FuturesParams {
                day_zero_frac: a.day_zero_frac,
                max_zero_days: a.max_zero_days,
                winsor: a.winsor,
            },
        )?,
    };
    ingest::write_wide(&out.panel, create(dir, "panel.csv")?)?;
    export::write_json(&out.drops, create(dir, "drops.json")?)
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    version: &'a str,
    #[serde(flatten)]
    command: &'a Command,
}

fn run(cli: &Cli) -> leadlag::Result<()> {
    if cli.jobs == 0 {
        return Err(Error::InvalidParameter("--jobs must be at least 1".into()));
    }
    let dir = out_dir(cli);
    std::fs::create_dir_all(&dir)?;
    let echo = ConfigEcho {
        version: env!("CARGO_PKG_VERSION"),
        command: &cli.command,
    };
    export::write_json(&echo, create(&dir, "config.json")?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(a, &dir),
        Command::Detect(a) => detect(a, &dir),
        Command::Ccf(a) => ccf(a, &dir),
        Command::Backtest(a) => backtest(a, &dir),
        Command::Rank(a) => rank(a, &dir),
        Command::Preprocess(a) => preprocess(a, &dir),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 4 } else { 3 })
        }
    }
}
