use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use geodp::error::{Error, Result};
use geodp::experiments::{self, validate_sensitivity, GridMode, Generator};
use geodp::io::{self as gio, EpsRange, ExperimentConfig, Format, ReleaseFile};
use geodp::mechanism::{compose_budget, noise_scales, SensitivitySpec, TauPolicy, EMPIRICAL_TAU_WARNING};
use geodp::regression::{fit, Dataset, FitConfig, GradientMethod};
use geodp::sampler::{release_pair, ChainConfig};


#[derive(Parser)]
#[command(name = "geodp", version, about = "Differentially private geodesic regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic data along a random geodesic.
    GenData(GenDataArgs),
    /// Fit a geodesic by least squares and print the report as JSON.
    Fit(FitArgs),
    /// Release a private (footpoint, shooting vector) pair.
    Privatize(PrivatizeArgs),
    /// Run a privacy-budget sweep and write the MSE grid.
    Experiment(ExperimentArgs),
    /// Compare theoretical and experimental sensitivities on adjacent datasets.
    ValidateSensitivity(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ManifoldArg {
    Sphere,
    Spd,
    Kendall,
}

#[derive(Args)]
struct ManifoldOpts {
    #[arg(long, value_enum, default_value = "sphere")]
    manifold: ManifoldArg,
    /// Landmarks per configuration (Kendall only).
    #[arg(long, default_value_t = 50)]
    landmarks: usize,
    /// Noise level: delta for sphere and Kendall, sigma for SPD.
    #[arg(long, alias = "delta", alias = "sigma")]
    noise: Option<f64>,
}

impl ManifoldOpts {
    fn generator(&self, default_noise: f64) -> Generator {
        let noise = self.noise.unwrap_or(default_noise);
        match self.manifold {
            ManifoldArg::Sphere => Generator::Sphere { delta: noise },
            ManifoldArg::Spd => Generator::Spd { sigma: noise },
            ManifoldArg::Kendall => Generator::Kendall { landmarks: self.landmarks, delta: noise },
        }
    }
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    manifold: ManifoldOpts,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output file; `.csv` selects CSV, anything else JSON. Defaults to stdout (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the generating geodesic (in scaled covariates) as JSON.
    #[arg(long)]
    generator_out: Option<PathBuf>,
}

#[derive(Args)]
struct DataSource {
    /// Dataset file (JSON or CSV).
    #[arg(long, conflicts_with = "landmarks_csv")]
    data: Option<PathBuf>,
    /// Landmark CSV: a covariate column plus 2k landmark coordinates per row.
    #[arg(long)]
    landmarks_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    covariate_column: usize,
}

impl DataSource {
    fn load(&self) -> Result<Option<Dataset>> {
        let data = if let Some(path) = &self.data {
            gio::read_dataset(path)?
        } else if let Some(path) = &self.landmarks_csv {
            gio::ingest_landmarks(File::open(path)?, self.covariate_column)?
        } else {
            return Ok(None);
        };
        // scaling is the identity on covariates that already span [0, 1]
        Ok(Some(Dataset::scaled(data.manifold(), data.x(), data.y().to_vec())?))
    }

    fn require(&self) -> Result<Dataset> {
        self.load()?
            .ok_or_else(|| Error::InvalidParameter("one of --data or --landmarks-csv is required".into()))
    }
}

#[derive(Args)]
struct FitOpts {
    /// Fit configuration JSON; flags override its keys.
    #[arg(long)]
    fit_config: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Use finite-difference gradients instead of Jacobi fields.
    #[arg(long)]
    finite_differences: bool,
}

impl FitOpts {
    fn resolve(&self) -> Result<FitConfig> {
        let mut cfg = match &self.fit_config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
                .map_err(|e| Error::Config(e.to_string()))?,
            None => FitConfig::default(),
        };
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        if self.finite_differences {
            cfg.gradient = GradientMethod::FiniteDifference;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    source: DataSource,
    #[command(flatten)]
    fit: FitOpts,
    /// Write the fitted model (footpoint and shooting vector) as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TauOpts {
    /// Public bound on the residual norms.
    #[arg(long)]
    tau: Option<f64>,
    /// Public bound on the data radius (needed for negative curvature).
    #[arg(long, requires = "tau")]
    tau_m: Option<f64>,
}

impl TauOpts {
    fn policy(&self) -> Option<TauPolicy> {
        self.tau.map(|tau| TauPolicy::Public { tau, tau_m: self.tau_m.unwrap_or(0.0) })
    }
}

#[derive(Args)]
struct ChainOpts {
    #[arg(long)]
    chain_length: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Fixed proposal radius; by default eta = eta_factor * sigma.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_factor: Option<f64>,
}

impl ChainOpts {
    fn apply(&self, cfg: &mut ChainConfig) {
        if let Some(v) = self.chain_length {
            cfg.chain_length = v;
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if self.eta.is_some() {
            cfg.proposal_radius = self.eta;
        }
        if let Some(v) = self.eta_factor {
            cfg.eta_factor = v;
        }
    }
}

#[derive(Args)]
struct PrivatizeArgs {
    #[command(flatten)]
    source: DataSource,
    #[arg(long)]
    eps_p: f64,
    #[arg(long)]
    eps_v: f64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    tau: TauOpts,
    /// Noise-scale multiplier, 1 or 2.
    #[arg(long, default_value_t = 1)]
    factor: u8,
    #[command(flatten)]
    chain: ChainOpts,
    #[command(flatten)]
    fit: FitOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration JSON; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Budget range lo:hi:steps (total budget for equal splits, eps_p for unequal).
    #[arg(long)]
    eps: Option<EpsRange>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum)]
    manifold: Option<ManifoldArg>,
    #[arg(long)]
    landmarks: Option<usize>,
    #[arg(long, alias = "delta", alias = "sigma")]
    noise: Option<f64>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    tau: TauOpts,
    #[arg(long)]
    factor: Option<u8>,
    #[command(flatten)]
    chain: ChainOpts,
    /// Grid CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Long-format CSV output (eps_p, eps_v, ln_mse, baseline, n, seed).
    #[arg(long)]
    long_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Equal,
    Unequal,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    manifold: ManifoldOpts,
    /// Dataset sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "20,50,100")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn warn(msg: &str) {
    eprintln!("{msg}");
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let synthetic = args.manifold.generator(0.001).generate(args.n, args.seed)?;
    match &args.out {
        Some(path) => gio::write_dataset(&synthetic.data, path, Format::from_path(path))?,
        None => emit(&gio::dataset_to_json(&synthetic.data)?)?,
    }
    if let Some(path) = &args.generator_out {
        fs::write(path, serde_json::to_string_pretty(&synthetic.generator)?)?;
    }
    Ok(())
}

fn run_fit(args: FitArgs) -> Result<()> {
    let data = args.source.require()?;
    let report = fit(&data, &args.fit.resolve()?)?;
    for w in &report.warnings {
        warn(&format!("warning: {w}"));
    }
    if let Some(path) = &args.out {
        fs::write(path, serde_json::to_string_pretty(&report.model)?)?;
    }
    emit(&serde_json::to_string_pretty(&report)?)
}

fn privatize(args: PrivatizeArgs) -> Result<()> {
    let data = args.source.require()?;
    let fit_cfg = args.fit.resolve()?;
    let report = fit(&data, &fit_cfg)?;
    let policy = args.tau.policy().unwrap_or(TauPolicy::Empirical);
    let (tau, tau_m, warn_privacy) = policy.resolve(report.tau_empirical, report.tau_m_empirical);
    if warn_privacy {
        warn(EMPIRICAL_TAU_WARNING);
    }
    let spec = SensitivitySpec::new(data.len(), tau, tau_m, experiments::kappa_l(data.manifold()))?;
    let budget = compose_budget(args.eps_p, args.eps_v)?;
    let scales = noise_scales(&spec, &budget, args.factor)?;
    let mut chain = ChainConfig { seed: args.seed, ..Default::default() };
    args.chain.apply(&mut chain);
    chain.validate()?;
    let release = release_pair(&data, &report, &spec, &budget, &scales, &chain)?;
    for (name, diag) in [("footpoint", &release.footpoint_chain), ("shooting", &release.shooting_chain)] {
        if diag.stuck {
            warn(&format!("warning: the {name} chain never accepted a proposal"));
        }
    }
    let hash = gio::config_hash(&json!({
        "eps_p": args.eps_p, "eps_v": args.eps_v, "seed": args.seed, "tau": policy,
        "factor": args.factor, "chain": chain, "fit": fit_cfg,
    }));
    let file = ReleaseFile { release, tau_policy: policy, chain, config_hash: hash };
    let text = serde_json::to_string_pretty(&file)?;
    match &args.out {
        Some(path) => Ok(fs::write(path, text + "\n")?),
        None => emit(&text),
    }
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.seed = Some(args.seed);
    if let Some(mode) = args.mode {
        cfg.mode = match mode {
            ModeArg::Equal => GridMode::Equal,
            ModeArg::Unequal => GridMode::Unequal,
        };
    }
    if args.eps.is_some() {
        cfg.eps = args.eps;
        cfg.budgets = None;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(manifold) = args.manifold {
        let noise = args.noise.unwrap_or(cfg.generator.noise());
        let landmarks = args.landmarks.unwrap_or(50);
        cfg.generator = ManifoldOpts { manifold, landmarks, noise: Some(noise) }.generator(noise);
    } else if let Some(noise) = args.noise {
        cfg.generator = cfg.generator.with_noise(noise);
    }
    if args.data.is_some() {
        cfg.data = args.data.clone();
    }
    if let Some(policy) = args.tau.policy() {
        cfg.tau = policy;
    }
    if let Some(f) = args.factor {
        cfg.conservative_factor = f;
    }
    args.chain.apply(&mut cfg.chain);
    cfg.chain.seed = args.seed;
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    if args.long_out.is_some() {
        cfg.long_output = args.long_out.clone();
    }

    let data = match &cfg.data {
        Some(path) => {
            let d = gio::read_dataset(path)?;
            Dataset::scaled(d.manifold(), d.x(), d.y().to_vec())?
        }
        None => cfg.generator.generate(cfg.n, args.seed)?.data,
    };
    if !cfg.tau.is_public() {
        warn(EMPIRICAL_TAU_WARNING);
    }
    let report = fit(&data, &cfg.fit)?;
    for w in &report.warnings {
        warn(&format!("warning: {w}"));
    }
    let result = experiments::run_grid(&data, &report, &cfg.grid_spec(), &cfg.chain, cfg.tau, cfg.conservative_factor)?;
    for cell in result.cells.iter().filter(|c| c.excluded > 0) {
        warn(&format!(
            "warning: cell (eps_p={}, eps_v={}) excluded {} pairs",
            cell.eps_p, cell.eps_v, cell.excluded
        ));
    }
    let hash = cfg.hash();
    let results = [result];
    gio::write_grid_csv(output(cfg.output.as_deref())?, &results, &hash)?;
    if let Some(path) = &cfg.long_output {
        gio::write_long_csv(File::create(path)?, &results)?;
    }
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    let generator = args.manifold.generator(match args.manifold.manifold {
        ManifoldArg::Spd => 0.01,
        _ => 0.001,
    });
    let fit_cfg = FitConfig::default();
    let mut rows = Vec::new();
    for &n in &args.n {
        let pairs = experiments::make_adjacent_pairs(n, &generator, args.trials, args.seed)?;
        rows.extend(validate_sensitivity(&pairs, &fit_cfg)?);
    }
    let hash = gio::config_hash(&json!({
        "generator": generator, "n": args.n, "trials": args.trials, "seed": args.seed,
    }));
    let below = rows.iter().filter(|r| r.r_p < 1.0 || r.r_v < 1.0).count();
    if below > 0 {
        warn(&format!("warning: {below} of {} pairs have a ratio below one", rows.len()));
    }
    gio::write_ratio_csv(output(args.out.as_deref())?, &rows, args.seed, &hash)?;
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_usage() {
        1
    } else if err.is_numeric() {
        3
    } else {
        2
    }
}

fn report_error(kind: &str, message: &str, code: u8) -> ExitCode {
    let body = json!({ "error": kind, "message": message, "exit_code": code });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("GEODP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return report_error("usage", &e.kind().to_string(), 1);
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Fit(a) => run_fit(a),
        Command::Privatize(a) => privatize(a),
        Command::Experiment(a) => experiment(a),
        Command::ValidateSensitivity(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(e.kind(), &e.to_string(), exit_code(&e)),
    }
}

