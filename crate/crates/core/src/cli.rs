//! Command-line front end.
//!
//! Exit codes: `0` success, `1` I/O failure, `2` invalid input (flags,
//! grids, prior JSON, relaxed priors given to `minimax-check`), `3` domain or
//! integrability failure of the requested computation.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;
use crate::estimator::{james_stein, shrinkage_factor};
use crate::grid::parse_grid;
use crate::minimax::{certify, check_theorem1, named_prior, MinimaxReport, NamedPrior};
use crate::prior::PriorSpec;
use crate::quadrature::{posterior_kappa_mean, QuadConfig, Scheme};
use crate::risk::{prior_density_sweep, risk_sweep, shrink_sweep, write_prior_csv, write_shrink_csv, Estimator, DEFAULT_REPS};
use crate::sampler::{posterior_mean, posterior_mean_se, run_chain, SamplerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "shrinkprior", version, about = "Shrinkage estimation under half-Cauchy type priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify minimaxity of the Bayes estimator for a prior.
    MinimaxCheck(MinimaxArgs),
    /// Bayes and James–Stein estimates for one observation.
    Estimate(EstimateArgs),
    /// Shrinkage factor φ over a grid of ‖y‖.
    ShrinkCurve(ShrinkArgs),
    /// Monte Carlo quadratic risk over a grid of ‖β‖.
    RiskSweep(RiskArgs),
    /// Metropolis-within-Gibbs trace for one observation.
    SamplePosterior(SampleArgs),
    /// log π(κ) over a grid of κ.
    PriorDensity(DensityArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    De,
    Gj,
}

#[derive(Debug, Args)]
struct QuadArgs {
    /// Relative tolerance of the quadrature.
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    /// Quadrature scheme: double-exponential or composite Gauss–Jacobi.
    #[arg(long, value_enum, default_value_t = SchemeArg::De)]
    scheme: SchemeArg,
}

impl QuadArgs {
    fn config(&self) -> Result<QuadConfig<f64>, CliError> {
        let scheme = match self.scheme {
            SchemeArg::De => Scheme::DoubleExponential,
            SchemeArg::Gj => Scheme::GaussJacobiComposite,
        };
        let cfg = QuadConfig::default().with_rel_tol(self.rel_tol).with_scheme(scheme);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct PriorArgs {
    /// `named:prior1`, `named:prior2`, inline JSON, or a JSON file.
    #[arg(long)]
    prior: String,
    /// Dimension; fills in `p` when the prior JSON omits it.
    #[arg(long)]
    p: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    /// Most specific applicable corollary, then the general inequality.
    Auto,
    /// The general inequality only.
    Theorem1,
}

#[derive(Debug, Args)]
struct MinimaxArgs {
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long)]
    json: bool,
    #[arg(long, value_enum, default_value_t = RuleArg::Auto)]
    rule: RuleArg,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Observation: comma-separated values or a file of values.
    #[arg(long)]
    y: String,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Debug, Args)]
struct ShrinkArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Grid of ‖y‖ as `lo:hi:step` or a list.
    #[arg(long, default_value = "0.1:10:0.1")]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Debug, Args)]
struct RiskArgs {
    /// Estimators: priors as for `--prior`, or `js`, `identity`. Repeatable.
    #[arg(long, required = true, num_args = 1..)]
    priors: Vec<String>,
    #[arg(long)]
    p: usize,
    /// Grid of ‖β‖.
    #[arg(long, default_value = "0:10:1")]
    grid: String,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long)]
    y: String,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    #[arg(long, default_value_t = 1_000)]
    burn: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    chain: u64,
    /// Draw β from its full conditional instead of recording its mean.
    #[arg(long)]
    plain: bool,
    /// Add `beta_1..beta_p` columns to the trace.
    #[arg(long)]
    beta_columns: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, default_value = "0.01:0.99:0.01")]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write the output here instead of the recorded path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything needed to re-run a command that wrote an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub priors: Vec<PriorSpec<f64>>,
    pub seed: Option<u64>,
    pub config_paths: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_os_string();
        name.push(".manifest.json");
        PathBuf::from(name)
    }
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io { path: String, source: io::Error },
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Core(_) => EXIT_DOMAIN,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

/// A resolved `--prior` argument.
struct ResolvedPrior {
    spec: PriorSpec<f64>,
    label: String,
    config_path: Option<String>,
}

fn resolve_prior(arg: &str, p: Option<usize>) -> Result<ResolvedPrior, CliError> {
    let arg = arg.trim();
    if let Some(name) = arg.strip_prefix("named:") {
        let named: NamedPrior = name.parse()?;
        let p = p.ok_or_else(|| Error::Config(format!("--p is required for {arg}")))?;
        return Ok(ResolvedPrior {
            spec: named_prior(named, p)?,
            label: named.to_string(),
            config_path: None,
        });
    }
    let (text, label, config_path) = if arg.starts_with('{') {
        (arg.to_string(), "bayes".to_string(), None)
    } else {
        let text = fs::read_to_string(arg).map_err(|e| CliError::io(arg, e))?;
        let label = Path::new(arg)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "bayes".into());
        (text, label, Some(arg.to_string()))
    };
    let mut value: Value = serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::InvalidSpec("prior JSON must be an object".into()))?;
    match (obj.get("p").and_then(Value::as_u64), p) {
        (Some(inner), Some(outer)) if inner as usize != outer => {
            return Err(Error::Config(format!("prior has p = {inner} but --p {outer} was given")).into());
        }
        (None, Some(outer)) if !obj.contains_key("p") => {
            obj.insert("p".into(), Value::from(outer as u64));
        }
        (None, None) if !obj.contains_key("p") => {
            return Err(Error::Config("prior JSON has no p; pass --p".into()).into());
        }
        _ => {}
    }
    let spec: PriorSpec<f64> = serde_json::from_value(value).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    Ok(ResolvedPrior {
        spec,
        label,
        config_path,
    })
}

fn resolve_estimator(arg: &str, p: usize, index: usize) -> Result<(Estimator, Option<ResolvedPrior>), CliError> {
    match arg.trim() {
        "js" | "james-stein" => Ok((Estimator::JamesStein, None)),
        "identity" => Ok((Estimator::Identity, None)),
        other => {
            let mut resolved = resolve_prior(other, Some(p))?;
            if resolved.label == "bayes" {
                resolved.label = format!("bayes{}", index + 1);
            }
            Ok((
                Estimator::Bayes {
                    label: resolved.label.clone(),
                    spec: resolved.spec,
                },
                Some(resolved),
            ))
        }
    }
}

fn parse_vector(arg: &str) -> Result<Vec<f64>, CliError> {
    let text = if Path::new(arg).is_file() {
        fs::read_to_string(arg).map_err(|e| CliError::io(arg, e))?
    } else {
        arg.to_string()
    };
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Core(Error::Config(format!("{s:?} is not a finite number"))))
        })
        .collect()
}

fn grid(text: &str) -> Result<Vec<f64>, CliError> {
    Ok(parse_grid(text)?)
}

/// Writes `bytes` to `out` (with its manifest) or to stdout.
fn emit(out: Option<&PathBuf>, bytes: &[u8], manifest: impl FnOnce(Vec<String>) -> RunManifest) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
            let m = manifest(vec![path.display().to_string()]);
            let mpath = RunManifest::path_for(path);
            let json = serde_json::to_vec_pretty(&m).expect("manifest serializes");
            fs::write(&mpath, json).map_err(|e| CliError::io(&mpath, e))?;
            Ok(())
        }
        None => io::stdout().write_all(bytes).map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn manifest_builder<'a>(
    subcommand: &'a str,
    argv: &'a [String],
    priors: Vec<PriorSpec<f64>>,
    seed: Option<u64>,
    config_paths: Vec<String>,
) -> impl FnOnce(Vec<String>) -> RunManifest + 'a {
    move |outputs| RunManifest {
        subcommand: subcommand.to_string(),
        argv: argv.to_vec(),
        priors,
        seed,
        config_paths,
        outputs,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    }
}

#[derive(Serialize)]
struct MinimaxOutput<'a> {
    spec: &'a PriorSpec<f64>,
    #[serde(flatten)]
    report: &'a MinimaxReport<f64>,
}

fn minimax_check(args: &MinimaxArgs) -> Result<(), CliError> {
    let resolved = resolve_prior(&args.prior.prior, args.prior.p)?;
    let report = match args.rule {
        RuleArg::Auto => certify(&resolved.spec)?,
        RuleArg::Theorem1 => check_theorem1(&resolved.spec)?,
    };
    let text = if args.json {
        let out = MinimaxOutput {
            spec: &resolved.spec,
            report: &report,
        };
        serde_json::to_string_pretty(&out).expect("report serializes") + "\n"
    } else {
        let threshold = report.b_threshold.map(|t| format!("{t}")).unwrap_or_else(|| "-".into());
        format!(
            "verdict: {:?}\nrule: {}\nmargin: {:e}\nb_threshold: {}\ndetails: {}\n",
            report.verdict, report.rule, report.margin, threshold, report.details
        )
    };
    io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

#[derive(Serialize)]
struct EstimateOutput {
    y_norm: f64,
    posterior_kappa_mean: f64,
    phi: f64,
    estimate: Vec<f64>,
    james_stein: Option<Vec<f64>>,
}

fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let resolved = resolve_prior(&args.prior.prior, args.prior.p)?;
    let cfg = args.quad.config()?;
    let y = parse_vector(&args.y)?;
    let spec = &resolved.spec;
    if y.len() != spec.p() {
        return Err(Error::Dimension {
            expected: spec.p(),
            found: y.len(),
        }
        .into());
    }
    let r2: f64 = y.iter().map(|v| v * v).sum();
    let mean = posterior_kappa_mean(spec, r2, &cfg)?;
    let out = EstimateOutput {
        y_norm: r2.sqrt(),
        posterior_kappa_mean: mean,
        phi: shrinkage_factor(spec, r2, &cfg)?,
        estimate: y.iter().map(|v| (1.0 - mean) * v).collect(),
        james_stein: james_stein(&y).ok(),
    };
    let text = serde_json::to_string_pretty(&out).expect("estimate serializes") + "\n";
    io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

fn shrink_curve(args: &ShrinkArgs, argv: &[String]) -> Result<(), CliError> {
    let resolved = resolve_prior(&args.prior.prior, args.prior.p)?;
    let cfg = args.quad.config()?;
    let curve = shrink_sweep(&resolved.spec, &grid(&args.grid)?, &cfg)?;
    let mut buf = Vec::new();
    write_shrink_csv(&curve, &mut buf).expect("in-memory write");
    let paths = resolved.config_path.into_iter().collect();
    emit(args.out.as_ref(), &buf, manifest_builder("shrink-curve", argv, vec![resolved.spec], None, paths))
}

fn risk(args: &RiskArgs, argv: &[String]) -> Result<(), CliError> {
    let cfg = args.quad.config()?;
    let mut estimators = Vec::new();
    let mut priors = Vec::new();
    let mut paths = Vec::new();
    for (i, item) in args.priors.iter().enumerate() {
        let (est, resolved) = resolve_estimator(item, args.p, i)?;
        if let Some(r) = resolved {
            priors.push(r.spec);
            paths.extend(r.config_path);
        }
        estimators.push(est);
    }
    let curve = risk_sweep(&estimators, args.p, &grid(&args.grid)?, args.reps, args.seed, &cfg)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).expect("in-memory write");
    emit(args.out.as_ref(), &buf, manifest_builder("risk-sweep", argv, priors, Some(args.seed), paths))
}

fn sample(args: &SampleArgs, argv: &[String]) -> Result<(), CliError> {
    let resolved = resolve_prior(&args.prior.prior, args.prior.p)?;
    let y = parse_vector(&args.y)?;
    let cfg = SamplerConfig {
        iterations: args.iters,
        burn_in: args.burn,
        seed: args.seed,
        chain_id: args.chain,
        rao_blackwell: !args.plain,
        ..SamplerConfig::for_spec(&resolved.spec)
    };
    let trace = run_chain(&resolved.spec, &y, &cfg)?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf, args.beta_columns).expect("in-memory write");
    let (kappa_mean, kappa_se) = trace.kappa_mean()?;
    let beta_mean = posterior_mean(&trace)?;
    let beta_se = posterior_mean_se(&trace);
    let paths = resolved.config_path.into_iter().collect();
    emit(args.out.as_ref(), &buf, manifest_builder("sample-posterior", argv, vec![resolved.spec], Some(args.seed), paths))?;
    if args.out.is_some() {
        let summary = serde_json::json!({
            "accept_rate": trace.accept_rate(),
            "kappa_mean": kappa_mean,
            "kappa_mcse": kappa_se,
            "posterior_mean": beta_mean,
            "posterior_mean_mcse": beta_se,
        });
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    }
    Ok(())
}

fn density(args: &DensityArgs, argv: &[String]) -> Result<(), CliError> {
    let resolved = resolve_prior(&args.prior.prior, args.prior.p)?;
    let rows = prior_density_sweep(&resolved.spec, &grid(&args.grid)?)?;
    let mut buf = Vec::new();
    write_prior_csv(&rows, &mut buf).expect("in-memory write");
    let paths = resolved.config_path.into_iter().collect();
    emit(args.out.as_ref(), &buf, manifest_builder("prior-density", argv, vec![resolved.spec], None, paths))
}

fn replay(args: &ReplayArgs) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(&args.manifest).map_err(|e| CliError::io(&args.manifest, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad manifest: {e}")))?;
    if manifest.argv.first().map(String::as_str) == Some("replay") {
        return Err(Error::Config("a manifest cannot replay a replay".into()).into());
    }
    let mut argv = manifest.argv;
    if let Some(out) = &args.out {
        let out = out.display().to_string();
        let mut i = 0;
        let mut replaced = false;
        while i < argv.len() {
            if argv[i] == "--out" && i + 1 < argv.len() {
                argv[i + 1] = out.clone();
                replaced = true;
                i += 1;
            } else if argv[i].starts_with("--out=") {
                argv[i] = format!("--out={out}");
                replaced = true;
            }
            i += 1;
        }
        if !replaced {
            argv.push("--out".into());
            argv.push(out);
        }
    }
    Ok(argv)
}

fn dispatch(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    match &cli.command {
        Command::MinimaxCheck(a) => minimax_check(a),
        Command::Estimate(a) => estimate(a),
        Command::ShrinkCurve(a) => shrink_curve(a, argv),
        Command::RiskSweep(a) => risk(a, argv),
        Command::SamplePosterior(a) => sample(a, argv),
        Command::PriorDensity(a) => density(a, argv),
        Command::Replay(a) => {
            let replayed = replay(a)?;
            let cli = parse(&replayed).map_err(|e| Error::Config(e.to_string()))?;
            dispatch(cli, &replayed)
        }
    }
}

fn parse(args: &[String]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(std::iter::once("shrinkprior".to_string()).chain(args.iter().cloned()))
}

/// Runs the command line `args` (without the program name) and returns the
/// process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
