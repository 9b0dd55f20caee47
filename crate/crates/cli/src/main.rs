//! Command-line front end: tests on user data, experiment grids, limit-law
//! risks, power curves and the banknote case study.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use weakpca::asymptotics::{
    asymptotic_power, ncp_hpv_iii, ncp_oracle_iii, type1_risk_iii, type1_risk_iv, QaLimit, RiskEstimate,
};
use weakpca::data::{self, Dataset};
use weakpca::distributions::chi2_quantile;
use weakpca::harness::{self, echo_text, format_number as fmt, ExperimentConfig, ExperimentKind};
use weakpca::harness::config::DEFAULT_SEED;
use weakpca::linalg::norm;
use weakpca::statistics::{
    anderson_statistic, decide, hpv_statistic, kurtosis_estimate_with, pseudo_gaussian, SampleSummary, TestOutcome,
};
use weakpca::Rng;

#[derive(Parser, Debug)]
#[command(name = "weakpca", version, about = "Tests for principal directions under weak identifiability")]
struct Cli {
    /// Print resolved configurations and timings to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Anderson and HPV tests of H0: theta_j = theta0 on a CSV sample.
    Test(TestArgs),
    /// Run a Monte Carlo experiment grid and emit CSV.
    Simulate(SimulateArgs),
    /// Approximate asymptotic type-I risk of Anderson's test in regime (iii)/(iv).
    Asymptotic(AsymptoticArgs),
    /// Regime-(iii) noncentralities and asymptotic powers over a grid of ||tau||.
    Power(PowerArgs),
    /// The banknote case study (printed covariance matrix, or raw data).
    Banknote(BanknoteArgs),
}

#[derive(Args, Debug)]
struct TestArgs {
    /// CSV file: header row, one observation per line.
    data: PathBuf,
    /// Hypothesized direction, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    theta0: String,
    /// Index of the eigenvector under test (1 = leading).
    #[arg(long, default_value_t = 1)]
    j: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also report the pseudo-Gaussian versions and the kurtosis estimate.
    #[arg(long)]
    pseudo: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// null | power | regime3 | highdim
    #[arg(long)]
    experiment: ExperimentKind,
    /// Named parameter set (smoke, size, size-full, elliptical, grid, sweep, table).
    #[arg(long)]
    preset: Option<String>,
    /// Full-scale sample size for the null grid (n = 500000).
    #[arg(long)]
    full: bool,
    /// Config file in `key = value` form; applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline override `key=value`; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Replicates per cell.
    #[arg(long = "M", alias = "m")]
    m: Option<String>,
    #[arg(long)]
    v: Option<String>,
    #[arg(long)]
    ell: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long = "v-grid")]
    v_grid: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    families: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "reference-m")]
    reference_m: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// CSV destination; the config echo goes next to it with a `.txt`
    /// extension. Without it the CSV is written to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AsymptoticArgs {
    /// iii | iv
    #[arg(long)]
    regime: String,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 0.0)]
    v: f64,
    /// One or more levels, comma-separated.
    #[arg(long, default_value = "0.05")]
    alpha: String,
    #[arg(long = "M", alias = "m", default_value_t = 100_000)]
    m: usize,
    /// Kurtosis of the elliptical family; the risk is then that of the
    /// pseudo-Gaussian test.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    kappa: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug)]
struct PowerArgs {
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated values of ||tau|| in [0, sqrt(2)]; default 15 equispaced points.
    #[arg(long = "tau-grid")]
    tau_grid: Option<String>,
}

#[derive(Args, Debug)]
struct BanknoteArgs {
    /// Raw measurements (85 x 4); without it the printed covariance matrix is used.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a, cli.verbose),
        Command::Asymptotic(a) => cmd_asymptotic(a),
        Command::Power(a) => cmd_power(a),
        Command::Banknote(a) => cmd_banknote(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Deterministic commands have no seed; they still say so.
fn print_no_seed() {
    println!("seed: none (deterministic)");
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("{what}: '{}' is not a number", t.trim()))
        })
        .collect()
}

fn parse_theta0(s: &str, p: usize) -> Result<Vec<f64>> {
    let t = parse_floats(s, "theta0")?;
    if t.len() != p {
        bail!("theta0 has {} entries but the data have {p} columns", t.len());
    }
    let n = norm(&t);
    if (n - 1.0).abs() > 1e-6 {
        bail!("theta0 must have unit norm (got {n}); normalize it first");
    }
    Ok(t.into_iter().map(|x| x / n).collect())
}

fn print_outcome(name: &str, o: &TestOutcome) {
    println!(
        "{name:<16} statistic = {}  df = {}  p-value = {}  {} at {}",
        fmt(o.statistic),
        o.df,
        fmt(o.pvalue),
        if o.reject { "reject" } else { "do not reject" },
        fmt(o.alpha)
    );
}

fn cmd_test(a: TestArgs) -> Result<()> {
    let ds = data::load_csv(&a.data)?;
    let theta0 = parse_theta0(&a.theta0, ds.p())?;
    let s = SampleSummary::new(&ds.values)?;
    print_no_seed();
    println!("n = {}  p = {}  j = {}", s.n(), s.p(), a.j);
    let df = s.p() - 1;
    let qa = anderson_statistic(&s, &theta0, a.j)?;
    let qh = hpv_statistic(&s, &theta0, a.j)?;
    print_outcome("anderson", &decide(qa, df, a.alpha)?);
    print_outcome("hpv", &decide(qh, df, a.alpha)?);
    if a.pseudo {
        let k = kurtosis_estimate_with(&ds.values, &s)?;
        println!("kappa_hat = {}", fmt(k));
        print_outcome("anderson_pseudo", &decide(pseudo_gaussian(qa, k)?, df, a.alpha)?);
        print_outcome("hpv_pseudo", &decide(pseudo_gaussian(qh, k)?, df, a.alpha)?);
    }
    Ok(())
}

fn resolve_config(a: &SimulateArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&a.preset, a.full) {
        (Some(_), true) => bail!("--full and --preset are mutually exclusive"),
        (Some(name), false) => ExperimentConfig::preset(a.experiment, name)?,
        (None, true) => {
            if a.experiment != ExperimentKind::Null {
                bail!("--full applies to the null experiment only");
            }
            ExperimentConfig::preset(a.experiment, "size-full")?
        }
        (None, false) => ExperimentConfig::defaults(a.experiment),
    };
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        cfg.apply_text(&text, path)?;
    }
    let inline = [
        ("p", &a.p),
        ("n", &a.n),
        ("m", &a.m),
        ("v", &a.v),
        ("ell", &a.ell),
        ("k", &a.k),
        ("v_grid", &a.v_grid),
        ("c", &a.c),
        ("families", &a.families),
        ("alpha", &a.alpha),
        ("reference_m", &a.reference_m),
    ];
    for (key, value) in inline {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    for kv in &a.overrides {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got '{kv}'");
        };
        cfg.set(k, v)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn echo_path(out: &Path) -> PathBuf {
    out.with_extension("txt")
}

fn cmd_simulate(a: SimulateArgs, verbose: bool) -> Result<()> {
    let cfg = resolve_config(&a)?;
    eprintln!("seed: {}", cfg.seed);
    if verbose {
        eprint!("{}", cfg.to_text());
    }
    let res = harness::run(&cfg)?;
    let csv = res.to_csv_string()?;
    match &a.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("cannot write {}", path.display()))?;
            let echo = echo_path(path);
            fs::write(&echo, echo_text(&res)).with_context(|| format!("cannot write {}", echo.display()))?;
            eprintln!("wrote {} and {}", path.display(), echo.display());
        }
        None => print!("{csv}"),
    }
    if verbose {
        eprintln!("wall time: {} s", fmt(res.wall_time.as_secs_f64()));
    }
    Ok(())
}

fn cmd_asymptotic(a: AsymptoticArgs) -> Result<()> {
    let v = match a.regime.to_ascii_lowercase().as_str() {
        "iii" | "3" => a.v,
        "iv" | "4" => 0.0,
        other => bail!("regime must be 'iii' or 'iv', got '{other}'"),
    };
    let alphas = parse_floats(&a.alpha, "alpha")?;
    println!("seed: {}", a.seed);
    println!("regime,p,v,kappa,alpha,risk,se,M");
    for (i, &alpha) in alphas.iter().enumerate() {
        let mut rng = Rng::for_replicate(a.seed, 0, i as u64);
        let est = if a.kappa == 0.0 {
            if v == 0.0 {
                type1_risk_iv(a.p, alpha, a.m, &mut rng)?
            } else {
                type1_risk_iii(a.p, v, alpha, a.m, &mut rng)?
            }
        } else {
            if a.m == 0 {
                bail!("need at least one replicate");
            }
            let sampler = QaLimit::new(a.p, v, a.kappa)?;
            let crit = chi2_quantile(1.0 - alpha, a.p - 1)?;
            let hits = (0..a.m).filter(|_| sampler.draw(&mut rng) > crit).count();
            RiskEstimate::from_counts(hits, a.m)
        };
        println!(
            "{},{},{},{},{},{},{},{}",
            if v == 0.0 { "iv" } else { "iii" },
            a.p,
            fmt(v),
            fmt(a.kappa),
            fmt(alpha),
            fmt(est.freq),
            fmt(est.se),
            est.m
        );
    }
    Ok(())
}

fn cmd_power(a: PowerArgs) -> Result<()> {
    if a.p < 2 {
        bail!("p must be at least 2");
    }
    let grid = match &a.tau_grid {
        Some(s) => parse_floats(s, "tau-grid")?,
        None => (0..15).map(|i| std::f64::consts::SQRT_2 * i as f64 / 14.0).collect(),
    };
    print_no_seed();
    println!("tau_norm,ncp_hpv,ncp_oracle,power_hpv,power_oracle");
    for t in grid {
        let nh = ncp_hpv_iii(a.v, t)?;
        let no = ncp_oracle_iii(a.v, t)?;
        println!(
            "{},{},{},{},{}",
            fmt(t),
            fmt(nh),
            fmt(no),
            fmt(asymptotic_power(a.p - 1, nh, a.alpha)?),
            fmt(asymptotic_power(a.p, no, a.alpha)?)
        );
    }
    Ok(())
}

fn print_eigen(s: &SampleSummary, scale: f64) {
    let es = s.eigen();
    for k in 0..es.dim() {
        let v: Vec<String> = es.vector(k).iter().map(|&x| fmt(x)).collect();
        println!("  lambda_{} = {}  theta_{} = ({})", k + 1, fmt(es.values[k] * scale), k + 1, v.join(", "));
    }
}

fn report_tests(s: &SampleSummary, theta0: &[f64], alpha: f64) -> Result<()> {
    let df = s.p() - 1;
    print_outcome("anderson", &decide(anderson_statistic(s, theta0, 2)?, df, alpha)?);
    print_outcome("hpv", &decide(hpv_statistic(s, theta0, 2)?, df, alpha)?);
    Ok(())
}

fn cmd_banknote(a: BanknoteArgs) -> Result<()> {
    print_no_seed();
    match &a.data {
        None => {
            let s = SampleSummary::from_covariance(data::BANKNOTE_N, data::banknote_covariance())?;
            let theta0 = data::banknote_theta0();
            let n = data::BANKNOTE_N as f64;
            println!("printed covariance matrix, n = {}, S = printed x (n-1)/n", data::BANKNOTE_N);
            println!("eigen-decomposition of S (eigenvalues rescaled by n/(n-1) to match the printed scale):");
            print_eigen(&s, n / (n - 1.0));
            println!("H0: theta_2 = (1, 1, 0, 0)/sqrt(2)");
            report_tests(&s, &theta0, a.alpha)
        }
        Some(path) => {
            let ds = data::load_csv(path)?;
            if (ds.n(), ds.p()) != (data::BANKNOTE_N, 4) {
                eprintln!(
                    "warning: expected {} x 4 measurements, got {} x {}; proceeding generically",
                    data::BANKNOTE_N,
                    ds.n(),
                    ds.p()
                );
            }
            banknote_raw(&ds, a.alpha)
        }
    }
}

fn banknote_raw(ds: &Dataset, alpha: f64) -> Result<()> {
    let p = ds.p();
    if p < 2 {
        bail!("need at least two variables");
    }
    let s = SampleSummary::new(&ds.values)?;
    let mut theta0 = vec![0.0; p];
    theta0[0] = std::f64::consts::FRAC_1_SQRT_2;
    theta0[1] = std::f64::consts::FRAC_1_SQRT_2;
    println!("n = {}  p = {}  columns: {}", ds.n(), p, ds.names.join(", "));
    println!("eigen-decomposition of S (divisor n):");
    print_eigen(&s, 1.0);
    println!("H0: theta_2 = (e_1 + e_2)/sqrt(2)");
    report_tests(&s, &theta0, alpha)?;
    let loo = harness::run_leave_one_out(&ds.values, &theta0, 2)?;
    println!("leave-one-out p-values over {} subsamples:", loo.len());
    for (name, vals) in [
        ("anderson", loo.iter().map(|r| r.anderson).collect::<Vec<_>>()),
        ("hpv", loo.iter().map(|r| r.hpv).collect()),
    ] {
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        let rejections = vals.iter().filter(|&&q| q < alpha).count();
        println!(
            "  {name:<9} min = {}  median = {}  max = {}  rejections at {} = {}/{}",
            fmt(sorted[0]),
            fmt(median(&sorted)),
            fmt(sorted[sorted.len() - 1]),
            fmt(alpha),
            rejections,
            vals.len()
        );
    }
    Ok(())
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}
