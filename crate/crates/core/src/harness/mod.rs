//! Seeded Monte Carlo grids.
//!
//! An experiment is a list of cells (one point of the design grid each); every
//! cell runs `M` independent replicates. Replicate `r` of cell `c` draws from
//! its own stream seeded by `hash(seed, c, r)`, so the output depends on the
//! configuration and seed only, never on the number of worker threads.

pub mod config;
pub mod output;

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;

pub use config::{parse_family, ExperimentConfig, ExperimentKind};
pub use output::{echo_text, format_number, write_csv};

use crate::asymptotics::{
    asymptotic_power, ncp_hpv_iii, ncp_oracle_iii, power_grid_alternative, QaLimit, Regime,
};
use crate::distributions::{chi2_quantile, chi2_sf};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{sample, sample_high_dim, RadialFamily, SpikeRate, SpikedModel};
use crate::rng::{substream_seed, Rng};
use crate::statistics::{
    anderson_statistic, decide, hpv_statistic, kurtosis_estimate_with, oracle_statistic,
    SampleSummary,
};

/// Aggregated outcome of one test at one level in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub params: Vec<String>,
    pub test: String,
    pub alpha: f64,
    pub hits: usize,
    /// Replicates requested.
    pub m: usize,
    /// Replicates for which the statistic could not be computed.
    pub degenerate: usize,
    /// Asymptotic prediction of the rejection frequency, if known.
    pub reference: Option<f64>,
}

impl CellRow {
    pub fn valid(&self) -> usize {
        self.m - self.degenerate
    }

    pub fn freq(&self) -> f64 {
        self.hits as f64 / self.valid() as f64
    }

    pub fn se(&self) -> f64 {
        let f = self.freq();
        (f * (1.0 - f) / self.valid() as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub param_names: Vec<&'static str>,
    pub rows: Vec<CellRow>,
    pub wall_time: Duration,
}

impl ExperimentResult {
    /// First row matching a test name, a level, and a predicate on the cell
    /// parameters.
    pub fn find(&self, test: &str, alpha: f64, pred: impl Fn(&[String]) -> bool) -> Option<&CellRow> {
        self.rows
            .iter()
            .find(|r| r.test == test && r.alpha == alpha && pred(&r.params))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        write_csv(self, &mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }
}

pub const ANDERSON: &str = "anderson";
pub const HPV: &str = "hpv";
pub const ANDERSON_PSEUDO: &str = "anderson_pseudo";
pub const HPV_PSEUDO: &str = "hpv_pseudo";
pub const ORACLE: &str = "oracle";

/// Asymptotic rejection probability attached to a test in a cell.
#[derive(Debug, Clone, Copy)]
enum Reference {
    None,
    /// `P[scale · χ²_df > crit]`.
    Chi2 { scale: f64 },
    /// `P[scale · L > crit]` with `L` the Anderson limit law.
    QaLimit { v: f64, kappa: f64, scale: f64 },
    /// Power of a noncentral χ² test.
    Noncentral { ncp: f64 },
}

#[derive(Debug, Clone)]
struct TestSpec {
    name: &'static str,
    df: usize,
    reference: Reference,
}

#[derive(Debug, Clone)]
enum Job {
    /// Test `θ₀ = θ₁` (or `θ₀ = e₁` against `θ₁`) on samples from `model`.
    Standard {
        model: SpikedModel,
        family: RadialFamily,
        theta0: Vec<f64>,
        null_sigma: Option<Matrix>,
        pseudo: bool,
    },
    HighDim {
        model: SpikedModel,
        family: RadialFamily,
        theta0: Vec<f64>,
        with_anderson: bool,
    },
}

#[derive(Debug, Clone)]
struct Cell {
    params: Vec<String>,
    n: usize,
    tests: Vec<TestSpec>,
    job: Job,
}

fn unit(p: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; p];
    v[i] = 1.0;
    v
}

/// Runs the experiment described by `config`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let (param_names, cells) = build_cells(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))?;
    let stats = pool.install(|| simulate(config, &cells));
    let rows = pool.install(|| aggregate(config, &cells, &stats))?;
    Ok(ExperimentResult {
        config: config.clone(),
        param_names,
        rows,
        wall_time: start.elapsed(),
    })
}

pub fn run_null_grid(config: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(config, ExperimentKind::Null)?;
    run(config)
}

pub fn run_power_grid(config: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(config, ExperimentKind::Power)?;
    run(config)
}

pub fn run_regime3_size(config: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(config, ExperimentKind::Regime3)?;
    run(config)
}

pub fn run_highdim(config: &ExperimentConfig) -> Result<ExperimentResult> {
    expect_kind(config, ExperimentKind::HighDim)?;
    run(config)
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if config.kind != kind {
        return Err(Error::validation(format!(
            "expected a '{}' configuration, got '{}'",
            kind.name(),
            config.kind.name()
        )));
    }
    Ok(())
}

fn build_cells(cfg: &ExperimentConfig) -> Result<(Vec<&'static str>, Vec<Cell>)> {
    let p = cfg.p;
    let e1 = unit(p, 0);
    let mut cells = Vec::new();
    let names: Vec<&'static str> = match cfg.kind {
        ExperimentKind::Null => vec!["family", "ell", "regime", "p", "n", "v"],
        ExperimentKind::Power => vec!["family", "k", "tau_norm", "p", "n", "v"],
        ExperimentKind::Regime3 => vec!["family", "v", "p", "n"],
        ExperimentKind::HighDim => vec!["family", "c", "p", "n", "v"],
    };
    for &family in &cfg.families {
        let kappa = family.kurtosis(p);
        let elliptical = family != RadialFamily::Gaussian;
        let raw = 1.0 + kappa;
        match cfg.kind {
            ExperimentKind::Null => {
                for &l in &cfg.ell {
                    let regime = Regime::from_exponent(l)?;
                    let qa = |scale| match regime {
                        Regime::I | Regime::II => Reference::Chi2 { scale },
                        Regime::III => Reference::QaLimit { v: cfg.v, kappa, scale },
                        Regime::IV => Reference::QaLimit { v: 0.0, kappa, scale },
                    };
                    let model = SpikedModel::new(cfg.sigma, cfg.v, SpikeRate::Exponent(l), e1.clone())?;
                    cells.push(Cell {
                        params: vec![
                            family.label(),
                            l.to_string(),
                            regime.label().into(),
                            p.to_string(),
                            cfg.n.to_string(),
                            format_number(cfg.v),
                        ],
                        n: cfg.n,
                        tests: vec![
                            TestSpec { name: ANDERSON, df: p - 1, reference: qa(raw) },
                            TestSpec { name: HPV, df: p - 1, reference: Reference::Chi2 { scale: raw } },
                            TestSpec { name: ANDERSON_PSEUDO, df: p - 1, reference: qa(1.0) },
                            TestSpec { name: HPV_PSEUDO, df: p - 1, reference: Reference::Chi2 { scale: 1.0 } },
                        ],
                        job: Job::Standard {
                            model,
                            family,
                            theta0: e1.clone(),
                            null_sigma: None,
                            pseudo: true,
                        },
                    });
                }
            }
            ExperimentKind::Power => {
                for &k in &cfg.k {
                    let (theta1, alt) = power_grid_alternative(p, k)?;
                    let t = alt.tau_norm().min(std::f64::consts::SQRT_2);
                    let model = SpikedModel::new(cfg.sigma, cfg.v, SpikeRate::Exponent(3), theta1)?;
                    let null = SpikedModel::new(cfg.sigma, cfg.v, SpikeRate::Exponent(3), e1.clone())?;
                    let reference = |ncp: f64| {
                        if elliptical {
                            Reference::None
                        } else {
                            Reference::Noncentral { ncp }
                        }
                    };
                    cells.push(Cell {
                        params: vec![
                            family.label(),
                            k.to_string(),
                            format_number(alt.tau_norm()),
                            p.to_string(),
                            cfg.n.to_string(),
                            format_number(cfg.v),
                        ],
                        n: cfg.n,
                        tests: vec![
                            TestSpec { name: HPV, df: p - 1, reference: reference(ncp_hpv_iii(cfg.v, t)?) },
                            TestSpec { name: ORACLE, df: p, reference: reference(ncp_oracle_iii(cfg.v, t)?) },
                        ],
                        job: Job::Standard {
                            model,
                            family,
                            theta0: e1.clone(),
                            null_sigma: Some(null.covariance_at(cfg.n)),
                            pseudo: false,
                        },
                    });
                }
            }
            ExperimentKind::Regime3 => {
                for &v in &cfg.v_grid {
                    let model = SpikedModel::new(cfg.sigma, v, SpikeRate::Exponent(3), e1.clone())?;
                    let mut tests = vec![
                        TestSpec { name: ANDERSON, df: p - 1, reference: Reference::QaLimit { v, kappa, scale: raw } },
                        TestSpec { name: HPV, df: p - 1, reference: Reference::Chi2 { scale: raw } },
                    ];
                    if elliptical {
                        tests.push(TestSpec {
                            name: ANDERSON_PSEUDO,
                            df: p - 1,
                            reference: Reference::QaLimit { v, kappa, scale: 1.0 },
                        });
                        tests.push(TestSpec { name: HPV_PSEUDO, df: p - 1, reference: Reference::Chi2 { scale: 1.0 } });
                    }
                    cells.push(Cell {
                        params: vec![family.label(), format_number(v), p.to_string(), cfg.n.to_string()],
                        n: cfg.n,
                        tests,
                        job: Job::Standard {
                            model,
                            family,
                            theta0: e1.clone(),
                            null_sigma: None,
                            pseudo: elliptical,
                        },
                    });
                }
            }
            ExperimentKind::HighDim => {
                for &c in &cfg.c {
                    let pc = (c * cfg.n as f64).round() as usize;
                    let theta = unit(pc, 0);
                    let model = SpikedModel::new(cfg.sigma, cfg.v, SpikeRate::Constant(1.0), theta.clone())?;
                    let reference = if elliptical {
                        Reference::None
                    } else {
                        Reference::Chi2 { scale: 1.0 }
                    };
                    let with_anderson = pc < cfg.n;
                    let mut tests = vec![TestSpec { name: HPV, df: pc - 1, reference }];
                    if with_anderson {
                        tests.push(TestSpec { name: ANDERSON, df: pc - 1, reference });
                    }
                    cells.push(Cell {
                        params: vec![
                            family.label(),
                            format_number(c),
                            pc.to_string(),
                            cfg.n.to_string(),
                            format_number(cfg.v),
                        ],
                        n: cfg.n,
                        tests,
                        job: Job::HighDim {
                            model,
                            family,
                            theta0: theta,
                            with_anderson,
                        },
                    });
                }
            }
        }
    }
    Ok((names, cells))
}

type Stats = Vec<Option<f64>>;

fn finite(x: Result<f64>) -> Option<f64> {
    x.ok().filter(|v| !v.is_nan())
}

fn replicate(cell: &Cell, rng: &mut Rng) -> Stats {
    let none = || vec![None; cell.tests.len()];
    match &cell.job {
        Job::Standard {
            model,
            family,
            theta0,
            null_sigma,
            pseudo,
        } => {
            let Ok(x) = sample(model, cell.n, *family, rng) else {
                return none();
            };
            let Ok(s) = SampleSummary::new(&x) else {
                return none();
            };
            let kappa_hat = if *pseudo {
                kurtosis_estimate_with(&x, &s).ok()
            } else {
                None
            };
            let mut a = None;
            let mut h = None;
            cell.tests
                .iter()
                .map(|t| match t.name {
                    ANDERSON => *a.get_or_insert_with(|| finite(anderson_statistic(&s, theta0, 1))),
                    HPV => *h.get_or_insert_with(|| finite(hpv_statistic(&s, theta0, 1))),
                    ANDERSON_PSEUDO => {
                        let q = *a.get_or_insert_with(|| finite(anderson_statistic(&s, theta0, 1)));
                        q.zip(kappa_hat).map(|(q, k)| q / (1.0 + k))
                    }
                    HPV_PSEUDO => {
                        let q = *h.get_or_insert_with(|| finite(hpv_statistic(&s, theta0, 1)));
                        q.zip(kappa_hat).map(|(q, k)| q / (1.0 + k))
                    }
                    ORACLE => null_sigma
                        .as_ref()
                        .and_then(|sig| finite(oracle_statistic(&s, theta0, sig))),
                    _ => None,
                })
                .collect()
        }
        Job::HighDim {
            model,
            family,
            theta0,
            with_anderson,
        } => {
            let Ok(x) = sample_high_dim(model, cell.n, *family, rng) else {
                return none();
            };
            let summary = if *with_anderson {
                SampleSummary::new(&x)
            } else {
                SampleSummary::new_unchecked(&x)
            };
            let Ok(s) = summary else {
                return none();
            };
            cell.tests
                .iter()
                .map(|t| match t.name {
                    HPV => finite(hpv_statistic(&s, theta0, 1)),
                    ANDERSON => finite(anderson_statistic(&s, theta0, 1)),
                    _ => None,
                })
                .collect()
        }
    }
}

fn simulate(cfg: &ExperimentConfig, cells: &[Cell]) -> Vec<Stats> {
    let m = cfg.m;
    (0..cells.len() * m)
        .into_par_iter()
        .map(|idx| {
            let (c, r) = (idx / m, idx % m);
            let mut rng = Rng::for_replicate(cfg.seed, c as u64, r as u64);
            replicate(&cells[c], &mut rng)
        })
        .collect()
}

/// Seeds for reference draws live in their own stream family.
const REFERENCE_SALT: u64 = 0x5EED_0F0E_F00D;

fn aggregate(cfg: &ExperimentConfig, cells: &[Cell], stats: &[Stats]) -> Result<Vec<CellRow>> {
    let m = cfg.m;
    let mut limit_draws: HashMap<(u64, u64), Vec<f64>> = HashMap::new();
    let mut rows = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let reps = &stats[c * m..(c + 1) * m];
        for (t, spec) in cell.tests.iter().enumerate() {
            let degenerate = reps.iter().filter(|s| s[t].is_none()).count();
            for &alpha in &cfg.alpha {
                let crit = chi2_quantile(1.0 - alpha, spec.df)?;
                let hits = reps
                    .iter()
                    .filter(|s| s[t].is_some_and(|q| q > crit))
                    .count();
                let reference = match spec.reference {
                    Reference::None => None,
                    Reference::Chi2 { scale } => Some(chi2_sf(crit / scale, spec.df)),
                    Reference::Noncentral { ncp } => Some(asymptotic_power(spec.df, ncp, alpha)?),
                    Reference::QaLimit { v, kappa, scale } => {
                        let key = (v.to_bits(), kappa.to_bits());
                        let draws = match limit_draws.entry(key) {
                            Entry::Occupied(e) => e.into_mut(),
                            Entry::Vacant(e) => {
                                let sampler = QaLimit::new(cfg.p, v, kappa)?;
                                let seed = substream_seed(cfg.seed ^ REFERENCE_SALT, key.0, key.1);
                                e.insert(
                                    (0..cfg.reference_m as u64)
                                        .into_par_iter()
                                        .map(|r| sampler.draw(&mut Rng::for_replicate(seed, 0, r)))
                                        .collect(),
                                )
                            }
                        };
                        let over = draws.iter().filter(|&&q| scale * q > crit).count();
                        Some(over as f64 / draws.len() as f64)
                    }
                };
                rows.push(CellRow {
                    params: cell.params.clone(),
                    test: spec.name.to_string(),
                    alpha,
                    hits,
                    m,
                    degenerate,
                    reference,
                });
            }
        }
    }
    Ok(rows)
}

/// Anderson and HPV p-values with one observation removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaveOneOut {
    pub removed: usize,
    pub anderson: f64,
    pub hpv: f64,
}

/// Recomputes both tests of `θ₀` as the `j`-th principal direction on each
/// of the `n` subsamples that drop a single row.
pub fn run_leave_one_out(x: &Matrix, theta0: &[f64], j: usize) -> Result<Vec<LeaveOneOut>> {
    let (n, p) = (x.rows(), x.cols());
    if n < p + 2 {
        return Err(Error::validation(format!(
            "leave-one-out needs at least p + 2 = {} observations",
            p + 2
        )));
    }
    (0..n)
        .map(|i| {
            let rows: Vec<f64> = (0..n)
                .filter(|&r| r != i)
                .flat_map(|r| x.row(r).iter().copied())
                .collect();
            let sub = Matrix::from_row_major(n - 1, p, rows)?;
            let s = SampleSummary::new(&sub)?;
            let a = decide(anderson_statistic(&s, theta0, j)?, p - 1, 0.05)?;
            let h = decide(hpv_statistic(&s, theta0, j)?, p - 1, 0.05)?;
            Ok(LeaveOneOut {
                removed: i,
                anderson: a.pvalue,
                hpv: h.pvalue,
            })
        })
        .collect()
}
