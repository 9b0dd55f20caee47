//! Experiment configuration and its plain-text `key = value` format.
//!
//! Grammar, one setting per line:
//!
//! ```text
//! # comment
//! key = value            # trailing comments are allowed too
//! list_key = 1, 2, 3
//! ```
//!
//! Blank lines are ignored; keys are case-insensitive; later lines override
//! earlier ones. The same grammar is used for the config echo written next to
//! every result file, so an echo can be fed back in to rerun an experiment.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::RadialFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Null rejection frequencies over the rate grid `r_n = n^{-ℓ/6}`.
    Null,
    /// Power in regime (iii) along the alternatives `θ₁ = (cos kπ/40, sin kπ/40, 0, ...)`.
    Power,
    /// Size of Anderson's test in regime (iii) over a grid of spike sizes.
    Regime3,
    /// Size with `p = c n` and a fixed, non-vanishing spike.
    HighDim,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Null => "null",
            ExperimentKind::Power => "power",
            ExperimentKind::Regime3 => "regime3",
            ExperimentKind::HighDim => "highdim",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "null" => Ok(ExperimentKind::Null),
            "power" => Ok(ExperimentKind::Power),
            "regime3" | "iii" => Ok(ExperimentKind::Regime3),
            "highdim" => Ok(ExperimentKind::HighDim),
            other => Err(Error::validation(format!(
                "unknown experiment '{other}' (expected null, power, regime3 or highdim)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub p: usize,
    pub n: usize,
    /// Replicates per cell.
    pub m: usize,
    pub sigma: f64,
    /// Spike size (null and power grids).
    pub v: f64,
    /// Rate exponents `ℓ` (null grid).
    pub ell: Vec<u8>,
    /// Alternative indices `k` (power grid).
    pub k: Vec<u32>,
    /// Spike sizes (regime-(iii) size curve).
    pub v_grid: Vec<f64>,
    /// Ratios `c = p/n` (high-dimensional grid).
    pub c: Vec<f64>,
    pub families: Vec<RadialFamily>,
    pub alpha: Vec<f64>,
    /// Draws used for limit-law reference values.
    pub reference_m: usize,
    pub seed: u64,
    /// Worker threads; 0 means one per available core. Does not affect results.
    pub workers: usize,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            kind,
            p: 10,
            n: 200,
            m: 1000,
            sigma: 1.0,
            v: 1.0,
            ell: (0..=5).collect(),
            k: vec![0, 5, 10, 15, 20],
            v_grid: vec![0.0, 1.0, 2.0, 4.0, 8.0],
            c: vec![0.5, 1.0, 2.0],
            families: vec![RadialFamily::Gaussian],
            alpha: vec![0.05],
            reference_m: 20_000,
            seed: DEFAULT_SEED,
            workers: 0,
        };
        match kind {
            ExperimentKind::Null => base,
            ExperimentKind::Power => ExperimentConfig {
                p: 2,
                n: 10_000,
                ..base
            },
            ExperimentKind::Regime3 => ExperimentConfig {
                p: 2,
                n: 10_000,
                ..base
            },
            ExperimentKind::HighDim => ExperimentConfig { m: 200, ..base },
        }
    }

    /// Named parameter sets. `smoke` exists for every experiment; the others
    /// mirror the published simulation designs at desk scale (`size-full`
    /// restores the largest sample size).
    pub fn preset(kind: ExperimentKind, name: &str) -> Result<Self> {
        let d = ExperimentConfig::defaults(kind);
        let cfg = match (kind, name) {
            (ExperimentKind::Null, "smoke") => ExperimentConfig { p: 10, n: 200, m: 200, ..d },
            (ExperimentKind::Null, "size") => ExperimentConfig {
                n: 20_000,
                m: 10_000,
                alpha: vec![0.05],
                ..d
            },
            (ExperimentKind::Null, "size-full") => ExperimentConfig {
                n: 500_000,
                m: 10_000,
                ..d
            },
            (ExperimentKind::Null, "elliptical") => ExperimentConfig {
                n: 20_000,
                m: 5_000,
                families: vec![RadialFamily::StudentT(6.0), RadialFamily::StudentT(9.0)],
                ..d
            },
            (ExperimentKind::Power, "smoke") => ExperimentConfig { m: 200, ..d },
            (ExperimentKind::Power, "grid") => ExperimentConfig {
                m: 4_000,
                k: (0..=20).collect(),
                ..d
            },
            (ExperimentKind::Regime3, "smoke") => ExperimentConfig { m: 200, reference_m: 2_000, ..d },
            (ExperimentKind::Regime3, "sweep") => ExperimentConfig {
                m: 2_500,
                v_grid: (0..=16).map(|i| i as f64 * 0.5).collect(),
                ..d
            },
            (ExperimentKind::HighDim, "smoke") => ExperimentConfig { n: 40, m: 50, ..d },
            (ExperimentKind::HighDim, "table") => ExperimentConfig { m: 2_000, ..d },
            _ => {
                return Err(Error::validation(format!(
                    "no preset '{name}' for experiment '{}'",
                    kind.name()
                )))
            }
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::validation(m));
        if self.m == 0 {
            return bad("M must be at least 1".into());
        }
        if self.p < 2 {
            return bad("p must be at least 2".into());
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive".into());
        }
        if !(self.v >= 0.0) {
            return bad("v must be non-negative".into());
        }
        if self.alpha.is_empty() || self.alpha.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return bad("alpha must be a non-empty list of levels in (0, 1)".into());
        }
        if self.families.is_empty() {
            return bad("family list is empty".into());
        }
        for f in &self.families {
            f.validate()?;
        }
        if self.reference_m == 0 {
            return bad("reference_m must be at least 1".into());
        }
        let needs_n = |n: usize, p: usize| {
            if n < p + 1 {
                bad(format!("n = {n} is below p + 1 = {}", p + 1))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::Null => {
                needs_n(self.n, self.p)?;
                if self.ell.is_empty() || self.ell.iter().any(|&l| l > 5) {
                    return bad("ell must be a non-empty list drawn from 0..=5".into());
                }
            }
            ExperimentKind::Power => {
                needs_n(self.n, self.p)?;
                if self.k.is_empty() || self.k.iter().any(|&k| k > 20) {
                    return bad("k must be a non-empty list drawn from 0..=20".into());
                }
                if !(self.v > 0.0) {
                    return bad("power grid needs v > 0".into());
                }
            }
            ExperimentKind::Regime3 => {
                needs_n(self.n, self.p)?;
                if self.v_grid.is_empty() || self.v_grid.iter().any(|&v| !(v >= 0.0)) {
                    return bad("v_grid must be a non-empty list of non-negative values".into());
                }
            }
            ExperimentKind::HighDim => {
                if self.n < 2 {
                    return bad("n must be at least 2".into());
                }
                if self.c.is_empty() || self.c.iter().any(|&c| !(c > 0.0)) {
                    return bad("c must be a non-empty list of positive ratios".into());
                }
                if self.c.iter().any(|&c| ((c * self.n as f64).round() as usize) < 2) {
                    return bad("every c * n must round to at least 2 variables".into());
                }
            }
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().to_ascii_lowercase().as_str() {
            "experiment" => {
                let k: ExperimentKind = value.parse()?;
                if k != self.kind {
                    return Err(Error::validation(format!(
                        "config is for experiment '{}', not '{}'",
                        k.name(),
                        self.kind.name()
                    )));
                }
            }
            "p" => self.p = parse_one(key, value)?,
            "n" => self.n = parse_one(key, value)?,
            "m" => self.m = parse_one(key, value)?,
            "sigma" => self.sigma = parse_one(key, value)?,
            "v" => self.v = parse_one(key, value)?,
            "ell" => self.ell = parse_list(key, value)?,
            "k" => self.k = parse_list(key, value)?,
            "v_grid" => self.v_grid = parse_list(key, value)?,
            "c" => self.c = parse_list(key, value)?,
            "family" | "families" => self.families = parse_families(value)?,
            "alpha" => self.alpha = parse_list(key, value)?,
            "reference_m" => self.reference_m = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "workers" => self.workers = parse_one(key, value)?,
            other => return Err(Error::validation(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every setting in a config document; `source` labels errors.
    pub fn apply_text(&mut self, text: &str, source: &Path) -> Result<()> {
        for (line, key, value) in parse_lines(text, source)? {
            self.set(&key, &value).map_err(|e| Error::Parse {
                path: source.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// The resolved configuration in the `key = value` grammar.
    pub fn to_text(&self) -> String {
        let join = |xs: Vec<String>| xs.join(", ");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("experiment", self.kind.name().into());
        kv("p", self.p.to_string());
        kv("n", self.n.to_string());
        kv("m", self.m.to_string());
        kv("sigma", self.sigma.to_string());
        match self.kind {
            ExperimentKind::Null => {
                kv("v", self.v.to_string());
                kv("ell", join(self.ell.iter().map(u8::to_string).collect()));
            }
            ExperimentKind::Power => {
                kv("v", self.v.to_string());
                kv("k", join(self.k.iter().map(u32::to_string).collect()));
            }
            ExperimentKind::Regime3 => {
                kv("v_grid", join(self.v_grid.iter().map(f64::to_string).collect()));
            }
            ExperimentKind::HighDim => {
                kv("c", join(self.c.iter().map(f64::to_string).collect()));
            }
        }
        kv("families", join(self.families.iter().map(RadialFamily::label).collect()));
        kv("alpha", join(self.alpha.iter().map(f64::to_string).collect()));
        kv("reference_m", self.reference_m.to_string());
        kv("seed", self.seed.to_string());
        kv("workers", self.workers.to_string());
        s
    }
}

/// Splits a config document into `(line number, key, value)` triples.
pub fn parse_lines(text: &str, source: &Path) -> Result<Vec<(u64, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                line: i as u64 + 1,
                message: format!("expected 'key = value', found '{line}'"),
            });
        };
        if k.trim().is_empty() {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                line: i as u64 + 1,
                message: "empty key".into(),
            });
        }
        out.push((i as u64 + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::validation(format!("{key}: cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

/// `gaussian`, `normal`, or `t<ν>` / `student<ν>`.
pub fn parse_family(s: &str) -> Result<RadialFamily> {
    let s = s.trim().to_ascii_lowercase();
    if s == "gaussian" || s == "normal" {
        return Ok(RadialFamily::Gaussian);
    }
    let nu = s
        .strip_prefix("student")
        .or_else(|| s.strip_prefix('t'))
        .ok_or_else(|| Error::validation(format!("unknown family '{s}'")))?;
    let nu: f64 = nu
        .parse()
        .map_err(|_| Error::validation(format!("bad degrees of freedom in family '{s}'")))?;
    RadialFamily::student_t(nu)
}

fn parse_families(value: &str) -> Result<Vec<RadialFamily>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_family)
        .collect()
}
