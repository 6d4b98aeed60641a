//! Monte Carlo studies: power tables and bias scatters.

use std::fmt::Write as _;
use std::path::Path;

use discrete_stein::estimate::{
    estimate_exppoly_hd_with, estimate_exppoly_with, estimate_nb_with, moment_estimators_nb,
    nb_default_bounds, EstimateResult, HdConstants,
};
use discrete_stein::gof::{rejection_rates, BootstrapConfig, GofStatistic};
use discrete_stein::optimize::OptimizerConfig;
use discrete_stein::sampling::draw;
use discrete_stein::{AltDistSpec, RandomStream};
use rayon::prelude::*;

use crate::{footer, CliError};

/// Design of a power study. Defaults follow the rejection-rate table:
/// `n = 50`, `B = 500`, `α = 0.05`, all statistics, every table row.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub rows: Vec<AltDistSpec>,
    pub n: usize,
    pub reps: usize,
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
    pub statistics: Vec<GofStatistic>,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            rows: AltDistSpec::table1_rows(),
            n: 50,
            reps: 2000,
            b: 500,
            alpha: 0.05,
            seed: 1,
            statistics: GofStatistic::ALL.to_vec(),
            workers: 0,
        }
    }
}

/// Named row sets accepted by `rows=` and `--rows`.
pub fn named_rows(name: &str) -> Result<Vec<AltDistSpec>, CliError> {
    let all = AltDistSpec::table1_rows();
    match name.trim() {
        "table" | "all" => Ok(all),
        "null" => Ok(all.into_iter().take(4).collect()),
        other => Err(CliError::Config(format!(
            "unknown row set `{other}` (expected table, all or null)"
        ))),
    }
}

pub fn parse_statistics(list: &str) -> Result<Vec<GofStatistic>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| CliError::Config(format!("{e}"))))
        .collect()
}

impl StudyConfig {
    /// Reads flat `key = value` lines. `row = <spec>` may repeat and appends
    /// one distribution; `rows = table|all|null` replaces the list.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        let mut explicit_rows: Option<Vec<AltDistSpec>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| CliError::Config(format!("{} line {}: {msg}", path.display(), i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected key = value".into()))?;
            let value = value.trim();
            let num = |what: &str| bad(format!("`{value}` is not a valid {what}"));
            match key.trim().to_ascii_lowercase().as_str() {
                "row" => {
                    let spec: AltDistSpec = value.parse().map_err(|e| bad(format!("{e}")))?;
                    explicit_rows.get_or_insert_with(Vec::new).push(spec);
                }
                "rows" => explicit_rows = Some(named_rows(value).map_err(|e| bad(e.to_string()))?),
                "n" => cfg.n = value.parse().map_err(|_| num("sample size"))?,
                "reps" => cfg.reps = value.parse().map_err(|_| num("repetition count"))?,
                "b" => cfg.b = value.parse().map_err(|_| num("bootstrap size"))?,
                "alpha" => cfg.alpha = value.parse().map_err(|_| num("level"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| num("seed"))?,
                "workers" => cfg.workers = value.parse().map_err(|_| num("worker count"))?,
                "stats" | "statistics" => {
                    cfg.statistics = parse_statistics(value).map_err(|e| bad(e.to_string()))?
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        if let Some(rows) = explicit_rows {
            cfg.rows = rows;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.rows.is_empty() || self.statistics.is_empty() {
            return Err(CliError::Config("need at least one row and one statistic".into()));
        }
        if self.n == 0 || self.reps == 0 {
            return Err(CliError::Config("n and reps must be positive".into()));
        }
        self.bootstrap().order_index().map_err(CliError::from)?;
        for row in &self.rows {
            row.validate().map_err(CliError::from)?;
        }
        Ok(())
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            b: self.b,
            alpha: self.alpha,
        }
    }
}

/// Rejection percentages, one line per distribution. Row `i` draws from
/// `substream(i)` of the seed, so a row's cells only depend on its index.
pub fn power_table(cfg: &StudyConfig) -> Result<String, CliError> {
    cfg.validate()?;
    let root = RandomStream::new(cfg.seed);
    let mut out = String::from("distribution");
    for s in &cfg.statistics {
        write!(out, ",{s}").unwrap();
    }
    out.push_str(",degenerate,diagnostics\n");
    for (i, row) in cfg.rows.iter().enumerate() {
        let label = row.to_string();
        match rejection_rates(row, cfg.n, cfg.reps, &cfg.statistics, &cfg.bootstrap(), &root.substream(i as u64)) {
            Ok(result) => {
                out.push_str(&label);
                for rate in result.rates() {
                    write!(out, ",{:.2}", 100.0 * rate).unwrap();
                }
                let note = if result.degenerate > 0 {
                    "all-zero samples counted as non-rejections"
                } else {
                    ""
                };
                writeln!(out, ",{},{note}", result.degenerate).unwrap();
            }
            Err(e) => {
                out.push_str(&label);
                for _ in &cfg.statistics {
                    out.push_str(",NA");
                }
                writeln!(out, ",NA,{}", sanitize(&e.to_string())).unwrap();
            }
        }
    }
    out.push_str(&footer(cfg.seed));
    Ok(out)
}

/// Keeps diagnostics inside one CSV cell.
fn sanitize(text: &str) -> String {
    text.replace([',', '\n', '\r'], ";")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    NegBin,
    ExpPoly,
}

/// Settings shared by the bias-scatter replicates.
#[derive(Debug, Clone)]
pub struct ScatterConfig {
    pub family: Family,
    pub truth: Vec<f64>,
    /// One-based pinned coefficients for the exponential-polynomial family.
    pub fixed: Vec<(usize, f64)>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub starts: usize,
    pub optimizer: OptimizerConfig,
}

fn fmt_fit(out: &mut String, fit: &Result<EstimateResult, String>, truth: &[f64], free: &[usize]) {
    match fit {
        Ok(f) => {
            for &i in free {
                write!(out, ",{},{}", f.params[i], f.params[i] - truth[i]).unwrap();
            }
            write!(out, ",{}", f.converged).unwrap();
        }
        Err(_) => {
            for _ in free {
                out.push_str(",NA,NA");
            }
            out.push_str(",NA");
        }
    }
}

/// One CSV row per replicate plus a summary footer. Replicate `j` draws its
/// data from `substream(j).substream(0)` and its starts from
/// `substream(j).substream(1)`.
pub fn bias_scatter(cfg: &ScatterConfig) -> Result<String, CliError> {
    if cfg.n < 2 || cfg.reps == 0 {
        return Err(CliError::Config("need n >= 2 and reps >= 1".into()));
    }
    let root = RandomStream::new(cfg.seed);
    let (truth, fixed) = match cfg.family {
        Family::NegBin => {
            if cfg.truth.len() != 2 {
                return Err(CliError::Config("negbin truth is r,q".into()));
            }
            (cfg.truth.clone(), Vec::new())
        }
        // Two values mean (θ₁, θ₃) with θ₂ = 0.
        Family::ExpPoly if cfg.truth.len() == 2 && cfg.fixed.is_empty() => {
            (vec![cfg.truth[0], 0.0, cfg.truth[1]], vec![(2, 0.0)])
        }
        Family::ExpPoly => (cfg.truth.clone(), cfg.fixed.clone()),
    };
    let spec = match cfg.family {
        Family::NegBin => AltDistSpec::NegBinomial {
            r: truth[0],
            q: truth[1],
        },
        Family::ExpPoly => AltDistSpec::ExpPoly { theta: truth.clone() },
    };
    spec.validate().map_err(CliError::from)?;
    let free: Vec<usize> = (0..truth.len())
        .filter(|i| fixed.iter().all(|(f, _)| f - 1 != *i))
        .collect();

    let rows: Vec<ScatterRow> = (0..cfg.reps)
        .into_par_iter()
        .map(|j| scatter_row(cfg, &spec, &truth, &fixed, &free, &root.substream(j as u64), j))
        .collect();

    let mut out = String::from("rep");
    match cfg.family {
        Family::NegBin => out.push_str(
            ",r_mde,bias_r_mde,q_mde,bias_q_mde,converged_mde,r_mom,bias_r_mom,q_mom,bias_q_mom,underdispersed,error\n",
        ),
        Family::ExpPoly => {
            for method in ["mde", "hd"] {
                for &i in &free {
                    write!(out, ",theta{0}_{method},bias_theta{0}_{method}", i + 1).unwrap();
                }
                write!(out, ",converged_{method}").unwrap();
            }
            out.push_str(",error\n");
        }
    }
    let (mut failures, mut underdispersed, mut both) = (0, 0, 0);
    for row in &rows {
        out.push_str(&row.line);
        out.push('\n');
        failures += usize::from(row.failed);
        underdispersed += usize::from(row.underdispersed);
        both += usize::from(row.failed && row.underdispersed);
    }
    match cfg.family {
        Family::NegBin => writeln!(
            out,
            "# summary reps={} convergence_failures={failures} underdispersed={underdispersed} both={both}",
            cfg.reps
        ),
        Family::ExpPoly => writeln!(
            out,
            "# summary reps={} convergence_failures={failures}",
            cfg.reps
        ),
    }
    .unwrap();
    out.push_str(&footer(cfg.seed));
    Ok(out)
}

/// Number of result fields between `rep` and `error`.
fn result_columns(family: Family, free: usize) -> usize {
    match family {
        Family::NegBin => 2 * free + 1 + 5,
        Family::ExpPoly => 2 * (2 * free + 1),
    }
}

struct ScatterRow {
    line: String,
    failed: bool,
    underdispersed: bool,
}

fn scatter_row(
    cfg: &ScatterConfig,
    spec: &AltDistSpec,
    truth: &[f64],
    fixed: &[(usize, f64)],
    free: &[usize],
    stream: &RandomStream,
    j: usize,
) -> ScatterRow {
    let mut line = format!("{j}");
    let sample = match draw(spec, cfg.n, &stream.substream(0)) {
        Ok(s) => s,
        Err(e) => {
            return ScatterRow {
                line: format!("{j}{},sampling failed: {}", ",NA".repeat(result_columns(cfg.family, free.len())), sanitize(&e.to_string())),
                failed: true,
                underdispersed: false,
            }
        }
    };
    let start = stream.substream(1);
    let mut errors = Vec::new();
    let (mut failed, mut underdispersed) = (false, false);
    match cfg.family {
        Family::NegBin => {
            let fit = estimate_nb_with(&sample, &nb_default_bounds(), cfg.starts, &cfg.optimizer, &start)
                .map_err(|e| e.to_string());
            fmt_fit(&mut line, &fit, truth, free);
            failed |= !matches!(&fit, Ok(f) if f.converged);
            if let Err(e) = &fit {
                errors.push(format!("mde: {e}"));
            }
            match moment_estimators_nb(&sample) {
                Ok(m) => {
                    write!(
                        line,
                        ",{},{},{},{},{}",
                        m.r,
                        m.r - truth[0],
                        m.q,
                        m.q - truth[1],
                        m.underdispersed
                    )
                    .unwrap();
                    underdispersed = m.underdispersed;
                }
                Err(e) => {
                    line.push_str(",NA,NA,NA,NA,true");
                    underdispersed = true;
                    errors.push(format!("moments: {e}"));
                }
            }
        }
        Family::ExpPoly => {
            let d = truth.len();
            let mde = estimate_exppoly_with(&sample, d, fixed, cfg.starts, &cfg.optimizer, &start)
                .map_err(|e| e.to_string());
            let hd = estimate_exppoly_hd_with(
                &sample,
                d,
                fixed,
                cfg.starts,
                &cfg.optimizer,
                &HdConstants::default(),
                &start,
            )
            .map_err(|e| e.to_string());
            for (name, fit) in [("mde", &mde), ("hd", &hd)] {
                fmt_fit(&mut line, fit, truth, free);
                failed |= !matches!(fit, Ok(f) if f.converged);
                if let Err(e) = fit {
                    errors.push(format!("{name}: {e}"));
                }
            }
        }
    }
    write!(line, ",{}", sanitize(&errors.join("; "))).unwrap();
    ScatterRow {
        line,
        failed,
        underdispersed,
    }
}
