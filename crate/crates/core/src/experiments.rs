//! Synthetic least-squares experiments: how fast the gap between the
//! training objective and the target test risk closes as sources grow.
//!
//! Every (grid value, sample size, replication) cell is an independent job
//! seeded by `derive_seed(seed, [param bits, n, replication])`; inside a cell
//! coefficient vectors come from stream `(cell, 0, domain)`, source `k` from
//! `(cell, 1, k)`, the target test set from `(cell, 2)` and the target
//! training set from `(cell, 3)`. Cells run in parallel and are reassembled
//! in order, so output does not depend on the thread count.
//!
//! `n_total` is `N₁ + N₂` for the multi-source run and `N_S` for the
//! combined run.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::config::KvConfig;
use crate::domains::{
    format_float, sample_linear_gaussian, sample_linear_gaussian_with_beta, BetaMode, Dataset,
    LinearGaussianDomainSpec,
};
use crate::error::{Error, Result};
use crate::hypotheses::{
    combined_empirical_risk, empirical_risk, fit_combined_least_squares, fit_weighted_least_squares,
    weighted_empirical_risk, LossFunction, MixCoefficient, SimplexWeights,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    MultiSource,
    Combined,
}

impl std::str::FromStr for ExperimentKind {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "multi_source" => Ok(Self::MultiSource),
            "combined" => Ok(Self::Combined),
            _ => Err(()),
        }
    }
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MultiSource => "multi_source",
            Self::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub target: LinearGaussianDomainSpec,
    /// Two sources for the multi-source run, one for the combined run.
    pub sources: Vec<LinearGaussianDomainSpec>,
    /// Values of `w₁` (multi-source, `w = (w₁, 1 − w₁)`) or of `τ` (combined).
    pub grid: Vec<f64>,
    pub n_start: usize,
    pub n_step: usize,
    pub n_max: usize,
    pub repeats: usize,
    pub seed: u64,
    pub test_set_size: usize,
    /// Target training points `N′_T`; combined run only.
    pub target_train_size: usize,
    /// Draw the target test set once for the whole run instead of once per
    /// replication. Coefficient vectors then stay fixed for the run as well.
    pub fixed_test_set: bool,
    /// With `BetaMode::FixedAcrossSamples`, use one coefficient vector for
    /// all domains of a replication rather than one per domain.
    pub shared_beta: bool,
}

fn with_mode(mut spec: LinearGaussianDomainSpec, mode: BetaMode) -> LinearGaussianDomainSpec {
    spec.beta_mode = mode;
    spec
}

impl ExperimentConfig {
    /// 100 dimensions; target `x ~ N(0, 1)`, sources `N(0.5, 1)` and `N(2, 5²)`;
    /// `w₁ ∈ {0.1, 0.3, 0.5, 0.9}`; `N₁ = N₂` from 200 to 2000 by 200;
    /// 30 replications against 4000 target test points.
    pub fn multi_source_default() -> Self {
        let mode = BetaMode::FixedAcrossSamples;
        Self {
            experiment: ExperimentKind::MultiSource,
            target: with_mode(LinearGaussianDomainSpec::regression_default(0.0, 1.0), mode),
            sources: vec![
                with_mode(LinearGaussianDomainSpec::regression_default(0.5, 1.0), mode),
                with_mode(LinearGaussianDomainSpec::regression_default(2.0, 5.0), mode),
            ],
            grid: vec![0.1, 0.3, 0.5, 0.9],
            n_start: 200,
            n_step: 200,
            n_max: 2000,
            repeats: 30,
            seed: 0,
            test_set_size: 4000,
            target_train_size: 0,
            fixed_test_set: false,
            shared_beta: true,
        }
    }

    /// Source `x ~ N(1, 2²)`, `τ ∈ {0.1, 0.3, 0.5, 0.9}`, `N_S` from 200 to
    /// 4000 by 200, 100 target training and 3900 target test points,
    /// 100 replications.
    pub fn combined_default() -> Self {
        let mode = BetaMode::FixedAcrossSamples;
        Self {
            experiment: ExperimentKind::Combined,
            target: with_mode(LinearGaussianDomainSpec::regression_default(0.0, 1.0), mode),
            sources: vec![with_mode(LinearGaussianDomainSpec::regression_default(1.0, 2.0), mode)],
            grid: vec![0.1, 0.3, 0.5, 0.9],
            n_start: 200,
            n_step: 200,
            n_max: 4000,
            repeats: 100,
            seed: 0,
            test_set_size: 3900,
            target_train_size: 100,
            fixed_test_set: false,
            shared_beta: true,
        }
    }

    /// Reads a flat config. `experiment` is required; every other key falls
    /// back to the defaults of that experiment. Unknown keys are rejected.
    ///
    /// Keys: `experiment`, `input_dim`, `beta_mean`, `beta_std`, `noise_std`,
    /// `beta_mode`, `shared_beta`, `target_x_mean`, `target_x_std`,
    /// `source1_x_mean`, `source1_x_std`, `source2_x_mean`, `source2_x_std`
    /// (multi-source) or `source_x_mean`, `source_x_std` (combined), `grid`,
    /// `n_start`, `n_step`, `n_max`, `repeats`, `seed`, `test_set_size`,
    /// `target_train_size` (combined), `fixed_test_set`.
    pub fn from_kv(mut kv: KvConfig) -> Result<Self> {
        let kind: ExperimentKind = kv
            .require_str("experiment")?
            .parse()
            .map_err(|_| Error::config("`experiment` must be `multi_source` or `combined`"))?;
        let mut cfg = match kind {
            ExperimentKind::MultiSource => Self::multi_source_default(),
            ExperimentKind::Combined => Self::combined_default(),
        };
        let dim = kv.take_or("input_dim", cfg.target.input_dim)?;
        let beta_mean = kv.take_or("beta_mean", cfg.target.beta_mean)?;
        let beta_std = kv.take_or("beta_std", cfg.target.beta_std)?;
        let noise_std = kv.take_or("noise_std", cfg.target.noise_std)?;
        let mode: BetaMode = kv.take_or("beta_mode", cfg.target.beta_mode)?;
        cfg.shared_beta = kv.take_bool("shared_beta")?.unwrap_or(mode == BetaMode::FixedAcrossSamples);

        let mut domain = |prefix: &str, base: &LinearGaussianDomainSpec| -> Result<LinearGaussianDomainSpec> {
            Ok(LinearGaussianDomainSpec {
                input_dim: dim,
                x_mean: kv.take_or(&format!("{prefix}_x_mean"), base.x_mean)?,
                x_std: kv.take_or(&format!("{prefix}_x_std"), base.x_std)?,
                beta_mean,
                beta_std,
                noise_std,
                beta_mode: mode,
            })
        };
        cfg.target = domain("target", &cfg.target)?;
        cfg.sources = match kind {
            ExperimentKind::MultiSource => vec![domain("source1", &cfg.sources[0])?, domain("source2", &cfg.sources[1])?],
            ExperimentKind::Combined => vec![domain("source", &cfg.sources[0])?],
        };
        if let Some(grid) = kv.take_list("grid")? {
            cfg.grid = grid;
        }
        cfg.n_start = kv.take_or("n_start", cfg.n_start)?;
        cfg.n_step = kv.take_or("n_step", cfg.n_step)?;
        cfg.n_max = kv.take_or("n_max", cfg.n_max)?;
        cfg.repeats = kv.take_or("repeats", cfg.repeats)?;
        cfg.seed = kv.take_or("seed", cfg.seed)?;
        cfg.test_set_size = kv.take_or("test_set_size", cfg.test_set_size)?;
        if kind == ExperimentKind::Combined {
            cfg.target_train_size = kv.take_or("target_train_size", cfg.target_train_size)?;
        }
        cfg.fixed_test_set = kv.take_bool("fixed_test_set")?.unwrap_or(cfg.fixed_test_set);
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        for s in &self.sources {
            s.validate()?;
            if s.input_dim != self.target.input_dim {
                return Err(Error::config("all domains must share input_dim"));
            }
        }
        let expected = match self.experiment {
            ExperimentKind::MultiSource => 2,
            ExperimentKind::Combined => 1,
        };
        if self.sources.len() != expected {
            return Err(Error::config(format!(
                "{} experiment needs {expected} source domain(s)",
                self.experiment.as_str()
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::config("grid must not be empty"));
        }
        for &g in &self.grid {
            let ok = match self.experiment {
                ExperimentKind::MultiSource => (0.0..=1.0).contains(&g),
                ExperimentKind::Combined => (0.0..1.0).contains(&g),
            };
            if !ok {
                return Err(Error::config(format!("grid value {g} out of range")));
            }
        }
        if self.n_step == 0 {
            return Err(Error::config("n_step must be positive"));
        }
        if self.n_start == 0 || self.n_max < self.n_start {
            return Err(Error::config("need 1 ≤ n_start ≤ n_max"));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats must be at least 1"));
        }
        if self.test_set_size == 0 {
            return Err(Error::config("test_set_size must be at least 1"));
        }
        if self.experiment == ExperimentKind::Combined && self.target_train_size == 0 {
            return Err(Error::config("target_train_size must be at least 1"));
        }
        let fixed = self.target.beta_mode == BetaMode::FixedAcrossSamples;
        if self.shared_beta && !fixed {
            return Err(Error::config("shared_beta requires beta_mode=fixed"));
        }
        if self.sources.iter().any(|s| s.beta_mode != self.target.beta_mode) {
            return Err(Error::config("all domains must use the same beta_mode"));
        }
        Ok(())
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        (self.n_start..=self.n_max).step_by(self.n_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub param: f64,
    pub n_total: usize,
    pub mean_gap: f64,
    /// Sample standard deviation over replications (zero for one replication).
    pub std_gap: f64,
    pub repeats: usize,
}

impl ExperimentRow {
    /// `std_gap / √repeats`.
    pub fn std_error(&self) -> f64 {
        self.std_gap / (self.repeats as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentResult {
    /// Rows of one grid value, by increasing `n_total`.
    pub fn curve(&self, param: f64) -> Vec<&ExperimentRow> {
        self.rows.iter().filter(|r| r.param == param).collect()
    }
}

/// Coefficient vectors for the domains of one replication (`None` when
/// labels use per-sample coefficients). Index 0 is the target.
fn replication_betas(cfg: &ExperimentConfig, stream_seed: u64) -> Vec<Option<Vec<f64>>> {
    let domains = 1 + cfg.sources.len();
    if cfg.target.beta_mode != BetaMode::FixedAcrossSamples {
        return vec![None; domains];
    }
    if cfg.shared_beta {
        let beta = cfg.target.draw_beta(&mut seed::stream(stream_seed, &[0, 0]));
        return vec![Some(beta); domains];
    }
    let specs = std::iter::once(&cfg.target).chain(&cfg.sources);
    specs
        .enumerate()
        .map(|(d, s)| Some(s.draw_beta(&mut seed::stream(stream_seed, &[0, d as u64]))))
        .collect()
}

fn draw(spec: &LinearGaussianDomainSpec, beta: &Option<Vec<f64>>, n: usize, seed: u64) -> Result<Dataset> {
    match beta {
        Some(b) => sample_linear_gaussian_with_beta(spec, b, n, seed),
        None => sample_linear_gaussian(spec, n, seed),
    }
}

struct RunShared {
    betas: Option<Vec<Option<Vec<f64>>>>,
    test: Option<Dataset>,
}

impl RunShared {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        if !cfg.fixed_test_set {
            return Ok(Self { betas: None, test: None });
        }
        let run_seed = seed::derive_seed(cfg.seed, &[u64::MAX]);
        let betas = replication_betas(cfg, run_seed);
        let test = draw(&cfg.target, &betas[0], cfg.test_set_size, seed::derive_seed(run_seed, &[2]))?;
        Ok(Self {
            betas: Some(betas),
            test: Some(test),
        })
    }
}

fn run_cells<F>(cfg: &ExperimentConfig, n_total: impl Fn(usize) -> usize, gap: F) -> Result<ExperimentResult>
where
    F: Fn(f64, usize, u64, &[Option<Vec<f64>>], &Dataset) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let shared = RunShared::new(cfg)?;
    let sizes = cfg.sample_sizes();
    let cells: Vec<(f64, usize, usize)> = cfg
        .grid
        .iter()
        .flat_map(|&p| sizes.iter().flat_map(move |&n| (0..cfg.repeats).map(move |r| (p, n, r))))
        .collect();
    let gaps = cells
        .par_iter()
        .map(|&(p, n, r)| {
            let cell = seed::derive_seed(cfg.seed, &[p.to_bits(), n as u64, r as u64]);
            let local_betas;
            let betas = match &shared.betas {
                Some(b) => b,
                None => {
                    local_betas = replication_betas(cfg, cell);
                    &local_betas
                }
            };
            let local_test;
            let test = match &shared.test {
                Some(t) => t,
                None => {
                    local_test = draw(&cfg.target, &betas[0], cfg.test_set_size, seed::derive_seed(cell, &[2]))?;
                    &local_test
                }
            };
            gap(p, n, cell, betas, test)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut rows: Vec<ExperimentRow> = gaps
        .chunks(cfg.repeats)
        .zip(cells.iter().step_by(cfg.repeats))
        .map(|(g, &(p, n, _))| {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            let std = if g.len() > 1 {
                (g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (g.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            ExperimentRow {
                param: p,
                n_total: n_total(n),
                mean_gap: mean,
                std_gap: std,
                repeats: cfg.repeats,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.param.total_cmp(&b.param).then(a.n_total.cmp(&b.n_total)));
    Ok(ExperimentResult { rows })
}

/// Weighted least squares on two sources of `n` points each, gap against the
/// target test risk under the unclipped squared loss.
pub fn run_multi_source(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.experiment != ExperimentKind::MultiSource {
        return Err(Error::config("run_multi_source needs experiment=multi_source"));
    }
    let loss = LossFunction::squared();
    run_cells(cfg, |n| 2 * n, |p, n, cell, betas, test| {
        let w = SimplexWeights::pair(p)?;
        let sources = cfg
            .sources
            .iter()
            .enumerate()
            .map(|(k, s)| draw(s, &betas[k + 1], n, seed::derive_seed(cell, &[1, k as u64])))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_weighted_least_squares(&sources, &w)?;
        let train = weighted_empirical_risk(&fit, &sources, &w, &loss)?;
        Ok((train - empirical_risk(&fit, test, &loss)?).abs())
    })
}

/// Least squares on `n` source points mixed by `τ` with the target training
/// set, gap against the target test risk under the unclipped squared loss.
pub fn run_combined(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.experiment != ExperimentKind::Combined {
        return Err(Error::config("run_combined needs experiment=combined"));
    }
    let loss = LossFunction::squared();
    run_cells(cfg, |n| n, |p, n, cell, betas, test| {
        let tau = MixCoefficient::new(p)?;
        let source = draw(&cfg.sources[0], &betas[1], n, seed::derive_seed(cell, &[1, 0]))?;
        let target = draw(&cfg.target, &betas[0], cfg.target_train_size, seed::derive_seed(cell, &[3]))?;
        let fit = fit_combined_least_squares(&source, &target, tau)?;
        let train = combined_empirical_risk(&fit, &source, &target, tau, &loss)?;
        Ok((train - empirical_risk(&fit, test, &loss)?).abs())
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match cfg.experiment {
        ExperimentKind::MultiSource => run_multi_source(cfg),
        ExperimentKind::Combined => run_combined(cfg),
    }
}

pub const CSV_HEADER: &str = "param,n_total,mean_gap,std_gap,repeats";

pub fn write_csv<W: Write>(result: &ExperimentResult, mut out: W) -> Result<()> {
    let mut rows: Vec<&ExperimentRow> = result.rows.iter().collect();
    rows.sort_by(|a, b| a.param.total_cmp(&b.param).then(a.n_total.cmp(&b.n_total)));
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_float(r.param),
            r.n_total,
            format_float(r.mean_gap),
            format_float(r.std_gap),
            r.repeats
        )?;
    }
    Ok(())
}

pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn parse_csv<R: Read>(reader: R) -> Result<ExperimentResult> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::config(format!("unexpected header `{}`", header.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::config(format!("row {}: bad {what}", i + 1));
        let float = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(what));
        rows.push(ExperimentRow {
            param: float(0, "param")?,
            n_total: rec[1].parse().map_err(|_| bad("n_total"))?,
            mean_gap: float(2, "mean_gap")?,
            std_gap: float(3, "std_gap")?,
            repeats: rec[4].parse().map_err(|_| bad("repeats"))?,
        });
    }
    Ok(ExperimentResult { rows })
}

pub fn load_csv(path: &Path) -> Result<ExperimentResult> {
    parse_csv(std::fs::File::open(path)?)
}
