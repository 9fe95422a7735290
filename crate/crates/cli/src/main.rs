//! `adaptbound` command-line front end.
//!
//! Every subcommand reads one flat `key=value` config, calls the library and
//! writes the library's own output format to `--out` (or stdout). Exit codes:
//! 0 success, 1 configuration error, 2 validation or precondition error,
//! 3 I/O error.

mod schema;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptbound::bounds::{self, BoundReport};
use adaptbound::complexity::{self, CombinedGhost, MultiSourceGhost, NormSpec};
use adaptbound::concentration::{self, SymmetrizationCheck};
use adaptbound::config::KvConfig;
use adaptbound::divergences::{self, DivergenceMode, DivergenceReport};
use adaptbound::domains::{format_float, DiscreteDomain, Point};
use adaptbound::experiments::{self, ExperimentConfig};
use adaptbound::hypotheses::{self, EvaluationMatrix, MixCoefficient, SimplexWeights};
use adaptbound::{Error, ErrorKind, Result};
use clap::{Parser, Subcommand};

use schema::PathBase;

#[derive(Parser)]
#[command(name = "adaptbound", version, about = "Domain-adaptation bounds, estimators and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (flat key=value lines, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override; wins over any `seed` key in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Progress and summary lines on stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample a dataset from a domain (`domain_*`, `n`, `seed`).
    Gen,
    /// Weighted or combined least squares on dataset files.
    Fit,
    /// IPM, discrepancy distance and Q between a source and a target.
    Divergence,
    /// Covering numbers, uniform entropy and Rademacher estimates.
    Complexity,
    /// Evaluate a generalization bound from its scalar inputs.
    Bound,
    /// Monte-Carlo checks of concentration and symmetrization inequalities.
    Verify,
    /// Run a least-squares convergence experiment and write its CSV.
    Experiment,
}

struct Ctx {
    kv: KvConfig,
    base: PathBase,
    seed_override: Option<u64>,
    verbose: bool,
}

impl Ctx {
    /// Consumes `seed` from the config; the command-line value wins.
    fn seed(&mut self) -> Result<u64> {
        let from_config = self.kv.take_or("seed", 0u64)?;
        Ok(self.seed_override.unwrap_or(from_config))
    }

    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Validation => 2,
                ErrorKind::Io => 3,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))?;
    }
    let config = cli
        .config
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut ctx = Ctx {
        kv: KvConfig::from_file(&config)?,
        base: PathBase::of(&config),
        seed_override: cli.seed,
        verbose: cli.verbose,
    };
    let output = match cli.command {
        Command::Gen => gen(&mut ctx)?,
        Command::Fit => fit(&mut ctx)?,
        Command::Divergence => divergence(&mut ctx)?,
        Command::Complexity => complexity(&mut ctx)?,
        Command::Bound => bound(&mut ctx)?,
        Command::Verify => verify(&mut ctx)?,
        Command::Experiment => experiment(&mut ctx)?,
    };
    ctx.kv.finish()?;
    emit(cli.out.as_deref(), &output)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn gen(ctx: &mut Ctx) -> Result<Vec<u8>> {
    let domain = schema::domain(&mut ctx.kv, "domain")?;
    let n: usize = ctx.kv.require("n")?;
    let seed = ctx.seed()?;
    let data = domain.draw(n, seed)?;
    ctx.note(format!("sampled {n} rows with seed {seed}"));
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    Ok(buf)
}

fn fit(ctx: &mut Ctx) -> Result<Vec<u8>> {
    let model = match ctx.kv.require_str("method")?.as_str() {
        "weighted" => {
            let sources = ctx.base.datasets(&mut ctx.kv, "sources")?;
            let w = SimplexWeights::new(ctx.kv.require_list("weights")?)?;
            hypotheses::fit_weighted_least_squares(&sources, &w)?
        }
        "combined" => {
            let source = ctx.base.dataset(&mut ctx.kv, "source")?;
            let target = ctx.base.dataset(&mut ctx.kv, "target")?;
            let tau = MixCoefficient::new(ctx.kv.require("tau")?)?;
            hypotheses::fit_combined_least_squares(&source, &target, tau)?
        }
        other => return Err(Error::Config(format!("`method` must be `weighted` or `combined`, got `{other}`"))),
    };
    Ok(format!("{}\n", model.to_csv_row()).into_bytes())
}

fn divergence(ctx: &mut Ctx) -> Result<Vec<u8>> {
    let mode = ctx.kv.require_str("mode")?;
    let class = schema::class(&mut ctx.kv)?;
    let g_s = schema::linear_model(&mut ctx.kv, "source_labeler")?;
    let g_t = schema::linear_model(&mut ctx.kv, "target_labeler")?;
    let (hyps, loss) = (class.hypotheses(), class.loss());
    let report = match mode.as_str() {
        "exact_discrete" => {
            let s = schema::domain(&mut ctx.kv, "source")?.into_discrete("exact divergence")?;
            let t = schema::domain(&mut ctx.kv, "target")?.into_discrete("exact divergence")?;
            DivergenceReport::new(
                divergences::ipm(&class, &s, &t),
                divergences::discrepancy_distance(hyps, &loss, &s, &t),
                divergences::q_quantity(hyps, &loss, &t, |x| g_s.predict(x), |x| g_t.predict(x)),
                DivergenceMode::ExactDiscrete,
            )?
        }
        "empirical_samples" => {
            let s = ctx.base.dataset(&mut ctx.kv, "source_data")?;
            let t = ctx.base.dataset(&mut ctx.kv, "target_data")?;
            DivergenceReport::new(
                divergences::ipm(&class, &s, &t),
                divergences::discrepancy_distance(hyps, &loss, &s, &t),
                divergences::q_quantity(hyps, &loss, &t, |x| g_s.predict(x), |x| g_t.predict(x)),
                DivergenceMode::EmpiricalSamples,
            )?
        }
        other => {
            return Err(Error::Config(format!(
                "`mode` must be `exact_discrete` or `empirical_samples`, got `{other}`"
            )))
        }
    };
    Ok(report.to_kv().into_bytes())
}

fn complexity(ctx: &mut Ctx) -> Result<Vec<u8>> {
    let measure = ctx.kv.require_str("measure")?;
    let class = schema::class(&mut ctx.kv)?;
    let out = match measure.as_str() {
        "covering" => {
            let data = ctx.base.dataset(&mut ctx.kv, "data")?;
            let xi: f64 = ctx.kv.require("xi")?;
            let norm = NormSpec::l1w(&SimplexWeights::new(vec![1.0])?, vec![data.len()])?;
            let matrix = EvaluationMatrix::from_dataset(&class, &data)?;
            let n = complexity::covering_number_greedy(&matrix, xi, &norm)?;
            format!("measure=covering\nxi={xi:?}\ncovering_number={n}\n")
        }
        "uniform_entropy" => {
            let xi: f64 = ctx.kv.require("xi")?;
            let realizations: usize = ctx.kv.require("realizations")?;
            let value = match ctx.kv.require_str("setting")?.as_str() {
                "multi_source" => {
                    let sources = discrete_all(schema::domains(&mut ctx.kv, "sources")?, "uniform entropy")?;
                    let ghost = MultiSourceGhost {
                        sources: &sources,
                        sizes: ctx.kv.require_list("sizes")?,
                        weights: SimplexWeights::new(ctx.kv.require_list("weights")?)?,
                    };
                    complexity::uniform_entropy_estimate(&class, &ghost, xi, realizations, ctx.seed()?)?
                }
                "combined" => {
                    let source = schema::domain(&mut ctx.kv, "source")?.into_discrete("uniform entropy")?;
                    let target = schema::domain(&mut ctx.kv, "target")?.into_discrete("uniform entropy")?;
                    let ghost = CombinedGhost {
                        source: &source,
                        target: &target,
                        n_source: ctx.kv.require("n_source")?,
                        n_target: ctx.kv.require("n_target")?,
                        tau: MixCoefficient::new(ctx.kv.require("tau")?)?,
                    };
                    complexity::uniform_entropy_estimate(&class, &ghost, xi, realizations, ctx.seed()?)?
                }
                other => return Err(Error::Config(format!("`setting` must be `multi_source` or `combined`, got `{other}`"))),
            };
            format!(
                "measure=uniform_entropy\nvalue={value:?}\nln_class_size={:?}\n",
                complexity::log_class_size(&class)
            )
        }
        "rademacher_empirical" => {
            let data = ctx.base.dataset(&mut ctx.kv, "data")?;
            let trials: usize = ctx.kv.require("mc_trials")?;
            let matrix = EvaluationMatrix::from_dataset(&class, &data)?;
            rademacher_kv(&complexity::rademacher_empirical(&matrix, trials, ctx.seed()?)?)
        }
        "rademacher_expected" => {
            let domain = schema::domain(&mut ctx.kv, "domain")?;
            let n: usize = ctx.kv.require("n")?;
            let outer: usize = ctx.kv.require("outer_trials")?;
            let inner: usize = ctx.kv.require("inner_trials")?;
            let seed = ctx.seed()?;
            let est = match &domain {
                schema::DomainConfig::Gaussian(s) => complexity::rademacher_expected(&class, s, n, outer, inner, seed)?,
                schema::DomainConfig::Discrete(d) => complexity::rademacher_expected(&class, d, n, outer, inner, seed)?,
            };
            rademacher_kv(&est)
        }
        other => return Err(Error::Config(format!("unknown measure `{other}`"))),
    };
    Ok(out.into_bytes())
}

fn rademacher_kv(e: &complexity::RademacherEstimate) -> String {
    let mode = match e.mode {
        complexity::RademacherMode::EmpiricalFixedSample => "empirical_fixed_sample",
        complexity::RademacherMode::ExpectedOverData => "expected_over_data",
    };
    format!(
        "measure=rademacher\nmode={mode}\nvalue={:?}\nstd_error={:?}\nmc_trials={}\nexact={}\n",
        e.value, e.std_error, e.mc_trials, e.exact
    )
}

fn discrete_all(domains: Vec<schema::DomainConfig>, what: &str) -> Result<Vec<DiscreteDomain>> {
    domains.into_iter().map(|d| d.into_discrete(what)).collect()
}

fn bound(ctx: &mut Ctx) -> Result<Vec<u8>> {
    let kv = &mut ctx.kv;
    let theorem = kv.require_str("theorem")?;
    let report: BoundReport = match theorem.as_str() {
        "multi_uen" => bounds::bound_multi_uen(
            kv.require("divergence")?,
            kv.require("ln_uen")?,
            &SimplexWeights::new(kv.require_list("weights")?)?,
            &kv.require_list::<u64>("sizes")?,
            kv.require("range_width")?,
            kv.require("epsilon")?,
        )?,
        "multi_rademacher" => bounds::bound_multi_rademacher(
            kv.require("divergence")?,
            &kv.require_list::<f64>("rademacher")?,
            &SimplexWeights::new(kv.require_list("weights")?)?,
            &kv.require_list::<u64>("sizes")?,
            kv.require("range_width")?,
            kv.require("epsilon")?,
        )?,
        "combined_uen" => bounds::bound_combined_uen(
            kv.require("divergence")?,
            kv.require("ln_uen")?,
            MixCoefficient::new(kv.require("tau")?)?,
            kv.require("n_source")?,
            kv.require("n_target")?,
            kv.require("range_width")?,
            kv.require("epsilon")?,
        )?,
        "combined_rademacher" => bounds::bound_combined_rademacher(
            kv.require("divergence")?,
            kv.require("rademacher_source")?,
            kv.require("rademacher_target")?,
            MixCoefficient::new(kv.require("tau")?)?,
            kv.require("n_source")?,
            kv.require("n_target")?,
            kv.require("range_width")?,
            kv.require("epsilon")?,
        )?,
        "classical_uen" => bounds::bound_classical_uen(
            kv.require("ln_uen")?,
            kv.require("n")?,
            kv.require("range_width")?,
            kv.require("epsilon")?,
        )?,
        "classical_rademacher" => bounds::bound_classical_rademacher(
            kv.require("rademacher")?,
            kv.require("n")?,
            kv.require("range_width")?,
            kv.require("epsilon")?,
        )?,
        other => return Err(Error::Config(format!("unknown theorem `{other}`"))),
    };
    Ok(report.to_kv().into_bytes())
}

fn verify(ctx: &mut Ctx) -> Result<Vec<u8>> {
    let check = ctx.kv.require_str("check")?;
    let class = schema::class(&mut ctx.kv)?;
    let trials: usize = ctx.kv.require("trials")?;
    match check.as_str() {
        "deviation_multi" | "deviation_combined" | "mcdiarmid" => {
            let j: usize = ctx.kv.require("function_index")?;
            if j >= class.len() {
                return Err(Error::Config(format!("function_index {j} out of range")));
            }
            let grid: Vec<f64> = ctx.kv.require_list("xi_grid")?;
            let f = |p: &Point| class.eval(j, &p.x, p.y);
            let curve = match check.as_str() {
                "deviation_multi" => {
                    let sources = discrete_all(schema::domains(&mut ctx.kv, "sources")?, "deviation checks")?;
                    let w = SimplexWeights::new(ctx.kv.require_list("weights")?)?;
                    let ns: Vec<usize> = ctx.kv.require_list("sizes")?;
                    concentration::verify_deviation_multi(f, class.range(), &sources, &w, &ns, &grid, trials, ctx.seed()?)?
                }
                "deviation_combined" => {
                    let source = schema::domain(&mut ctx.kv, "source")?.into_discrete("deviation checks")?;
                    let target = schema::domain(&mut ctx.kv, "target")?.into_discrete("deviation checks")?;
                    concentration::verify_deviation_combined(
                        f,
                        class.range(),
                        &source,
                        &target,
                        MixCoefficient::new(ctx.kv.require("tau")?)?,
                        ctx.kv.require("n_source")?,
                        ctx.kv.require("n_target")?,
                        &grid,
                        trials,
                        ctx.seed()?,
                    )?
                }
                _ => {
                    // H is the weighted mean of f over the blocks, which has
                    // bounded differences w_k (b − a) / N_k.
                    let domains = discrete_all(schema::domains(&mut ctx.kv, "sources")?, "McDiarmid checks")?;
                    let w = SimplexWeights::new(ctx.kv.require_list("weights")?)?;
                    let ns: Vec<usize> = ctx.kv.require_list("sizes")?;
                    if ns.len() != w.len() {
                        return Err(Error::InvalidInput("sizes and weights differ in length".into()));
                    }
                    let width = class.range_width();
                    let c: Vec<Vec<f64>> = ns.iter().zip(w.as_slice()).map(|(&n, wk)| vec![wk * width / n as f64; n]).collect();
                    let h = |blocks: &[Vec<&Point>]| {
                        blocks
                            .iter()
                            .zip(w.as_slice())
                            .map(|(b, wk)| wk * b.iter().map(|p| f(p)).sum::<f64>() / b.len() as f64)
                            .sum::<f64>()
                    };
                    concentration::verify_mcdiarmid_generalized(h, &c, &domains, &ns, &grid, trials, ctx.seed()?)?
                }
            };
            ctx.note(format!("violations: {}", curve.violation_count));
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            Ok(buf)
        }
        "symmetrization_multi" => {
            let sources = discrete_all(schema::domains(&mut ctx.kv, "sources")?, "symmetrization checks")?;
            let target = schema::domain(&mut ctx.kv, "target")?.into_discrete("symmetrization checks")?;
            let w = SimplexWeights::new(ctx.kv.require_list("weights")?)?;
            let ns: Vec<usize> = ctx.kv.require_list("sizes")?;
            let xi: f64 = ctx.kv.require("xi")?;
            let seed = ctx.seed()?;
            let res = concentration::verify_symmetrization_multi(&class, &sources, &target, &w, &ns, xi, trials, seed)?;
            Ok(symmetrization_kv(&res).into_bytes())
        }
        "symmetrization_combined" => {
            let source = schema::domain(&mut ctx.kv, "source")?.into_discrete("symmetrization checks")?;
            let target = schema::domain(&mut ctx.kv, "target")?.into_discrete("symmetrization checks")?;
            let tau = MixCoefficient::new(ctx.kv.require("tau")?)?;
            let n_source: usize = ctx.kv.require("n_source")?;
            let n_target: usize = ctx.kv.require("n_target")?;
            let xi: f64 = ctx.kv.require("xi")?;
            let seed = ctx.seed()?;
            let res = concentration::verify_symmetrization_combined(&class, &source, &target, tau, n_source, n_target, xi, trials, seed)?;
            Ok(symmetrization_kv(&res).into_bytes())
        }
        other => Err(Error::Config(format!("unknown check `{other}`"))),
    }
}

fn symmetrization_kv(r: &SymmetrizationCheck) -> String {
    format!(
        "xi={}\nxi_prime={}\nlhs_prob={}\nrhs_prob={}\nlhs_std_error={}\nrhs_std_error={}\nmc_trials={}\ngate_satisfied={}\nholds={}\n",
        format_float(r.xi),
        format_float(r.xi_prime),
        format_float(r.lhs_prob),
        format_float(r.rhs_prob),
        format_float(r.lhs_std_error),
        format_float(r.rhs_std_error),
        r.mc_trials,
        r.gate_satisfied,
        r.holds
    )
}

fn experiment(ctx: &mut Ctx) -> Result<Vec<u8>> {
    let kv = std::mem::take(&mut ctx.kv);
    let mut cfg = ExperimentConfig::from_kv(kv)?;
    if let Some(s) = ctx.seed_override {
        cfg.seed = s;
    }
    ctx.note(format!(
        "{} experiment: {} grid values x {} sample sizes x {} repeats",
        cfg.experiment.as_str(),
        cfg.grid.len(),
        cfg.sample_sizes().len(),
        cfg.repeats
    ));
    let result = experiments::run(&cfg)?;
    let mut buf = Vec::new();
    experiments::write_csv(&result, &mut buf)?;
    Ok(buf)
}
