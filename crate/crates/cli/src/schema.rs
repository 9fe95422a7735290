//! Shared config fragments: domains, function classes and file references.
//!
//! A domain is described by keys under a prefix `p`:
//!
//! ```text
//! p_kind = linear_gaussian | discrete
//! # linear_gaussian (defaults in brackets)
//! p_input_dim [100]  p_x_mean [0]  p_x_std [1]  p_beta_mean [1]
//! p_beta_std [5]  p_noise_std [0.5]  p_beta_mode [per_sample]
//! # discrete: points separated by `;`, coordinates then label
//! p_support = 0 1 ; 1 0      # (x = 0, y = 1) and (x = 1, y = 0)
//! p_probs = 0.3,0.7          # optional, uniform otherwise
//! ```
//!
//! A function class is `hypotheses = θ₁ ; θ₂ ; …` (coefficients separated by
//! spaces), `loss = squared | absolute` and `clip = a,b`.

use std::path::{Path, PathBuf};

use adaptbound::config::KvConfig;
use adaptbound::domains::{BetaMode, DataSource, Dataset, DiscreteDomain, LinearGaussianDomainSpec, Point};
use adaptbound::hypotheses::{FiniteFunctionClass, LinearModel, LossFunction, LossKind};
use adaptbound::{Error, Result};

pub enum DomainConfig {
    Gaussian(LinearGaussianDomainSpec),
    Discrete(DiscreteDomain),
}

impl DomainConfig {
    pub fn draw(&self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            DomainConfig::Gaussian(s) => s.draw(n, seed),
            DomainConfig::Discrete(d) => d.draw(n, seed),
        }
    }

    /// The finite-support domain, or an unsupported-input error naming `what`.
    pub fn into_discrete(self, what: &str) -> Result<DiscreteDomain> {
        match self {
            DomainConfig::Discrete(d) => Ok(d),
            DomainConfig::Gaussian(_) => Err(Error::Unsupported(format!(
                "{what} needs finite-support domains for exact expectations"
            ))),
        }
    }
}

fn numbers(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("bad number `{t}` in {what}"))))
        .collect()
}

/// `;`-separated groups of whitespace-separated numbers.
pub fn vectors(text: &str, what: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';').map(|g| numbers(g, what)).collect()
}

pub fn domain(kv: &mut KvConfig, prefix: &str) -> Result<DomainConfig> {
    let key = |s: &str| format!("{prefix}_{s}");
    match kv.require_str(&key("kind"))?.as_str() {
        "linear_gaussian" => {
            let spec = LinearGaussianDomainSpec {
                input_dim: kv.take_or(&key("input_dim"), 100)?,
                x_mean: kv.take_or(&key("x_mean"), 0.0)?,
                x_std: kv.take_or(&key("x_std"), 1.0)?,
                beta_mean: kv.take_or(&key("beta_mean"), 1.0)?,
                beta_std: kv.take_or(&key("beta_std"), 5.0)?,
                noise_std: kv.take_or(&key("noise_std"), 0.5)?,
                beta_mode: kv.take_or(&key("beta_mode"), BetaMode::PerSample)?,
            };
            spec.validate()?;
            Ok(DomainConfig::Gaussian(spec))
        }
        "discrete" => {
            let support_key = key("support");
            let points = vectors(&kv.require_str(&support_key)?, &support_key)?
                .into_iter()
                .map(|mut v| match v.pop() {
                    Some(y) if !v.is_empty() => Ok(Point::new(v, y)),
                    _ => Err(Error::Config(format!("`{support_key}`: each point needs inputs and a label"))),
                })
                .collect::<Result<Vec<_>>>()?;
            match kv.take_list::<f64>(&key("probs"))? {
                Some(p) => DiscreteDomain::new(points, p),
                None => DiscreteDomain::uniform(points),
            }
            .map(DomainConfig::Discrete)
        }
        other => Err(Error::Config(format!(
            "`{}` must be `linear_gaussian` or `discrete`, got `{other}`",
            key("kind")
        ))),
    }
}

/// Domains named by the comma-separated prefixes under `key`.
pub fn domains(kv: &mut KvConfig, key: &str) -> Result<Vec<DomainConfig>> {
    let prefixes: Vec<String> = kv.require_list(key)?;
    prefixes.iter().map(|p| domain(kv, p)).collect()
}

pub fn linear_model(kv: &mut KvConfig, key: &str) -> Result<LinearModel> {
    let text = kv.require_str(key)?;
    LinearModel::new(numbers(&text, key)?)
}

pub fn class(kv: &mut KvConfig) -> Result<FiniteFunctionClass> {
    let hyps = vectors(&kv.require_str("hypotheses")?, "hypotheses")?
        .into_iter()
        .map(LinearModel::new)
        .collect::<Result<Vec<_>>>()?;
    let kind: LossKind = kv.require("loss")?;
    let clip: Vec<f64> = kv.require_list("clip")?;
    if clip.len() != 2 {
        return Err(Error::Config("`clip` needs two values a,b".into()));
    }
    let loss = LossFunction::new(kind, None)?.clipped(clip[0], clip[1])?;
    FiniteFunctionClass::new(hyps, loss)
}

/// Paths in a config are relative to the config file's directory.
pub struct PathBase(PathBuf);

impl PathBase {
    pub fn of(config: &Path) -> Self {
        Self(config.parent().map(Path::to_path_buf).unwrap_or_default())
    }

    pub fn resolve(&self, raw: &str) -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.0.join(p)
        }
    }

    pub fn dataset(&self, kv: &mut KvConfig, key: &str) -> Result<Dataset> {
        let raw = kv.require_str(key)?;
        Dataset::load_csv(&self.resolve(&raw), raw)
    }

    pub fn datasets(&self, kv: &mut KvConfig, key: &str) -> Result<Vec<Dataset>> {
        let raws: Vec<String> = kv.require_list(key)?;
        raws.into_iter()
            .map(|raw| Dataset::load_csv(&self.resolve(&raw), raw))
            .collect()
    }
}
