//! Data domains and labeled datasets.
//!
//! Two kinds of domain are supported: finite-support [`DiscreteDomain`]s,
//! under which expectations are computed exactly, and the synthetic
//! [`LinearGaussianDomainSpec`] used by the regression experiments.
//!
//! All Gaussian draws go through `rand_distr::StandardNormal`, which uses the
//! ziggurat method, on top of a ChaCha8 stream. Given the same seed the output
//! is identical on every platform.

use std::io::{Read, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::{self, StreamRng};

/// How the regression coefficients of a linear-Gaussian domain are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaMode {
    /// A fresh coefficient vector for every generated row.
    #[default]
    PerSample,
    /// One coefficient vector per call, shared by all rows.
    FixedAcrossSamples,
}

impl std::str::FromStr for BetaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_sample" => Ok(BetaMode::PerSample),
            "fixed" | "fixed_across_samples" => Ok(BetaMode::FixedAcrossSamples),
            other => Err(Error::config(format!("unknown beta mode `{other}`"))),
        }
    }
}

impl BetaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BetaMode::PerSample => "per_sample",
            BetaMode::FixedAcrossSamples => "fixed",
        }
    }
}

/// Inputs `x ~ N(x_mean, x_std²)` per coordinate, labels `y = <x, β> + R`
/// with `β ~ N(beta_mean, beta_std²)` per coordinate and `R ~ N(0, noise_std²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianDomainSpec {
    pub input_dim: usize,
    pub x_mean: f64,
    pub x_std: f64,
    pub beta_mean: f64,
    pub beta_std: f64,
    pub noise_std: f64,
    pub beta_mode: BetaMode,
}

impl LinearGaussianDomainSpec {
    /// 100-dimensional domain with `β ~ N(1, 5²)` and `R ~ N(0, 0.5²)`.
    pub fn regression_default(x_mean: f64, x_std: f64) -> Self {
        Self {
            input_dim: 100,
            x_mean,
            x_std,
            beta_mean: 1.0,
            beta_std: 5.0,
            noise_std: 0.5,
            beta_mode: BetaMode::PerSample,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.x_mean,
            self.x_std,
            self.beta_mean,
            self.beta_std,
            self.noise_std,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("linear-Gaussian parameters must be finite"));
        }
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be at least 1"));
        }
        if self.x_std <= 0.0 {
            return Err(Error::config("x_std must be positive"));
        }
        if self.beta_std < 0.0 || self.noise_std < 0.0 {
            return Err(Error::config("beta_std and noise_std must be nonnegative"));
        }
        Ok(())
    }

    /// Draws one coefficient vector from `N(beta_mean, beta_std²)`.
    pub fn draw_beta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.input_dim)
            .map(|_| gaussian(rng, self.beta_mean, self.beta_std))
            .collect()
    }
}

#[inline]
fn gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + std * z
}

/// One labeled point `z = (x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Point {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

/// A probability distribution with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDomain {
    support: Vec<Point>,
    probabilities: Vec<f64>,
}

const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

impl DiscreteDomain {
    pub fn new(support: Vec<Point>, probabilities: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::config("discrete domain needs a nonempty support"));
        }
        if support.len() != probabilities.len() {
            return Err(Error::config(format!(
                "support has {} points but {} probabilities were given",
                support.len(),
                probabilities.len()
            )));
        }
        let dim = support[0].x.len();
        if support.iter().any(|p| p.x.len() != dim) {
            return Err(Error::config("support points differ in input dimension"));
        }
        if support
            .iter()
            .any(|p| !p.y.is_finite() || p.x.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::config("support points must be finite"));
        }
        if probabilities.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::config("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::config(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self {
            support,
            probabilities,
        })
    }

    /// Uniform distribution over `support`.
    pub fn uniform(support: Vec<Point>) -> Result<Self> {
        let n = support.len();
        if n == 0 {
            return Err(Error::config("discrete domain needs a nonempty support"));
        }
        Self::new(support, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(point: Point) -> Self {
        Self {
            support: vec![point],
            probabilities: vec![1.0],
        }
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn input_dim(&self) -> usize {
        self.support[0].x.len()
    }

    /// Index sampler over the support points.
    pub fn index_sampler(&self) -> IndexSampler {
        if self.support.len() == 1 {
            return IndexSampler(None);
        }
        // Construction only fails for empty, negative or all-zero weights,
        // which `new` already rules out.
        IndexSampler(Some(
            WeightedIndex::new(&self.probabilities).expect("validated probabilities"),
        ))
    }
}

/// Draws support indices of a [`DiscreteDomain`].
#[derive(Debug, Clone)]
pub struct IndexSampler(Option<WeightedIndex<f64>>);

impl IndexSampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.0 {
            None => 0,
            Some(w) => w.sample(rng),
        }
    }
}

/// N labeled rows sharing one input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    pub domain_tag: String,
}

impl Dataset {
    /// `features` is row-major with `labels.len()` rows of width `dim`.
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset input dimension must be at least 1"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::invalid(format!(
                "feature buffer of length {} does not hold {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self {
            dim,
            features,
            labels,
            domain_tag: tag.into(),
        })
    }

    pub fn from_points(points: &[Point], tag: impl Into<String>) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.x.len())
            .ok_or_else(|| Error::invalid("cannot build a dataset from zero points"))?;
        let mut features = Vec::with_capacity(dim * points.len());
        for p in points {
            if p.x.len() != dim {
                return Err(Error::invalid("points differ in input dimension"));
            }
            features.extend_from_slice(&p.x);
        }
        Self::new(dim, features, points.iter().map(|p| p.y).collect(), tag)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Row-major feature buffer.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.features
            .chunks_exact(self.dim)
            .zip(self.labels.iter().copied())
    }

    /// Writes `x_0,...,x_{I-1},y` followed by one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("x_{i}")).collect();
        header.push("y".into());
        out.write_record(&header)?;
        let mut record = Vec::with_capacity(self.dim + 1);
        for (x, y) in self.rows() {
            record.clear();
            record.extend(x.iter().map(|v| format_float(*v)));
            record.push(format_float(y));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R, tag: impl Into<String>) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let header = input.headers()?.clone();
        let width = header.len();
        if width < 2 || &header[width - 1] != "y" {
            return Err(Error::config("dataset CSV must end with a `y` column"));
        }
        for (i, name) in header.iter().take(width - 1).enumerate() {
            if name != format!("x_{i}") {
                return Err(Error::config(format!("unexpected dataset column `{name}`")));
            }
        }
        let dim = width - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for record in input.records() {
            let record = record?;
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad number `{field}` in dataset CSV")))?;
                if i < dim {
                    features.push(v);
                } else {
                    labels.push(v);
                }
            }
        }
        Self::new(dim, features, labels, tag)
    }

    pub fn load_csv(path: &Path, tag: impl Into<String>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), tag)
    }
}

/// Decimal rendering with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Anything expectations can be taken under: exact for discrete domains,
/// empirical means for datasets.
pub trait Measure {
    fn input_dim(&self) -> usize;

    fn expect<F: FnMut(&[f64], f64) -> f64>(&self, f: F) -> f64;
}

impl Measure for DiscreteDomain {
    fn input_dim(&self) -> usize {
        DiscreteDomain::input_dim(self)
    }

    fn expect<F: FnMut(&[f64], f64) -> f64>(&self, mut f: F) -> f64 {
        self.support
            .iter()
            .zip(&self.probabilities)
            .map(|(z, &p)| if p == 0.0 { 0.0 } else { p * f(&z.x, z.y) })
            .sum()
    }
}

impl Measure for Dataset {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn expect<F: FnMut(&[f64], f64) -> f64>(&self, mut f: F) -> f64 {
        let total: f64 = self.rows().map(|(x, y)| f(x, y)).sum();
        total / self.len() as f64
    }
}

/// `Σᵢ pᵢ f(zᵢ)` over the support.
pub fn exact_expectation<F: Fn(&Point) -> f64>(domain: &DiscreteDomain, f: F) -> f64 {
    domain
        .support
        .iter()
        .zip(&domain.probabilities)
        .map(|(z, &p)| p * f(z))
        .sum()
}

/// Something that can produce i.i.d. labeled samples.
pub trait DataSource: Sync {
    fn draw(&self, n: usize, seed: u64) -> Result<Dataset>;
}

impl DataSource for DiscreteDomain {
    fn draw(&self, n: usize, seed: u64) -> Result<Dataset> {
        sample_discrete(self, n, seed)
    }
}

impl DataSource for LinearGaussianDomainSpec {
    fn draw(&self, n: usize, seed: u64) -> Result<Dataset> {
        sample_linear_gaussian(self, n, seed)
    }
}

/// `n` i.i.d. rows from a linear-Gaussian domain.
///
/// Per row the stream yields the input coordinates, then (in per-sample mode)
/// the coefficient vector, then the noise term. In fixed mode the shared
/// coefficient vector is drawn first.
pub fn sample_linear_gaussian(spec: &LinearGaussianDomainSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seed::stream(seed, &[]);
    let beta = match spec.beta_mode {
        BetaMode::PerSample => None,
        BetaMode::FixedAcrossSamples => Some(spec.draw_beta(&mut rng)),
    };
    generate_rows(spec, beta.as_deref(), n, &mut rng)
}

/// `n` rows labeled with an externally supplied coefficient vector,
/// regardless of `spec.beta_mode`. Lets several domains share one `β`.
pub fn sample_linear_gaussian_with_beta(
    spec: &LinearGaussianDomainSpec,
    beta: &[f64],
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    spec.validate()?;
    if beta.len() != spec.input_dim {
        return Err(Error::invalid(format!(
            "coefficient vector has length {}, domain dimension is {}",
            beta.len(),
            spec.input_dim
        )));
    }
    let mut rng = seed::stream(seed, &[]);
    generate_rows(spec, Some(beta), n, &mut rng)
}

fn generate_rows(
    spec: &LinearGaussianDomainSpec,
    fixed_beta: Option<&[f64]>,
    n: usize,
    rng: &mut StreamRng,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let dim = spec.input_dim;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut row_beta = vec![0.0; dim];
    for _ in 0..n {
        let start = features.len();
        for _ in 0..dim {
            features.push(gaussian(rng, spec.x_mean, spec.x_std));
        }
        let beta = match fixed_beta {
            Some(b) => b,
            None => {
                for b in row_beta.iter_mut() {
                    *b = gaussian(rng, spec.beta_mean, spec.beta_std);
                }
                &row_beta
            }
        };
        let signal: f64 = features[start..].iter().zip(beta).map(|(x, b)| x * b).sum();
        labels.push(signal + gaussian(rng, 0.0, spec.noise_std));
    }
    Dataset::new(dim, features, labels, "linear_gaussian")
}

/// `n` i.i.d. draws from the support of `domain`.
pub fn sample_discrete(domain: &DiscreteDomain, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let mut rng = seed::stream(seed, &[]);
    let sampler = domain.index_sampler();
    let dim = domain.input_dim();
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z = &domain.support[sampler.draw(&mut rng)];
        features.extend_from_slice(&z.x);
        labels.push(z.y);
    }
    Dataset::new(dim, features, labels, "discrete")
}
