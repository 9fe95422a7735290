//! Complexity measures of finite function classes.
//!
//! Distances between functions are taken in the block-weighted ℓ₁ norms
//!
//! ```text
//! ℓ₁^w : ‖f‖ = Σ_k (w_k / N_k) Σ_n |f(z_n^(k))|
//! ℓ₁^τ : ‖f‖ = (τ / N_T) Σ_T |f| + ((1 − τ) / N_S) Σ_S |f|
//! ```
//!
//! over a sample laid out block after block. Covering numbers are computed
//! greedily; the uniform entropy number replaces its supremum over samples
//! with a maximum over sampled ghost-augmented realizations (every block
//! doubled, `2N_k` points), so it is a lower estimate. `ln |F|` is the
//! matching upper bound for any finite class.

use rand::Rng;
use rayon::prelude::*;

use crate::domains::{DataSource, Dataset, DiscreteDomain};
use crate::error::{Error, Result};
use crate::hypotheses::{EvaluationMatrix, FiniteFunctionClass, MixCoefficient, SimplexWeights};
use crate::seed;

/// Sample sizes up to which the empirical Rademacher average is computed by
/// enumerating every sign pattern.
pub const EXACT_ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1W,
    L1Tau,
}

/// A block-weighted ℓ₁ norm. For `L1Tau` the blocks are `(target, source)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSpec {
    kind: NormKind,
    coefficients: Vec<f64>,
    block_sizes: Vec<usize>,
}

impl NormSpec {
    pub fn l1w(w: &SimplexWeights, block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.len() != w.len() {
            return Err(Error::invalid(format!(
                "{} blocks but {} weights",
                block_sizes.len(),
                w.len()
            )));
        }
        Self::checked(NormKind::L1W, w.as_slice().to_vec(), block_sizes)
    }

    pub fn l1tau(tau: MixCoefficient, n_target: usize, n_source: usize) -> Result<Self> {
        let t = tau.value();
        Self::checked(NormKind::L1Tau, vec![t, 1.0 - t], vec![n_target, n_source])
    }

    fn checked(kind: NormKind, coefficients: Vec<f64>, block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.contains(&0) {
            return Err(Error::invalid("norm blocks must be nonempty"));
        }
        Ok(Self {
            kind,
            coefficients,
            block_sizes,
        })
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Total number of sample points the norm expects.
    pub fn total_len(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// The same norm over ghost-augmented samples (every block doubled).
    pub fn doubled(&self) -> Self {
        Self {
            kind: self.kind,
            coefficients: self.coefficients.clone(),
            block_sizes: self.block_sizes.iter().map(|n| 2 * n).collect(),
        }
    }

    fn distance_unchecked(&self, fa: &[f64], fb: &[f64]) -> f64 {
        let mut offset = 0;
        let mut total = 0.0;
        for (&c, &n) in self.coefficients.iter().zip(&self.block_sizes) {
            let block: f64 = fa[offset..offset + n]
                .iter()
                .zip(&fb[offset..offset + n])
                .map(|(a, b)| (a - b).abs())
                .sum();
            total += c / n as f64 * block;
            offset += n;
        }
        total
    }
}

/// Distance between two evaluation vectors laid out block after block.
pub fn norm_distance(fa: &[f64], fb: &[f64], norm: &NormSpec) -> Result<f64> {
    let expected = norm.total_len();
    if fa.len() != expected || fb.len() != expected {
        return Err(Error::invalid(format!(
            "evaluation vectors of length {} and {} do not match blocks totalling {expected}",
            fa.len(),
            fb.len()
        )));
    }
    Ok(norm.distance_unchecked(fa, fb))
}

/// Size of a greedy ξ-cover: the first uncovered function becomes a center
/// and absorbs every function within distance `xi`, until none are left.
pub fn covering_number_greedy(matrix: &EvaluationMatrix, xi: f64, norm: &NormSpec) -> Result<usize> {
    if !(xi > 0.0) {
        return Err(Error::invalid(format!("cover radius must be positive, got {xi}")));
    }
    if matrix.num_samples() != norm.total_len() {
        return Err(Error::invalid(format!(
            "matrix has {} samples, norm expects {}",
            matrix.num_samples(),
            norm.total_len()
        )));
    }
    let rows = matrix.rows();
    let mut covered = vec![false; rows.len()];
    let mut centers = 0;
    while let Some(pivot) = covered.iter().position(|c| !c) {
        centers += 1;
        for j in pivot..rows.len() {
            if !covered[j] && norm.distance_unchecked(&rows[pivot], &rows[j]) <= xi {
                covered[j] = true;
            }
        }
    }
    Ok(centers)
}

/// `ln |F|`, the largest value any log covering number of the class can take.
pub fn log_class_size(class: &FiniteFunctionClass) -> f64 {
    (class.len() as f64).ln()
}

/// Produces ghost-augmented realizations together with the norm they are
/// measured in.
pub trait GhostSampler: Sync {
    /// Norm over the doubled blocks.
    fn norm(&self) -> NormSpec;

    /// One realization, blocks concatenated in the norm's order.
    fn realize(&self, seed: u64) -> Result<Dataset>;
}

/// `K` source domains with `N_k` points each; realizations hold `2N_k` per block.
#[derive(Debug, Clone)]
pub struct MultiSourceGhost<'a> {
    pub sources: &'a [DiscreteDomain],
    pub sizes: Vec<usize>,
    pub weights: SimplexWeights,
}

impl GhostSampler for MultiSourceGhost<'_> {
    fn norm(&self) -> NormSpec {
        NormSpec::l1w(&self.weights, self.sizes.clone())
            .expect("sizes validated by realize")
            .doubled()
    }

    fn realize(&self, seed: u64) -> Result<Dataset> {
        if self.sources.len() != self.sizes.len() || self.sizes.len() != self.weights.len() {
            return Err(Error::invalid("sources, sizes and weights differ in length"));
        }
        let blocks = self
            .sources
            .iter()
            .zip(&self.sizes)
            .enumerate()
            .map(|(k, (d, &n))| d.draw(2 * n, seed::derive_seed(seed, &[k as u64])))
            .collect::<Result<Vec<_>>>()?;
        concat(&blocks)
    }
}

/// Target and source domain mixed by `τ`; blocks are `(target, source)`.
#[derive(Debug, Clone)]
pub struct CombinedGhost<'a> {
    pub source: &'a DiscreteDomain,
    pub target: &'a DiscreteDomain,
    pub n_source: usize,
    pub n_target: usize,
    pub tau: MixCoefficient,
}

impl GhostSampler for CombinedGhost<'_> {
    fn norm(&self) -> NormSpec {
        NormSpec::l1tau(self.tau, self.n_target, self.n_source)
            .expect("sizes validated by realize")
            .doubled()
    }

    fn realize(&self, seed: u64) -> Result<Dataset> {
        let target = self.target.draw(2 * self.n_target, seed::derive_seed(seed, &[0]))?;
        let source = self.source.draw(2 * self.n_source, seed::derive_seed(seed, &[1]))?;
        concat(&[target, source])
    }
}

fn concat(blocks: &[Dataset]) -> Result<Dataset> {
    let dim = blocks[0].dim();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for b in blocks {
        if b.dim() != dim {
            return Err(Error::invalid("domains differ in input dimension"));
        }
        features.extend_from_slice(b.features());
        labels.extend_from_slice(b.labels());
    }
    Dataset::new(dim, features, labels, "ghost_augmented")
}

/// Maximum of `ln N(F, ξ, ‖·‖)` over `realizations` sampled realizations.
pub fn uniform_entropy_estimate<G: GhostSampler>(
    class: &FiniteFunctionClass,
    sampler: &G,
    xi: f64,
    realizations: usize,
    seed: u64,
) -> Result<f64> {
    if realizations == 0 {
        return Err(Error::invalid("need at least one realization"));
    }
    let norm = sampler.norm();
    let logs = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let sample = sampler.realize(seed::derive_seed(seed, &[r]))?;
            let matrix = EvaluationMatrix::from_dataset(class, &sample)?;
            Ok((covering_number_greedy(&matrix, xi, &norm)? as f64).ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(logs.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RademacherMode {
    EmpiricalFixedSample,
    ExpectedOverData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RademacherEstimate {
    pub value: f64,
    pub std_error: f64,
    pub mc_trials: usize,
    pub mode: RademacherMode,
    /// Every sign pattern was enumerated; `std_error` is then zero.
    pub exact: bool,
}

/// `E_σ max_f (1/N)|Σ σ_n f(z_n)|` on a fixed sample. Exact for
/// `N ≤ EXACT_ENUMERATION_LIMIT`, Monte Carlo otherwise.
pub fn rademacher_empirical(matrix: &EvaluationMatrix, mc_trials: usize, seed: u64) -> Result<RademacherEstimate> {
    if mc_trials == 0 {
        return Err(Error::invalid("need at least one Monte-Carlo trial"));
    }
    if matrix.num_samples() <= EXACT_ENUMERATION_LIMIT {
        Ok(RademacherEstimate {
            value: rademacher_exact(matrix)?,
            std_error: 0.0,
            mc_trials,
            mode: RademacherMode::EmpiricalFixedSample,
            exact: true,
        })
    } else {
        rademacher_empirical_mc(matrix, mc_trials, seed)
    }
}

/// Exact average over all `2^N` sign vectors, visited in Gray-code order so
/// each step flips a single sign.
pub fn rademacher_exact(matrix: &EvaluationMatrix) -> Result<f64> {
    let n = matrix.num_samples();
    if n > EXACT_ENUMERATION_LIMIT {
        return Err(Error::invalid(format!(
            "exact enumeration is limited to {EXACT_ENUMERATION_LIMIT} samples, got {n}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let rows = matrix.rows();
    let mut sums: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let mut signs = vec![1.0f64; n];
    let sup = |sums: &[f64]| sums.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let mut total = sup(&sums);
    let patterns: u64 = 1 << n;
    for k in 1..patterns {
        let bit = k.trailing_zeros() as usize;
        let old = signs[bit];
        signs[bit] = -old;
        for (s, row) in sums.iter_mut().zip(rows) {
            *s -= 2.0 * old * row[bit];
        }
        total += sup(&sums);
    }
    Ok(total / patterns as f64 / n as f64)
}

/// Monte-Carlo estimate with independent sign vectors; trial `t` draws from
/// the stream `(seed, t)`.
pub fn rademacher_empirical_mc(matrix: &EvaluationMatrix, mc_trials: usize, seed: u64) -> Result<RademacherEstimate> {
    if mc_trials == 0 {
        return Err(Error::invalid("need at least one Monte-Carlo trial"));
    }
    let n = matrix.num_samples();
    let rows = matrix.rows();
    let values: Vec<f64> = (0..mc_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(seed, &[t]);
            let mut sums = vec![0.0; rows.len()];
            let mut bits = 0u64;
            for i in 0..n {
                if i % 64 == 0 {
                    bits = rng.random();
                }
                let positive = bits & 1 == 1;
                bits >>= 1;
                for (s, row) in sums.iter_mut().zip(rows) {
                    if positive {
                        *s += row[i];
                    } else {
                        *s -= row[i];
                    }
                }
            }
            sums.iter().fold(0.0f64, |m, s| m.max(s.abs())) / n as f64
        })
        .collect();
    let (value, std_error) = mean_and_std_error(&values);
    Ok(RademacherEstimate {
        value,
        std_error,
        mc_trials,
        mode: RademacherMode::EmpiricalFixedSample,
        exact: false,
    })
}

/// Expectation over datasets of size `n` of the empirical Rademacher average.
/// Dataset `o` is drawn from stream `(seed, o, 0)` and its signs from
/// `(seed, o, 1)`. With several outer trials the standard error is the spread
/// of the per-dataset values, which already includes the inner noise.
pub fn rademacher_expected<D: DataSource>(
    class: &FiniteFunctionClass,
    domain: &D,
    n: usize,
    outer_trials: usize,
    inner_trials: usize,
    seed: u64,
) -> Result<RademacherEstimate> {
    if outer_trials == 0 || inner_trials == 0 {
        return Err(Error::invalid("trial counts must be at least 1"));
    }
    let inner = (0..outer_trials as u64)
        .into_par_iter()
        .map(|o| {
            let data = domain.draw(n, seed::derive_seed(seed, &[o, 0]))?;
            let matrix = EvaluationMatrix::from_dataset(class, &data)?;
            rademacher_empirical(&matrix, inner_trials, seed::derive_seed(seed, &[o, 1]))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = inner.iter().map(|e| e.value).collect();
    let (value, spread_error) = mean_and_std_error(&values);
    let std_error = if outer_trials > 1 {
        spread_error
    } else {
        inner[0].std_error
    };
    Ok(RademacherEstimate {
        value,
        std_error,
        mc_trials: outer_trials * inner_trials,
        mode: RademacherMode::ExpectedOverData,
        exact: inner.iter().all(|e| e.exact) && outer_trials == 1,
    })
}

/// Mean and `sample std / √len` (zero for a single value).
pub(crate) fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
