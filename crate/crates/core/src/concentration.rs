//! Monte-Carlo checks of the concentration inequalities behind the bounds.
//!
//! All verifiers work on finite-support domains, where exact expectations are
//! available. Trial `t` draws block `k` from the stream `(seed, t, k)`, so a
//! curve depends only on the seed. Reported standard errors are binomial,
//! `√(p(1 − p)/T)`, and a grid point counts as a violation only when the
//! empirical frequency exceeds the bound by more than [`MC_SLACK_SIGMAS`]
//! standard errors.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::complexity::mean_and_std_error;
use crate::domains::{format_float, Dataset, DiscreteDomain, IndexSampler, Point};
use crate::error::{Error, Result};
use crate::hypotheses::{argmin_index, FiniteFunctionClass, MixCoefficient, SimplexWeights};
use crate::seed;

pub const MC_SLACK_SIGMAS: f64 = 4.0;

/// Number of random states at which a McDiarmid certificate is spot-checked.
pub const CERTIFICATE_SPOT_CHECKS: usize = 50;

/// Empirical tail probabilities next to the bound they are compared with.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    pub xi_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub theoretical_bound: Vec<f64>,
    pub std_error: Vec<f64>,
    pub mc_trials: usize,
    pub violation_count: usize,
}

impl TailCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "xi,empirical_tail,theoretical_bound,std_error")?;
        for i in 0..self.xi_grid.len() {
            writeln!(
                out,
                "{},{},{},{}",
                format_float(self.xi_grid[i]),
                format_float(self.empirical_tail[i]),
                format_float(self.theoretical_bound[i]),
                format_float(self.std_error[i])
            )?;
        }
        Ok(())
    }
}

fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

fn check_grid(xi_grid: &[f64]) -> Result<()> {
    if xi_grid.is_empty() {
        return Err(Error::invalid("empty ξ grid"));
    }
    if xi_grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::invalid("ξ grid values must be positive and finite"));
    }
    if xi_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::invalid("ξ grid must be strictly increasing"));
    }
    Ok(())
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid("need at least one Monte-Carlo trial"));
    }
    Ok(())
}

/// Builds a curve from per-trial deviations. `exceeds(dev, ξ)` decides the
/// event; `allowed(ξ)` is the bound a point is judged against.
fn tail_curve(
    deviations: &[f64],
    xi_grid: &[f64],
    exceeds: impl Fn(f64, f64) -> bool,
    bound: impl Fn(f64) -> f64,
    allowed: impl Fn(f64) -> f64,
) -> TailCurve {
    let trials = deviations.len();
    let mut curve = TailCurve {
        xi_grid: xi_grid.to_vec(),
        empirical_tail: Vec::with_capacity(xi_grid.len()),
        theoretical_bound: Vec::with_capacity(xi_grid.len()),
        std_error: Vec::with_capacity(xi_grid.len()),
        mc_trials: trials,
        violation_count: 0,
    };
    for &xi in xi_grid {
        let hits = deviations.iter().filter(|&&d| exceeds(d, xi)).count();
        let p = hits as f64 / trials as f64;
        let se = binomial_se(p, trials);
        if p > allowed(xi) + MC_SLACK_SIGMAS * se {
            curve.violation_count += 1;
        }
        curve.empirical_tail.push(p);
        curve.theoretical_bound.push(bound(xi));
        curve.std_error.push(se);
    }
    curve
}

/// `f` on every support point, checked against `[a, b]`.
fn support_values<F: Fn(&Point) -> f64>(domain: &DiscreteDomain, f: &F, range: (f64, f64)) -> Result<Vec<f64>> {
    domain
        .support()
        .iter()
        .map(|p| {
            let v = f(p);
            if v >= range.0 && v <= range.1 {
                Ok(v)
            } else {
                Err(Error::invalid(format!(
                    "function value {v} outside its declared range [{}, {}]",
                    range.0, range.1
                )))
            }
        })
        .collect()
}

fn check_range(range: (f64, f64)) -> Result<f64> {
    let w = range.1 - range.0;
    if w > 0.0 && w.is_finite() {
        Ok(w)
    } else {
        Err(Error::invalid(format!("invalid range [{}, {}]", range.0, range.1)))
    }
}

fn block_mean(values: &[f64], sampler: &IndexSampler, n: usize, rng: &mut impl Rng) -> f64 {
    let mut sum = 0.0;
    for _ in 0..n {
        sum += values[sampler.draw(rng)];
    }
    sum / n as f64
}

fn exact_mean(values: &[f64], domain: &DiscreteDomain) -> f64 {
    values.iter().zip(domain.probabilities()).map(|(v, p)| v * p).sum()
}

/// Tail of `|Σ_k w_k E^k f − Σ_k w_k Ê^k f|` against
/// `2 exp(−2ξ² / ((b − a)² Σ_k w_k²/N_k))`.
#[allow(clippy::too_many_arguments)]
pub fn verify_deviation_multi<F: Fn(&Point) -> f64 + Sync>(
    f: F,
    range: (f64, f64),
    sources: &[DiscreteDomain],
    w: &SimplexWeights,
    ns: &[usize],
    xi_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<TailCurve> {
    let width = check_range(range)?;
    check_grid(xi_grid)?;
    check_trials(trials)?;
    if sources.len() != w.len() || ns.len() != w.len() {
        return Err(Error::invalid("sources, weights and sample sizes differ in length"));
    }
    if ns.contains(&0) {
        return Err(Error::invalid("sample sizes must be at least 1"));
    }
    let values = sources
        .iter()
        .map(|d| support_values(d, &f, range))
        .collect::<Result<Vec<_>>>()?;
    let samplers: Vec<IndexSampler> = sources.iter().map(|d| d.index_sampler()).collect();
    let weights = w.as_slice();
    let center: f64 = weights.iter().zip(&values).zip(sources).map(|((wk, v), d)| wk * exact_mean(v, d)).sum();
    let variance: f64 = weights.iter().zip(ns).map(|(wk, &n)| wk * wk / n as f64).sum();

    let deviations: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut stat = 0.0;
            for k in 0..weights.len() {
                let mut rng = seed::stream(seed, &[t, k as u64]);
                stat += weights[k] * block_mean(&values[k], &samplers[k], ns[k], &mut rng);
            }
            (center - stat).abs()
        })
        .collect();
    let bound = |xi: f64| 2.0 * (-2.0 * xi * xi / (width * width * variance)).exp();
    Ok(tail_curve(&deviations, xi_grid, |d, xi| d > xi, bound, bound))
}

/// Tail of `|E_τ f − Ê_τ f|` for `E_τ = τ E^T + (1 − τ) E^S` against
/// `2 exp(−2ξ² / ((b − a)² ((1 − τ)²/N_S + τ²/N_T)))`.
/// The source is drawn as block 0 and the target as block 1, so `τ = 0`
/// reproduces the single-source curve on the same seed.
#[allow(clippy::too_many_arguments)]
pub fn verify_deviation_combined<F: Fn(&Point) -> f64 + Sync>(
    f: F,
    range: (f64, f64),
    source: &DiscreteDomain,
    target: &DiscreteDomain,
    tau: MixCoefficient,
    n_source: usize,
    n_target: usize,
    xi_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<TailCurve> {
    let width = check_range(range)?;
    check_grid(xi_grid)?;
    check_trials(trials)?;
    if n_source == 0 || n_target == 0 {
        return Err(Error::invalid("sample sizes must be at least 1"));
    }
    let t = tau.value();
    let vs = support_values(source, &f, range)?;
    let vt = support_values(target, &f, range)?;
    let (ss, st) = (source.index_sampler(), target.index_sampler());
    let center = (1.0 - t) * exact_mean(&vs, source) + t * exact_mean(&vt, target);
    let variance = (1.0 - t).powi(2) / n_source as f64 + t * t / n_target as f64;

    let deviations: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let ms = block_mean(&vs, &ss, n_source, &mut seed::stream(seed, &[trial, 0]));
            let mt = block_mean(&vt, &st, n_target, &mut seed::stream(seed, &[trial, 1]));
            (center - ((1.0 - t) * ms + t * mt)).abs()
        })
        .collect();
    let bound = |xi: f64| 2.0 * (-2.0 * xi * xi / (width * width * variance)).exp();
    Ok(tail_curve(&deviations, xi_grid, |d, xi| d > xi, bound, bound))
}

fn draw_state<'a>(domains: &'a [DiscreteDomain], samplers: &[IndexSampler], ns: &[usize], seed: u64, path: u64) -> Vec<Vec<&'a Point>> {
    domains
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut rng = seed::stream(seed, &[path, k as u64]);
            (0..ns[k]).map(|_| &d.support()[samplers[k].draw(&mut rng)]).collect()
        })
        .collect()
}

/// One-sided tail of `H − E H` against `exp(−2ξ² / Σ_k Σ_n c_{k,n}²)` for a
/// function of `K` independent blocks with bounded differences `c`.
///
/// The certificate `c` is spot-checked at [`CERTIFICATE_SPOT_CHECKS`] random
/// states against every support alternative of one random coordinate; a
/// failure is an error. `E H` is estimated from `10 · trials` further draws
/// and its standard error is absorbed by shifting ξ when judging violations.
pub fn verify_mcdiarmid_generalized<H>(
    h: H,
    c: &[Vec<f64>],
    domains: &[DiscreteDomain],
    ns: &[usize],
    xi_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<TailCurve>
where
    H: Fn(&[Vec<&Point>]) -> f64 + Sync,
{
    check_grid(xi_grid)?;
    check_trials(trials)?;
    if domains.len() != ns.len() || c.len() != ns.len() || ns.is_empty() {
        return Err(Error::invalid("domains, certificate and sample sizes differ in length"));
    }
    for (k, (ck, &n)) in c.iter().zip(ns).enumerate() {
        if n == 0 {
            return Err(Error::invalid("sample sizes must be at least 1"));
        }
        if ck.len() != n {
            return Err(Error::invalid(format!(
                "certificate block {k} has {} entries for {n} points",
                ck.len()
            )));
        }
        if ck.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("certificate entries must be finite and nonnegative"));
        }
    }
    let samplers: Vec<IndexSampler> = domains.iter().map(|d| d.index_sampler()).collect();

    let mut rng = seed::stream(seed, &[u64::MAX]);
    for s in 0..CERTIFICATE_SPOT_CHECKS as u64 {
        let mut state = draw_state(domains, &samplers, ns, seed, u64::MAX - 1 - s);
        let k = rng.random_range(0..ns.len());
        let n = rng.random_range(0..ns[k]);
        let base = h(&state);
        let original = state[k][n];
        for alt in domains[k].support() {
            state[k][n] = alt;
            let gap = (h(&state) - base).abs();
            if gap > c[k][n] * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::InvalidCertificate(format!(
                    "changing coordinate {n} of block {k} moves H by {gap}, certificate allows {}",
                    c[k][n]
                )));
            }
        }
        state[k][n] = original;
    }

    let mean_runs = 10 * trials as u64;
    let reference: Vec<f64> = (0..mean_runs)
        .into_par_iter()
        .map(|t| h(&draw_state(domains, &samplers, ns, seed::derive_seed(seed, &[u64::MAX, 1]), t)))
        .collect();
    let (mean, mean_se) = mean_and_std_error(&reference);

    let deviations: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| h(&draw_state(domains, &samplers, ns, seed, t)) - mean)
        .collect();
    let sum_sq: f64 = c.iter().flatten().map(|v| v * v).sum();
    let bound = move |xi: f64| {
        if sum_sq == 0.0 {
            0.0
        } else {
            (-2.0 * xi * xi / sum_sq).exp()
        }
    };
    let allowed = move |xi: f64| bound((xi - MC_SLACK_SIGMAS * mean_se).max(0.0));
    Ok(tail_curve(&deviations, xi_grid, |d, xi| d >= xi, bound, allowed))
}

/// The single-block case.
pub fn verify_mcdiarmid<H>(h: H, c: &[f64], domain: &DiscreteDomain, n: usize, xi_grid: &[f64], trials: usize, seed: u64) -> Result<TailCurve>
where
    H: Fn(&[&Point]) -> f64 + Sync,
{
    verify_mcdiarmid_generalized(
        |blocks: &[Vec<&Point>]| h(&blocks[0]),
        &[c.to_vec()],
        std::slice::from_ref(domain),
        &[n],
        xi_grid,
        trials,
        seed,
    )
}

/// Outcome of comparing the deviation of a sample from the truth with the
/// deviation between that sample and an independent ghost sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizationCheck {
    pub xi: f64,
    pub xi_prime: f64,
    /// `P(sup_f |E f − Ê f| > ξ)`.
    pub lhs_prob: f64,
    /// `P(sup_f |Ê' f − Ê f| > ξ'/2)`.
    pub rhs_prob: f64,
    pub lhs_std_error: f64,
    pub rhs_std_error: f64,
    pub mc_trials: usize,
    /// Whether the sample-size condition `Π N ≥ 8 (b − a)² / ξ'²` holds.
    pub gate_satisfied: bool,
    /// `lhs ≤ 2 rhs` up to Monte-Carlo noise.
    pub holds: bool,
}

impl SymmetrizationCheck {
    fn new(xi: f64, xi_prime: f64, lhs_hits: usize, rhs_hits: usize, trials: usize, gate: bool) -> Self {
        let lhs = lhs_hits as f64 / trials as f64;
        let rhs = rhs_hits as f64 / trials as f64;
        let (lse, rse) = (binomial_se(lhs, trials), binomial_se(rhs, trials));
        let slack = MC_SLACK_SIGMAS * (lse * lse + 4.0 * rse * rse).sqrt();
        Self {
            xi,
            xi_prime,
            lhs_prob: lhs,
            rhs_prob: rhs,
            lhs_std_error: lse,
            rhs_std_error: rse,
            mc_trials: trials,
            gate_satisfied: gate,
            holds: lhs <= 2.0 * rhs + slack,
        }
    }
}

/// `values[j][s]`: member `j` on support point `s`.
fn class_values(class: &FiniteFunctionClass, domain: &DiscreteDomain) -> Vec<Vec<f64>> {
    (0..class.len())
        .map(|j| domain.support().iter().map(|p| class.eval(j, &p.x, p.y)).collect())
        .collect()
}

/// Per-member block means from a histogram of drawn support indices.
fn class_block_means(values: &[Vec<f64>], sampler: &IndexSampler, support: usize, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut counts = vec![0usize; support];
    for _ in 0..n {
        counts[sampler.draw(rng)] += 1;
    }
    values
        .iter()
        .map(|row| row.iter().zip(&counts).map(|(v, &c)| v * c as f64).sum::<f64>() / n as f64)
        .collect()
}

fn symmetrization_gate(ln_prod: f64, xi_prime: f64, width: f64) -> bool {
    ln_prod >= (8.0 * width * width).ln() - 2.0 * xi_prime.ln()
}

/// Monte-Carlo check of the multi-source symmetrization inequality at one ξ.
/// Requires `ξ > Σ_k w_k ipm(F, S_k, T)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_symmetrization_multi(
    class: &FiniteFunctionClass,
    sources: &[DiscreteDomain],
    target: &DiscreteDomain,
    w: &SimplexWeights,
    ns: &[usize],
    xi: f64,
    trials: usize,
    seed: u64,
) -> Result<SymmetrizationCheck> {
    check_trials(trials)?;
    if sources.len() != w.len() || ns.len() != w.len() {
        return Err(Error::invalid("sources, weights and sample sizes differ in length"));
    }
    if ns.contains(&0) {
        return Err(Error::invalid("sample sizes must be at least 1"));
    }
    let d_w = crate::divergences::weighted_ipm(class, sources, target, w)?;
    if !(xi > d_w) {
        return Err(Error::Precondition(format!(
            "ξ = {xi} must exceed the weighted divergence {d_w}"
        )));
    }
    let xi_prime = xi - d_w;
    let truth = class.expectations(target);
    let values: Vec<_> = sources.iter().map(|d| class_values(class, d)).collect();
    let samplers: Vec<_> = sources.iter().map(|d| d.index_sampler()).collect();
    let weights = w.as_slice();
    let m = class.len();

    let events: Vec<(bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut real = vec![0.0; m];
            let mut ghost = vec![0.0; m];
            for k in 0..weights.len() {
                let size = sources[k].support().len();
                let a = class_block_means(&values[k], &samplers[k], size, ns[k], &mut seed::stream(seed, &[t, k as u64, 0]));
                let b = class_block_means(&values[k], &samplers[k], size, ns[k], &mut seed::stream(seed, &[t, k as u64, 1]));
                for j in 0..m {
                    real[j] += weights[k] * a[j];
                    ghost[j] += weights[k] * b[j];
                }
            }
            let lhs = (0..m).map(|j| (truth[j] - real[j]).abs()).fold(0.0, f64::max) > xi;
            let rhs = (0..m).map(|j| (ghost[j] - real[j]).abs()).fold(0.0, f64::max) > xi_prime / 2.0;
            (lhs, rhs)
        })
        .collect();
    let ln_prod: f64 = ns.iter().map(|&n| (n as f64).ln()).sum();
    Ok(SymmetrizationCheck::new(
        xi,
        xi_prime,
        events.iter().filter(|e| e.0).count(),
        events.iter().filter(|e| e.1).count(),
        trials,
        symmetrization_gate(ln_prod, xi_prime, class.range_width()),
    ))
}

/// Monte-Carlo check of the source/target symmetrization inequality at one ξ.
/// Requires `ξ > (1 − τ) ipm(F, S, T)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_symmetrization_combined(
    class: &FiniteFunctionClass,
    source: &DiscreteDomain,
    target: &DiscreteDomain,
    tau: MixCoefficient,
    n_source: usize,
    n_target: usize,
    xi: f64,
    trials: usize,
    seed: u64,
) -> Result<SymmetrizationCheck> {
    check_trials(trials)?;
    if n_source == 0 || n_target == 0 {
        return Err(Error::invalid("sample sizes must be at least 1"));
    }
    let t = tau.value();
    let shift = (1.0 - t) * crate::divergences::ipm(class, source, target);
    if !(xi > shift) {
        return Err(Error::Precondition(format!(
            "ξ = {xi} must exceed the scaled divergence {shift}"
        )));
    }
    let xi_prime = xi - shift;
    let truth = class.expectations(target);
    let (vs, vt) = (class_values(class, source), class_values(class, target));
    let (ss, st) = (source.index_sampler(), target.index_sampler());
    let (ks, kt) = (source.support().len(), target.support().len());
    let m = class.len();

    let events: Vec<(bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let draw = |ghost: u64| {
                let s = class_block_means(&vs, &ss, ks, n_source, &mut seed::stream(seed, &[trial, 0, ghost]));
                let g = class_block_means(&vt, &st, kt, n_target, &mut seed::stream(seed, &[trial, 1, ghost]));
                (0..m).map(|j| t * g[j] + (1.0 - t) * s[j]).collect::<Vec<f64>>()
            };
            let (real, ghost) = (draw(0), draw(1));
            let lhs = (0..m).map(|j| (truth[j] - real[j]).abs()).fold(0.0, f64::max) > xi;
            let rhs = (0..m).map(|j| (ghost[j] - real[j]).abs()).fold(0.0, f64::max) > xi_prime / 2.0;
            (lhs, rhs)
        })
        .collect();
    let ln_prod = (n_source as f64).ln() + (n_target as f64).ln();
    Ok(SymmetrizationCheck::new(
        xi,
        xi_prime,
        events.iter().filter(|e| e.0).count(),
        events.iter().filter(|e| e.1).count(),
        trials,
        symmetrization_gate(ln_prod, xi_prime, class.range_width()),
    ))
}

/// `Σ_k w_k Ê^k f` from per-block function values.
pub fn multi_statistic_normalized(blocks: &[Vec<f64>], w: &SimplexWeights) -> f64 {
    blocks
        .iter()
        .zip(w.as_slice())
        .map(|(b, wk)| wk * b.iter().sum::<f64>() / b.len() as f64)
        .sum()
}

/// `Σ_k w_k (Π_{i≠k} N_i) Σ_n f(z_n^(k))`, the same statistic scaled by `Π N_k`.
pub fn multi_statistic_literal(blocks: &[Vec<f64>], w: &SimplexWeights) -> f64 {
    (0..blocks.len())
        .map(|k| {
            let others: f64 = blocks
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, b)| b.len() as f64)
                .product();
            w.as_slice()[k] * others * blocks[k].iter().sum::<f64>()
        })
        .sum()
}

/// `τ Ê^T f + (1 − τ) Ê^S f`.
pub fn combined_statistic_normalized(source: &[f64], target: &[f64], tau: MixCoefficient) -> f64 {
    let t = tau.value();
    t * target.iter().sum::<f64>() / target.len() as f64 + (1.0 - t) * source.iter().sum::<f64>() / source.len() as f64
}

/// `τ N_S Σ_T f + (1 − τ) N_T Σ_S f`, the same statistic scaled by `N_S N_T`.
pub fn combined_statistic_literal(source: &[f64], target: &[f64], tau: MixCoefficient) -> f64 {
    let t = tau.value();
    t * source.len() as f64 * target.iter().sum::<f64>() + (1.0 - t) * target.len() as f64 * source.iter().sum::<f64>()
}

/// Excess target risk of the empirical minimizer next to twice the largest
/// deviation between target and empirical risks over the class.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessRiskChain {
    /// Index of the empirical-risk minimizer.
    pub chosen: usize,
    /// Index of the target-risk minimizer.
    pub best: usize,
    pub excess: f64,
    pub twice_sup_deviation: f64,
}

impl ExcessRiskChain {
    pub fn holds(&self) -> bool {
        self.excess >= -1e-12 && self.excess <= self.twice_sup_deviation + 1e-12
    }

    fn from_risks(target: Vec<f64>, empirical: Vec<f64>) -> Self {
        let chosen = argmin_index(empirical.iter().copied());
        let best = argmin_index(target.iter().copied());
        let sup = target
            .iter()
            .zip(&empirical)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Self {
            chosen,
            best,
            excess: target[chosen] - target[best],
            twice_sup_deviation: 2.0 * sup,
        }
    }
}

/// The chain for the weighted multi-source empirical risk.
pub fn excess_risk_chain_multi(
    class: &FiniteFunctionClass,
    samples: &[Dataset],
    w: &SimplexWeights,
    target: &DiscreteDomain,
) -> Result<ExcessRiskChain> {
    if samples.len() != w.len() {
        return Err(Error::invalid(format!("{} samples but {} weights", samples.len(), w.len())));
    }
    let mut empirical = vec![0.0; class.len()];
    for (data, wk) in samples.iter().zip(w.as_slice()) {
        for (e, v) in empirical.iter_mut().zip(class.expectations(data)) {
            *e += wk * v;
        }
    }
    Ok(ExcessRiskChain::from_risks(class.expectations(target), empirical))
}

/// The chain for the `τ`-mixed source/target empirical risk.
pub fn excess_risk_chain_combined(
    class: &FiniteFunctionClass,
    source_sample: &Dataset,
    target_sample: &Dataset,
    tau: MixCoefficient,
    target: &DiscreteDomain,
) -> Result<ExcessRiskChain> {
    let t = tau.value();
    let es = class.expectations(source_sample);
    let et = class.expectations(target_sample);
    let empirical = es.iter().zip(&et).map(|(s, g)| t * g + (1.0 - t) * s).collect();
    Ok(ExcessRiskChain::from_risks(class.expectations(target), empirical))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::sample_discrete;
    use crate::fixtures::{bernoulli_domain, label_class};
    use crate::hypotheses::{LinearModel, LossFunction};
    use proptest::prelude::*;
    use rand::Rng;

    fn label(p: &Point) -> f64 {
        p.y
    }

    fn grid() -> Vec<f64> {
        (1..=10).map(|i| i as f64 / 10.0).collect()
    }

    #[test]
    fn deviation_multi_respects_bound() {
        let sources = [bernoulli_domain(0.3), bernoulli_domain(0.8)];
        let w = SimplexWeights::pair(0.6).unwrap();
        let curve = verify_deviation_multi(label, (0.0, 1.0), &sources, &w, &[20, 10], &grid(), 20_000, 1).unwrap();
        assert_eq!(curve.violation_count, 0);
        assert!(curve.empirical_tail.windows(2).all(|p| p[1] <= p[0]));
        assert_eq!(*curve.empirical_tail.last().unwrap(), 0.0);
        assert!(curve.empirical_tail[0] > 0.0);
    }

    #[test]
    fn deviation_rejects_out_of_range_functions() {
        let d = [bernoulli_domain(0.5)];
        let w = SimplexWeights::new(vec![1.0]).unwrap();
        assert!(verify_deviation_multi(|p: &Point| 2.0 * p.y, (0.0, 1.0), &d, &w, &[5], &grid(), 10, 0).is_err());
        assert!(verify_deviation_multi(label, (0.0, 1.0), &d, &w, &[5], &[0.2, 0.1], 10, 0).is_err());
    }

    #[test]
    fn combined_at_zero_tau_is_single_source() {
        let s = bernoulli_domain(0.4);
        let t = bernoulli_domain(0.9);
        let one = SimplexWeights::new(vec![1.0]).unwrap();
        let a = verify_deviation_combined(label, (0.0, 1.0), &s, &t, MixCoefficient::new(0.0).unwrap(), 15, 4, &grid(), 5000, 7).unwrap();
        let b = verify_deviation_multi(label, (0.0, 1.0), std::slice::from_ref(&s), &one, &[15], &grid(), 5000, 7).unwrap();
        assert_eq!(a, b);
        let c = verify_deviation_combined(label, (0.0, 1.0), &s, &t, MixCoefficient::new(0.7).unwrap(), 15, 4, &grid(), 20_000, 7).unwrap();
        assert_eq!(c.violation_count, 0);
    }

    #[test]
    fn mcdiarmid_constant_and_certificates() {
        let d = [bernoulli_domain(0.5), bernoulli_domain(0.2)];
        let c = vec![vec![0.0; 3], vec![0.0; 2]];
        let curve = verify_mcdiarmid_generalized(|_: &[Vec<&Point>]| 0.1, &c, &d, &[3, 2], &grid(), 1000, 3).unwrap();
        assert!(curve.empirical_tail.iter().all(|&p| p == 0.0));

        let mean = |b: &[Vec<&Point>]| b.iter().flatten().map(|p| p.y).sum::<f64>() / 5.0;
        let err = verify_mcdiarmid_generalized(mean, &c, &d, &[3, 2], &grid(), 100, 3).unwrap_err();
        assert!(matches!(err, Error::InvalidCertificate(_)));

        let c = vec![vec![0.2; 3], vec![0.2; 2]];
        let curve = verify_mcdiarmid_generalized(mean, &c, &d, &[3, 2], &grid(), 20_000, 3).unwrap();
        assert_eq!(curve.violation_count, 0);
    }

    #[test]
    fn mcdiarmid_single_block_matches_generalized() {
        let d = bernoulli_domain(0.35);
        let h = |b: &[&Point]| b.iter().map(|p| p.y).sum::<f64>() / 6.0;
        let a = verify_mcdiarmid(h, &[1.0 / 6.0; 6], &d, 6, &grid(), 3000, 11).unwrap();
        let b = verify_mcdiarmid_generalized(|b: &[Vec<&Point>]| h(&b[0]), &[vec![1.0 / 6.0; 6]], std::slice::from_ref(&d), &[6], &grid(), 3000, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetrization_precondition() {
        let class = label_class();
        let s = [bernoulli_domain(0.2)];
        let t = bernoulli_domain(0.7);
        let w = SimplexWeights::new(vec![1.0]).unwrap();
        let err = verify_symmetrization_multi(&class, &s, &t, &w, &[4], 0.45, 10, 0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        let err = verify_symmetrization_combined(&class, &s[0], &t, MixCoefficient::new(0.0).unwrap(), 4, 4, 0.4, 10, 0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(verify_symmetrization_combined(&class, &s[0], &t, MixCoefficient::new(0.5).unwrap(), 4, 4, 0.4, 10, 0).is_ok());
    }

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// `P(Binomial(n, p) = k)` for every k.
    fn pmf(n: usize, p: f64) -> Vec<f64> {
        (0..=n).map(|k| binom(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)).collect()
    }

    #[test]
    fn symmetrization_single_source_matches_enumeration() {
        // One function f(z) = y; the sample mean is k/n.
        let (p_s, p_t, n, xi) = (0.3, 0.4, 5usize, 0.37);
        let class = label_class();
        let w = SimplexWeights::new(vec![1.0]).unwrap();
        let check = verify_symmetrization_multi(&class, &[bernoulli_domain(p_s)], &bernoulli_domain(p_t), &w, &[n], xi, 40_000, 5).unwrap();
        let xi_prime = xi - (p_t - p_s);
        let probs = pmf(n, p_s);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (k, pk) in probs.iter().enumerate() {
            if (p_t - k as f64 / n as f64).abs() > xi {
                lhs += pk;
            }
            for (k2, pk2) in probs.iter().enumerate() {
                if ((k2 as f64 - k as f64) / n as f64).abs() > xi_prime / 2.0 {
                    rhs += pk * pk2;
                }
            }
        }
        assert!(lhs <= 2.0 * rhs);
        assert!((check.lhs_prob - lhs).abs() <= 4.0 * check.lhs_std_error.max(1e-3));
        assert!((check.rhs_prob - rhs).abs() <= 4.0 * check.rhs_std_error.max(1e-3));
        assert!(check.holds);
    }

    #[test]
    fn zero_weight_source_changes_nothing() {
        let s = bernoulli_domain(0.3);
        let one = SimplexWeights::new(vec![1.0]).unwrap();
        let padded = SimplexWeights::new(vec![1.0, 0.0]).unwrap();
        let a = verify_deviation_multi(label, (0.0, 1.0), std::slice::from_ref(&s), &one, &[12], &grid(), 4000, 9).unwrap();
        let b = verify_deviation_multi(label, (0.0, 1.0), &[s, bernoulli_domain(0.9)], &padded, &[12, 5], &grid(), 4000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn combined_same_domain_respects_bound() {
        let d = bernoulli_domain(0.5);
        let mut xi = grid();
        xi.push(1.5);
        let curve = verify_deviation_combined(label, (0.0, 1.0), &d, &d, MixCoefficient::new(0.5).unwrap(), 10, 10, &xi, 100_000, 21).unwrap();
        assert_eq!(curve.violation_count, 0);
        assert_eq!(&curve.empirical_tail[curve.empirical_tail.len() - 2..], &[0.0, 0.0]);
    }

    #[test]
    fn weighted_mean_mcdiarmid_instantiation() {
        let d = [bernoulli_domain(0.3), bernoulli_domain(0.6)];
        let (w, ns) = ([0.7, 0.3], [8usize, 4]);
        let c: Vec<Vec<f64>> = (0..2).map(|k| vec![w[k] / ns[k] as f64; ns[k]]).collect();
        let h = |b: &[Vec<&Point>]| (0..2).map(|k| w[k] * b[k].iter().map(|p| p.y).sum::<f64>() / ns[k] as f64).sum::<f64>();
        let curve = verify_mcdiarmid_generalized(h, &c, &d, &ns, &grid(), 100_000, 13).unwrap();
        assert_eq!(curve.violation_count, 0);
    }

    #[test]
    fn symmetrization_trivial_cases() {
        let class = label_class();
        let d = bernoulli_domain(0.4);
        let w = SimplexWeights::pair(0.5).unwrap();
        let check = verify_symmetrization_multi(&class, &[d.clone(), d.clone()], &d, &w, &[3, 3], 2.5, 2000, 1).unwrap();
        assert_eq!((check.lhs_prob, check.rhs_prob), (0.0, 0.0));
        let zero = MixCoefficient::new(0.0).unwrap();
        let check = verify_symmetrization_combined(&class, &d, &d, zero, 3, 3, 2.5, 2000, 1).unwrap();
        assert_eq!((check.lhs_prob, check.rhs_prob), (0.0, 0.0));

        let small = verify_symmetrization_multi(&class, &[d.clone(), d.clone()], &d, &w, &[1, 1], 0.2, 2000, 1).unwrap();
        assert!(!small.gate_satisfied);
        assert!(small.lhs_prob > 0.0);
    }

    #[test]
    fn symmetrization_lhs_shrinks_with_xi() {
        let class = label_class();
        let (s, t) = (bernoulli_domain(0.3), bernoulli_domain(0.5));
        let tau = MixCoefficient::new(0.4).unwrap();
        let lhs: Vec<f64> = [0.15, 0.2, 0.3, 0.45, 0.6]
            .iter()
            .map(|&xi| verify_symmetrization_combined(&class, &s, &t, tau, 4, 4, xi, 20_000, 17).unwrap().lhs_prob)
            .collect();
        assert!(lhs.windows(2).all(|p| p[1] <= p[0]), "{lhs:?}");
    }

    #[test]
    fn statistics_scale_consistently() {
        let w = SimplexWeights::new(vec![0.2, 0.3, 0.5]).unwrap();
        let blocks = vec![vec![0.1, 0.4], vec![0.9, 0.2, 0.3], vec![0.5; 4]];
        let lit = multi_statistic_literal(&blocks, &w);
        assert!((lit / 24.0 - multi_statistic_normalized(&blocks, &w)).abs() < 1e-12);
        let tau = MixCoefficient::new(0.25).unwrap();
        let (s, t) = (vec![0.3, 0.6, 0.9], vec![0.1, 0.2]);
        assert!((combined_statistic_literal(&s, &t, tau) / 6.0 - combined_statistic_normalized(&s, &t, tau)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn excess_risk_chain_holds(seed in 0u64..500, wv in 0.0..1.0f64, tau in 0.0..0.99f64) {
            let mut rng = seed::stream(seed, &[]);
            let pts = |rng: &mut seed::StreamRng| -> Vec<Point> {
                (0..4).map(|_| Point::new(vec![rng.random_range(-1.0..1.0), 1.0], rng.random_range(-1.0..1.0))).collect()
            };
            let target = DiscreteDomain::uniform(pts(&mut rng)).unwrap();
            let s1 = DiscreteDomain::uniform(pts(&mut rng)).unwrap();
            let s2 = DiscreteDomain::uniform(pts(&mut rng)).unwrap();
            let hyps = (0..5).map(|_| LinearModel::new(vec![rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)]).unwrap()).collect();
            let class = FiniteFunctionClass::new(hyps, LossFunction::squared().clipped(0.0, 16.0).unwrap()).unwrap();
            let a = sample_discrete(&s1, 7, seed).unwrap();
            let b = sample_discrete(&s2, 9, seed + 1).unwrap();
            let chain = excess_risk_chain_multi(&class, &[a.clone(), b], &SimplexWeights::pair(wv).unwrap(), &target).unwrap();
            prop_assert!(chain.holds(), "{chain:?}");
            let tsample = sample_discrete(&target, 3, seed + 2).unwrap();
            let chain = excess_risk_chain_combined(&class, &a, &tsample, MixCoefficient::new(tau).unwrap(), &target).unwrap();
            prop_assert!(chain.holds(), "{chain:?}");
        }
    }
}
