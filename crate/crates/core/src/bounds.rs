//! Closed-form generalization bounds and their single-domain baselines.
//!
//! Each evaluator returns a [`BoundReport`] that splits the bound into a
//! divergence, a complexity and a confidence term. Entropy-based bounds also
//! report whether their sample-size condition holds; it is evaluated in log
//! space so products of large sample sizes never overflow.

use std::fmt::Write as _;

use crate::domains::format_float;
use crate::error::{Error, Result};
use crate::hypotheses::{MixCoefficient, SimplexWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    MultiUen,
    MultiRademacher,
    CombinedUen,
    CombinedRademacher,
    ClassicalUen,
    ClassicalRademacher,
}

impl Theorem {
    pub fn as_str(self) -> &'static str {
        match self {
            Theorem::MultiUen => "multi_uen",
            Theorem::MultiRademacher => "multi_rademacher",
            Theorem::CombinedUen => "combined_uen",
            Theorem::CombinedRademacher => "combined_rademacher",
            Theorem::ClassicalUen => "classical_uen",
            Theorem::ClassicalRademacher => "classical_rademacher",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub divergence_term: f64,
    pub complexity_term: f64,
    pub confidence_term: f64,
    pub total: f64,
    /// `None` when the bound carries no sample-size condition.
    pub gate_satisfied: Option<bool>,
    /// Echo of the inputs, in argument order.
    pub inputs: Vec<(String, f64)>,
}

impl BoundReport {
    fn new(theorem: Theorem, divergence: f64, complexity: f64, confidence: f64, gate: Option<bool>, inputs: Vec<(String, f64)>) -> Self {
        Self {
            theorem,
            divergence_term: divergence,
            complexity_term: complexity,
            confidence_term: confidence,
            total: divergence + complexity + confidence,
            gate_satisfied: gate,
            inputs,
        }
    }

    /// `key=value` lines; floats use Rust's shortest round-trip form.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "theorem={}", self.theorem.as_str()).unwrap();
        for (k, v) in &self.inputs {
            writeln!(out, "{k}={v:?}").unwrap();
        }
        writeln!(out, "divergence_term={:?}", self.divergence_term).unwrap();
        writeln!(out, "complexity_term={:?}", self.complexity_term).unwrap();
        writeln!(out, "confidence_term={:?}", self.confidence_term).unwrap();
        writeln!(out, "total={:?}", self.total).unwrap();
        if let Some(g) = self.gate_satisfied {
            writeln!(out, "gate_satisfied={g}").unwrap();
        }
        out
    }

    pub fn csv_header() -> &'static str {
        "theorem,divergence_term,complexity_term,confidence_term,total,gate_satisfied"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.theorem.as_str(),
            format_float(self.divergence_term),
            format_float(self.complexity_term),
            format_float(self.confidence_term),
            format_float(self.total),
            self.gate_satisfied.map_or(String::new(), |g| g.to_string())
        )
    }
}

fn check_open_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")))
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

fn check_range_width(w: f64) -> Result<()> {
    if w > 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("range width must be positive, got {w}")))
    }
}

fn check_sizes(ns: &[u64]) -> Result<()> {
    if ns.contains(&0) {
        return Err(Error::invalid("sample sizes must be at least 1"));
    }
    Ok(())
}

/// `Σ_k w_k² / N_k`, the variance factor of a weighted mean of block means.
pub fn weighted_variance_factor(w: &SimplexWeights, ns: &[u64]) -> Result<f64> {
    if ns.len() != w.len() {
        return Err(Error::invalid(format!("{} sample sizes but {} weights", ns.len(), w.len())));
    }
    check_sizes(ns)?;
    Ok(w.as_slice().iter().zip(ns).map(|(wk, &n)| wk * wk / n as f64).sum())
}

/// `(1 − τ)²/N_S + τ²/N_T`.
pub fn combined_variance_factor(tau: MixCoefficient, n_source: u64, n_target: u64) -> Result<f64> {
    check_sizes(&[n_source, n_target])?;
    let t = tau.value();
    Ok((1.0 - t).powi(2) / n_source as f64 + t * t / n_target as f64)
}

/// Single-domain sample size with the same variance factor: `1 / Σ w_k²/N_k`.
pub fn effective_sample_size(w: &SimplexWeights, ns: &[u64]) -> Result<f64> {
    Ok(1.0 / weighted_variance_factor(w, ns)?)
}

/// `√((ln 𝒩 − ln(ε/8)) · 32 (b − a)² · v)` for variance factor `v`.
fn entropy_radical(ln_uen: f64, variance_factor: f64, range_width: f64, epsilon: f64) -> f64 {
    ((ln_uen - (epsilon / 8.0).ln()) * 32.0 * range_width * range_width * variance_factor).sqrt()
}

/// `ln(lhs) ≥ ln(8 (b − a)² / ξ²)` where `ξ` is the radical.
fn entropy_gate(ln_lhs: f64, radical: f64, range_width: f64) -> bool {
    radical > 0.0 && ln_lhs >= (8.0 * range_width * range_width).ln() - 2.0 * radical.ln()
}

/// Weighted-source bound from the uniform entropy number.
/// The gate is `Π N_k ≥ 8 (b − a)² / ξ²` at the radical `ξ`.
pub fn bound_multi_uen(
    d_w: f64,
    ln_uen: f64,
    w: &SimplexWeights,
    ns: &[u64],
    range_width: f64,
    epsilon: f64,
) -> Result<BoundReport> {
    check_nonnegative("divergence", d_w)?;
    check_nonnegative("log entropy number", ln_uen)?;
    check_range_width(range_width)?;
    check_open_epsilon(epsilon)?;
    let v = weighted_variance_factor(w, ns)?;
    let radical = entropy_radical(ln_uen, v, range_width, epsilon);
    let ln_prod: f64 = ns.iter().map(|&n| (n as f64).ln()).sum();
    let mut inputs = vec![("d_w".into(), d_w), ("ln_uen".into(), ln_uen)];
    push_vector(&mut inputs, "w", w.as_slice());
    push_sizes(&mut inputs, "n", ns);
    inputs.push(("range_width".into(), range_width));
    inputs.push(("epsilon".into(), epsilon));
    Ok(BoundReport::new(
        Theorem::MultiUen,
        d_w,
        0.0,
        radical,
        Some(entropy_gate(ln_prod, radical, range_width)),
        inputs,
    ))
}

/// The radicand written with the sample-size product kept explicit:
/// `(ln 𝒩 − ln(ε/8)) / (Π N / (32 (b − a)² Σ_k w_k² Π_{i≠k} N_i))`.
/// Only meant for small `K`; used to cross-check the normalized evaluation.
pub fn multi_source_radicand_product_form(ln_uen: f64, w: &SimplexWeights, ns: &[u64], range_width: f64, epsilon: f64) -> f64 {
    let prod: f64 = ns.iter().map(|&n| n as f64).product();
    let inner: f64 = (0..ns.len())
        .map(|k| {
            let others: f64 = ns.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &n)| n as f64).product();
            w.as_slice()[k].powi(2) * others
        })
        .sum();
    (ln_uen - (epsilon / 8.0).ln()) / (prod / (32.0 * range_width * range_width * inner))
}

/// The combined radicand with `N_S N_T` kept explicit:
/// `(ln 𝒩 − ln(ε/8)) / (N_S N_T / (32 (b − a)² ((1 − τ)² N_T + τ² N_S)))`.
pub fn combined_radicand_product_form(ln_uen: f64, tau: MixCoefficient, n_source: u64, n_target: u64, range_width: f64, epsilon: f64) -> f64 {
    let (ns, nt, t) = (n_source as f64, n_target as f64, tau.value());
    let inner = (1.0 - t).powi(2) * nt + t * t * ns;
    (ln_uen - (epsilon / 8.0).ln()) / (ns * nt / (32.0 * range_width * range_width * inner))
}

/// Weighted-source bound from per-source Rademacher complexities.
/// Here `epsilon` may equal 1, which zeroes the confidence term.
pub fn bound_multi_rademacher(
    d_w: f64,
    rademachers: &[f64],
    w: &SimplexWeights,
    ns: &[u64],
    range_width: f64,
    epsilon: f64,
) -> Result<BoundReport> {
    check_nonnegative("divergence", d_w)?;
    check_range_width(range_width)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if rademachers.len() != w.len() {
        return Err(Error::invalid(format!(
            "{} complexities but {} weights",
            rademachers.len(),
            w.len()
        )));
    }
    for &r in rademachers {
        check_nonnegative("Rademacher complexity", r)?;
    }
    let v = weighted_variance_factor(w, ns)?;
    let complexity = 2.0 * w.as_slice().iter().zip(rademachers).map(|(wk, r)| wk * r).sum::<f64>();
    let confidence = (range_width * range_width * v * (1.0 / epsilon).ln() / 2.0).sqrt();
    let mut inputs = vec![("d_w".into(), d_w)];
    push_vector(&mut inputs, "rademacher", rademachers);
    push_vector(&mut inputs, "w", w.as_slice());
    push_sizes(&mut inputs, "n", ns);
    inputs.push(("range_width".into(), range_width));
    inputs.push(("epsilon".into(), epsilon));
    Ok(BoundReport::new(Theorem::MultiRademacher, d_w, complexity, confidence, None, inputs))
}

/// Source/target mixture bound from the uniform entropy number.
/// The gate is `N_S N_T ≥ 8 (b − a)² / ξ²` at the radical `ξ`.
pub fn bound_combined_uen(
    d: f64,
    ln_uen: f64,
    tau: MixCoefficient,
    n_source: u64,
    n_target: u64,
    range_width: f64,
    epsilon: f64,
) -> Result<BoundReport> {
    check_nonnegative("divergence", d)?;
    check_nonnegative("log entropy number", ln_uen)?;
    check_range_width(range_width)?;
    check_open_epsilon(epsilon)?;
    let v = combined_variance_factor(tau, n_source, n_target)?;
    let t = tau.value();
    let radical = entropy_radical(ln_uen, v, range_width, epsilon);
    let ln_prod = (n_source as f64).ln() + (n_target as f64).ln();
    let inputs = vec![
        ("d".into(), d),
        ("ln_uen".into(), ln_uen),
        ("tau".into(), t),
        ("n_source".into(), n_source as f64),
        ("n_target".into(), n_target as f64),
        ("range_width".into(), range_width),
        ("epsilon".into(), epsilon),
    ];
    Ok(BoundReport::new(
        Theorem::CombinedUen,
        (1.0 - t) * d,
        0.0,
        radical,
        Some(entropy_gate(ln_prod, radical, range_width)),
        inputs,
    ))
}

/// Source/target mixture bound from the Rademacher complexities of both domains.
#[allow(clippy::too_many_arguments)]
pub fn bound_combined_rademacher(
    d: f64,
    rademacher_source: f64,
    rademacher_target: f64,
    tau: MixCoefficient,
    n_source: u64,
    n_target: u64,
    range_width: f64,
    epsilon: f64,
) -> Result<BoundReport> {
    check_nonnegative("divergence", d)?;
    check_nonnegative("source Rademacher complexity", rademacher_source)?;
    check_nonnegative("target Rademacher complexity", rademacher_target)?;
    check_range_width(range_width)?;
    check_open_epsilon(epsilon)?;
    let v = combined_variance_factor(tau, n_source, n_target)?;
    let t = tau.value();
    let complexity = 2.0 * (1.0 - t) * rademacher_source + 2.0 * t * rademacher_target;
    // The target-only term scales with the range width itself, not its square.
    let target_term = 3.0 * t * (range_width * (4.0 / epsilon).ln() / (2.0 * n_target as f64)).sqrt();
    let mixed_term = (1.0 - t) * (range_width * range_width * (2.0 / epsilon).ln() / 2.0 * v).sqrt();
    let inputs = vec![
        ("d".into(), d),
        ("rademacher_source".into(), rademacher_source),
        ("rademacher_target".into(), rademacher_target),
        ("tau".into(), t),
        ("n_source".into(), n_source as f64),
        ("n_target".into(), n_target as f64),
        ("range_width".into(), range_width),
        ("epsilon".into(), epsilon),
    ];
    Ok(BoundReport::new(
        Theorem::CombinedRademacher,
        (1.0 - t) * d,
        complexity,
        target_term + mixed_term,
        None,
        inputs,
    ))
}

/// Single-domain entropy bound on `n` points (`n` may be an effective size).
pub fn bound_classical_uen(ln_uen: f64, n: f64, range_width: f64, epsilon: f64) -> Result<BoundReport> {
    check_nonnegative("log entropy number", ln_uen)?;
    check_range_width(range_width)?;
    check_open_epsilon(epsilon)?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::invalid(format!("sample size must be positive, got {n}")));
    }
    let radical = entropy_radical(ln_uen, 1.0 / n, range_width, epsilon);
    let inputs = vec![
        ("ln_uen".into(), ln_uen),
        ("n".into(), n),
        ("range_width".into(), range_width),
        ("epsilon".into(), epsilon),
    ];
    Ok(BoundReport::new(
        Theorem::ClassicalUen,
        0.0,
        0.0,
        radical,
        Some(entropy_gate(n.ln(), radical, range_width)),
        inputs,
    ))
}

/// Single-domain Rademacher bound `2R + √((b − a)² ln(1/ε) / (2n))`.
pub fn bound_classical_rademacher(rademacher: f64, n: f64, range_width: f64, epsilon: f64) -> Result<BoundReport> {
    check_nonnegative("Rademacher complexity", rademacher)?;
    check_range_width(range_width)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::invalid(format!("sample size must be positive, got {n}")));
    }
    let confidence = (range_width * range_width * (1.0 / n) * (1.0 / epsilon).ln() / 2.0).sqrt();
    let inputs = vec![
        ("rademacher".into(), rademacher),
        ("n".into(), n),
        ("range_width".into(), range_width),
        ("epsilon".into(), epsilon),
    ];
    Ok(BoundReport::new(Theorem::ClassicalRademacher, 0.0, 2.0 * rademacher, confidence, None, inputs))
}

fn push_vector(inputs: &mut Vec<(String, f64)>, name: &str, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        inputs.push((format!("{name}_{}", k + 1), *v));
    }
}

fn push_sizes(inputs: &mut Vec<(String, f64)>, name: &str, values: &[u64]) {
    for (k, v) in values.iter().enumerate() {
        inputs.push((format!("{name}_{}", k + 1), *v as f64));
    }
}

/// Weights proportional to sample sizes, which minimize `Σ w_k² / N_k`.
pub fn optimal_weights(ns: &[u64]) -> Result<SimplexWeights> {
    if ns.is_empty() {
        return Err(Error::invalid("need at least one sample size"));
    }
    check_sizes(ns)?;
    let total: f64 = ns.iter().map(|&n| n as f64).sum();
    SimplexWeights::new(ns.iter().map(|&n| n as f64 / total).collect())
}

/// `τ = N_T / (N_T + N_S)`, which minimizes `(1 − τ)²/N_S + τ²/N_T`.
pub fn optimal_tau(n_source: u64, n_target: u64) -> Result<MixCoefficient> {
    check_sizes(&[n_source, n_target])?;
    MixCoefficient::new(n_target as f64 / (n_target + n_source) as f64)
}

/// A finite check of whether a ratio stays bounded along a growing sequence
/// of sample sizes: the last ratio may not exceed the largest ratio seen in
/// the first half of the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCheck {
    pub ratios: Vec<f64>,
    pub bounded: bool,
}

impl ConvergenceCheck {
    fn from_ratios(ratios: Vec<f64>) -> Self {
        let bounded = match ratios.last() {
            None => true,
            Some(&last) => {
                let head = &ratios[..ratios.len().div_ceil(2)];
                let cap = head.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                last.is_finite() && last <= cap * (1.0 + 1e-9)
            }
        };
        Self { ratios, bounded }
    }
}

/// Ratios `ln 𝒩 · 32 (b − a)² Σ_k w_k²/N_k` along `(ln 𝒩, sizes)` points.
pub fn multi_source_convergence(points: &[(f64, Vec<u64>)], w: &SimplexWeights, range_width: f64) -> Result<ConvergenceCheck> {
    check_range_width(range_width)?;
    let ratios = points
        .iter()
        .map(|(ln_uen, ns)| Ok(ln_uen * 32.0 * range_width * range_width * weighted_variance_factor(w, ns)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceCheck::from_ratios(ratios))
}

/// Ratios `ln 𝒩 · ((1 − τ)²/N_S + τ²/N_T)` along `(ln 𝒩, N_S)` points with
/// the target sample size fixed.
pub fn combined_convergence(points: &[(f64, u64)], tau: MixCoefficient, n_target: u64) -> Result<ConvergenceCheck> {
    let ratios = points
        .iter()
        .map(|&(ln_uen, n_source)| Ok(ln_uen * combined_variance_factor(tau, n_source, n_target)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceCheck::from_ratios(ratios))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
    }

    fn tau(t: f64) -> MixCoefficient {
        MixCoefficient::new(t).unwrap()
    }

    #[test]
    fn multi_uen_examples() {
        let w = SimplexWeights::new(vec![1.0]).unwrap();
        let r = bound_multi_uen(0.0, 0.0, &w, &[1000], 1.0, 0.05).unwrap();
        let oracle = ((8.0f64 / 0.05).ln() * 32.0 / 1000.0).sqrt();
        assert!(close(r.total, oracle));
        let r2 = bound_multi_uen(0.3, 0.0, &w, &[1000], 1.0, 0.05).unwrap();
        assert!(close(r2.total, 0.3 + oracle));
        assert!(bound_multi_uen(0.0, 0.0, &w, &[10], 1.0, 0.0).is_err());
        assert!(bound_multi_uen(0.0, 0.0, &w, &[10], 1.0, 1.0).is_err());
        assert!(bound_multi_uen(-0.1, 0.0, &w, &[10], 1.0, 0.5).is_err());
        assert!(bound_multi_uen(0.0, 0.0, &w, &[0], 1.0, 0.5).is_err());
    }

    #[test]
    fn multi_rademacher_examples() {
        let w = SimplexWeights::pair(0.5).unwrap();
        let r = bound_multi_rademacher(0.0, &[0.0, 0.0], &w, &[100, 100], 1.0, 1.0).unwrap();
        assert_eq!(r.total, 0.0);
        let single = SimplexWeights::new(vec![1.0]).unwrap();
        let r = bound_multi_rademacher(0.0, &[0.1], &single, &[100], 1.0, 0.05).unwrap();
        assert!(close(r.total, 0.2 + ((1.0f64 / 0.05).ln() / 200.0).sqrt()));
        assert!(bound_multi_rademacher(0.0, &[0.1], &single, &[100], 1.0, 1.5).is_err());
    }

    #[test]
    fn combined_examples() {
        let r = bound_combined_uen(0.5, 0.0, tau(0.0), 1000, 10, 1.0, 0.05).unwrap();
        assert_eq!(r.divergence_term, 0.5);
        let r = bound_combined_rademacher(0.0, 0.0, 0.3, tau(0.0), 500, 10, 1.0, 0.05).unwrap();
        assert!(close(r.total, ((2.0f64 / 0.05).ln() / (2.0 * 500.0)).sqrt()));
        assert!(bound_combined_rademacher(0.0, 0.0, 0.0, tau(0.5), 10, 10, 1.0, 1.0).is_err());
    }

    #[test]
    fn combined_rademacher_oracle() {
        let (d, rs, rt, t, ns, nt, ba, e) = (0.2, 0.05, 0.1, 0.3, 400u64, 50u64, 2.0, 0.1);
        let oracle = (1.0 - t) * d
            + 2.0 * (1.0 - t) * rs
            + 2.0 * t * rt
            + 3.0 * t * (ba * (4.0f64 / e).ln() / (2.0 * nt as f64)).sqrt()
            + (1.0 - t) * (ba * ba * (2.0f64 / e).ln() / 2.0 * (t * t / nt as f64 + (1.0 - t).powi(2) / ns as f64)).sqrt();
        let r = bound_combined_rademacher(d, rs, rt, tau(t), ns, nt, ba, e).unwrap();
        assert!(close(r.total, oracle));
    }

    #[test]
    fn multi_uen_unit_fixture() {
        let w = SimplexWeights::new(vec![1.0]).unwrap();
        let eps = 8.0 * (-100.0f64).exp();
        let r = bound_multi_uen(0.0, 0.0, &w, &[3200], 1.0, eps).unwrap();
        assert!((r.total - 1.0).abs() < 1e-12);
        let r = bound_multi_uen(0.7, 0.0, &w, &[3200], 1.0, 0.5).unwrap();
        assert!(r.total > 0.7);
    }

    #[test]
    fn balanced_weights_give_smaller_radical() {
        let even = bound_multi_uen(0.0, 1.0, &SimplexWeights::pair(0.5).unwrap(), &[500, 500], 1.0, 0.05).unwrap();
        let skew = bound_multi_uen(0.0, 1.0, &SimplexWeights::pair(0.9).unwrap(), &[500, 500], 1.0, 0.05).unwrap();
        assert!(even.total < skew.total);
        let ratio = (even.total / skew.total).powi(2);
        assert!(close(ratio, 0.5 / 0.82));
    }

    #[test]
    fn multi_rademacher_unit_fixture() {
        let w = SimplexWeights::new(vec![1.0]).unwrap();
        let r = bound_multi_rademacher(0.0, &[0.0], &w, &[1], 1.0, (-2.0f64).exp()).unwrap();
        assert!(close(r.total, 1.0));
        let base = bound_classical_rademacher(0.2, 50.0, 2.0, 0.1).unwrap();
        let r = bound_multi_rademacher(0.0, &[0.2], &w, &[50], 2.0, 0.1).unwrap();
        assert!(close(r.total, base.total));
        let r = bound_multi_rademacher(0.4, &[0.2], &w, &[50], 2.0, 0.1).unwrap();
        assert!(close(r.total, base.total + 0.4));
    }

    #[test]
    fn combined_uen_reductions() {
        let single = SimplexWeights::new(vec![1.0]).unwrap();
        let m = bound_multi_uen(0.3, 1.2, &single, &[700], 1.5, 0.05).unwrap();
        for nt in [1, 10, 10_000] {
            let c = bound_combined_uen(0.3, 1.2, tau(0.0), 700, nt, 1.5, 0.05).unwrap();
            assert!(close(c.total, m.total));
        }
        let (ns, nt) = (300u64, 100u64);
        let c = bound_combined_uen(0.0, 1.2, optimal_tau(ns, nt).unwrap(), ns, nt, 1.5, 0.05).unwrap();
        let radicand = (1.2 - (0.05f64 / 8.0).ln()) / ((ns + nt) as f64 / (32.0 * 1.5 * 1.5));
        assert!(close(c.total, radicand.sqrt()));
        let classical = bound_classical_uen(1.2, (ns + nt) as f64, 1.5, 0.05).unwrap();
        assert!(close(c.total, classical.total));
    }

    #[test]
    fn combined_rademacher_unit_fixture() {
        let r = bound_combined_rademacher(0.0, 0.0, 0.0, tau(0.0), 1, 1, 1.0, 2.0 * (-1.0f64).exp()).unwrap();
        assert!(close(r.total, 0.5f64.sqrt()));
        let t = 0.35;
        let a = bound_combined_rademacher(0.1, 0.05, 0.07, tau(t), 200, 40, 1.0, 0.1).unwrap();
        let b = bound_combined_rademacher(0.6, 0.05, 0.07, tau(t), 200, 40, 1.0, 0.1).unwrap();
        assert!(close(b.total - a.total, (1.0 - t) * 0.5));
    }

    #[test]
    fn optimal_mixing_examples() {
        assert_eq!(optimal_weights(&[2000, 2000]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(optimal_weights(&[100]).unwrap().as_slice(), &[1.0]);
        assert_eq!(optimal_weights(&[1, 3]).unwrap().as_slice(), &[0.25, 0.75]);
        assert!(optimal_weights(&[]).is_err());
        assert_eq!(optimal_tau(40, 40).unwrap().value(), 0.5);
        assert!(close(optimal_tau(3900, 100).unwrap().value(), 0.025));
    }

    #[test]
    fn optimal_weights_beat_simplex_grid() {
        let cases: [&[u64]; 4] = [&[1, 3], &[50, 200], &[7, 7, 30], &[1000, 20, 300]];
        for ns in cases {
            let best = weighted_variance_factor(&optimal_weights(ns).unwrap(), ns).unwrap();
            let mut grid = Vec::new();
            for i in 0..=100u32 {
                if ns.len() == 2 {
                    grid.push(vec![i as f64 / 100.0, (100 - i) as f64 / 100.0]);
                } else {
                    for j in 0..=(100 - i) {
                        grid.push(vec![i as f64 / 100.0, j as f64 / 100.0, (100 - i - j) as f64 / 100.0]);
                    }
                }
            }
            for g in grid {
                let Ok(w) = SimplexWeights::new(g) else { continue };
                assert!(best <= weighted_variance_factor(&w, ns).unwrap() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn constant_entropy_totals_decrease_to_divergence() {
        let w = SimplexWeights::pair(0.5).unwrap();
        let totals: Vec<f64> = (1..=8u64)
            .map(|i| bound_multi_uen(0.2, 3.0, &w, &[100 * 4u64.pow(i as u32), 100 * 4u64.pow(i as u32)], 1.0, 0.05).unwrap().total)
            .collect();
        assert!(totals.windows(2).all(|p| p[1] < p[0]));
        assert!(totals.last().unwrap() - 0.2 < 0.01);
    }

    #[test]
    fn gates() {
        let w = SimplexWeights::new(vec![1.0]).unwrap();
        let r = bound_multi_uen(0.0, 0.0, &w, &[1000], 1.0, 0.05).unwrap();
        // ξ² = 32 ln(160) / 1000, so 8/ξ² is far below 1000.
        assert_eq!(r.gate_satisfied, Some(true));
        let huge = bound_multi_uen(0.0, 2.0, &SimplexWeights::uniform(3).unwrap(), &[u64::MAX; 3], 1.0, 0.5).unwrap();
        assert_eq!(huge.gate_satisfied, Some(true));
        let r = bound_combined_uen(0.0, 1.0, tau(0.5), 1, 1, 1.0, 0.5).unwrap();
        // ξ is large here, so even N_S N_T = 1 suffices.
        assert_eq!(r.gate_satisfied, Some(true));
    }

    #[test]
    fn classical_coincidence() {
        let w = SimplexWeights::new(vec![0.2, 0.5, 0.3]).unwrap();
        let ns = [120, 40, 900];
        let n_eff = effective_sample_size(&w, &ns).unwrap();
        let m = bound_multi_uen(0.0, 1.7, &w, &ns, 1.5, 0.05).unwrap();
        let c = bound_classical_uen(1.7, n_eff, 1.5, 0.05).unwrap();
        assert!(close(m.total, c.total));
        let m = bound_multi_rademacher(0.0, &[0.1, 0.1, 0.1], &w, &ns, 1.5, 0.05).unwrap();
        let c = bound_classical_rademacher(0.1, n_eff, 1.5, 0.05).unwrap();
        assert!(close(m.complexity_term, c.complexity_term));
        assert!(close(m.confidence_term, c.confidence_term));
    }

    #[test]
    fn convergence_examples() {
        let w = SimplexWeights::pair(0.5).unwrap();
        let growing: Vec<(f64, Vec<u64>)> = (1..10).map(|i| (2.0, vec![100 * i, 100 * i])).collect();
        assert!(multi_source_convergence(&growing, &w, 1.0).unwrap().bounded);
        let exploding: Vec<(f64, Vec<u64>)> = (1..10).map(|i| (2.0 * (i * i) as f64, vec![100 * i, 100])).collect();
        assert!(!multi_source_convergence(&exploding, &w, 1.0).unwrap().bounded);
        let pts: Vec<(f64, u64)> = (1..10).map(|i| (2.0, 100 * i)).collect();
        assert!(combined_convergence(&pts, tau(0.3), 20).unwrap().bounded);
    }

    proptest! {
        #[test]
        fn product_form_matches(k in 1usize..5, seed in 0u64..1000, ln_uen in 0.0..10.0f64, eps in 0.001..0.999f64, ba in 0.1..5.0f64) {
            let mut rng = crate::seed::stream(seed, &[]);
            use rand::Rng;
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let w = SimplexWeights::new(raw.iter().map(|v| v / total).collect()).unwrap();
            let ns: Vec<u64> = (0..k).map(|_| rng.random_range(1..5000)).collect();
            let normalized = (ln_uen - (eps / 8.0).ln()) * 32.0 * ba * ba * weighted_variance_factor(&w, &ns).unwrap();
            let literal = multi_source_radicand_product_form(ln_uen, &w, &ns, ba, eps);
            prop_assert!((normalized - literal).abs() <= 1e-9 * normalized.abs().max(1e-300));
        }

        #[test]
        fn combined_product_form_matches(t in 0.0..0.999f64, ns in 1u64..100_000, nt in 1u64..100_000, ln_uen in 0.0..10.0f64, eps in 0.001..0.999f64) {
            let normalized = (ln_uen - (eps / 8.0).ln()) * 32.0 * combined_variance_factor(tau(t), ns, nt).unwrap();
            let literal = combined_radicand_product_form(ln_uen, tau(t), ns, nt, 1.0, eps);
            prop_assert!((normalized - literal).abs() <= 1e-9 * normalized);
        }

        #[test]
        fn totals_dominate_divergence_and_grow_with_it(d in 0.0..5.0f64, extra in 0.0..1.0f64, t in 0.0..0.999f64, eps in 0.001..0.999f64) {
            let a = bound_combined_uen(d, 1.0, tau(t), 300, 30, 1.0, eps).unwrap();
            let b = bound_combined_uen(d + extra, 1.0, tau(t), 300, 30, 1.0, eps).unwrap();
            prop_assert!(a.total >= a.divergence_term);
            prop_assert!(b.total >= a.total);
            let r = bound_combined_rademacher(d, 0.1, 0.2, tau(t), 300, 30, 1.0, eps).unwrap();
            prop_assert!(r.total >= r.divergence_term);
        }

        #[test]
        fn monotone_in_inputs(ln in 0.0..5.0f64, dl in 0.0..2.0f64, r in 0.0..0.5f64, dr in 0.0..0.5f64, n in 1u64..5000, dn in 0u64..5000, t in 0.0..0.999f64, eps in 0.001..0.999f64) {
            let w = SimplexWeights::pair(0.3).unwrap();
            let base = bound_multi_uen(0.1, ln, &w, &[n, 200], 1.0, eps).unwrap().total;
            prop_assert!(bound_multi_uen(0.1, ln + dl, &w, &[n, 200], 1.0, eps).unwrap().total >= base);
            prop_assert!(bound_multi_uen(0.1, ln, &w, &[n + dn, 200], 1.0, eps).unwrap().total <= base);
            let base = bound_multi_rademacher(0.1, &[r, 0.1], &w, &[n, 200], 1.0, eps).unwrap().total;
            prop_assert!(bound_multi_rademacher(0.1, &[r + dr, 0.1], &w, &[n, 200], 1.0, eps).unwrap().total >= base);
            prop_assert!(bound_multi_rademacher(0.1, &[r, 0.1], &w, &[n + dn, 200], 1.0, eps).unwrap().total <= base);
            let base = bound_combined_uen(0.1, ln, tau(t), n, 50, 1.0, eps).unwrap().total;
            prop_assert!(bound_combined_uen(0.1, ln + dl, tau(t), n, 50, 1.0, eps).unwrap().total >= base);
            prop_assert!(bound_combined_uen(0.1, ln, tau(t), n + dn, 50 + dn, 1.0, eps).unwrap().total <= base);
            let base = bound_combined_rademacher(0.1, r, r, tau(t), n, 50, 1.0, eps).unwrap().total;
            prop_assert!(bound_combined_rademacher(0.1, r + dr, r + dr, tau(t), n, 50, 1.0, eps).unwrap().total >= base);
            prop_assert!(bound_combined_rademacher(0.1, r, r, tau(t), n + dn, 50 + dn, 1.0, eps).unwrap().total <= base);
        }

        #[test]
        fn optimal_weights_minimize(ns in prop::collection::vec(1u64..10_000, 1..6), seed in 0u64..1000) {
            use rand::Rng;
            let best = optimal_weights(&ns).unwrap();
            let best_v = weighted_variance_factor(&best, &ns).unwrap();
            let mut rng = crate::seed::stream(seed, &[]);
            for _ in 0..20 {
                let raw: Vec<f64> = ns.iter().map(|_| rng.random_range(0.0..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let w = SimplexWeights::new(raw.iter().map(|v| v / total).collect()).unwrap();
                prop_assert!(best_v <= weighted_variance_factor(&w, &ns).unwrap() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn optimal_tau_minimizes(ns in 1u64..10_000, nt in 1u64..10_000) {
            let best = optimal_tau(ns, nt).unwrap();
            let v = combined_variance_factor(best, ns, nt).unwrap();
            for i in 0..100 {
                let other = combined_variance_factor(tau(i as f64 / 100.0), ns, nt).unwrap();
                prop_assert!(v <= other * (1.0 + 1e-12));
            }
        }
    }
}
