//! Distances between domains over finite function classes.
//!
//! * [`ipm`]: the integral probability metric `sup_f |E^S f − E^T f|`.
//! * [`discrepancy_distance`]: `sup_{g1,g2} |E^S ℓ(g1, g2) − E^T ℓ(g1, g2)|`
//!   over input distributions. With the absolute loss this is the
//!   symmetric-difference H-divergence used for classification.
//! * [`q_quantity`]: distance between two labeling functions under the
//!   target inputs.
//!
//! Every estimator is generic over [`Measure`], so the same code gives exact
//! values on a [`DiscreteDomain`](crate::domains::DiscreteDomain) and
//! plug-in estimates on a [`Dataset`](crate::domains::Dataset).

use std::fmt::Write as _;

use crate::domains::Measure;
use crate::error::{Error, Result};
use crate::hypotheses::{FiniteFunctionClass, LinearModel, LossFunction, SimplexWeights};

/// Slack allowed when checking `ipm ≤ disc + q` on exact inputs.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceMode {
    ExactDiscrete,
    EmpiricalSamples,
}

impl DivergenceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DivergenceMode::ExactDiscrete => "exact_discrete",
            DivergenceMode::EmpiricalSamples => "empirical_samples",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub ipm: f64,
    pub disc: f64,
    pub q: f64,
    pub mode: DivergenceMode,
}

impl DivergenceReport {
    /// Validates nonnegativity and, for exact inputs, `ipm ≤ disc + q`.
    pub fn new(ipm: f64, disc: f64, q: f64, mode: DivergenceMode) -> Result<Self> {
        if !(ipm >= 0.0 && disc >= 0.0 && q >= 0.0) {
            return Err(Error::invalid(format!(
                "divergences must be nonnegative (ipm={ipm}, disc={disc}, q={q})"
            )));
        }
        if mode == DivergenceMode::ExactDiscrete && ipm > disc + q + DECOMPOSITION_TOLERANCE {
            return Err(Error::invalid(format!(
                "ipm {ipm} exceeds disc + q = {}",
                disc + q
            )));
        }
        Ok(Self { ipm, disc, q, mode })
    }

    /// Flat `key=value` block, one entry per line.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode={}", self.mode.as_str());
        let _ = writeln!(out, "ipm={:?}", self.ipm);
        let _ = writeln!(out, "disc={:?}", self.disc);
        let _ = writeln!(out, "q={:?}", self.q);
        out
    }
}

/// `max_f |E^S f − E^T f|`.
pub fn ipm<S: Measure, T: Measure>(class: &FiniteFunctionClass, source: &S, target: &T) -> f64 {
    let es = class.expectations(source);
    let et = class.expectations(target);
    es.iter()
        .zip(&et)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Maximum over ordered hypothesis pairs of the gap between the expected
/// pairwise losses under the two input distributions. Labels are ignored.
pub fn discrepancy_distance<S: Measure, T: Measure>(
    hypotheses: &[LinearModel],
    loss: &LossFunction,
    source: &S,
    target: &T,
) -> f64 {
    let mut best = 0.0f64;
    for g1 in hypotheses {
        for g2 in hypotheses {
            let pair = |x: &[f64], _y: f64| loss.eval(g1.predict(x), g2.predict(x));
            let gap = (source.expect(pair) - target.expect(pair)).abs();
            best = best.max(gap);
        }
    }
    best
}

/// `sup_g |E^T ℓ(g(x), g_T(x)) − E^T ℓ(g(x), g_S(x))|`.
pub fn q_quantity<T, GS, GT>(
    hypotheses: &[LinearModel],
    loss: &LossFunction,
    target: &T,
    label_source: GS,
    label_target: GT,
) -> f64
where
    T: Measure,
    GS: Fn(&[f64]) -> f64,
    GT: Fn(&[f64]) -> f64,
{
    hypotheses
        .iter()
        .map(|g| {
            let with_target = target.expect(|x, _| loss.eval(g.predict(x), label_target(x)));
            let with_source = target.expect(|x, _| loss.eval(g.predict(x), label_source(x)));
            (with_target - with_source).abs()
        })
        .fold(0.0, f64::max)
}

/// `Σ_k w_k · ipm(class, sources[k], target)`.
pub fn weighted_ipm<S: Measure, T: Measure>(
    class: &FiniteFunctionClass,
    sources: &[S],
    target: &T,
    w: &SimplexWeights,
) -> Result<f64> {
    if sources.len() != w.len() {
        return Err(Error::invalid(format!(
            "{} sources but {} weights",
            sources.len(),
            w.len()
        )));
    }
    Ok(sources
        .iter()
        .zip(w.as_slice())
        .map(|(s, wk)| wk * ipm(class, s, target))
        .sum())
}
