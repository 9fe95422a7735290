//! Small named instances with known answers.

use crate::domains::{DiscreteDomain, Point};
use crate::hypotheses::{FiniteFunctionClass, LinearModel, LossFunction};

/// Two domains that no member of the class can tell apart (`ipm = 0`) even
/// though their input distributions and labeling functions both differ.
///
/// Source: point mass at `(x = 1, y = 1)`, labeled by `g_S(x) = x`.
/// Target: point mass at `(x = 0, y = 1)`, labeled by `g_T(x) = x + 1`.
/// Hypotheses `θ ∈ {0, 2}` under the absolute loss clipped to `[0, 3]`.
/// Both members evaluate to 1 on either domain, while the hypothesis pair
/// `(0, 2)` sees inputs at distance 2 on the source and 0 on the target.
#[derive(Debug, Clone)]
pub struct IndistinguishableDomains {
    pub source: DiscreteDomain,
    pub target: DiscreteDomain,
    pub hypotheses: Vec<LinearModel>,
    pub loss: LossFunction,
}

impl IndistinguishableDomains {
    pub fn class(&self) -> FiniteFunctionClass {
        FiniteFunctionClass::new(self.hypotheses.clone(), self.loss).expect("fixture class is valid")
    }

    pub fn label_source(x: &[f64]) -> f64 {
        x[0]
    }

    pub fn label_target(x: &[f64]) -> f64 {
        x[0] + 1.0
    }
}

pub fn indistinguishable_domains() -> IndistinguishableDomains {
    IndistinguishableDomains {
        source: DiscreteDomain::point_mass(Point::new(vec![1.0], 1.0)),
        target: DiscreteDomain::point_mass(Point::new(vec![0.0], 1.0)),
        hypotheses: vec![
            LinearModel::new(vec![0.0]).expect("finite"),
            LinearModel::new(vec![2.0]).expect("finite"),
        ],
        loss: LossFunction::absolute().clipped(0.0, 3.0).expect("valid range"),
    }
}

/// Labels `y ∈ {0, 1}` with `P(y = 1) = p`, constant input `x = 0`.
pub fn bernoulli_domain(p: f64) -> DiscreteDomain {
    DiscreteDomain::new(
        vec![Point::new(vec![0.0], 0.0), Point::new(vec![0.0], 1.0)],
        vec![1.0 - p, p],
    )
    .expect("p must lie in [0, 1]")
}

/// Single-member class whose only function is `z ↦ y` on `[0, 1]`-valued labels.
pub fn label_class() -> FiniteFunctionClass {
    FiniteFunctionClass::new(
        vec![LinearModel::new(vec![0.0]).expect("finite")],
        LossFunction::absolute().clipped(0.0, 1.0).expect("valid range"),
    )
    .expect("fixture class is valid")
}
