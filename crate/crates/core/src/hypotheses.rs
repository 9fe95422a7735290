//! Losses, linear hypotheses, finite function classes `F = ℓ∘G`, empirical
//! risks and the two least-squares learners.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::domains::{format_float, Dataset, Measure};
use crate::error::{Error, Result};

/// Largest accepted condition estimate of a normal-equation system.
pub const MAX_CONDITION: f64 = 1e12;

const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Squared,
    Absolute,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "absolute" => Ok(LossKind::Absolute),
            other => Err(Error::config(format!("unknown loss `{other}`"))),
        }
    }
}

/// `ℓ(prediction, target)`, optionally clamped into `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossFunction {
    kind: LossKind,
    clip: Option<(f64, f64)>,
}

impl LossFunction {
    pub fn new(kind: LossKind, clip: Option<(f64, f64)>) -> Result<Self> {
        if let Some((a, b)) = clip {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::config(format!("clip range [{a}, {b}] must satisfy a < b")));
            }
        }
        Ok(Self { kind, clip })
    }

    pub fn squared() -> Self {
        Self {
            kind: LossKind::Squared,
            clip: None,
        }
    }

    pub fn absolute() -> Self {
        Self {
            kind: LossKind::Absolute,
            clip: None,
        }
    }

    /// Same loss clamped into `[a, b]`.
    pub fn clipped(self, a: f64, b: f64) -> Result<Self> {
        Self::new(self.kind, Some((a, b)))
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn clip_range(&self) -> Option<(f64, f64)> {
        self.clip
    }

    #[inline]
    pub fn eval(&self, prediction: f64, target: f64) -> f64 {
        let d = prediction - target;
        let raw = match self.kind {
            LossKind::Squared => d * d,
            LossKind::Absolute => d.abs(),
        };
        match self.clip {
            Some((a, b)) => raw.clamp(a, b),
            None => raw,
        }
    }
}

/// `g(x) = <θ, x>` without intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("a linear model needs at least one coefficient"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("model coefficients must be finite"));
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Coefficients as one CSV row.
    pub fn to_csv_row(&self) -> String {
        self.coefficients
            .iter()
            .map(|c| format_float(*c))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let coefficients = crate::config::parse_list::<f64>(row)
            .map_err(|_| Error::config(format!("bad coefficient row `{row}`")))?;
        Self::new(coefficients)
    }
}

/// Combination weights `w ∈ [0,1]^K` with `Σ w_k = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("weight vector is empty"));
        }
        if w.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::invalid(format!("weights {w:?} leave [0, 1]")));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("weight vector is empty"));
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    /// `(w, 1 - w)` for two sources.
    pub fn pair(w: f64) -> Result<Self> {
        Self::new(vec![w, 1.0 - w])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mixing coefficient `τ ∈ [0, 1)` between target and source risks.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MixCoefficient(f64);

impl MixCoefficient {
    pub fn new(tau: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::invalid(format!("tau = {tau} is outside [0, 1)")));
        }
        Ok(Self(tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `F = {z ↦ ℓ(g(x), y) : g ∈ G}` for a finite list of linear hypotheses and a
/// clipped loss.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteFunctionClass {
    hypotheses: Vec<LinearModel>,
    loss: LossFunction,
    range: (f64, f64),
}

impl FiniteFunctionClass {
    pub fn new(hypotheses: Vec<LinearModel>, loss: LossFunction) -> Result<Self> {
        let range = loss
            .clip_range()
            .ok_or_else(|| Error::invalid("function classes need a clipped loss with range [a, b]"))?;
        let dim = hypotheses
            .first()
            .map(LinearModel::dim)
            .ok_or_else(|| Error::invalid("function class is empty"))?;
        if hypotheses.iter().any(|h| h.dim() != dim) {
            return Err(Error::invalid("hypotheses differ in input dimension"));
        }
        Ok(Self {
            hypotheses,
            loss,
            range,
        })
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn hypotheses(&self) -> &[LinearModel] {
        &self.hypotheses
    }

    pub fn loss(&self) -> LossFunction {
        self.loss
    }

    pub fn input_dim(&self) -> usize {
        self.hypotheses[0].dim()
    }

    /// `[a, b]`, the common range of every member.
    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn range_width(&self) -> f64 {
        self.range.1 - self.range.0
    }

    /// `f_j(x, y)`.
    #[inline]
    pub fn eval(&self, j: usize, x: &[f64], y: f64) -> f64 {
        self.loss.eval(self.hypotheses[j].predict(x), y)
    }

    /// Expectation of every member under `m`.
    pub fn expectations<M: Measure>(&self, m: &M) -> Vec<f64> {
        (0..self.len()).map(|j| m.expect(|x, y| self.eval(j, x, y))).collect()
    }
}

/// `values[j][n] = f_j(z_n)` for a fixed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationMatrix {
    values: Vec<Vec<f64>>,
    range: (f64, f64),
}

impl EvaluationMatrix {
    pub fn new(values: Vec<Vec<f64>>, range: (f64, f64)) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("evaluation matrix has no rows"));
        }
        let n = values[0].len();
        if values.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("evaluation matrix rows differ in length"));
        }
        let (a, b) = range;
        if let Some(bad) = values.iter().flatten().find(|v| !(a..=b).contains(*v)) {
            return Err(Error::invalid(format!("value {bad} lies outside [{a}, {b}]")));
        }
        Ok(Self { values, range })
    }

    /// Evaluates every class member on `points`; rows are computed in parallel.
    pub fn from_points(class: &FiniteFunctionClass, points: &[(&[f64], f64)]) -> Result<Self> {
        if points.iter().any(|(x, _)| x.len() != class.input_dim()) {
            return Err(Error::invalid("sample dimension does not match the class"));
        }
        let values = (0..class.len())
            .into_par_iter()
            .map(|j| points.iter().map(|(x, y)| class.eval(j, x, *y)).collect())
            .collect();
        Self::new(values, class.range())
    }

    pub fn from_dataset(class: &FiniteFunctionClass, data: &Dataset) -> Result<Self> {
        let points: Vec<(&[f64], f64)> = data.rows().collect();
        Self::from_points(class, &points)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn num_functions(&self) -> usize {
        self.values.len()
    }

    pub fn num_samples(&self) -> usize {
        self.values[0].len()
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }
}

fn check_dims(model: &LinearModel, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid(format!("dataset `{}` is empty", data.domain_tag)));
    }
    if model.dim() != data.dim() {
        return Err(Error::invalid(format!(
            "model dimension {} does not match dataset dimension {}",
            model.dim(),
            data.dim()
        )));
    }
    Ok(())
}

/// Mean loss of `model` over `data`.
pub fn empirical_risk(model: &LinearModel, data: &Dataset, loss: &LossFunction) -> Result<f64> {
    check_dims(model, data)?;
    Ok(data.expect(|x, y| loss.eval(model.predict(x), y)))
}

/// `Σ_k w_k · empirical_risk(model, sources[k])`.
pub fn weighted_empirical_risk(
    model: &LinearModel,
    sources: &[Dataset],
    w: &SimplexWeights,
    loss: &LossFunction,
) -> Result<f64> {
    if sources.len() != w.len() {
        return Err(Error::invalid(format!(
            "{} sources but {} weights",
            sources.len(),
            w.len()
        )));
    }
    sources
        .iter()
        .zip(w.as_slice())
        .map(|(d, &wk)| Ok(wk * empirical_risk(model, d, loss)?))
        .sum()
}

/// `τ·E_T + (1 − τ)·E_S` of the two empirical risks.
pub fn combined_empirical_risk(
    model: &LinearModel,
    source: &Dataset,
    target: &Dataset,
    tau: MixCoefficient,
    loss: &LossFunction,
) -> Result<f64> {
    let t = tau.value();
    let target_risk = empirical_risk(model, target, loss)?;
    let source_risk = empirical_risk(model, source, loss)?;
    Ok(t * target_risk + (1.0 - t) * source_risk)
}

/// Solves `(Σ c_b X_bᵀX_b) θ = Σ c_b X_bᵀy_b`, skipping blocks with `c_b = 0`.
fn solve_weighted_normal_equations(blocks: &[(&Dataset, f64)]) -> Result<LinearModel> {
    let dim = blocks
        .first()
        .map(|(d, _)| d.dim())
        .ok_or_else(|| Error::invalid("no training data"))?;
    for (d, _) in blocks {
        if d.is_empty() {
            return Err(Error::invalid(format!("dataset `{}` is empty", d.domain_tag)));
        }
        if d.dim() != dim {
            return Err(Error::invalid("training sets differ in input dimension"));
        }
    }
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for &(data, coef) in blocks {
        if coef == 0.0 {
            continue;
        }
        let x = DMatrix::from_row_slice(data.len(), dim, data.features());
        let y = DVector::from_column_slice(data.labels());
        gram += x.tr_mul(&x) * coef;
        rhs += x.tr_mul(&y) * coef;
    }
    let eig = gram.clone().symmetric_eigen();
    let hi = eig.eigenvalues.max();
    let lo = eig.eigenvalues.min();
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateDesign {
            condition,
            limit: MAX_CONDITION,
        });
    }
    let chol = gram.cholesky().ok_or(Error::DegenerateDesign {
        condition,
        limit: MAX_CONDITION,
    })?;
    LinearModel::new(chol.solve(&rhs).as_slice().to_vec())
}

/// Minimizer of the unclipped weighted squared loss `Σ_k (w_k/N_k) Σ_n (<θ, x> − y)²`.
pub fn fit_weighted_least_squares(sources: &[Dataset], w: &SimplexWeights) -> Result<LinearModel> {
    if sources.len() != w.len() {
        return Err(Error::invalid(format!(
            "{} sources but {} weights",
            sources.len(),
            w.len()
        )));
    }
    let blocks: Vec<(&Dataset, f64)> = sources
        .iter()
        .zip(w.as_slice())
        .map(|(d, &wk)| (d, wk / d.len().max(1) as f64))
        .collect();
    solve_weighted_normal_equations(&blocks)
}

/// Minimizer of `τ/N_T Σ_T (<θ, x> − y)² + (1 − τ)/N_S Σ_S (<θ, x> − y)²`.
pub fn fit_combined_least_squares(
    source: &Dataset,
    target: &Dataset,
    tau: MixCoefficient,
) -> Result<LinearModel> {
    let t = tau.value();
    let blocks = [
        (target, t / target.len().max(1) as f64),
        (source, (1.0 - t) / source.len().max(1) as f64),
    ];
    solve_weighted_normal_equations(&blocks)
}

/// Index of the member with the smallest risk; ties go to the lowest index.
pub fn argmin_over_class<F: Fn(&LinearModel) -> f64>(class: &FiniteFunctionClass, risk: F) -> usize {
    argmin_index(class.hypotheses().iter().map(risk))
}

pub(crate) fn argmin_index<I: IntoIterator<Item = f64>>(values: I) -> usize {
    let mut values = values
        .into_iter()
        .map(|v| if v.is_nan() { f64::INFINITY } else { v });
    let Some(mut best_value) = values.next() else {
        return 0;
    };
    let mut best = 0;
    for (j, v) in values.enumerate() {
        if v < best_value {
            best = j + 1;
            best_value = v;
        }
    }
    best
}
