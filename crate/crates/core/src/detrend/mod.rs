//! Polynomial trend removal.
//!
//! The trend of a channel is modelled as `fit(x) = Σ k_j x^j`, `j = 0..=n`,
//! where `x` is the sample index mapped affinely onto `[-1, 1]`. Raw index
//! powers up to `x^10` over thousands of samples are numerically useless, the
//! normalized basis keeps the normal equations well conditioned. Coefficients
//! are found by Levenberg-Marquardt ([`lm`]) and the residual `data - fit` is
//! what every later stage correlates.

pub mod lm;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lm::{levenberg_marquardt, FitReport, LeastSquaresProblem, LmConfig, Termination};

pub const MAX_ORDER: usize = 12;

#[derive(Debug, Error)]
pub enum DetrendError {
    #[error("polynomial order {0} outside 1..={MAX_ORDER}")]
    InvalidOrder(usize),
    #[error("{valid} valid samples cannot determine an order-{order} polynomial")]
    TooShort { valid: usize, order: usize },
    #[error("singular normal equations")]
    Singular,
    #[error("series has {series} samples but the model covers {model}")]
    LengthMismatch { series: usize, model: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub order: usize,
    /// `k_0..=k_n` in the normalized basis.
    pub coefficients: Vec<f64>,
    /// Normalized `x = (index - x_offset) / x_scale`.
    pub x_offset: f64,
    pub x_scale: f64,
    /// Number of samples of the index domain the model was fitted on.
    pub n_points: usize,
}

impl PolynomialModel {
    /// Model for an index domain of `n_points` samples.
    pub fn for_domain(n_points: usize, coefficients: Vec<f64>) -> Self {
        let half = (n_points.max(2) - 1) as f64 / 2.0;
        Self {
            order: coefficients.len().saturating_sub(1),
            coefficients,
            x_offset: half,
            x_scale: half,
            n_points,
        }
    }

    pub fn normalize(&self, index: f64) -> f64 {
        (index - self.x_offset) / self.x_scale
    }

    pub fn eval_normalized(&self, x: f64) -> f64 {
        horner(&self.coefficients, x)
    }

    pub fn eval_index(&self, index: usize) -> f64 {
        self.eval_normalized(self.normalize(index as f64))
    }

    pub fn evaluate(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.eval_index(i)).collect()
    }
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, k| acc * x + k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    /// `data_i - fit(x_i)`, `NaN` where the data is missing.
    pub values: Vec<f64>,
    pub channel: String,
    pub model: PolynomialModel,
}

struct PolynomialProblem {
    x: Vec<f64>,
    y: Vec<f64>,
    order: usize,
    jtj: DMatrix<f64>,
}

impl PolynomialProblem {
    fn new(x: Vec<f64>, y: Vec<f64>, order: usize) -> Self {
        let m = order + 1;
        // JᵀJ_jk = Σ x^(j+k): accumulate the power sums once.
        let mut power_sums = vec![0.0; 2 * order + 1];
        for &xi in &x {
            let mut p = 1.0;
            for s in power_sums.iter_mut() {
                *s += p;
                p *= xi;
            }
        }
        let jtj = DMatrix::from_fn(m, m, |j, k| power_sums[j + k]);
        Self { x, y, order, jtj }
    }
}

impl LeastSquaresProblem for PolynomialProblem {
    fn n_params(&self) -> usize {
        self.order + 1
    }

    fn sse(&self, params: &DVector<f64>) -> f64 {
        let k = params.as_slice();
        self.x
            .iter()
            .zip(&self.y)
            .map(|(&x, &y)| {
                let r = horner(k, x) - y;
                r * r
            })
            .sum()
    }

    fn normal_equations(&self, params: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let k = params.as_slice();
        let mut g = DVector::zeros(self.order + 1);
        for (&x, &y) in self.x.iter().zip(&self.y) {
            let r = horner(k, x) - y;
            let mut p = r;
            for gj in g.iter_mut() {
                *gj += p;
                p *= x;
            }
        }
        (self.jtj.clone(), g)
    }
}

/// Fits the order-`order` trend of `series` (sample index as abscissa).
/// `NaN` samples are left out of the fit.
pub fn polyfit_lm(
    series: &[f64],
    order: usize,
    cfg: &LmConfig,
) -> Result<(PolynomialModel, FitReport), DetrendError> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(DetrendError::InvalidOrder(order));
    }
    let domain = PolynomialModel::for_domain(series.len(), vec![0.0; order + 1]);
    let (x, y): (Vec<f64>, Vec<f64>) = series
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, &v)| (domain.normalize(i as f64), v))
        .unzip();
    if x.len() < order + 1 || series.len() < 2 {
        return Err(DetrendError::TooShort {
            valid: x.len(),
            order,
        });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let problem = PolynomialProblem::new(x, y, order);
    let mut initial = DVector::zeros(order + 1);
    initial[0] = mean;
    let (params, report) = levenberg_marquardt(&problem, initial, cfg)?;
    let model = PolynomialModel {
        coefficients: params.iter().copied().collect(),
        ..domain
    };
    Ok((model, report))
}

/// `m_i = data_i - fit(x_i)`.
pub fn residual(series: &[f64], channel: &str, model: &PolynomialModel) -> Result<ResidualSeries, DetrendError> {
    if series.len() != model.n_points {
        return Err(DetrendError::LengthMismatch {
            series: series.len(),
            model: model.n_points,
        });
    }
    let values = series
        .iter()
        .enumerate()
        .map(|(i, v)| v - model.eval_index(i))
        .collect();
    Ok(ResidualSeries {
        values,
        channel: channel.to_string(),
        model: model.clone(),
    })
}

/// Fit and subtract in one go.
pub fn detrend(
    series: &[f64],
    channel: &str,
    order: usize,
    cfg: &LmConfig,
) -> Result<(ResidualSeries, FitReport), DetrendError> {
    let (model, report) = polyfit_lm(series, order, cfg)?;
    Ok((residual(series, channel, &model)?, report))
}
