use std::fmt;

use serde::{Deserialize, Serialize};

use super::{MetricsError, MetricsSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMetric {
    RMean,
    LPairSigned,
    LPairAbs,
}

impl RateMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            RateMetric::RMean => "r_mean",
            RateMetric::LPairSigned => "l_pair_signed",
            RateMetric::LPairAbs => "l_pair_abs",
        }
    }
}

impl std::str::FromStr for RateMetric {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r_mean" => Ok(RateMetric::RMean),
            "l_pair_signed" => Ok(RateMetric::LPairSigned),
            "l_pair_abs" => Ok(RateMetric::LPairAbs),
            other => Err(MetricsError::Config(format!("unknown rate metric {other:?}"))),
        }
    }
}

/// A sample qualifies when `r_mean ≥ threshold` or `l_pair > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCriterion {
    pub metric: RateMetric,
    pub threshold: f64,
}

impl RateCriterion {
    pub fn new(metric: RateMetric, threshold: f64) -> Self {
        Self { metric, threshold }
    }

    pub fn label(&self) -> String {
        format!("{}>{}", self.metric.as_str(), self.threshold)
    }

    #[inline]
    pub fn qualifies(&self, metrics: &MetricsSeries, t: usize) -> bool {
        match self.metric {
            RateMetric::RMean => metrics.r_mean[t] >= self.threshold,
            RateMetric::LPairSigned => metrics.l_pair_signed[t] > self.threshold,
            RateMetric::LPairAbs => metrics.l_pair_abs[t] > self.threshold,
        }
    }
}

/// `r_mean>0.7`, `l_pair>{0.9, 0.8, 0.7}` in both modes, and `r_mean>0.65`.
pub fn default_criteria() -> Vec<RateCriterion> {
    let mut c = vec![RateCriterion::new(RateMetric::RMean, 0.7)];
    for metric in [RateMetric::LPairAbs, RateMetric::LPairSigned] {
        for t in [0.9, 0.8, 0.7] {
            c.push(RateCriterion::new(metric, t));
        }
    }
    c.push(RateCriterion::new(RateMetric::RMean, 0.65));
    c
}

/// `N_smp`: positions satisfying `criterion`. Undefined positions never count.
pub fn count_samples(metrics: &MetricsSeries, criterion: &RateCriterion) -> usize {
    (0..metrics.len()).filter(|&t| criterion.qualifies(metrics, t)).count()
}

/// Maximal runs of qualifying positions.
pub fn count_runs(metrics: &MetricsSeries, criterion: &RateCriterion) -> usize {
    let mut runs = 0;
    let mut prev = false;
    for t in 0..metrics.len() {
        let q = criterion.qualifies(metrics, t);
        if q && !prev {
            runs += 1;
        }
        prev = q;
    }
    runs
}

/// `N_smp / t_exp` in 1/s.
pub fn event_rate(n_smp: usize, t_exp: f64) -> Result<f64, MetricsError> {
    if !(t_exp > 0.0) || !t_exp.is_finite() {
        return Err(MetricsError::ExperimentTime(t_exp));
    }
    Ok(n_smp as f64 / t_exp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub criterion: String,
    pub metric: RateMetric,
    pub threshold: f64,
    pub n_smp: usize,
    pub n_events: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub frame_len: usize,
    pub window: usize,
    pub n_samples: usize,
    pub sample_period: f64,
    pub t_exp: f64,
    pub rows: Vec<RateRow>,
}

impl RateReport {
    /// Rates over an experiment of `n_samples` samples; `t_exp` is
    /// `n_samples * sample_period`.
    pub fn from_metrics(
        metrics: &MetricsSeries,
        criteria: &[RateCriterion],
        n_samples: usize,
        sample_period: f64,
        frame_len: usize,
    ) -> Result<Self, MetricsError> {
        let t_exp = n_samples as f64 * sample_period;
        let rows = criteria
            .iter()
            .map(|c| {
                let n_smp = count_samples(metrics, c);
                Ok(RateRow {
                    criterion: c.label(),
                    metric: c.metric,
                    threshold: c.threshold,
                    n_smp,
                    n_events: count_runs(metrics, c),
                    rate: event_rate(n_smp, t_exp)?,
                })
            })
            .collect::<Result<_, MetricsError>>()?;
        Ok(Self {
            frame_len,
            window: metrics.window,
            n_samples,
            sample_period,
            t_exp,
            rows,
        })
    }

    pub fn row(&self, criterion: &str) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.criterion == criterion)
    }
}

impl fmt::Display for RateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Event rates (data frame {} samples, running window {})",
            self.frame_len, self.window
        )?;
        writeln!(f, "t_exp = {} s ({} samples)", self.t_exp, self.n_samples)?;
        writeln!(f, "{:<22} {:>10} {:>8} {:>12}", "metric", "N_smp", "events", "rate [1/s]")?;
        for r in &self.rows {
            let rate = if r.rate == 0.0 { "0".to_string() } else { format!("{:.3e}", r.rate) };
            writeln!(f, "{:<22} {:>10} {:>8} {:>12}", r.criterion, r.n_smp, r.n_events, rate)?;
        }
        Ok(())
    }
}
