use serde::{Deserialize, Serialize};

use super::{cells_of, check_threshold, nan_max, LPairMode, MetricsError, MetricsSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    /// `l_pair` level treated as "close to 1".
    pub l_thresh: f64,
    /// Runs separated by fewer non-qualifying positions are merged.
    pub min_gap: usize,
    pub mode: LPairMode,
    /// Events shorter than this are flagged as low confidence.
    pub min_len: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            l_thresh: 0.9,
            min_gap: 50,
            mode: LPairMode::Absolute,
            min_len: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    InPhase,
    AntiPhase,
    Mixed,
}

/// Which detection clause fired somewhere inside the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    RMean,
    LPair,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncEvent {
    /// First window-end sample index of the event.
    pub start: usize,
    /// One past the last window-end sample index.
    pub end: usize,
    pub peak_index: usize,
    pub peak_r_mean: f64,
    pub peak_l_pair: f64,
    pub window: usize,
    pub involved_cells: Vec<usize>,
    pub phase: Phase,
    pub trigger: Trigger,
    pub low_confidence: bool,
}

impl SyncEvent {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Samples covered by the windows of the event.
    pub fn support(&self) -> std::ops::Range<usize> {
        (self.start + 1).saturating_sub(self.window)..self.end
    }

    pub fn overlaps(&self, range: std::ops::Range<usize>) -> bool {
        let s = self.support();
        s.start < range.end && range.start < s.end
    }
}

/// Maximal runs where `r_mean ≥ z` or `l_pair ≥ l_thresh`, with runs closer
/// than `min_gap` merged. `z` is the threshold the metrics were computed with.
pub fn detect_events(metrics: &MetricsSeries, cfg: &DetectConfig) -> Result<Vec<SyncEvent>, MetricsError> {
    check_threshold(metrics.z)?;
    if !(cfg.l_thresh > 0.0 && cfg.l_thresh <= 1.0) {
        return Err(MetricsError::Config(format!("l_thresh {} outside (0, 1]", cfg.l_thresh)));
    }
    let z = metrics.z;
    let l = metrics.l_pair(cfg.mode);
    let r_hit = |t: usize| metrics.r_mean[t] >= z;
    let l_hit = |t: usize| l[t] >= cfg.l_thresh;

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for t in 0..metrics.len() {
        let hit = r_hit(t) || l_hit(t);
        match (hit, open) {
            (true, None) => open = Some(t),
            (false, Some(s)) => {
                runs.push((s, t));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        runs.push((s, metrics.len()));
    }

    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(runs.len());
    for (s, e) in runs {
        match merged.last_mut() {
            Some(last) if s - last.1 < cfg.min_gap => last.1 = e,
            _ => merged.push((s, e)),
        }
    }

    Ok(merged
        .into_iter()
        .map(|(s, e)| {
            let (mut any_r, mut any_l, mut cells) = (false, false, 0u64);
            for t in s..e {
                any_r |= r_hit(t);
                any_l |= l_hit(t);
                cells |= metrics.involved(cfg.mode)[t];
            }
            let peak_index = (s..e)
                .filter(|&t| !metrics.l_pair_abs[t].is_nan())
                .fold(None, |best: Option<usize>, t| match best {
                    Some(b) if metrics.l_pair_abs[b] >= metrics.l_pair_abs[t] => Some(b),
                    _ => Some(t),
                })
                .unwrap_or(s);
            let phase = if metrics.l_pair_abs[peak_index] > metrics.l_pair_signed[peak_index] {
                if metrics.r_mean[peak_index] >= z {
                    Phase::Mixed
                } else {
                    Phase::AntiPhase
                }
            } else {
                Phase::InPhase
            };
            let trigger = match (any_r, any_l) {
                (true, true) => Trigger::Both,
                (true, false) => Trigger::RMean,
                _ => Trigger::LPair,
            };
            SyncEvent {
                start: metrics.start + s,
                end: metrics.start + e,
                peak_index: metrics.start + peak_index,
                peak_r_mean: nan_max(&metrics.r_mean[s..e]),
                peak_l_pair: nan_max(&l[s..e]),
                window: metrics.window,
                involved_cells: cells_of(cells),
                phase,
                trigger,
                low_confidence: e - s < cfg.min_len,
            }
        })
        .collect())
}
