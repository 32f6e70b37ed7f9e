//! Streaming trailing-window Pearson correlation.
//!
//! Each channel keeps running sums of its shifted values and squares, each
//! pair keeps a running sum of cross products, all with Neumaier compensation.
//! The shift (a recent window mean) and all sums are recomputed from the raw
//! window every [`RECOMPUTE_EVERY`] steps so rounding drift stays bounded.

use serde::{Deserialize, Serialize};

use super::{pair_list, CorrError, CorrelationFrame, PairId};

pub const RECOMPUTE_EVERY: usize = 4096;

/// Variances at or below this fraction of the shifted second moment are
/// treated as zero (constant window).
pub(crate) const VARIANCE_EPS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ChannelMoments {
    shift: f64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
    nan_count: usize,
}

impl ChannelMoments {
    /// Centered sum of squares and shifted second moment, or `None` when the
    /// window holds a missing sample.
    #[inline]
    fn spread(&self, n: f64) -> Option<(f64, f64)> {
        if self.nan_count > 0 {
            return None;
        }
        let s = self.sum.value();
        let ss = self.sum_sq.value();
        Some((ss - s * s / n, ss))
    }
}

/// Rolling correlations of every channel pair over one window size.
///
/// `values[p][t]` is the coefficient of `pairs[p]` over the window that ends
/// at sample `t + window - 1`. `NaN` marks an undefined coefficient (missing
/// sample in the window or a constant window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSeries {
    pub window: usize,
    pub n_channels: usize,
    pub pairs: Vec<PairId>,
    pub values: Vec<Vec<f64>>,
}

impl PairSeries {
    /// Number of window positions.
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sample index at which window position 0 ends.
    pub fn first_end(&self) -> usize {
        self.window - 1
    }

    pub fn pair_index(&self, pair: PairId) -> Option<usize> {
        self.pairs.iter().position(|p| *p == pair)
    }

    pub fn series(&self, pair: PairId) -> Option<&[f64]> {
        self.pair_index(pair).map(|i| self.values[i].as_slice())
    }

    /// Coefficients of every pair at window position `t`.
    pub fn at(&self, t: usize) -> impl Iterator<Item = (PairId, f64)> + '_ {
        self.pairs.iter().zip(&self.values).map(move |(p, v)| (*p, v[t]))
    }

    /// Full matrix at window position `t` (window ending at sample
    /// `t + window - 1`).
    pub fn frame(&self, t: usize) -> CorrelationFrame {
        CorrelationFrame::from_pairs(t + self.first_end(), self.window, self.n_channels, self.at(t))
    }
}

/// Rolling correlation of every pair among `channels`, all of equal length.
pub fn rolling_correlations(channels: &[&[f64]], window: usize) -> Result<PairSeries, CorrError> {
    let p = channels.len();
    if p < 2 {
        return Err(CorrError::TooFewChannels(p));
    }
    let n = channels[0].len();
    if channels.iter().any(|c| c.len() != n) {
        return Err(CorrError::LengthMismatch);
    }
    if window < 2 || n < window {
        return Err(CorrError::Window { window, len: n });
    }
    let pairs = pair_list(p);
    let steps = n - window + 1;
    let mut values = vec![vec![f64::NAN; steps]; pairs.len()];
    let w = window as f64;

    let mut moments = vec![ChannelMoments::default(); p];
    let mut cross = vec![CompensatedSum::default(); pairs.len()];
    let mut spreads: Vec<Option<(f64, f64)>> = vec![None; p];

    for t in 0..steps {
        let end = t + window;
        if t % RECOMPUTE_EVERY == 0 {
            for (m, ch) in moments.iter_mut().zip(channels) {
                *m = recompute_channel(&ch[t..end]);
            }
            for (c, pair) in cross.iter_mut().zip(&pairs) {
                *c = recompute_cross(
                    &channels[pair.i][t..end],
                    &channels[pair.j][t..end],
                    moments[pair.i].shift,
                    moments[pair.j].shift,
                );
            }
        } else {
            let (old, new) = (t - 1, end - 1);
            for (m, ch) in moments.iter_mut().zip(channels) {
                slide_channel(m, ch[old], ch[new]);
            }
            for (c, pair) in cross.iter_mut().zip(&pairs) {
                let (a, b) = (channels[pair.i], channels[pair.j]);
                let (sa, sb) = (moments[pair.i].shift, moments[pair.j].shift);
                let (ao, bo) = (a[old], b[old]);
                if ao.is_finite() && bo.is_finite() {
                    c.add(-((ao - sa) * (bo - sb)));
                }
                let (an, bn) = (a[new], b[new]);
                if an.is_finite() && bn.is_finite() {
                    c.add((an - sa) * (bn - sb));
                }
            }
        }

        for (s, m) in spreads.iter_mut().zip(&moments) {
            *s = m.spread(w);
        }
        for ((pair, c), out) in pairs.iter().zip(&cross).zip(values.iter_mut()) {
            let (Some((vxx, mxx)), Some((vyy, myy))) = (spreads[pair.i], spreads[pair.j]) else {
                continue;
            };
            if vxx <= VARIANCE_EPS * mxx || vyy <= VARIANCE_EPS * myy || vxx <= 0.0 || vyy <= 0.0 {
                continue;
            }
            let sx = moments[pair.i].sum.value();
            let sy = moments[pair.j].sum.value();
            let vxy = c.value() - sx * sy / w;
            out[t] = (vxy / (vxx.sqrt() * vyy.sqrt())).clamp(-1.0, 1.0);
        }
    }

    Ok(PairSeries {
        window,
        n_channels: p,
        pairs,
        values,
    })
}

fn recompute_channel(win: &[f64]) -> ChannelMoments {
    let finite: Vec<f64> = win.iter().copied().filter(|v| v.is_finite()).collect();
    let shift = if finite.is_empty() {
        0.0
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    let mut m = ChannelMoments {
        shift,
        nan_count: win.len() - finite.len(),
        ..ChannelMoments::default()
    };
    for v in finite {
        let d = v - shift;
        m.sum.add(d);
        m.sum_sq.add(d * d);
    }
    m
}

fn recompute_cross(a: &[f64], b: &[f64], sa: f64, sb: f64) -> CompensatedSum {
    let mut c = CompensatedSum::default();
    for (&x, &y) in a.iter().zip(b) {
        if x.is_finite() && y.is_finite() {
            c.add((x - sa) * (y - sb));
        }
    }
    c
}

#[inline]
fn slide_channel(m: &mut ChannelMoments, old: f64, new: f64) {
    if old.is_finite() {
        let d = old - m.shift;
        m.sum.add(-d);
        m.sum_sq.add(-(d * d));
    } else {
        m.nan_count -= 1;
    }
    if new.is_finite() {
        let d = new - m.shift;
        m.sum.add(d);
        m.sum_sq.add(d * d);
    } else {
        m.nan_count += 1;
    }
}

/// Rolling correlation of one pair: `len(a) - window + 1` coefficients,
/// `NaN` where undefined.
pub fn rolling_pearson(a: &[f64], b: &[f64], window: usize) -> Result<Vec<f64>, CorrError> {
    let mut s = rolling_correlations(&[a, b], window)?;
    Ok(s.values.pop().unwrap())
}
