//! Pairwise Pearson correlation of residual channels: single windows, rolling
//! windows over whole series, correlation matrices and a multi-way summary.

mod rolling;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rolling::{rolling_correlations, rolling_pearson, PairSeries, RECOMPUTE_EVERY};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorrError {
    #[error("windows differ in length")]
    LengthMismatch,
    #[error("window of {window} samples invalid for a series of {len}")]
    Window { window: usize, len: usize },
    #[error("need at least 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("pair ({0}, {0}) is not a pair")]
    SelfPair(usize),
    #[error("index {index} outside valid window ends {first}..{end}")]
    Index { index: usize, first: usize, end: usize },
}

/// Unordered channel pair, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairId {
    pub i: usize,
    pub j: usize,
}

impl PairId {
    pub fn new(a: usize, b: usize) -> Result<Self, CorrError> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { i: a, j: b }),
            std::cmp::Ordering::Greater => Ok(Self { i: b, j: a }),
            std::cmp::Ordering::Equal => Err(CorrError::SelfPair(a)),
        }
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.i == cell || self.j == cell
    }
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `C(p, 2)`: number of channel pairs among `p` channels.
pub fn n_pairs(p: usize) -> usize {
    binomial(p as u64, 2) as usize
}

/// All pairs among `p` channels in lexicographic order.
pub fn pair_list(p: usize) -> Vec<PairId> {
    (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| PairId { i, j }))
        .collect()
}

/// Pearson coefficient of two equal windows. `Ok(None)` when either window
/// is constant or holds a missing sample.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Option<f64>, CorrError> {
    if a.len() != b.len() {
        return Err(CorrError::LengthMismatch);
    }
    if a.len() < 2 {
        return Err(CorrError::Window {
            window: a.len(),
            len: a.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Ok(None);
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    let (mut ra, mut rb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
        ra += x * x;
        rb += y * y;
    }
    let eps = rolling::VARIANCE_EPS;
    if saa <= eps * ra || sbb <= eps * rb || saa <= 0.0 || sbb <= 0.0 {
        return Ok(None);
    }
    Ok(Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)))
}

/// Symmetric `p × p` correlation matrix of the window ending at `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFrame {
    pub index: usize,
    pub window: usize,
    /// Unit diagonal; `NaN` entries are undefined.
    pub matrix: DMatrix<f64>,
}

impl CorrelationFrame {
    pub fn from_pairs(
        index: usize,
        window: usize,
        p: usize,
        entries: impl IntoIterator<Item = (PairId, f64)>,
    ) -> Self {
        let mut matrix = DMatrix::identity(p, p);
        for (pair, r) in entries {
            matrix[(pair.i, pair.j)] = r;
            matrix[(pair.j, pair.i)] = r;
        }
        Self {
            index,
            window,
            matrix,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, pair: PairId) -> f64 {
        self.matrix[(pair.i, pair.j)]
    }

    pub fn is_complete(&self) -> bool {
        self.matrix.iter().all(|v| v.is_finite())
    }

    /// Eigenvalues in ascending order, `None` with undefined entries.
    pub fn eigenvalues(&self) -> Option<Vec<f64>> {
        if !self.is_complete() {
            return None;
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        Some(ev)
    }
}

/// Correlation matrix of the trailing window of `window` samples that ends at
/// sample `index`.
pub fn correlation_matrix(channels: &[&[f64]], window: usize, index: usize) -> Result<CorrelationFrame, CorrError> {
    let p = channels.len();
    if p < 2 {
        return Err(CorrError::TooFewChannels(p));
    }
    let n = channels[0].len();
    if channels.iter().any(|c| c.len() != n) {
        return Err(CorrError::LengthMismatch);
    }
    if window < 2 || window > n {
        return Err(CorrError::Window { window, len: n });
    }
    if index + 1 < window || index >= n {
        return Err(CorrError::Index {
            index,
            first: window - 1,
            end: n,
        });
    }
    let start = index + 1 - window;
    let mut entries = Vec::with_capacity(n_pairs(p));
    for pair in pair_list(p) {
        let r = pearson(&channels[pair.i][start..=index], &channels[pair.j][start..=index])?;
        entries.push((pair, r.unwrap_or(f64::NAN)));
    }
    Ok(CorrelationFrame::from_pairs(index, window, p, entries))
}

/// Eigenvalue spread of a correlation matrix in `[0, 1]`.
///
/// The population standard deviation of the eigenvalues (their mean is 1
/// for a unit diagonal) divided by `sqrt(p - 1)`, the value it takes for a
/// rank-one matrix. Identity gives 0, all-`±1` rank-one matrices give 1.
pub fn multiway_coeff(frame: &CorrelationFrame) -> Option<f64> {
    let p = frame.n_channels();
    if p < 2 {
        return None;
    }
    let ev = frame.eigenvalues()?;
    let mean = ev.iter().sum::<f64>() / p as f64;
    let var = ev.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / p as f64;
    Some((var.sqrt() / ((p - 1) as f64).sqrt()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_counts() {
        assert_eq!(n_pairs(4), 6);
        assert_eq!(n_pairs(6), 15);
        assert_eq!(n_pairs(8), 28);
        assert_eq!(n_pairs(12), 66);
        assert_eq!(pair_list(4).len(), 6);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn pair_ids_are_canonical() {
        assert_eq!(PairId::new(3, 1).unwrap(), PairId { i: 1, j: 3 });
        assert_eq!(PairId::new(2, 2), Err(CorrError::SelfPair(2)));
    }

    #[test]
    fn pearson_basics() {
        let a = [1.0, 5.0, 2.0, 8.0, 3.0];
        assert!((pearson(&a, &a).unwrap().unwrap() - 1.0).abs() < 1e-15);
        let b: Vec<f64> = a.iter().map(|x| -x + 7.0).collect();
        assert!((pearson(&a, &b).unwrap().unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&a, &[2.0; 5]).unwrap(), None);
        assert_eq!(pearson(&[0.1; 3], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert_eq!(pearson(&a, &a[..4]), Err(CorrError::LengthMismatch));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn pearson_hand_computed() {
        // a = 1..4 (mean 2.5), b = 1,2,3,5 (mean 2.75):
        // Σdadb = 6.5, Σda² = 5, Σdb² = 8.75 -> r = 6.5 / sqrt(43.75)
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0]).unwrap().unwrap();
        assert!((r - 6.5 / 43.75f64.sqrt()).abs() < 1e-15, "{r}");
    }

    #[test]
    fn multiway_extremes() {
        let id = CorrelationFrame::from_pairs(0, 2, 4, pair_list(4).into_iter().map(|p| (p, 0.0)));
        assert!(multiway_coeff(&id).unwrap().abs() < 1e-12);
        let ones = CorrelationFrame::from_pairs(0, 2, 4, pair_list(4).into_iter().map(|p| (p, 1.0)));
        assert!((multiway_coeff(&ones).unwrap() - 1.0).abs() < 1e-12);
        let undefined = CorrelationFrame::from_pairs(0, 2, 3, [(PairId { i: 0, j: 1 }, f64::NAN)]);
        assert_eq!(multiway_coeff(&undefined), None);
    }

    #[test]
    fn multiway_uniform_half() {
        // Eigenvalues of the 3x3 matrix with off-diagonal 0.5 are 2, 0.5, 0.5.
        let f = CorrelationFrame::from_pairs(0, 2, 3, pair_list(3).into_iter().map(|p| (p, 0.5)));
        let ev = f.eigenvalues().unwrap();
        for (got, want) in ev.iter().zip([0.5, 0.5, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let direct: f64 = {
            let var = ([2.0f64, 0.5, 0.5].iter().map(|l| (l - 1.0).powi(2)).sum::<f64>()) / 3.0;
            var.sqrt() / 2f64.sqrt()
        };
        assert!((multiway_coeff(&f).unwrap() - direct).abs() < 1e-12);
        assert!((direct - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matrix_from_identical_channels_is_ones() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64).collect();
        let chans = [x.as_slice(), x.as_slice(), x.as_slice()];
        let f = correlation_matrix(&chans, 20, 49).unwrap();
        assert!(f.matrix.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(correlation_matrix(&chans, 20, 18).is_err());
        assert!(correlation_matrix(&chans[..1], 20, 30).is_err());
    }
}
