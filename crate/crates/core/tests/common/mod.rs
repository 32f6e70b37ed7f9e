#![allow(dead_code)]

use cellsync::pipeline::AnalysisConfig;
use cellsync::simulator::{SimConfig, WaveEvent};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn white(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn chebyshev_row(x: f64, order: usize) -> Vec<f64> {
    let mut t = vec![1.0, x];
    while t.len() <= order {
        let k = t.len();
        t.push(2.0 * x * t[k - 1] - t[k - 2]);
    }
    t.truncate(order + 1);
    t
}

/// Least squares in the Chebyshev basis via normal equations. Returns the
/// Chebyshev coefficients and the sum of squared residuals.
pub fn chebyshev_lstsq(x: &[f64], y: &[f64], order: usize) -> (Vec<f64>, f64) {
    let m = order + 1;
    let mut ata = vec![vec![0.0; m]; m];
    let mut aty = vec![0.0; m];
    for (&xi, &yi) in x.iter().zip(y) {
        let row = chebyshev_row(xi, order);
        for i in 0..m {
            aty[i] += row[i] * yi;
            for j in 0..m {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let c = solve(ata, aty);
    let sse = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let f: f64 = chebyshev_row(xi, order).iter().zip(&c).map(|(t, k)| t * k).sum();
            (yi - f).powi(2)
        })
        .sum();
    (c, sse)
}

/// Monomial coefficients of `Σ c_k T_k(x)`.
pub fn chebyshev_to_monomial(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut polys: Vec<Vec<f64>> = vec![vec![0.0; n]; n];
    polys[0][0] = 1.0;
    if n > 1 {
        polys[1][1] = 1.0;
    }
    for k in 2..n {
        for j in 0..n {
            let up = if j > 0 { 2.0 * polys[k - 1][j - 1] } else { 0.0 };
            polys[k][j] = up - polys[k - 2][j];
        }
    }
    (0..n).map(|j| (0..n).map(|k| c[k] * polys[k][j]).sum()).collect()
}

/// Direct two-pass Pearson coefficient, `None` for a constant window.
pub fn naive_pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Least-squares amplitude of `shape` inside `series`.
pub fn projected_amplitude(series: &[f64], shape: &[f64]) -> f64 {
    let num: f64 = series.iter().zip(shape).map(|(a, b)| a * b).sum();
    let den: f64 = shape.iter().map(|b| b * b).sum();
    num / den
}

pub fn analysis() -> AnalysisConfig {
    AnalysisConfig {
        skip_hours: 0.0,
        ..AnalysisConfig::default()
    }
}

/// Standard wave: 300 samples, carrier period 100, given amplitude.
pub fn wave(t0: usize, cells: Vec<usize>, amplitude: f64) -> WaveEvent {
    WaveEvent::in_phase(t0, 300, cells, amplitude, Some(100.0))
}

pub fn anti_wave(t0: usize, cells: Vec<usize>, amplitude: f64) -> WaveEvent {
    WaveEvent::anti_phase(t0, 300, cells, amplitude, Some(100.0))
}

pub fn sim(n_cells: usize, duration: usize) -> SimConfig {
    SimConfig {
        n_cells,
        duration,
        ..SimConfig::default()
    }
}
