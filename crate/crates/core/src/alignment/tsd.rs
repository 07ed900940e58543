use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Shortest series the decomposition accepts.
pub const MIN_TSD_LEN: usize = 8;

/// Trend + periodic + residual decomposition of one displacement series.
#[derive(Clone, Debug, PartialEq)]
pub struct TsdModel {
    /// Cubic trend coefficients in frame-index units, `α0 + α1 i + α2 i² + α3 i³`.
    pub alpha: [f64; 4],
    /// Zero-mean periodic profile, one entry per phase.
    pub season: Vec<f64>,
    /// Period in frames; equals `len` when no period was found.
    pub period: usize,
    /// Variance of the residual.
    pub residual_var: f64,
    /// Length of the decomposed series.
    pub len: usize,
}

impl TsdModel {
    pub fn is_periodic(&self) -> bool {
        self.period < self.len
    }

    pub fn trend(&self, i: f64) -> f64 {
        let a = &self.alpha;
        a[0] + i * (a[1] + i * (a[2] + i * a[3]))
    }

    pub fn seasonal(&self, i: usize) -> f64 {
        self.season[i % self.period]
    }

    /// Frames covered by complete periods; 0 for an aperiodic series.
    pub fn period_support(&self) -> usize {
        if self.is_periodic() {
            (self.len / self.period) * self.period
        } else {
            0
        }
    }

    /// `M_i + S_i` for every frame of the decomposed series.
    pub fn fitted(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.trend(i as f64) + self.seasonal(i)).collect()
    }
}

/// Mean absolute deviation of the lag-`t` differences around their mean.
pub fn lag_volatility(d: &[f64], t: usize) -> f64 {
    let diffs: Vec<f64> = (0..d.len() - t).map(|i| d[i] - d[i + t]).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.iter().map(|x| (x - mean).abs()).sum::<f64>() / diffs.len() as f64
}

/// Smallest lag in `2..=len/2` whose volatility is within `th` and not above
/// that of the next lag; `None` when the series has no such lag.
pub fn detect_period(d: &[f64], th: f64) -> Option<usize> {
    let max_lag = d.len() / 2;
    if max_lag < 2 {
        return None;
    }
    let vol: Vec<f64> = (2..=max_lag).map(|t| lag_volatility(d, t)).collect();
    (0..vol.len())
        .find(|&k| vol[k] <= th && (k + 1 == vol.len() || vol[k] <= vol[k + 1]))
        .map(|k| k + 2)
}

/// Least squares `min ||X b - y||` through an SVD.
pub(crate) fn least_squares(x: DMatrix<f64>, y: DVector<f64>) -> Result<DVector<f64>> {
    x.svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))
}

/// Decompose `d` into a cubic trend, a periodic profile and a residual.
///
/// The period is searched over lags 2..=len/2 with volatility threshold `th`.
/// For a periodic series the trend slope terms are fitted on the lag-T
/// differences (where the periodic part cancels), the periodic profile is
/// the per-phase mean of what remains, and the intercept makes the residual
/// zero-mean. An aperiodic series gets a direct cubic fit and a zero profile.
pub fn tsd_decompose(d: &[f64], th: f64) -> Result<TsdModel> {
    let n = d.len();
    if n < MIN_TSD_LEN {
        return Err(Error::invalid(format!("series of {n} frames is too short to decompose (need {MIN_TSD_LEN})")));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in series".into()));
    }
    // Work in x = i / s to keep the cubic columns well scaled.
    let s = (n - 1) as f64;
    let unscale = |b: [f64; 4]| [b[0], b[1] / s, b[2] / (s * s), b[3] / (s * s * s)];
    let model = match detect_period(d, th) {
        Some(t) => {
            let rows = n - t;
            let x = DMatrix::from_fn(rows, 3, |i, m| {
                let (a, b) = ((i + t) as f64 / s, i as f64 / s);
                a.powi(m as i32 + 1) - b.powi(m as i32 + 1)
            });
            let y = DVector::from_fn(rows, |i, _| d[i + t] - d[i]);
            let b = least_squares(x, y)?;
            let mut alpha = unscale([0.0, b[0], b[1], b[2]]);
            let slope = |i: usize| {
                let x = i as f64;
                x * (alpha[1] + x * (alpha[2] + x * alpha[3]))
            };
            let r: Vec<f64> = (0..n).map(|i| d[i] - slope(i)).collect();
            let mut sum = vec![0.0; t];
            let mut cnt = vec![0usize; t];
            for (i, v) in r.iter().enumerate() {
                sum[i % t] += v;
                cnt[i % t] += 1;
            }
            let phase: Vec<f64> = sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect();
            let centre = phase.iter().sum::<f64>() / t as f64;
            let season: Vec<f64> = phase.iter().map(|p| p - centre).collect();
            alpha[0] = (0..n).map(|i| r[i] - season[i % t]).sum::<f64>() / n as f64;
            TsdModel { alpha, season, period: t, residual_var: 0.0, len: n }
        }
        None => {
            let x = DMatrix::from_fn(n, 4, |i, m| (i as f64 / s).powi(m as i32));
            let y = DVector::from_column_slice(d);
            let b = least_squares(x, y)?;
            TsdModel {
                alpha: unscale([b[0], b[1], b[2], b[3]]),
                season: vec![0.0; n],
                period: n,
                residual_var: 0.0,
                len: n,
            }
        }
    };
    let fitted = model.fitted();
    let res: Vec<f64> = d.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let mean = res.iter().sum::<f64>() / n as f64;
    let var = res.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
    Ok(TsdModel { residual_var: var, ..model })
}
