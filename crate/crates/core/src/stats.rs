//! Descriptive statistics generic over the float type.

use num_traits::{Float, FromPrimitive};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("no samples")]
    Empty,
    #[error("bin width must be positive and finite")]
    BadBinWidth,
}

/// Minimum, quartiles, median, mean and maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats<F> {
    pub min: F,
    pub q1: F,
    pub median: F,
    pub mean: F,
    pub q3: F,
    pub max: F,
}

impl<F: Float> SummaryStats<F> {
    /// Values in column order: min, q1, median, mean, q3, max.
    pub fn as_array(&self) -> [F; 6] {
        [self.min, self.q1, self.median, self.mean, self.q3, self.max]
    }

    pub fn map<G>(&self, f: impl Fn(F) -> G) -> SummaryStats<G> {
        SummaryStats {
            min: f(self.min),
            q1: f(self.q1),
            median: f(self.median),
            mean: f(self.mean),
            q3: f(self.q3),
            max: f(self.max),
        }
    }
}

pub fn mean<F: Float + FromPrimitive>(samples: &[F]) -> Option<F> {
    if samples.is_empty() {
        return None;
    }
    let n = F::from_usize(samples.len())?;
    Some(samples.iter().fold(F::zero(), |acc, &x| acc + x) / n)
}

/// Linear interpolation between order statistics (Hyndman–Fan type 7).
/// `sorted` must be non-empty and ascending; `p` in `[0, 1]`.
pub fn quantile_sorted<F: Float + FromPrimitive>(sorted: &[F], p: F) -> F {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let h = F::from_usize(n - 1).unwrap() * p;
    let lo = h.floor();
    let idx = lo.to_usize().unwrap_or(0).min(n - 1);
    if idx + 1 >= n {
        return sorted[n - 1];
    }
    sorted[idx] + (h - lo) * (sorted[idx + 1] - sorted[idx])
}

pub fn summary<F: Float + FromPrimitive>(samples: &[F]) -> Result<SummaryStats<F>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not be NaN"));
    let q = |p: f64| quantile_sorted(&sorted, F::from_f64(p).unwrap());
    Ok(SummaryStats {
        min: sorted[0],
        q1: q(0.25),
        median: q(0.5),
        mean: mean(samples).unwrap(),
        q3: q(0.75),
        max: sorted[sorted.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin<F> {
    pub lo: F,
    pub hi: F,
    pub count: usize,
}

/// Fixed-width histogram; bins are half-open `[lo, hi)` starting at the minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<F> {
    pub bins: Vec<Bin<F>>,
}

impl<F: Float + FromPrimitive> Histogram<F> {
    pub fn new(samples: &[F], width: F) -> Result<Self, StatsError> {
        if !(width > F::zero()) || !width.is_finite() {
            return Err(StatsError::BadBinWidth);
        }
        if samples.is_empty() {
            return Ok(Histogram { bins: Vec::new() });
        }
        let min = samples.iter().copied().fold(F::infinity(), F::min);
        let max = samples.iter().copied().fold(F::neg_infinity(), F::max);
        let nbins = ((max - min) / width).floor().to_usize().unwrap_or(0) + 1;
        let mut bins: Vec<Bin<F>> = (0..nbins)
            .map(|i| {
                let lo = min + F::from_usize(i).unwrap() * width;
                Bin {
                    lo,
                    hi: lo + width,
                    count: 0,
                }
            })
            .collect();
        for &x in samples {
            let i = ((x - min) / width).floor().to_usize().unwrap_or(0).min(nbins - 1);
            bins[i].count += 1;
        }
        Ok(Histogram { bins })
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

/// Freedman–Diaconis bin width `2·IQR·n^(-1/3)`, or `None` when the IQR is zero.
pub fn freedman_diaconis_width<F: Float + FromPrimitive>(samples: &[F]) -> Option<F> {
    let s = summary(samples).ok()?;
    let iqr = s.q3 - s.q1;
    if !(iqr > F::zero()) {
        return None;
    }
    let n = F::from_usize(samples.len())?;
    Some(F::from_f64(2.0)? * iqr / n.cbrt())
}
