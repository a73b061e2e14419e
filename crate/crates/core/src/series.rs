//! Observation container, bandwidth type and compensated running sums.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered sequence of finite real observations `X_1, ..., X_n`.
///
/// Positions are 1-based throughout the crate: a location `k` refers to the
/// boundary after observation `X_k`, and a segment `(a, b]` covers
/// observations `X_{a+1}, ..., X_b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TimeSeries(Vec<f64>);

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::SeriesTooShort(values.len()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos + 1));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; a valid series holds at least two observations.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Observations in the segment `(a, b]`.
    pub fn segment(&self, a: usize, b: usize) -> &[f64] {
        &self.0[a..b]
    }

    /// Sample mean over `(a, b]`; requires `a < b`.
    pub fn segment_mean(&self, a: usize, b: usize) -> f64 {
        mean(self.segment(a, b))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for TimeSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        TimeSeries::new(values).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sum of squared deviations from the sample mean.
pub(crate) fn sum_sq_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Left and right window widths `(G_l, G_r)` of a moving-sum statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bandwidth {
    pub left: usize,
    pub right: usize,
}

impl Bandwidth {
    pub fn symmetric(g: usize) -> Self {
        Self { left: g, right: g }
    }

    pub fn asymmetric(left: usize, right: usize) -> Self {
        Self { left, right }
    }

    pub fn is_symmetric(&self) -> bool {
        self.left == self.right
    }

    /// `min(G_l, G_r)`, the effective bandwidth for thresholds and radii.
    pub fn min(&self) -> usize {
        self.left.min(self.right)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.left == 0 || self.right == 0 || self.left + self.right > n {
            return Err(Error::InvalidBandwidth {
                left: self.left,
                right: self.right,
                n,
            });
        }
        Ok(())
    }

    /// Normalising factor `sqrt(G_l G_r / (G_l + G_r))`.
    pub fn scale(&self) -> f64 {
        let (l, r) = (self.left as f64, self.right as f64);
        (l * r / (l + r)).sqrt()
    }

    /// Locations `k` at which the statistic is defined: `G_l ..= n - G_r`.
    pub fn valid_range(&self, n: usize) -> RangeInclusive<usize> {
        self.left..=n - self.right
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_symmetric() {
            write!(f, "{}", self.left)
        } else {
            write!(f, "({}, {})", self.left, self.right)
        }
    }
}

/// Prefix sums carried as an unevaluated `hi + lo` pair (Neumaier
/// compensation), so window sums are accurate relative to the window rather
/// than to the running total.
#[derive(Debug, Clone)]
pub(crate) struct PrefixSums {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl PrefixSums {
    pub fn new(values: impl IntoIterator<Item = f64>) -> Self {
        let iter = values.into_iter();
        let cap = iter.size_hint().0 + 1;
        let mut hi = Vec::with_capacity(cap);
        let mut lo = Vec::with_capacity(cap);
        hi.push(0.0);
        lo.push(0.0);
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for x in iter {
            let t = s + x;
            if s.abs() >= x.abs() {
                c += (s - t) + x;
            } else {
                c += (x - t) + s;
            }
            s = t;
            hi.push(s);
            lo.push(c);
        }
        Self { hi, lo }
    }

    /// Sum over the half-open prefix range `(a, b]`.
    #[inline]
    pub fn sum(&self, a: usize, b: usize) -> f64 {
        (self.hi[b] - self.hi[a]) + (self.lo[b] - self.lo[a])
    }
}
