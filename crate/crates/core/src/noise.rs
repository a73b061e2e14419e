//! Error distributions used by the simulation harness and the limit-law samplers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-mean error law with standard deviation `sd`. The `t` family is
/// rescaled by `sqrt((df - 2) / df)` so that its variance is `sd^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ErrorModel {
    Gaussian { sd: f64 },
    ScaledT { df: u32, sd: f64 },
}

impl ErrorModel {
    pub fn gaussian(sd: f64) -> Self {
        Self::Gaussian { sd }
    }

    pub fn scaled_t(df: u32, sd: f64) -> Self {
        Self::ScaledT { df, sd }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            Self::Gaussian { sd } | Self::ScaledT { sd, .. } => sd,
        }
    }

    pub fn with_sd(self, sd: f64) -> Self {
        match self {
            Self::Gaussian { .. } => Self::Gaussian { sd },
            Self::ScaledT { df, .. } => Self::ScaledT { df, sd },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sd = self.sd();
        if !(sd.is_finite() && sd >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sd",
                reason: format!("{sd} is not a nonnegative finite number"),
            });
        }
        if let Self::ScaledT { df, .. } = *self {
            if df <= 2 {
                return Err(Error::InvalidParameter {
                    name: "df",
                    reason: format!("t errors need df > 2 for a finite variance, got {df}"),
                });
            }
        }
        Ok(())
    }

    /// Returns a sampler; call [`ErrorModel::validate`] first.
    pub fn sampler(&self) -> NoiseSampler {
        match *self {
            Self::Gaussian { sd } => NoiseSampler::Gaussian(sd),
            Self::ScaledT { df, sd } => {
                let df = df as f64;
                NoiseSampler::T(
                    StudentT::new(df).expect("df validated"),
                    sd * ((df - 2.0) / df).sqrt(),
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum NoiseSampler {
    Gaussian(f64),
    T(StudentT<f64>, f64),
}

impl Distribution<f64> for NoiseSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian(sd) => sd * rng.sample::<f64, _>(StandardNormal),
            Self::T(t, scale) => scale * t.sample(rng),
        }
    }
}
