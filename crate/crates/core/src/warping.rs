//! Element-wise warping functions linking embedding inner products to
//! proximity values: the inverse Box-Cox family and the logistic sigmoid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::proximity::ProximityMatrix;

/// Default replacement magnitude for `log(0)`.
pub const DEFAULT_CLIP_C: f64 = 100.0;

/// Default number of proximity entries sampled by [`auto_gamma`].
pub const DEFAULT_GAMMA_SAMPLES: usize = 100_000;

const GAMMA_TOLERANCE: f64 = 0.05;
const GAMMA_MAX_ITERS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarpFamily {
    /// Inverse Box-Cox: `(1 + gamma x)^(1/gamma)`, `exp(x)` at `gamma = 0`.
    Ibc { gamma: f64 },
    /// `1 / (1 + exp(-x))`.
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpSpec {
    pub family: WarpFamily,
    /// Magnitude substituted for `g^-1(0)` when building factorization
    /// targets.
    pub clip_c: f64,
}

impl Default for WarpSpec {
    fn default() -> Self {
        WarpSpec::exponential()
    }
}

impl WarpSpec {
    pub fn ibc(gamma: f64) -> Self {
        WarpSpec {
            family: WarpFamily::Ibc { gamma },
            clip_c: DEFAULT_CLIP_C,
        }
    }

    pub fn exponential() -> Self {
        Self::ibc(0.0)
    }

    pub fn linear() -> Self {
        Self::ibc(1.0)
    }

    pub fn sigmoid() -> Self {
        WarpSpec {
            family: WarpFamily::Sigmoid,
            clip_c: DEFAULT_CLIP_C,
        }
    }

    pub fn with_clip(mut self, clip_c: f64) -> Result<Self> {
        if !(clip_c > 0.0 && clip_c.is_finite()) {
            return Err(Error::param(format!(
                "clip constant must be positive, got {clip_c}"
            )));
        }
        self.clip_c = clip_c;
        Ok(self)
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.family {
            WarpFamily::Ibc { gamma } => Some(gamma),
            WarpFamily::Sigmoid => None,
        }
    }

    fn domain_error(&self, x: f64) -> Error {
        Error::Domain {
            gamma: self.gamma().unwrap_or(f64::NAN),
            x,
        }
    }

    pub fn warp(&self, x: f64) -> Result<f64> {
        match self.family {
            WarpFamily::Ibc { gamma } if gamma == 0.0 => Ok(x.exp()),
            WarpFamily::Ibc { gamma } => {
                if 1.0 + gamma * x <= 0.0 || x.is_nan() {
                    return Err(self.domain_error(x));
                }
                Ok(((gamma * x).ln_1p() / gamma).exp())
            }
            WarpFamily::Sigmoid => Ok(1.0 / (1.0 + (-x).exp())),
        }
    }

    pub fn unwarp(&self, y: f64) -> Result<f64> {
        match self.family {
            WarpFamily::Ibc { gamma } => {
                if !(y > 0.0) {
                    return Err(self.domain_error(y));
                }
                if gamma == 0.0 {
                    Ok(y.ln())
                } else {
                    Ok((gamma * y.ln()).exp_m1() / gamma)
                }
            }
            WarpFamily::Sigmoid => {
                if !(y > 0.0 && y < 1.0) {
                    return Err(self.domain_error(y));
                }
                Ok((y / (1.0 - y)).ln())
            }
        }
    }

    /// `g'(x) / g(x)`, the derivative of `ln g` used by KL gradients.
    pub(crate) fn log_derivative(&self, x: f64) -> Result<f64> {
        match self.family {
            WarpFamily::Ibc { gamma } if gamma == 0.0 => Ok(1.0),
            WarpFamily::Ibc { gamma } => {
                let base = 1.0 + gamma * x;
                if base <= 0.0 {
                    return Err(self.domain_error(x));
                }
                Ok(1.0 / base)
            }
            WarpFamily::Sigmoid => Ok(1.0 / (1.0 + x.exp())),
        }
    }

    /// Value used for entries outside the domain of the inverse (zeros of a
    /// proximity matrix): the inverse at the smallest positive double,
    /// floored at `-clip_c`. For the exponential warp this is `-clip_c`.
    pub fn floor_value(&self) -> f64 {
        self.unwarp(f64::MIN_POSITIVE)
            .map_or(-self.clip_c, |v| v.max(-self.clip_c))
    }
}

/// Population skewness `E[(x - mu)^3] / sigma^3`.
pub fn skewness(samples: &[f64]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::param(format!(
            "skewness needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (m2, m3) = samples.iter().fold((0.0, 0.0), |(m2, m3), &x| {
        let d = x - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 <= 1e-30 * mean.abs().max(1.0).powi(2) {
        return Err(Error::UndefinedSkewness);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Outcome of the automatic nonlinearity search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaChoice {
    pub gamma: f64,
    /// Skewness of the unwarped sample at `gamma`.
    pub skewness: f64,
    /// `false` when skewness did not change sign on `[-1, 1]` and the better
    /// endpoint was returned.
    pub bracketed: bool,
}

/// Picks the inverse Box-Cox `gamma` in `[-1, 1]` that makes the unwarped
/// non-zero entries of `pi` symmetric, by bisection on sample skewness.
pub fn auto_gamma(pi: &ProximityMatrix, sample_size: usize, seed: u64) -> Result<GammaChoice> {
    let values = pi.nonzero_values();
    if values.iter().any(|&v| v < 0.0) {
        return Err(Error::param(
            "automatic gamma needs a non-negative proximity matrix",
        ));
    }
    let sample: Vec<f64> = if values.len() <= sample_size {
        values
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, values.len(), sample_size)
            .into_iter()
            .map(|i| values[i])
            .collect()
    };
    gamma_for_symmetry(&sample)
}

/// Bisection on `gamma -> skewness(unwarp(gamma, sample))` over `[-1, 1]`.
pub fn gamma_for_symmetry(sample: &[f64]) -> Result<GammaChoice> {
    let skew_at = |gamma: f64| -> Result<f64> {
        let spec = WarpSpec::ibc(gamma);
        let z = sample
            .iter()
            .map(|&y| spec.unwarp(y))
            .collect::<Result<Vec<_>>>()?;
        skewness(&z)
    };
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let (mut f_lo, f_hi) = (skew_at(lo)?, skew_at(hi)?);
    for (g, f) in [(hi, f_hi), (lo, f_lo)] {
        if f.abs() < GAMMA_TOLERANCE {
            return Ok(GammaChoice {
                gamma: g,
                skewness: f,
                bracketed: true,
            });
        }
    }
    if f_lo.signum() == f_hi.signum() {
        log::warn!("skewness keeps its sign on [-1, 1] ({f_lo:.3} .. {f_hi:.3}); using the better endpoint");
        let (gamma, skewness) = if f_lo.abs() <= f_hi.abs() {
            (lo, f_lo)
        } else {
            (hi, f_hi)
        };
        return Ok(GammaChoice {
            gamma,
            skewness,
            bracketed: false,
        });
    }
    let mut best = (lo, f_lo);
    for _ in 0..GAMMA_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let f_mid = skew_at(mid)?;
        best = (mid, f_mid);
        if f_mid.abs() < GAMMA_TOLERANCE {
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(GammaChoice {
        gamma: best.0.clamp(-1.0, 1.0),
        skewness: best.1,
        bracketed: true,
    })
}
