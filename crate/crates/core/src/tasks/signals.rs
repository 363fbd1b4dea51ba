//! Excitation signals: white noise, uniform noise and APRBS.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{EsnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    WhiteNoise { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Random-level staircase; each level is held for a uniformly drawn
    /// number of steps in `[min_period, 2·min_period]`.
    Aprbs { min_period: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    #[serde(flatten)]
    pub kind: SignalKind,
    pub length: usize,
    pub seed: u64,
}

impl SignalSpec {
    pub fn white_noise(length: usize, seed: u64) -> Self {
        Self {
            kind: SignalKind::WhiteNoise { mean: 0.0, std: 1.0 },
            length,
            seed,
        }
    }

    pub fn uniform(lo: f64, hi: f64, length: usize, seed: u64) -> Self {
        Self {
            kind: SignalKind::Uniform { lo, hi },
            length,
            seed,
        }
    }

    pub fn aprbs(min_period: usize, lo: f64, hi: f64, length: usize, seed: u64) -> Self {
        Self {
            kind: SignalKind::Aprbs { min_period, lo, hi },
            length,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EsnError::InvalidSignal(msg));
        if self.length == 0 {
            return bad("signal length must be at least 1".into());
        }
        match self.kind {
            SignalKind::WhiteNoise { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && std >= 0.0) {
                    return bad(format!("white noise needs finite mean and std ≥ 0, got {mean}, {std}"));
                }
            }
            SignalKind::Uniform { lo, hi } | SignalKind::Aprbs { lo, hi, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return bad(format!("range needs finite lo ≤ hi, got [{lo}, {hi}]"));
                }
            }
        }
        if let SignalKind::Aprbs { min_period: 0, .. } = self.kind {
            return bad("APRBS min_period must be at least 1".into());
        }
        Ok(())
    }
}

fn level(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        Uniform::new_inclusive(lo, hi).sample(rng)
    }
}

/// Deterministic in `spec.seed`.
pub fn gen_signal(spec: &SignalSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.length;
    let out = match spec.kind {
        SignalKind::WhiteNoise { mean, std } => {
            let dist = Normal::new(mean, std).map_err(|e| EsnError::InvalidSignal(e.to_string()))?;
            (0..k).map(|_| dist.sample(&mut rng)).collect()
        }
        SignalKind::Uniform { lo, hi } => (0..k).map(|_| level(&mut rng, lo, hi)).collect(),
        SignalKind::Aprbs { min_period, lo, hi } => {
            let mut out = Vec::with_capacity(k);
            while out.len() < k {
                let remaining = k - out.len();
                let mut hold = rng.gen_range(min_period..=2 * min_period);
                // a trailing remainder shorter than the minimum period joins this hold
                if remaining < hold + min_period {
                    hold = remaining;
                }
                let v = level(&mut rng, lo, hi);
                out.extend(std::iter::repeat(v).take(hold));
            }
            out
        }
    };
    Ok(out)
}
