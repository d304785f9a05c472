//! Synthetic signals `w_k = o + κ·t_k + Σ A_n·sin(ω_n·t_k + φ_n) + σ·g_k`
//! on uniform, jittered or Poisson sampling patterns.
//!
//! Randomness comes from ChaCha8 streams seeded with a 64-bit seed; normal
//! variates use the ziggurat sampler of `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfs::{TimeGrid, TimeSeries};

/// Decimal places kept in generated timestamps.
pub const TIME_DECIMALS: i32 = 10;

/// Retries allowed per interval when rounding collapses two instants.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    pub amplitude: f64,
    /// rad/s.
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSpec {
    pub intercept: f64,
    /// Per second.
    pub slope: f64,
    pub tones: Vec<Tone>,
    pub noise_sigma: f64,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("intercept", self.intercept), ("slope", self.slope), ("noise_sigma", self.noise_sigma)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")));
            }
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidArgument(format!("noise_sigma must be non-negative, got {}", self.noise_sigma)));
        }
        for (i, tone) in self.tones.iter().enumerate() {
            if !(tone.amplitude >= 0.0 && tone.amplitude.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "tones[{i}].amplitude must be finite and non-negative, got {}",
                    tone.amplitude
                )));
            }
            for (name, v) in [("omega", tone.omega), ("phase", tone.phase)] {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("tones[{i}].{name} must be finite, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Noise-free value at `t`.
    pub fn clean(&self, t: f64) -> f64 {
        self.intercept
            + self.slope * t
            + self.tones.iter().map(|n| n.amplitude * (n.omega * t + n.phase).sin()).sum::<f64>()
    }

    pub fn has_trend(&self) -> bool {
        self.intercept != 0.0 || self.slope != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PatternKind {
    Uniform {
        #[serde(default)]
        t1: f64,
        period: f64,
    },
    /// Intervals drawn uniformly from `[low, high]`.
    Jittered {
        #[serde(default)]
        t1: f64,
        low: f64,
        high: f64,
    },
    /// Exponentially distributed intervals with the given rate (1/s).
    Poisson {
        #[serde(default)]
        t1: f64,
        rate: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPattern {
    pub kind: PatternKind,
    pub len: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SamplingPattern {
    pub fn validate(&self) -> Result<()> {
        if self.len < 2 {
            return Err(Error::InvalidArgument(format!("pattern len must be at least 2, got {}", self.len)));
        }
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self.kind {
            PatternKind::Uniform { t1, period } => {
                if !t1.is_finite() || !(period > 0.0 && period.is_finite()) {
                    return bad(format!("uniform pattern needs finite t1 and period > 0, got {t1}, {period}"));
                }
            }
            PatternKind::Jittered { t1, low, high } => {
                if !t1.is_finite() || !(low > 0.0 && high >= low && high.is_finite()) {
                    return bad(format!("jittered pattern needs 0 < low <= high, got low = {low}, high = {high}"));
                }
            }
            PatternKind::Poisson { t1, rate } => {
                if !t1.is_finite() || !(rate > 0.0 && rate.is_finite()) {
                    return bad(format!("poisson pattern needs rate > 0, got {rate}"));
                }
            }
        }
        Ok(())
    }

    /// Nominal mean sampling interval of the pattern.
    pub fn nominal_interval(&self) -> f64 {
        match self.kind {
            PatternKind::Uniform { period, .. } => period,
            PatternKind::Jittered { low, high, .. } => 0.5 * (low + high),
            PatternKind::Poisson { rate, .. } => 1.0 / rate,
        }
    }
}

pub fn round_time(t: f64) -> f64 {
    let scale = 10f64.powi(TIME_DECIMALS);
    (t * scale).round() / scale
}

/// Sampling instants and the number of intervals redrawn after a rounding collision.
pub fn sample_times_counted(pattern: &SamplingPattern) -> Result<(TimeGrid, usize)> {
    pattern.validate()?;
    let n = pattern.len;
    let mut rng = ChaCha8Rng::seed_from_u64(pattern.seed);
    let mut redraws = 0;
    let times = match pattern.kind {
        PatternKind::Uniform { t1, period } => (0..n).map(|k| round_time(t1 + k as f64 * period)).collect(),
        PatternKind::Jittered { t1, low, high } => {
            let dist = Uniform::new_inclusive(low, high).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            accumulate(t1, n, &mut redraws, || dist.sample(&mut rng))?
        }
        PatternKind::Poisson { t1, rate } => {
            let dist = Exp::new(rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            accumulate(t1, n, &mut redraws, || dist.sample(&mut rng))?
        }
    };
    Ok((TimeGrid::new(times)?, redraws))
}

fn accumulate(t1: f64, n: usize, redraws: &mut usize, mut draw: impl FnMut() -> f64) -> Result<Vec<f64>> {
    let mut times = Vec::with_capacity(n);
    let mut t = round_time(t1);
    times.push(t);
    while times.len() < n {
        let mut attempts = 0;
        let next = loop {
            let cand = round_time(t + draw());
            if cand > t {
                break cand;
            }
            *redraws += 1;
            attempts += 1;
            if attempts >= MAX_REDRAWS {
                return Err(Error::NumericGuard(format!("could not draw a distinct sampling instant after t = {t}")));
            }
        };
        times.push(next);
        t = next;
    }
    Ok(times)
}

pub fn sample_times(pattern: &SamplingPattern) -> Result<TimeGrid> {
    sample_times_counted(pattern).map(|(g, _)| g)
}

/// Samples `spec` on `grid`, adding `σ·g_k` noise from a stream seeded with `seed`.
pub fn generate(spec: &SignalSpec, grid: &TimeGrid, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    let mut values: Vec<f64> = grid.times().iter().map(|&t| spec.clean(t)).collect();
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut values {
            let g: f64 = rng.sample(StandardNormal);
            *v += spec.noise_sigma * g;
        }
    }
    TimeSeries::new(grid.clone(), values)
}

/// Noise standard deviation giving `snr_db = 10·log10(A²/(2σ²))`.
pub fn snr_to_sigma(reference_amplitude: f64, snr_db: f64) -> Result<f64> {
    if !(reference_amplitude > 0.0 && reference_amplitude.is_finite()) {
        return Err(Error::InvalidArgument(format!("reference amplitude must be positive, got {reference_amplitude}")));
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("SNR is NaN".into()));
    }
    Ok(reference_amplitude / (2.0 * 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Independent 64-bit seed for stream `(a, b)` under `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base;
    for v in [a, b] {
        z = mix(z ^ mix(v.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    z
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn uniform_pattern() {
        let p = SamplingPattern { kind: PatternKind::Uniform { t1: 0.0, period: 1.0 }, len: 3, seed: 0 };
        let g = sample_times(&p).unwrap();
        assert_eq!(g.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(g.uniform_period(), Some(1.0));

        let thirds = SamplingPattern { kind: PatternKind::Uniform { t1: 0.0, period: 1.0 / 3.0 }, len: 50, seed: 0 };
        assert!(sample_times(&thirds).unwrap().uniform_period().is_some());
    }

    #[test]
    fn jittered_intervals_stay_in_bounds() {
        for seed in 0..20 {
            let p = SamplingPattern { kind: PatternKind::Jittered { t1: 1.0, low: 0.5, high: 1.5 }, len: 200, seed };
            let g = sample_times(&p).unwrap();
            assert!(g.times().windows(2).all(|w| {
                let d = w[1] - w[0];
                (0.5 - 1e-9..=1.5 + 1e-9).contains(&d)
            }));
            assert_eq!(g.t1(), 1.0);
        }
    }

    #[test]
    fn poisson_mean_interval() {
        let p = SamplingPattern { kind: PatternKind::Poisson { t1: 0.0, rate: 0.1 }, len: 10_000, seed: 42 };
        let g = sample_times(&p).unwrap();
        assert!((g.mean_interval() - 10.0).abs() < 1.0);
    }

    #[test]
    fn timestamps_have_ten_decimals() {
        let p = SamplingPattern { kind: PatternKind::Poisson { t1: 0.123456789012345, rate: 0.7 }, len: 100, seed: 1 };
        for &t in sample_times(&p).unwrap().times() {
            assert_eq!(round_time(t), t);
        }
    }

    #[test]
    fn rounding_collisions_are_redrawn() {
        let p = SamplingPattern { kind: PatternKind::Poisson { t1: 0.0, rate: 2e9 }, len: 50, seed: 3 };
        let (g, redraws) = sample_times_counted(&p).unwrap();
        assert_eq!(g.len(), 50);
        assert!(redraws > 0);
    }

    #[test]
    fn pattern_validation() {
        let bad = [
            PatternKind::Uniform { t1: 0.0, period: 0.0 },
            PatternKind::Jittered { t1: 0.0, low: 0.0, high: 1.0 },
            PatternKind::Jittered { t1: 0.0, low: 2.0, high: 1.0 },
            PatternKind::Poisson { t1: 0.0, rate: -1.0 },
        ];
        for kind in bad {
            assert!(sample_times(&SamplingPattern { kind, len: 10, seed: 0 }).is_err());
        }
        let short = SamplingPattern { kind: PatternKind::Uniform { t1: 0.0, period: 1.0 }, len: 1, seed: 0 };
        assert!(sample_times(&short).is_err());
    }

    #[test]
    fn clean_generation() {
        let grid = TimeGrid::uniform(0.0, 1.0, 30).unwrap();
        let zero = generate(&SignalSpec::default(), &grid, 9).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let spec = SignalSpec {
            tones: vec![Tone { amplitude: 2f64.sqrt(), omega: 0.3 * PI, phase: 0.0 }],
            ..SignalSpec::default()
        };
        let s = generate(&spec, &grid, 9).unwrap();
        for (k, v) in s.values().iter().enumerate() {
            assert_eq!(*v, 2f64.sqrt() * (0.3 * PI * k as f64).sin());
        }
    }

    #[test]
    fn spec_validation_names_field() {
        let spec =
            SignalSpec { tones: vec![Tone { amplitude: -1.0, omega: 1.0, phase: 0.0 }], ..SignalSpec::default() };
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("tones[0].amplitude"));
        let spec = SignalSpec { noise_sigma: -0.1, ..SignalSpec::default() };
        assert!(spec.validate().unwrap_err().to_string().contains("noise_sigma"));
    }

    #[test]
    fn noise_is_seeded() {
        let grid = TimeGrid::uniform(0.0, 1.0, 100).unwrap();
        let spec = SignalSpec { noise_sigma: 1.0, ..SignalSpec::default() };
        let a = generate(&spec, &grid, 5).unwrap();
        let b = generate(&spec, &grid, 5).unwrap();
        let c = generate(&spec, &grid, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn snr_conversion() {
        assert_abs_diff_eq!(snr_to_sigma(2f64.sqrt(), 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(snr_to_sigma(1.0, 10.0).unwrap(), 0.223607, epsilon = 1e-6);
        assert_abs_diff_eq!(snr_to_sigma(1.0, -3.0103).unwrap(), 1.0, epsilon = 1e-5);
        assert_eq!(snr_to_sigma(1.0, f64::INFINITY).unwrap(), 0.0);
        assert!(snr_to_sigma(0.0, 10.0).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for a in 0..50 {
            for b in 0..50 {
                assert!(seen.insert(derive_seed(7, a, b)));
            }
        }
        assert_eq!(derive_seed(7, 3, 4), derive_seed(7, 3, 4));
    }
}
