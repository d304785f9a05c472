//! Monte-Carlo evaluation of the decomposition against known signals.
//!
//! Per SNR, every trial draws fresh noise (and optionally a fresh sampling
//! pattern) from seeds split off `base_seed`, decomposes the series and
//! records the selected order, the squared frequency errors of
//! correctly-ordered fits and the model error against the clean signal.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_range, with_workers};
use crate::rfs::TimeGrid;
use crate::rfsa::{decompose, reconstruct, RfsaConfig};
use crate::signal::{derive_seed, generate, sample_times, snr_to_sigma, SamplingPattern, SignalSpec};

const CRB_SIN_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crb {
    /// (rad/s)².
    pub value: f64,
    /// The `sin(Kω)/sin(ω)` correction was dropped because `sin(ω) ≈ 0`.
    pub bracket_skipped: bool,
}

/// Approximate Cramér–Rao bound on the variance of a frequency estimate:
/// `24σ²/(K³A²τ̄²)·[1 + 3cos(2φ)·sin(Kω)/(K·sin ω)]`.
pub fn crb_omega(
    sigma: f64,
    samples: usize,
    amplitude: f64,
    phase: f64,
    omega: f64,
    mean_interval: f64,
) -> Result<Crb> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!("CRB needs K >= 2, got {samples}")));
    }
    if !(amplitude > 0.0) || !(mean_interval > 0.0) || !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "CRB needs A > 0, τ̄ > 0 and σ >= 0, got A = {amplitude}, τ̄ = {mean_interval}, σ = {sigma}"
        )));
    }
    let k = samples as f64;
    let lead = 24.0 * sigma * sigma / (k.powi(3) * amplitude * amplitude * mean_interval * mean_interval);
    let s = omega.sin();
    if s.abs() < CRB_SIN_GUARD {
        return Ok(Crb { value: lead, bracket_skipped: true });
    }
    let bracket = 1.0 + 3.0 * (2.0 * phase).cos() * (k * omega).sin() / (k * s);
    Ok(Crb { value: lead * bracket, bracket_skipped: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McExperiment {
    /// Signal template; its `noise_sigma` is replaced per SNR.
    pub spec: SignalSpec,
    pub pattern: SamplingPattern,
    /// dB; `"inf"` means noise-free.
    #[serde(with = "snr_list")]
    pub snr_db: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub rfsa: RfsaConfig,
    /// Draw a new sampling pattern for every trial.
    #[serde(default)]
    pub randomize_pattern: bool,
    #[serde(default)]
    pub base_seed: u64,
    /// Amplitude the SNR refers to; defaults to the first tone's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_amplitude: Option<f64>,
}

/// A true frequency the estimates are matched against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Target {
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub trend: bool,
}

impl McExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::InvalidArgument("snr_db must not be empty".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument("snr_db entries must be numbers or \"inf\"".into()));
        }
        self.spec.validate()?;
        self.pattern.validate()?;
        self.rfsa.validate()?;
        self.reference()?;
        Ok(())
    }

    pub fn reference(&self) -> Result<f64> {
        let a = self.reference_amplitude.or_else(|| self.spec.tones.first().map(|t| t.amplitude)).unwrap_or(1.0);
        if a > 0.0 && a.is_finite() {
            Ok(a)
        } else {
            Err(Error::InvalidArgument(format!("reference amplitude must be positive, got {a}")))
        }
    }

    /// Tones, then the trend (at ω = 0) if the spec has one.
    pub fn targets(&self) -> Vec<Target> {
        let mut out: Vec<Target> = self
            .spec
            .tones
            .iter()
            .map(|t| Target { omega: t.omega, amplitude: t.amplitude, phase: t.phase, trend: false })
            .collect();
        if self.spec.has_trend() {
            out.push(Target { omega: 0.0, amplitude: 0.0, phase: 0.0, trend: true });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(with = "crate::selection::signed_inf")]
    pub snr_db: f64,
    pub trial: usize,
    pub pattern_seed: u64,
    pub noise_seed: u64,
    pub selected_order: Option<usize>,
    pub correct_order: bool,
    pub estimated_omegas: Vec<f64>,
    /// Per target, in target order; present only for correctly-ordered fits.
    pub squared_errors: Option<Vec<f64>>,
    pub model_mse: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub snr_db: f64,
    pub sigma: f64,
    pub trials: usize,
    pub failed: usize,
    pub correct_order: usize,
    pub order_probability: f64,
    /// Per target; `None` without any correctly-ordered trial.
    pub freq_mse: Vec<Option<f64>>,
    /// Per target; `None` for the trend target.
    pub crb: Vec<Option<f64>>,
    pub model_mse: Option<f64>,
    pub mean_runtime_s: f64,
    pub max_runtime_s: f64,
}

impl McRow {
    pub fn failure_fraction(&self) -> f64 {
        self.failed as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub targets: Vec<Target>,
    /// Sorted by SNR.
    pub rows: Vec<McRow>,
    /// Sorted by (SNR, trial).
    pub trials: Vec<TrialRecord>,
}

/// One value of the long-format table `snr_db, metric, target, value`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub snr_db: f64,
    pub metric: &'static str,
    /// Target index, or `None` for whole-model metrics.
    pub target: Option<usize>,
    pub value: Option<f64>,
}

impl McReport {
    pub fn long_rows(&self) -> Vec<LongRow> {
        let mut out = Vec::new();
        for r in &self.rows {
            let scalar = |metric, value| LongRow { snr_db: r.snr_db, metric, target: None, value };
            out.push(scalar("sigma", Some(r.sigma)));
            out.push(scalar("trials", Some(r.trials as f64)));
            out.push(scalar("failed", Some(r.failed as f64)));
            out.push(scalar("order_probability", Some(r.order_probability)));
            out.push(scalar("model_mse", r.model_mse));
            for (i, (mse, crb)) in r.freq_mse.iter().zip(&r.crb).enumerate() {
                out.push(LongRow { snr_db: r.snr_db, metric: "freq_mse", target: Some(i), value: *mse });
                out.push(LongRow { snr_db: r.snr_db, metric: "crb", target: Some(i), value: *crb });
            }
        }
        out
    }
}

/// Greedy nearest-in-ω assignment; returns the estimate index per target.
pub fn match_frequencies(targets: &[f64], estimates: &[f64]) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(targets.len() * estimates.len());
    for (i, t) in targets.iter().enumerate() {
        for (j, e) in estimates.iter().enumerate() {
            pairs.push(((t - e).abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned = vec![None; targets.len()];
    let mut used = vec![false; estimates.len()];
    for (_, i, j) in pairs {
        if assigned[i].is_none() && !used[j] {
            assigned[i] = Some(j);
            used[j] = true;
        }
    }
    assigned
}

struct TrialInput<'a> {
    snr_index: usize,
    trial: usize,
    sigma: f64,
    fixed_grid: Option<&'a TimeGrid>,
}

fn run_trial(exp: &McExperiment, targets: &[Target], input: &TrialInput, snr_db: f64) -> TrialRecord {
    let pattern_seed =
        if exp.randomize_pattern { derive_seed(exp.base_seed, input.trial as u64, 0) } else { exp.pattern.seed };
    let noise_seed = derive_seed(exp.base_seed, input.trial as u64, 1 + input.snr_index as u64);
    let mut rec = TrialRecord {
        snr_db,
        trial: input.trial,
        pattern_seed,
        noise_seed,
        selected_order: None,
        correct_order: false,
        estimated_omegas: Vec::new(),
        squared_errors: None,
        model_mse: None,
        error: None,
        runtime_s: 0.0,
    };
    let outcome = (|| -> Result<()> {
        let owned;
        let grid = match input.fixed_grid {
            Some(g) => g,
            None => {
                owned = sample_times(&SamplingPattern { seed: pattern_seed, ..exp.pattern })?;
                &owned
            }
        };
        let spec = SignalSpec { noise_sigma: input.sigma, ..exp.spec.clone() };
        let series = generate(&spec, grid, noise_seed)?;
        let start = Instant::now();
        let report = decompose(&series, &exp.rfsa)?;
        rec.runtime_s = start.elapsed().as_secs_f64();

        let model = &report.model;
        rec.selected_order = Some(model.selected_order);
        rec.estimated_omegas = model.components.iter().map(|c| model.omega_of(c)).collect::<Result<_>>()?;
        let recon = reconstruct(model, grid)?;
        let mse = grid.times().iter().zip(&recon).map(|(&t, r)| (r - exp.spec.clean(t)).powi(2)).sum::<f64>()
            / grid.len() as f64;
        rec.model_mse = Some(mse);
        rec.correct_order = model.selected_order == targets.len();
        if rec.correct_order {
            let truth: Vec<f64> = targets.iter().map(|t| t.omega).collect();
            let assignment = match_frequencies(&truth, &rec.estimated_omegas);
            rec.squared_errors = Some(
                assignment
                    .iter()
                    .zip(&truth)
                    .map(|(j, w)| j.map_or(f64::NAN, |j| (rec.estimated_omegas[j] - w).powi(2)))
                    .collect(),
            );
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
    }
    rec
}

/// Runs the experiment on `workers` threads (`None`: default pool).
/// Results do not depend on the worker count.
pub fn run_mc(exp: &McExperiment, workers: Option<usize>) -> Result<McReport> {
    exp.validate()?;
    let targets = exp.targets();
    let reference = exp.reference()?;

    let mut snrs = exp.snr_db.clone();
    snrs.sort_by(f64::total_cmp);
    let sigmas = snrs.iter().map(|&s| snr_to_sigma(reference, s)).collect::<Result<Vec<_>>>()?;

    let fixed_grid = if exp.randomize_pattern { None } else { Some(sample_times(&exp.pattern)?) };

    let n_trials = exp.trials;
    let records = with_workers(workers, || {
        map_range(snrs.len() * n_trials, |idx| {
            let (s, trial) = (idx / n_trials, idx % n_trials);
            let input = TrialInput { snr_index: s, trial, sigma: sigmas[s], fixed_grid: fixed_grid.as_ref() };
            run_trial(exp, &targets, &input, snrs[s])
        })
    });

    let k = exp.pattern.len;
    let tau = exp.pattern.nominal_interval();
    let mut rows = Vec::with_capacity(snrs.len());
    for (s, chunk) in records.chunks(n_trials).enumerate() {
        let failed = chunk.iter().filter(|r| r.error.is_some()).count();
        let correct: Vec<&TrialRecord> = chunk.iter().filter(|r| r.correct_order).collect();
        let freq_mse = (0..targets.len())
            .map(|i| {
                let errs: Vec<f64> = correct.iter().filter_map(|r| r.squared_errors.as_ref().map(|e| e[i])).collect();
                (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
            })
            .collect();
        let crb = targets
            .iter()
            .map(|t| {
                if t.trend {
                    None
                } else {
                    crb_omega(sigmas[s], k, t.amplitude, t.phase, t.omega, tau).ok().map(|c| c.value)
                }
            })
            .collect();
        let mses: Vec<f64> = chunk.iter().filter_map(|r| r.model_mse).collect();
        let model_mse = (!mses.is_empty()).then(|| mses.iter().sum::<f64>() / mses.len() as f64);
        let runtimes: Vec<f64> = chunk.iter().map(|r| r.runtime_s).collect();
        rows.push(McRow {
            snr_db: snrs[s],
            sigma: sigmas[s],
            trials: chunk.len(),
            failed,
            correct_order: correct.len(),
            order_probability: correct.len() as f64 / chunk.len() as f64,
            freq_mse,
            crb,
            model_mse,
            mean_runtime_s: runtimes.iter().sum::<f64>() / runtimes.len() as f64,
            max_runtime_s: runtimes.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(McReport { targets, rows, trials: records })
}

mod snr_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry(#[serde(with = "crate::selection::signed_inf")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| Entry(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Entry>::deserialize(d)?.into_iter().map(|e| e.0).collect())
    }
}
