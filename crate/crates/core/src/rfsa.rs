//! Greedy sparse-sinusoid decomposition.
//!
//! For each order `M = 1..Mmax` one more trial frequency is swept over the
//! grid while the frequencies found so far stay fixed, all `2M` reference
//! samples being re-solved jointly for every trial. The best trial seeds a
//! Levenberg–Marquardt refinement of all `3M` parameters, and the refined
//! squared error is scored with the EDC criterion. The order with the
//! smallest score is returned.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{refine, sse, BetaVector, LmConfig};
use crate::par::map_range;
use crate::rfs::{
    amplitude_phase, predict_at, trend_line, Mode, RfsComponent, SinusoidParams, TimeGrid, TimeSeries, UniformState,
};
use crate::selection::{edc, glrt_gain, select_order, EdcScore, GlrtOutcome, PenaltyRule};
use crate::solver::FixedBasis;

/// A fit counts as exact when its squared error is below this fraction of the data energy.
pub const EXACT_FIT_RATIO: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelect {
    /// Uniform parameterization iff the grid is equidistant.
    #[default]
    Auto,
    Uniform,
    Nonuniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfsaConfig {
    /// `[ω_min, ω_max]` in rad/s.
    pub freq_range: [f64; 2],
    pub grid_size: usize,
    pub max_order: usize,
    pub penalty: PenaltyRule,
    pub lm: LmConfig,
    pub mode: ModeSelect,
    /// Components below this radian frequency are reported as trend lines.
    pub trend_threshold: f64,
}

impl Default for RfsaConfig {
    fn default() -> Self {
        Self {
            freq_range: [0.0, PI],
            grid_size: 64,
            max_order: 4,
            penalty: PenaltyRule::Map,
            lm: LmConfig::default(),
            mode: ModeSelect::Auto,
            trend_threshold: 1e-6,
        }
    }
}

impl RfsaConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.freq_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "freq_range must satisfy 0 <= ω_min < ω_max, got [{lo}, {hi}]"
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidArgument(format!("grid_size must be at least 2, got {}", self.grid_size)));
        }
        if self.max_order < 1 {
            return Err(Error::InvalidArgument("max_order must be at least 1".into()));
        }
        if !(self.trend_threshold >= 0.0) {
            return Err(Error::InvalidArgument("trend_threshold must be non-negative".into()));
        }
        self.penalty.validate()?;
        LmConfig { freq_bounds: (lo, hi), ..self.lm }.validate()
    }

    /// Trial radian frequencies `ω_min + j·(ω_max − ω_min)/(J − 1)`.
    pub fn omega_grid(&self) -> Vec<f64> {
        let [lo, hi] = self.freq_range;
        let step = (hi - lo) / (self.grid_size - 1) as f64;
        (0..self.grid_size).map(|j| if j + 1 == self.grid_size { hi } else { lo + j as f64 * step }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub mode: Mode,
    pub t1: f64,
    pub t2: f64,
    /// Sampling period of the training grid in uniform mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Components of the selected order, in order of discovery.
    pub components: Vec<RfsComponent>,
    pub selected_order: usize,
    /// Scores for `M = 0..=Mmax`.
    pub per_order_scores: Vec<EdcScore>,
    /// Refined parameters for `M = 0..=Mmax`.
    pub per_order_betas: Vec<Vec<RfsComponent>>,
}

impl Model {
    /// Radian frequency of a component of this model.
    pub fn omega_of(&self, c: &RfsComponent) -> Result<f64> {
        c.omega(self.period.unwrap_or(self.t2 - self.t1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ComponentSummary {
    Sinusoid(SinusoidParams),
    /// `w = intercept + slope·t`.
    Trend {
        omega: f64,
        slope: f64,
        intercept: f64,
    },
    /// Amplitude and phase could not be recovered.
    Unresolved {
        omega: Option<f64>,
        y1: f64,
        y2: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderDiagnostics {
    pub order: usize,
    /// Index of the winning trial frequency; `None` when no trial improved on `M − 1`.
    pub grid_best_index: Option<usize>,
    pub grid_best_param: Option<f64>,
    /// Squared error of the best trial before refinement.
    pub grid_sse: f64,
    /// Squared error after refinement.
    pub refined_sse: f64,
    pub lm_accepted: usize,
    pub lm_rejected: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lm_error: Option<String>,
    /// Trials skipped because their system was singular.
    pub singular_candidates: usize,
    /// Trials solved with the truncated least-norm fallback.
    pub least_norm_candidates: usize,
    /// The order needs more than `K` samples and was not fitted.
    pub skipped: bool,
    pub glrt: Option<GlrtOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub model: Model,
    pub sinusoids: Vec<ComponentSummary>,
    pub residual_sse: f64,
    pub diagnostics: Vec<OrderDiagnostics>,
}

fn resolve_mode(select: ModeSelect, grid: &TimeGrid) -> Result<Mode> {
    match (select, grid.uniform_period()) {
        (ModeSelect::Nonuniform, _) => Ok(Mode::Nonuniform),
        (ModeSelect::Auto, Some(_)) | (ModeSelect::Uniform, Some(_)) => Ok(Mode::Uniform),
        (ModeSelect::Auto, None) => Ok(Mode::Nonuniform),
        (ModeSelect::Uniform, None) => {
            Err(Error::ModeMismatch("uniform mode requested on a non-equidistant grid".into()))
        }
    }
}

/// Trial parameters and LM bounds expressed in the working parameterization.
fn search_space(cfg: &RfsaConfig, mode: Mode, period: Option<f64>) -> (Vec<f64>, (f64, f64)) {
    let omegas = cfg.omega_grid();
    let [lo, hi] = cfg.freq_range;
    match (mode, period) {
        (Mode::Uniform, Some(t)) => {
            let params = omegas.iter().map(|w| 2.0 * (w * t).cos()).collect();
            let x_lo = if hi * t >= PI { -2.0 } else { 2.0 * (hi * t).cos() };
            let x_hi = 2.0 * (lo * t).clamp(0.0, PI).cos();
            (params, (x_lo, x_hi))
        }
        _ => (omegas, (lo, hi)),
    }
}

fn scored_sse(raw: f64, energy: f64) -> f64 {
    if raw <= EXACT_FIT_RATIO * energy {
        0.0
    } else {
        raw
    }
}

struct GridWinner {
    index: Option<usize>,
    beta: BetaVector,
    sse: f64,
    singular: usize,
    least_norm: usize,
}

fn grid_pass(series: &TimeSeries, prev: &BetaVector, prev_sse: f64, params: &[f64], mode: Mode) -> Result<GridWinner> {
    let fixed: Vec<f64> = prev.components.iter().map(|c| c.freq_param).collect();
    let basis = FixedBasis::new(series, &fixed, mode)?;
    let results = map_range(params.len(), |j| basis.solve_with(params[j]));

    let mut winner: Option<(usize, &crate::solver::SampleSolution)> = None;
    let mut best_sse = prev_sse;
    let (mut singular, mut least_norm) = (0, 0);
    for (j, r) in results.iter().enumerate() {
        match r {
            Ok(sol) => {
                if sol.info.least_norm {
                    least_norm += 1;
                }
                if best_sse > sol.sse {
                    best_sse = sol.sse;
                    winner = Some((j, sol));
                }
            }
            Err(Error::SingularSystem { .. }) => singular += 1,
            Err(e) => return Err(e.clone()),
        }
    }

    let mut freqs = fixed;
    let (index, beta, sse_out) = match winner {
        Some((j, sol)) => {
            freqs.push(params[j]);
            (Some(j), BetaVector::new(sol.samples.components(&freqs, mode)), sol.sse)
        }
        None => {
            let mut components = prev.components.clone();
            components.push(RfsComponent { freq_param: params[0], y1: 0.0, y2: 0.0, mode });
            let beta = BetaVector::new(components);
            let s = sse(series, &beta);
            (None, beta, s)
        }
    };
    Ok(GridWinner { index, beta, sse: sse_out, singular, least_norm })
}

/// Decomposes `series` into at most `cfg.max_order` sinusoids.
pub fn decompose(series: &TimeSeries, cfg: &RfsaConfig) -> Result<DecompositionReport> {
    cfg.validate()?;
    let k = series.len();
    if k < 3 {
        return Err(Error::InvalidInput(format!("decomposition needs at least 3 samples, got {k}")));
    }
    let grid = series.grid();
    let mode = resolve_mode(cfg.mode, grid)?;
    let period = match mode {
        Mode::Uniform => grid.uniform_period(),
        Mode::Nonuniform => None,
    };
    let (params, bounds) = search_space(cfg, mode, period);
    let lm_cfg = LmConfig { freq_bounds: bounds, ..cfg.lm };

    let energy = series.energy();
    let mut betas = vec![BetaVector::new(Vec::new())];
    let mut raw_sse = vec![energy];
    let mut scores = vec![edc(k, scored_sse(energy, energy), 0, &cfg.penalty)?];
    let mut diagnostics = Vec::with_capacity(cfg.max_order);

    for order in 1..=cfg.max_order {
        let prev = &betas[order - 1];
        let prev_sse = raw_sse[order - 1];
        let mut diag = OrderDiagnostics {
            order,
            grid_best_index: None,
            grid_best_param: None,
            grid_sse: prev_sse,
            refined_sse: prev_sse,
            lm_accepted: 0,
            lm_rejected: 0,
            lm_error: None,
            singular_candidates: 0,
            least_norm_candidates: 0,
            skipped: false,
            glrt: None,
        };

        let (beta, order_sse) = if 2 * order > k {
            diag.skipped = true;
            let mut components = prev.components.clone();
            components.push(RfsComponent { freq_param: params[0], y1: 0.0, y2: 0.0, mode });
            (BetaVector::new(components), prev_sse)
        } else {
            let win = grid_pass(series, prev, prev_sse, &params, mode)?;
            diag.grid_best_index = win.index;
            diag.grid_best_param = win.index.map(|j| params[j]);
            diag.grid_sse = win.sse;
            diag.singular_candidates = win.singular;
            diag.least_norm_candidates = win.least_norm;
            match refine(series, &win.beta, &lm_cfg, mode) {
                Ok(out) if out.sse <= win.sse => {
                    diag.lm_accepted = out.accepted_steps;
                    diag.lm_rejected = out.rejected_steps;
                    (out.beta, out.sse)
                }
                Ok(out) => {
                    diag.lm_accepted = out.accepted_steps;
                    diag.lm_rejected = out.rejected_steps;
                    (win.beta, win.sse)
                }
                Err(e) => {
                    diag.lm_error = Some(e.to_string());
                    (win.beta, win.sse)
                }
            }
        };
        // adding a component can never hurt the least-squares optimum
        let order_sse = order_sse.min(prev_sse);
        diag.refined_sse = order_sse;
        diag.glrt = Some(glrt_gain(scored_sse(prev_sse, energy), scored_sse(order_sse, energy), k, &cfg.penalty)?);
        scores.push(edc(k, scored_sse(order_sse, energy), order, &cfg.penalty)?);
        raw_sse.push(order_sse);
        betas.push(beta);
        diagnostics.push(diag);
    }

    let selected = select_order(&scores)?;
    let model = Model {
        mode,
        t1: grid.t1(),
        t2: grid.t2(),
        period,
        components: betas[selected].components.clone(),
        selected_order: selected,
        per_order_scores: scores,
        per_order_betas: betas.into_iter().map(|b| b.components).collect(),
    };
    let sinusoids = to_sinusoids(&model, cfg.trend_threshold);
    Ok(DecompositionReport { residual_sse: raw_sse[selected], model, sinusoids, diagnostics })
}

/// Lattice indices `n` with `t = t1 + n·T`, or `None` if some instant is off the lattice.
fn lattice_indices(times: &[f64], t1: f64, period: f64) -> Option<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let n = (t - t1) / period;
            let r = n.round();
            (r >= 0.0 && (n - r).abs() <= 1e-9 * (1.0 + r)).then_some(r as usize)
        })
        .collect()
}

/// Evaluates the selected components of `model` at the instants of `grid`.
pub fn reconstruct(model: &Model, grid: &TimeGrid) -> Result<Vec<f64>> {
    let times = grid.times();
    let mut out = vec![0.0; times.len()];
    match model.mode {
        Mode::Nonuniform => {
            for c in &model.components {
                let y = predict_at(c, model.t1, model.t2, times)?;
                for (o, (v, &t)) in out.iter_mut().zip(y.iter().zip(times)) {
                    // reference instants reproduce the stored samples exactly
                    *o += if t == model.t1 {
                        c.y1
                    } else if t == model.t2 {
                        c.y2
                    } else {
                        *v
                    };
                }
            }
        }
        Mode::Uniform => {
            if model.components.is_empty() {
                return Ok(out);
            }
            let period =
                model.period.ok_or_else(|| Error::ModeMismatch("uniform model without a sampling period".into()))?;
            let idx = lattice_indices(times, model.t1, period)
                .ok_or_else(|| Error::ModeMismatch("uniform model evaluated off its sampling lattice".into()))?;
            let n_max = idx.iter().copied().max().unwrap_or(0);
            for c in &model.components {
                let mut values = Vec::with_capacity(n_max + 1);
                let mut s = UniformState::FIRST;
                for n in 0..=n_max {
                    if n > 0 {
                        s = s.advance(c.freq_param);
                    }
                    values.push(s.a * c.y2 + s.b * c.y1);
                }
                for (o, &n) in out.iter_mut().zip(&idx) {
                    *o += values[n];
                }
            }
        }
    }
    Ok(out)
}

/// Conventional parameters of each selected component.
pub fn to_sinusoids(model: &Model, trend_threshold: f64) -> Vec<ComponentSummary> {
    model.components.iter().map(|c| summarize(model, c, trend_threshold)).collect()
}

fn summarize(model: &Model, c: &RfsComponent, trend_threshold: f64) -> ComponentSummary {
    let omega = match model.omega_of(c) {
        Ok(w) => w,
        Err(_) => return ComponentSummary::Unresolved { omega: None, y1: c.y1, y2: c.y2 },
    };
    let trend = || {
        let (slope, intercept) = trend_line(c.y1, c.y2, model.t1, model.t2);
        ComponentSummary::Trend { omega, slope, intercept }
    };
    if omega.abs() < trend_threshold {
        return trend();
    }
    let tau = model.period.unwrap_or(model.t2 - model.t1);
    let as_nonuniform = RfsComponent::nonuniform(omega, c.y1, c.y2);
    match amplitude_phase(&as_nonuniform, model.t1, model.t1 + tau) {
        Ok(p) => ComponentSummary::Sinusoid(p),
        Err(Error::TrendComponent { .. }) => trend(),
        Err(_) => ComponentSummary::Unresolved { omega: Some(omega), y1: c.y1, y2: c.y2 },
    }
}
