//! Levenberg–Marquardt refinement of all `3M` RFS parameters.
//!
//! Each step solves `[JᵀJ + γ·diag(JᵀJ)]·δ = Jᵀ(w − P(β))`. A step is kept
//! only if it lowers the squared prediction error; γ shrinks by the damping
//! factor after an accepted step and grows by it after a rejected one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::rfs::{row_from_offsets, Mode, RfsComponent, TimeGrid, TimeSeries, UniformState, DEFAULT_GUARD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    /// Maximum number of accepted steps.
    pub max_steps: usize,
    /// Multiplier applied to γ on rejection, divisor on acceptance.
    pub damping_factor: f64,
    pub initial_damping: f64,
    /// Box for the frequency parameter (ω, or x in uniform mode).
    #[serde(skip)]
    pub freq_bounds: (f64, f64),
    pub min_relative_improvement: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_steps: 30,
            damping_factor: 1.5,
            initial_damping: 1e-3,
            freq_bounds: (0.0, std::f64::consts::PI),
            min_relative_improvement: 1e-12,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("LM needs at least one step".into()));
        }
        if !(self.damping_factor > 1.0) {
            return Err(Error::InvalidArgument(format!("damping factor must exceed 1, got {}", self.damping_factor)));
        }
        if !(self.initial_damping > 0.0) {
            return Err(Error::InvalidArgument("initial damping must be positive".into()));
        }
        let (lo, hi) = self.freq_bounds;
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!("frequency bounds [{lo}, {hi}] are not ordered")));
        }
        Ok(())
    }

    /// Cap on damped solves, counting rejected trials.
    pub fn max_solves(&self) -> usize {
        3 * self.max_steps
    }
}

/// Parameter vector `β = [f_1, y_{1,1}, y_{1,2}, …, f_M, y_{M,1}, y_{M,2}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaVector {
    pub components: Vec<RfsComponent>,
}

impl BetaVector {
    pub fn new(components: Vec<RfsComponent>) -> Self {
        Self { components }
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| [c.freq_param, c.y1, c.y2]).collect()
    }

    fn offset(&self, delta: &[f64]) -> Self {
        let components = self
            .components
            .iter()
            .zip(delta.chunks_exact(3))
            .map(|(c, d)| RfsComponent {
                freq_param: c.freq_param + d[0],
                y1: c.y1 + d[1],
                y2: c.y2 + d[2],
                mode: c.mode,
            })
            .collect();
        Self { components }
    }

    fn project(&mut self, (lo, hi): (f64, f64)) {
        for c in &mut self.components {
            let (mut lo, mut hi) = (lo, hi);
            if c.mode == Mode::Uniform {
                lo = lo.max(-2.0);
                hi = hi.min(2.0);
            }
            c.freq_param = c.freq_param.clamp(lo, hi);
        }
    }
}

fn check_mode(beta: &BetaVector, grid: &TimeGrid, mode: Mode) -> Result<()> {
    if beta.components.iter().any(|c| c.mode != mode) {
        return Err(Error::ModeMismatch("β mixes sampling modes".into()));
    }
    if mode == Mode::Uniform {
        if grid.uniform_period().is_none() {
            return Err(Error::ModeMismatch("uniform mode on a non-equidistant grid".into()));
        }
        if let Some(c) = beta.components.iter().find(|c| !(-2.0..=2.0).contains(&c.freq_param)) {
            return Err(Error::Domain { value: c.freq_param, lo: -2.0, hi: 2.0 });
        }
    }
    Ok(())
}

/// Sum of component predictions on the grid, references at the first two instants.
pub fn predict_beta(beta: &BetaVector, grid: &TimeGrid) -> Vec<f64> {
    let times = grid.times();
    let mut out = vec![0.0; times.len()];
    for c in &beta.components {
        match c.mode {
            Mode::Nonuniform => {
                let (t1, t2) = (times[0], times[1]);
                for (k, &t) in times.iter().enumerate() {
                    let (a, b) = crate::rfs::ab_from_offsets(c.freq_param, t - t1, t - t2, t2 - t1, DEFAULT_GUARD);
                    out[k] += match k {
                        0 => c.y1,
                        1 => c.y2,
                        _ => a * c.y2 + b * c.y1,
                    };
                }
            }
            Mode::Uniform => {
                let mut s = UniformState::FIRST;
                for (k, o) in out.iter_mut().enumerate() {
                    if k > 0 {
                        s = s.advance(c.freq_param);
                    }
                    *o += s.a * c.y2 + s.b * c.y1;
                }
            }
        }
    }
    out
}

/// Squared prediction error of β on the series.
pub fn sse(series: &TimeSeries, beta: &BetaVector) -> f64 {
    predict_beta(beta, series.grid()).iter().zip(series.values()).map(|(p, w)| (w - p) * (w - p)).sum()
}

/// `K × 3M` Jacobian with column `3m` = ∂y/∂f_m, `3m+1` = ∂y/∂y_{m,1},
/// `3m+2` = ∂y/∂y_{m,2}, and the model prediction.
pub fn jacobian(beta: &BetaVector, grid: &TimeGrid) -> (DMatrix<f64>, Vec<f64>) {
    let times = grid.times();
    let k_len = times.len();
    let mut jac = DMatrix::zeros(k_len, 3 * beta.order());
    let mut pred = vec![0.0; k_len];
    for (m, c) in beta.components.iter().enumerate() {
        match c.mode {
            Mode::Nonuniform => {
                let (t1, t2) = (times[0], times[1]);
                for (k, &t) in times.iter().enumerate() {
                    let (mut y, mut row) =
                        row_from_offsets(c.freq_param, c.y1, c.y2, t - t1, t - t2, t2 - t1, DEFAULT_GUARD);
                    if k < 2 {
                        // references are independent of ω
                        y = if k == 0 { c.y1 } else { c.y2 };
                        row.d_freq = 0.0;
                        (row.d_y1, row.d_y2) = if k == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
                    }
                    pred[k] += y;
                    jac[(k, 3 * m)] = row.d_freq;
                    jac[(k, 3 * m + 1)] = row.d_y1;
                    jac[(k, 3 * m + 2)] = row.d_y2;
                }
            }
            Mode::Uniform => {
                let mut s = UniformState::FIRST;
                for k in 0..k_len {
                    if k > 0 {
                        s = s.advance(c.freq_param);
                    }
                    let row = s.row(c.y1, c.y2);
                    pred[k] += s.a * c.y2 + s.b * c.y1;
                    jac[(k, 3 * m)] = row.d_freq;
                    jac[(k, 3 * m + 1)] = row.d_y1;
                    jac[(k, 3 * m + 2)] = row.d_y2;
                }
            }
        }
    }
    (jac, pred)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmStep {
    pub delta: Vec<f64>,
    /// Squared error at `β + δ` (before any bound projection).
    pub predicted_sse: f64,
}

/// One damped Gauss–Newton increment.
pub fn lm_step(series: &TimeSeries, beta: &BetaVector, gamma: f64, mode: Mode) -> Result<LmStep> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("damping must be non-negative, got {gamma}")));
    }
    check_mode(beta, series.grid(), mode)?;
    let (jac, pred) = jacobian(beta, series.grid());
    let resid = DVector::from_iterator(series.len(), series.values().iter().zip(&pred).map(|(w, p)| w - p));
    let mut normal = jac.tr_mul(&jac);
    for i in 0..normal.nrows() {
        normal[(i, i)] *= 1.0 + gamma;
    }
    let rhs = jac.tr_mul(&resid);
    let (delta, _) = solve_spd(&normal, &rhs, true)?;
    let delta = delta.as_slice().to_vec();
    let moved = beta.offset(&delta);
    Ok(LmStep { predicted_sse: sse(series, &moved), delta })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineOutcome {
    pub beta: BetaVector,
    pub sse: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Runs up to `max_steps` accepted LM steps from `beta`.
pub fn refine(series: &TimeSeries, beta: &BetaVector, cfg: &LmConfig, mode: Mode) -> Result<RefineOutcome> {
    cfg.validate()?;
    check_mode(beta, series.grid(), mode)?;
    let mut best = beta.clone();
    let mut best_sse = sse(series, &best);
    let mut gamma = cfg.initial_damping;
    let (mut accepted, mut rejected, mut solves) = (0, 0, 0);

    while accepted < cfg.max_steps && solves < cfg.max_solves() && best_sse > 0.0 {
        solves += 1;
        let step = match lm_step(series, &best, gamma, mode) {
            Ok(step) => step,
            Err(Error::SingularSystem { .. }) => {
                gamma *= cfg.damping_factor;
                rejected += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut cand = best.offset(&step.delta);
        let before = cand.clone();
        cand.project(cfg.freq_bounds);
        let cand_sse = if cand == before { step.predicted_sse } else { sse(series, &cand) };
        if cand_sse.is_finite() && cand_sse < best_sse {
            let rel = (best_sse - cand_sse) / best_sse;
            best = cand;
            best_sse = cand_sse;
            gamma /= cfg.damping_factor;
            accepted += 1;
            if rel < cfg.min_relative_improvement {
                break;
            }
        } else {
            gamma *= cfg.damping_factor;
            rejected += 1;
        }
    }
    Ok(RefineOutcome { beta: best, sse: best_sse, accepted_steps: accepted, rejected_steps: rejected })
}
