//! Recursive formulation of a sinusoid.
//!
//! A sinusoid `A·sin(ωt + φ)` observed at `t1 < t2` is fully described by
//! its radian frequency and the two reference samples `y1 = y(t1)`,
//! `y2 = y(t2)`. Any other sample follows from the two-term recurrence
//!
//! ```text
//! y(t_k) = a_k·y2 + b_k·y1
//! a_k =  sin(ω(t_k − t1)) / sin(ω(t2 − t1))
//! b_k = −sin(ω(t_k − t2)) / sin(ω(t2 − t1))
//! ```
//!
//! On an equidistant grid with period `T` the coefficients obey the
//! Chebyshev recursion `a_k = x·a_{k−1} + b_{k−1}`, `b_k = −a_{k−1}` with
//! `x = 2cos(ωT)`, so the uniform path needs only multiplications and
//! additions. As `ω → 0` both forms collapse to the straight line through
//! the two reference samples.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Clamp applied to `sin(ω(t2 − t1))` when it comes within this distance of zero.
pub const DEFAULT_GUARD: f64 = 1e-12;

/// Below this value of `|ω·(t2 − t1)|` the straight-line limit replaces the
/// ratio of sines, for values and partial derivatives alike.
pub const LINE_DISPATCH: f64 = 1e-6;

const UNIFORM_RTOL: f64 = 1e-12;

/// Absorbs rounding of timestamps stored with 10 decimals.
const UNIFORM_ATOL: f64 = 2e-10;

/// How the frequency parameter of a component is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Radian frequency ω in rad/s; coefficients from ratios of sines.
    Nonuniform,
    /// Chebyshev parameter x = 2cos(ωT) ∈ [−2, 2]; coefficients by recursion.
    Uniform,
}

/// Strictly increasing sampling instants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uniform_period: Option<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidInput(format!("a time grid needs at least 2 samples, got {}", times.len())));
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidInput(format!("timestamp {i} is not finite")));
            }
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "timestamps must be strictly increasing (t[{}] = {} >= t[{}] = {})",
                i,
                times[i],
                i + 1,
                times[i + 1]
            )));
        }
        let uniform_period = detect_period(&times);
        Ok(Self { times, uniform_period })
    }

    /// Equidistant grid `t1, t1 + T, …` with `len` samples.
    pub fn uniform(t1: f64, period: f64, len: usize) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        Self::new((0..len).map(|k| t1 + k as f64 * period).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t1(&self) -> f64 {
        self.times[0]
    }

    pub fn t2(&self) -> f64 {
        self.times[1]
    }

    pub fn uniform_period(&self) -> Option<f64> {
        self.uniform_period
    }

    /// Mean spacing `(t_K − t_1)/(K − 1)`.
    pub fn mean_interval(&self) -> f64 {
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }
}

fn detect_period(times: &[f64]) -> Option<f64> {
    let d0 = times[1] - times[0];
    let equal = times.windows(2).all(|w| ((w[1] - w[0]) - d0).abs() <= UNIFORM_RTOL * d0.abs() + UNIFORM_ATOL);
    if equal {
        Some((times[times.len() - 1] - times[0]) / (times.len() - 1) as f64)
    } else {
        None
    }
}

/// Observed values on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidInput(format!("{} timestamps but {} values", grid.len(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("value {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_pairs(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(TimeGrid::new(times)?, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// One sinusoid as (frequency parameter, y1, y2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfsComponent {
    /// ω in rad/s for [`Mode::Nonuniform`], x = 2cos(ωT) for [`Mode::Uniform`].
    pub freq_param: f64,
    pub y1: f64,
    pub y2: f64,
    pub mode: Mode,
}

impl RfsComponent {
    pub fn nonuniform(omega: f64, y1: f64, y2: f64) -> Self {
        Self { freq_param: omega, y1, y2, mode: Mode::Nonuniform }
    }

    pub fn uniform(x: f64, y1: f64, y2: f64) -> Self {
        Self { freq_param: x, y1, y2, mode: Mode::Uniform }
    }

    /// Samples `A·sin(ωt + φ)` at the two reference instants.
    pub fn sampled(amplitude: f64, omega: f64, phase: f64, t1: f64, t2: f64) -> Self {
        Self::nonuniform(omega, amplitude * (omega * t1 + phase).sin(), amplitude * (omega * t2 + phase).sin())
    }

    /// Radian frequency, converting from x when needed. `period` is `t2 − t1`
    /// for uniform components and ignored otherwise.
    pub fn omega(&self, period: f64) -> Result<f64> {
        match self.mode {
            Mode::Nonuniform => Ok(self.freq_param),
            Mode::Uniform => omega_from_x(self.freq_param, period),
        }
    }
}

/// Conventional view `A·sin(2πf·t + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidParams {
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// Radians in (−π, π].
    pub phase: f64,
}

impl SinusoidParams {
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.omega() * t + self.phase).sin()
    }
}

/// Partial derivatives of one predicted sample w.r.t. (freq_param, y1, y2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianRow {
    pub d_freq: f64,
    pub d_y1: f64,
    pub d_y2: f64,
}

#[inline]
pub(crate) fn guarded(s: f64, guard: f64) -> f64 {
    if s.abs() < guard {
        if s < 0.0 {
            -guard
        } else {
            guard
        }
    } else {
        s
    }
}

/// `(a_k, b_k)` from the time offsets `tau_k1 = t_k − t1`, `tau_k2 = t_k − t2`
/// and `tau_21 = t2 − t1`.
#[inline]
pub(crate) fn ab_from_offsets(omega: f64, tau_k1: f64, tau_k2: f64, tau_21: f64, guard: f64) -> (f64, f64) {
    if (omega * tau_21).abs() < LINE_DISPATCH {
        return (tau_k1 / tau_21, -tau_k2 / tau_21);
    }
    let den = guarded((omega * tau_21).sin(), guard);
    ((omega * tau_k1).sin() / den, -(omega * tau_k2).sin() / den)
}

/// Value coefficients and all three partials for one sample.
#[inline]
pub(crate) fn row_from_offsets(
    omega: f64,
    y1: f64,
    y2: f64,
    tau_k1: f64,
    tau_k2: f64,
    tau_21: f64,
    guard: f64,
) -> (f64, JacobianRow) {
    if (omega * tau_21).abs() < LINE_DISPATCH {
        let a = tau_k1 / tau_21;
        let b = -tau_k2 / tau_21;
        let row = JacobianRow { d_freq: 0.0, d_y1: b, d_y2: a };
        return (a * y2 + b * y1, row);
    }
    let (s21, c21) = (omega * tau_21).sin_cos();
    let den = guarded(s21, guard);
    let (sk1, ck1) = (omega * tau_k1).sin_cos();
    let (sk2, ck2) = (omega * tau_k2).sin_cos();
    let a = sk1 / den;
    let b = -sk2 / den;
    let den2 = den * den;
    let da = (tau_k1 * ck1 * den - tau_21 * sk1 * c21) / den2;
    let db = -(tau_k2 * ck2 * den - tau_21 * sk2 * c21) / den2;
    let row = JacobianRow { d_freq: da * y2 + db * y1, d_y1: b, d_y2: a };
    (a * y2 + b * y1, row)
}

/// Coefficients `(a_k, b_k)` predicting `y(t_k)` from `y(t1)`, `y(t2)`.
pub fn coeffs_nonuniform(omega: f64, tk: f64, t1: f64, t2: f64, guard: f64) -> Result<(f64, f64)> {
    for (name, v) in [("omega", omega), ("t_k", tk), ("t1", t1), ("t2", t2), ("guard", guard)] {
        ensure_finite(name, v)?;
    }
    if t1 == t2 {
        return Err(Error::InvalidArgument("reference instants must differ".into()));
    }
    if !(guard > 0.0) {
        return Err(Error::InvalidArgument(format!("guard must be positive, got {guard}")));
    }
    Ok(ab_from_offsets(omega, tk - t1, tk - t2, t2 - t1, guard))
}

/// Chebyshev-recursion coefficients for samples `1..=len` of a uniform grid.
pub fn coeffs_uniform_sequence(x: f64, len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_finite("x", x)?;
    if len == 0 {
        return Err(Error::InvalidArgument("sequence length must be at least 1".into()));
    }
    let mut a = Vec::with_capacity(len);
    let mut b = Vec::with_capacity(len);
    let mut state = UniformState::FIRST;
    for k in 0..len {
        if k > 0 {
            state = state.advance(x);
        }
        a.push(state.a);
        b.push(state.b);
    }
    Ok((a, b))
}

pub fn x_from_omega(omega: f64, period: f64) -> Result<f64> {
    ensure_finite("omega", omega)?;
    if !(period > 0.0) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    Ok(2.0 * (omega * period).cos())
}

pub fn omega_from_x(x: f64, period: f64) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    if !(-2.0..=2.0).contains(&x) {
        return Err(Error::Domain { value: x, lo: -2.0, hi: 2.0 });
    }
    Ok((x / 2.0).acos() / period)
}

/// Recursion state at sample k: coefficients and their x-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformState {
    pub a: f64,
    pub b: f64,
    pub da: f64,
    pub db: f64,
}

impl UniformState {
    /// State at the first reference sample.
    pub const FIRST: Self = Self { a: 0.0, b: 1.0, da: 0.0, db: 0.0 };

    #[inline]
    pub fn advance(self, x: f64) -> Self {
        Self { a: x * self.a + self.b, b: -self.a, da: self.a + x * self.da + self.db, db: -self.da }
    }

    #[inline]
    pub fn row(&self, y1: f64, y2: f64) -> JacobianRow {
        JacobianRow { d_freq: self.da * y2 + self.db * y1, d_y1: self.b, d_y2: self.a }
    }
}

/// Advances the uniform recursion from sample k−1 to k and returns the
/// Jacobian row at k together with the new state.
pub fn jacobian_row_uniform(component: &RfsComponent, prev: UniformState) -> (JacobianRow, UniformState) {
    let next = prev.advance(component.freq_param);
    (next.row(component.y1, component.y2), next)
}

pub fn jacobian_row_nonuniform(component: &RfsComponent, tk: f64, t1: f64, t2: f64) -> Result<JacobianRow> {
    jacobian_row_nonuniform_guarded(component, tk, t1, t2, DEFAULT_GUARD)
}

pub fn jacobian_row_nonuniform_guarded(
    component: &RfsComponent,
    tk: f64,
    t1: f64,
    t2: f64,
    guard: f64,
) -> Result<JacobianRow> {
    for (name, v) in [
        ("omega", component.freq_param),
        ("y1", component.y1),
        ("y2", component.y2),
        ("t_k", tk),
        ("t1", t1),
        ("t2", t2),
    ] {
        ensure_finite(name, v)?;
    }
    if t1 == t2 {
        return Err(Error::InvalidArgument("reference instants must differ".into()));
    }
    let (_, row) = row_from_offsets(component.freq_param, component.y1, component.y2, tk - t1, tk - t2, t2 - t1, guard);
    Ok(row)
}

/// Predicts a nonuniform component at arbitrary instants, with `t1`, `t2` as references.
pub fn predict_at(component: &RfsComponent, t1: f64, t2: f64, times: &[f64]) -> Result<Vec<f64>> {
    if component.mode != Mode::Nonuniform {
        return Err(Error::ModeMismatch(
            "uniform components can only be evaluated on their own equidistant lattice".into(),
        ));
    }
    if t1 == t2 {
        return Err(Error::InvalidArgument("reference instants must differ".into()));
    }
    let tau_21 = t2 - t1;
    Ok(times
        .iter()
        .map(|&t| {
            let (a, b) = ab_from_offsets(component.freq_param, t - t1, t - t2, tau_21, DEFAULT_GUARD);
            a * component.y2 + b * component.y1
        })
        .collect())
}

/// First `len` samples of a uniform component by the Chebyshev recursion.
pub fn predict_uniform(component: &RfsComponent, len: usize) -> Vec<f64> {
    let x = component.freq_param;
    let mut out = Vec::with_capacity(len);
    let mut state = UniformState::FIRST;
    for k in 0..len {
        if k > 0 {
            state = state.advance(x);
        }
        out.push(state.a * component.y2 + state.b * component.y1);
    }
    out
}

/// Predicts a component on `grid`, using its first two instants as references.
pub fn predict(component: &RfsComponent, grid: &TimeGrid) -> Result<Vec<f64>> {
    match component.mode {
        Mode::Nonuniform => {
            let mut out = predict_at(component, grid.t1(), grid.t2(), grid.times())?;
            // reference samples are reproduced exactly
            out[0] = component.y1;
            out[1] = component.y2;
            Ok(out)
        }
        Mode::Uniform => {
            if grid.uniform_period().is_none() {
                return Err(Error::ModeMismatch("uniform-mode component on a non-equidistant grid".into()));
            }
            if !(-2.0..=2.0).contains(&component.freq_param) {
                return Err(Error::Domain { value: component.freq_param, lo: -2.0, hi: 2.0 });
            }
            Ok(predict_uniform(component, grid.len()))
        }
    }
}

/// Slope and intercept (at t = 0) of the line through `(t1, y1)`, `(t2, y2)`.
pub fn trend_line(y1: f64, y2: f64, t1: f64, t2: f64) -> (f64, f64) {
    let slope = (y2 - y1) / (t2 - t1);
    (slope, y1 - slope * t1)
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

/// Amplitude, frequency and phase of the sinusoid through the two reference samples.
///
/// Writing `y = B·sin(ωt) + C·cos(ωt)`, the reference pair fixes `B` and `C`
/// by a 2×2 solve whose determinant is `sin(ω(t2 − t1))`. Then
/// `A = √(B² + C²)` and `φ = atan2(C, B)`.
pub fn amplitude_phase(component: &RfsComponent, t1: f64, t2: f64) -> Result<SinusoidParams> {
    let tau_21 = t2 - t1;
    if !(tau_21 != 0.0 && tau_21.is_finite()) {
        return Err(Error::InvalidArgument("reference instants must differ".into()));
    }
    let omega = component.omega(tau_21)?;
    if (omega * tau_21).abs() < LINE_DISPATCH {
        return Err(Error::TrendComponent { omega });
    }
    let den = (omega * tau_21).sin();
    if den.abs() < DEFAULT_GUARD {
        return Err(Error::NumericGuard(format!("sin(ω(t2 − t1)) = {den:e} at ω = {omega}")));
    }
    let (s1, c1) = (omega * t1).sin_cos();
    let (s2, c2) = (omega * t2).sin_cos();
    let (y1, y2) = (component.y1, component.y2);
    let cos_part = (y1 * s2 - y2 * s1) / den;
    let sin_part = (y2 * c1 - y1 * c2) / den;
    let amplitude = sin_part.hypot(cos_part);
    let phase = if amplitude == 0.0 { 0.0 } else { wrap_phase(cos_part.atan2(sin_part)) };
    Ok(SinusoidParams { amplitude, frequency: omega / (2.0 * PI), phase })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quarter_period_step_negates() {
        let (a, b) = coeffs_nonuniform(PI / 2.0, 2.0, 0.0, 1.0, DEFAULT_GUARD).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn reference_instants_are_identities() {
        for omega in [0.0, 1e-9, 0.3, 2.7, 13.822] {
            let (a, b) = coeffs_nonuniform(omega, 1.7, 0.4, 1.7, DEFAULT_GUARD).unwrap();
            assert_eq!((a, b), (1.0, 0.0));
            let (a, b) = coeffs_nonuniform(omega, 0.4, 0.4, 1.7, DEFAULT_GUARD).unwrap();
            assert_eq!((a, b), (0.0, 1.0));
        }
    }

    #[test]
    fn coefficient_errors() {
        assert!(coeffs_nonuniform(f64::NAN, 1.0, 0.0, 1.0, DEFAULT_GUARD).is_err());
        assert!(coeffs_nonuniform(1.0, 1.0, 0.5, 0.5, DEFAULT_GUARD).is_err());
        assert!(coeffs_nonuniform(1.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(coeffs_uniform_sequence(f64::INFINITY, 3).is_err());
    }

    #[test]
    fn guard_clamps_with_sign() {
        assert_eq!(guarded(0.0, 1e-12), 1e-12);
        assert_eq!(guarded(-1e-15, 1e-12), -1e-12);
        assert_eq!(guarded(3e-15, 1e-12), 1e-12);
        assert_eq!(guarded(0.5, 1e-12), 0.5);
        // ω(t2 − t1) = π: the denominator is clamped, not divided by ~1e-16
        let (a, _) = coeffs_nonuniform(PI, 1.5, 0.0, 1.0, DEFAULT_GUARD).unwrap();
        assert_abs_diff_eq!(a, (1.5 * PI).sin() / 1e-12, epsilon = 1.0);
    }

    #[test]
    fn uniform_sequence_hand_steps() {
        let (a, b) = coeffs_uniform_sequence(0.3, 2).unwrap();
        assert_eq!((a[1], b[1]), (1.0, 0.0));
        let (a, b) = coeffs_uniform_sequence(1.5, 3).unwrap();
        assert_eq!((a[2], b[2]), (1.5, -1.0));
        // ω = 0: straight-line extrapolation y4 = 3·y2 − 2·y1
        let (a, b) = coeffs_uniform_sequence(2.0, 4).unwrap();
        assert_eq!((a[3], b[3]), (3.0, -2.0));
        assert_eq!((a[0], b[0]), (0.0, 1.0));
    }

    #[test]
    fn x_omega_conversions() {
        assert_eq!(x_from_omega(0.0, 1.0).unwrap(), 2.0);
        assert_abs_diff_eq!(x_from_omega(PI, 1.0).unwrap(), -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(omega_from_x(1.1755705, 1.0).unwrap(), 0.3 * PI, epsilon = 1e-7);
        assert_eq!(omega_from_x(2.0, 1.0).unwrap(), 0.0);
        assert!(matches!(omega_from_x(2.1, 1.0), Err(Error::Domain { .. })));
        for &omega in &[0.0, 0.1, 1.0, 2.0, 3.0, PI] {
            let back = omega_from_x(x_from_omega(omega, 0.5).unwrap(), 0.5).unwrap();
            assert_abs_diff_eq!(back, omega, epsilon = 1e-7);
        }
    }

    #[test]
    fn predict_closed_form_example() {
        let grid = TimeGrid::new(vec![0.5, 1.0, 2.0]).unwrap();
        let c = RfsComponent::nonuniform(1.0, 0.5f64.sin(), 1.0f64.sin());
        let y = predict(&c, &grid).unwrap();
        assert_eq!(y[0], 0.5f64.sin());
        assert_eq!(y[1], 1.0f64.sin());
        assert_abs_diff_eq!(y[2], 2.0f64.sin(), epsilon = 1e-12);
    }

    #[test]
    fn predict_line_limit() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 3.0]).unwrap();
        for omega in [0.0, 1e-12, 1e-9] {
            let y = predict(&RfsComponent::nonuniform(omega, 0.5, 0.6), &grid).unwrap();
            assert_abs_diff_eq!(y[2], 0.8, epsilon = 1e-12);
        }
    }

    #[test]
    fn predict_regenerates_undersampled_tone() {
        // 13.822 rad/s is a 2.1998 Hz tone; the recurrence reproduces it on a jittered grid.
        let omega = 13.822;
        assert_abs_diff_eq!(omega / (2.0 * PI), 2.1998, epsilon = 5e-5);
        let times: Vec<f64> = (0..40).map(|k| 1.0 + k as f64 * 0.97 + 0.3 * ((k * 7 % 5) as f64) / 5.0).collect();
        let grid = TimeGrid::new(times.clone()).unwrap();
        let c = RfsComponent::sampled(0.5, omega, PI / 3.0, times[0], times[1]);
        let y = predict(&c, &grid).unwrap();
        for (t, v) in times.iter().zip(&y) {
            assert_abs_diff_eq!(*v, 0.5 * (omega * t + PI / 3.0).sin(), epsilon = 1e-10);
        }
    }

    #[test]
    fn uniform_component_needs_uniform_grid() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.5]).unwrap();
        let c = RfsComponent::uniform(1.0, 0.1, 0.2);
        assert!(matches!(predict(&c, &grid), Err(Error::ModeMismatch(_))));
        assert!(matches!(predict_at(&c, 0.0, 1.0, &[2.0]), Err(Error::ModeMismatch(_))));
    }

    #[test]
    fn grid_validation_and_period_detection() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
        let g = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
        assert_eq!(g.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(g.uniform_period(), Some(1.0));
        let g = TimeGrid::new(vec![0.0, 1.0, 2.0 + 1e-9]).unwrap();
        assert_eq!(g.uniform_period(), None);
    }

    #[test]
    fn jacobian_reference_rows() {
        let c = RfsComponent::nonuniform(0.7, 0.3, -0.4);
        let r = jacobian_row_nonuniform(&c, 2.0, 1.0, 2.0).unwrap();
        assert_eq!((r.d_y1, r.d_y2), (0.0, 1.0));
        let zero = RfsComponent::nonuniform(0.7, 0.0, 0.0);
        let r = jacobian_row_nonuniform(&zero, 5.3, 1.0, 2.0).unwrap();
        assert_eq!(r.d_freq, 0.0);
    }

    #[test]
    fn uniform_jacobian_hand_steps() {
        let c = RfsComponent::uniform(0.8, 0.25, -0.6);
        let (r2, s2) = jacobian_row_uniform(&c, UniformState::FIRST);
        assert_eq!(r2.d_freq, 0.0);
        assert_eq!((s2.da, s2.db), (0.0, 0.0));
        let (r3, s3) = jacobian_row_uniform(&c, s2);
        assert_eq!((s3.da, s3.db), (1.0, 0.0));
        assert_eq!(r3.d_freq, c.y2);
    }

    #[test]
    fn amplitude_phase_examples() {
        let c = RfsComponent::nonuniform(1.0, 0.5f64.sin(), 1.0f64.sin());
        let p = amplitude_phase(&c, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(p.amplitude, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.frequency, 1.0 / (2.0 * PI), epsilon = 1e-12);
        assert_abs_diff_eq!(p.phase, 0.0, epsilon = 1e-9);

        let zero = RfsComponent::nonuniform(0.9, 0.0, 0.0);
        assert_eq!(amplitude_phase(&zero, 0.5, 1.0).unwrap().amplitude, 0.0);

        let line = RfsComponent::nonuniform(1e-15, 0.5, 0.506);
        assert!(matches!(amplitude_phase(&line, 0.0, 1.0), Err(Error::TrendComponent { .. })));

        let degenerate = RfsComponent::nonuniform(PI, 0.1, 0.2);
        assert!(matches!(amplitude_phase(&degenerate, 0.0, 1.0), Err(Error::NumericGuard(_))));
    }

    #[test]
    fn amplitude_phase_of_fractional_cycle_component() {
        // 0.011 Hz tone observed from t1 = 1 s; t2 reconstructed from the sample pair.
        let (amp, phase, omega): (f64, f64, f64) = (0.90025, -1.6439e-2, 6.8901e-2);
        let t1 = 1.0;
        let y1 = amp * (omega * t1 + phase).sin();
        assert_abs_diff_eq!(y1, 4.7207e-2, epsilon = 5e-6);
        let t2 = ((9.5103e-2f64 / amp).asin() - phase) / omega;
        let c = RfsComponent::nonuniform(omega, 4.7207e-2, 9.5103e-2);
        let p = amplitude_phase(&c, t1, t2).unwrap();
        assert_abs_diff_eq!(p.frequency, 1.0966e-2, epsilon = 5e-7);
        assert_abs_diff_eq!(p.amplitude, amp, epsilon = 1e-3);
        assert_abs_diff_eq!(p.phase, phase, epsilon = 1e-3);
    }

    #[test]
    fn uniform_amplitude_phase_converts_x() {
        let omega: f64 = 0.3 * PI;
        let c = RfsComponent::uniform(2.0 * omega.cos(), 2f64.sqrt() * (omega * 0.0).sin(), 2f64.sqrt() * omega.sin());
        let p = amplitude_phase(&c, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.amplitude, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.omega(), omega, epsilon = 1e-12);
        assert_abs_diff_eq!(p.phase, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn phase_wrapping() {
        assert_eq!(wrap_phase(-PI), PI);
        assert_abs_diff_eq!(wrap_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(0.25), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn trend_line_through_references() {
        let (slope, intercept) = trend_line(0.5, 0.506, 0.0, 1.0);
        assert_abs_diff_eq!(slope, 0.006, epsilon = 1e-15);
        assert_abs_diff_eq!(intercept, 0.5, epsilon = 1e-15);
    }
}
