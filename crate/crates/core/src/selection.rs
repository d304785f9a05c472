//! EDC-type model-order selection.
//!
//! `EDC(M) = (K/2)·ln(sse^½) + penalty(M)`, i.e. a fit term of
//! `(K/4)·ln(sse)`. Two penalties are available: the MAP rule with total
//! penalty `(5M/2)·ln K`, and the extreme-value rule `M·C_K` with
//! `C_K = ln K + ½·ln ln K − ½·ln(3α²/π)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PenaltyRule {
    Map,
    Evt { alpha: f64 },
}

impl PenaltyRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PenaltyRule::Map => Ok(()),
            PenaltyRule::Evt { alpha } if alpha > 0.0 && alpha < 1.0 => Ok(()),
            PenaltyRule::Evt { alpha } => {
                Err(Error::InvalidArgument(format!("EVT confidence must lie in (0, 1), got {alpha}")))
            }
        }
    }

    /// Total complexity penalty for `order` components.
    pub fn penalty(&self, samples: usize, order: usize) -> f64 {
        let k = samples as f64;
        match *self {
            PenaltyRule::Map => 2.5 * order as f64 * k.ln(),
            PenaltyRule::Evt { alpha } => order as f64 * evt_constant(samples, alpha),
        }
    }

    /// Penalty added by one more component.
    pub fn increment(&self, samples: usize) -> f64 {
        self.penalty(samples, 1)
    }
}

/// `C_K` of the extreme-value penalty.
pub fn evt_constant(samples: usize, alpha: f64) -> f64 {
    let k = samples as f64;
    k.ln() + 0.5 * k.ln().ln() - 0.5 * (3.0 * alpha * alpha / std::f64::consts::PI).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdcScore {
    pub order: usize,
    /// Squared error the score was computed from.
    pub sse: f64,
    /// `−∞` for an exact fit.
    #[serde(with = "signed_inf")]
    pub score: f64,
}

pub fn edc(samples: usize, sse: f64, order: usize, rule: &PenaltyRule) -> Result<EdcScore> {
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(sse >= 0.0) || !sse.is_finite() {
        return Err(Error::InvalidArgument(format!("sse must be finite and non-negative, got {sse}")));
    }
    rule.validate()?;
    let score =
        if sse == 0.0 { f64::NEG_INFINITY } else { 0.25 * samples as f64 * sse.ln() + rule.penalty(samples, order) };
    Ok(EdcScore { order, sse, score })
}

/// Order with the smallest score; ties go to the smaller order.
pub fn select_order(scores: &[EdcScore]) -> Result<usize> {
    let first = scores.first().ok_or_else(|| Error::InvalidArgument("no scores to select from".into()))?;
    if let Some((i, s)) = scores.iter().enumerate().find(|(i, s)| s.order != first.order + i) {
        return Err(Error::InvalidArgument(format!(
            "scores must cover contiguous orders, found order {} at position {i}",
            s.order
        )));
    }
    let mut best = first;
    for s in &scores[1..] {
        if s.score < best.score {
            best = s;
        }
    }
    Ok(best.order)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlrtOutcome {
    #[serde(with = "signed_inf")]
    pub gain: f64,
    pub threshold: f64,
    pub exceeds: bool,
}

/// Log-likelihood gain of order M over M−1, compared with the per-component penalty.
pub fn glrt_gain(sse_prev: f64, sse_cur: f64, samples: usize, rule: &PenaltyRule) -> Result<GlrtOutcome> {
    if !(sse_cur >= 0.0) || !(sse_prev >= sse_cur) || !sse_prev.is_finite() {
        return Err(Error::InvalidArgument(format!("need sse_prev >= sse_cur >= 0, got {sse_prev} and {sse_cur}")));
    }
    rule.validate()?;
    let threshold = rule.increment(samples);
    let gain = if sse_cur == 0.0 {
        if sse_prev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        0.25 * samples as f64 * (sse_prev.ln() - sse_cur.ln())
    };
    Ok(GlrtOutcome { gain, threshold, exceeds: gain > threshold })
}

/// JSON has no infinities; they travel as the strings "inf" / "-inf".
pub(crate) mod signed_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}
