//! Sparse sinusoid decomposition of uniformly or irregularly sampled series
//! using the recursive formulation of a sinusoid (RFS).
//!
//! Each sinusoid is held as `(ω, y1, y2)`: its radian frequency and its
//! values at the first two sampling instants. Frequencies are found by a
//! greedy grid search with linear least-squares solves for the reference
//! samples, refined jointly by Levenberg–Marquardt, and the number of
//! components is chosen by an EDC-type information criterion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod lm;
pub mod montecarlo;
pub mod par;
pub mod rfs;
pub mod rfsa;
pub mod selection;
pub mod signal;
pub mod solver;

pub use error::{Error, Result};
pub use lm::{lm_step, refine, BetaVector, LmConfig, LmStep, RefineOutcome};
pub use montecarlo::{crb_omega, run_mc, McExperiment, McReport, McRow, TrialRecord};
pub use rfs::{
    amplitude_phase, coeffs_nonuniform, coeffs_uniform_sequence, predict, Mode, RfsComponent, SinusoidParams, TimeGrid,
    TimeSeries,
};
pub use rfsa::{
    decompose, reconstruct, to_sinusoids, ComponentSummary, DecompositionReport, ModeSelect, Model, RfsaConfig,
};
pub use selection::{edc, glrt_gain, select_order, EdcScore, PenaltyRule};
pub use signal::{generate, sample_times, snr_to_sigma, PatternKind, SamplingPattern, SignalSpec, Tone};
pub use solver::{build_design_matrix, solve_initial_samples, InitialSamples, SampleSolution};
