//! Initial samples for a fixed set of trial frequencies.
//!
//! With every frequency frozen the prediction is linear in the reference
//! samples, so the least-squares optimum solves the `2M × 2M` normal
//! equations `(JᵀJ)·α = Jᵀw` where row k of `J` is
//! `(b_{1,k}, a_{1,k}, …, b_{M,k}, a_{M,k})`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{solve_spd, SolveInfo};
use crate::rfs::{ab_from_offsets, Mode, RfsComponent, TimeGrid, TimeSeries, UniformState, DEFAULT_GUARD};

/// `K × 2M` design matrix of recurrence coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[(row, col)]
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Reference samples ordered `(y_{1,1}, y_{1,2}, …, y_{M,1}, y_{M,2})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialSamples {
    alpha: Vec<f64>,
}

impl InitialSamples {
    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    /// `(y1, y2)` per component.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.alpha.chunks_exact(2).map(|p| (p[0], p[1]))
    }

    pub fn components(&self, frequencies: &[f64], mode: Mode) -> Vec<RfsComponent> {
        frequencies
            .iter()
            .zip(self.pairs())
            .map(|(&f, (y1, y2))| RfsComponent { freq_param: f, y1, y2, mode })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSolution {
    pub samples: InitialSamples,
    /// Squared prediction error at the optimum.
    pub sse: f64,
    pub info: SolveInfo,
}

fn check_param(freq: f64, grid: &TimeGrid, mode: Mode) -> Result<()> {
    if !freq.is_finite() {
        return Err(Error::InvalidArgument(format!("frequency parameter {freq} is not finite")));
    }
    if mode == Mode::Uniform {
        if grid.uniform_period().is_none() {
            return Err(Error::ModeMismatch("uniform mode on a non-equidistant grid".into()));
        }
        if !(-2.0..=2.0).contains(&freq) {
            return Err(Error::Domain { value: freq, lo: -2.0, hi: 2.0 });
        }
    }
    Ok(())
}

/// Writes the `b` and `a` coefficient columns of one component.
pub(crate) fn fill_columns(freq: f64, grid: &TimeGrid, mode: Mode, b: &mut [f64], a: &mut [f64]) {
    match mode {
        Mode::Nonuniform => {
            let (t1, t2) = (grid.t1(), grid.t2());
            let tau_21 = t2 - t1;
            for (k, &t) in grid.times().iter().enumerate() {
                let (ak, bk) = ab_from_offsets(freq, t - t1, t - t2, tau_21, DEFAULT_GUARD);
                a[k] = ak;
                b[k] = bk;
            }
            // reference rows are identities regardless of rounding
            (a[0], b[0], a[1], b[1]) = (0.0, 1.0, 1.0, 0.0);
        }
        Mode::Uniform => {
            let mut s = UniformState::FIRST;
            for k in 0..grid.len() {
                if k > 0 {
                    s = s.advance(freq);
                }
                a[k] = s.a;
                b[k] = s.b;
            }
        }
    }
}

pub fn build_design_matrix(frequencies: &[f64], grid: &TimeGrid, mode: Mode) -> Result<DesignMatrix> {
    for &f in frequencies {
        check_param(f, grid, mode)?;
    }
    let k = grid.len();
    let mut matrix = DMatrix::zeros(k, 2 * frequencies.len());
    let mut b = vec![0.0; k];
    let mut a = vec![0.0; k];
    for (m, &f) in frequencies.iter().enumerate() {
        fill_columns(f, grid, mode, &mut b, &mut a);
        matrix.column_mut(2 * m).copy_from_slice(&b);
        matrix.column_mut(2 * m + 1).copy_from_slice(&a);
    }
    Ok(DesignMatrix { matrix })
}

fn check_solvable(series: &TimeSeries, frequencies: &[f64]) -> Result<()> {
    if series.len() < 2 * frequencies.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot determine {} initial samples",
            series.len(),
            2 * frequencies.len()
        )));
    }
    for (i, f) in frequencies.iter().enumerate() {
        if frequencies[..i].contains(f) {
            return Err(Error::SingularSystem { condition: f64::INFINITY });
        }
    }
    Ok(())
}

/// Least-squares reference samples for fixed frequencies.
pub fn solve_initial_samples(series: &TimeSeries, frequencies: &[f64], mode: Mode) -> Result<SampleSolution> {
    check_solvable(series, frequencies)?;
    let design = build_design_matrix(frequencies, series.grid(), mode)?;
    let j = design.matrix();
    let w = DVector::from_column_slice(series.values());
    let gram = j.tr_mul(j);
    let rhs = j.tr_mul(&w);
    let (alpha, info) = solve_spd(&gram, &rhs, false)?;
    let residual = &w - j * &alpha;
    Ok(SampleSolution {
        samples: InitialSamples { alpha: alpha.as_slice().to_vec() },
        sse: residual.norm_squared(),
        info,
    })
}

/// Columns and Gram blocks of already-selected components, reused while
/// one extra trial frequency is swept over the grid.
#[derive(Debug, Clone)]
pub(crate) struct FixedBasis<'a> {
    series: &'a TimeSeries,
    mode: Mode,
    frequencies: Vec<f64>,
    columns: Vec<Vec<f64>>,
    gram: DMatrix<f64>,
    rhs: Vec<f64>,
}

impl<'a> FixedBasis<'a> {
    pub(crate) fn new(series: &'a TimeSeries, frequencies: &[f64], mode: Mode) -> Result<Self> {
        let grid = series.grid();
        for &f in frequencies {
            check_param(f, grid, mode)?;
        }
        let k = grid.len();
        let mut columns = Vec::with_capacity(2 * frequencies.len());
        for &f in frequencies {
            let mut b = vec![0.0; k];
            let mut a = vec![0.0; k];
            fill_columns(f, grid, mode, &mut b, &mut a);
            columns.push(b);
            columns.push(a);
        }
        let n = columns.len();
        let gram = DMatrix::from_fn(n, n, |r, c| dot(&columns[r], &columns[c]));
        let rhs = columns.iter().map(|c| dot(c, series.values())).collect();
        Ok(Self { series, mode, frequencies: frequencies.to_vec(), columns, gram, rhs })
    }

    /// Solves for the fixed components plus one component at `freq`.
    pub(crate) fn solve_with(&self, freq: f64) -> Result<SampleSolution> {
        let grid = self.series.grid();
        check_param(freq, grid, self.mode)?;
        if self.frequencies.contains(&freq) {
            return Err(Error::SingularSystem { condition: f64::INFINITY });
        }
        let n_fixed = self.columns.len();
        if self.series.len() < n_fixed + 2 {
            return Err(Error::InvalidInput(format!(
                "{} samples cannot determine {} initial samples",
                self.series.len(),
                n_fixed + 2
            )));
        }
        let k = grid.len();
        let mut b = vec![0.0; k];
        let mut a = vec![0.0; k];
        fill_columns(freq, grid, self.mode, &mut b, &mut a);

        let n = n_fixed + 2;
        let mut gram = DMatrix::zeros(n, n);
        gram.view_mut((0, 0), (n_fixed, n_fixed)).copy_from(&self.gram);
        let extra = [&b, &a];
        for (e, col) in extra.iter().enumerate() {
            let r = n_fixed + e;
            for (i, fixed) in self.columns.iter().enumerate() {
                let v = dot(col, fixed);
                gram[(r, i)] = v;
                gram[(i, r)] = v;
            }
            for (e2, col2) in extra.iter().enumerate() {
                gram[(r, n_fixed + e2)] = dot(col, col2);
            }
        }
        let w = self.series.values();
        let mut rhs = DVector::zeros(n);
        rhs.as_mut_slice()[..n_fixed].copy_from_slice(&self.rhs);
        rhs[n_fixed] = dot(&b, w);
        rhs[n_fixed + 1] = dot(&a, w);

        let (alpha, info) = solve_spd(&gram, &rhs, false)?;
        let mut sse = 0.0;
        for idx in 0..k {
            let mut p = alpha[n_fixed] * b[idx] + alpha[n_fixed + 1] * a[idx];
            for (c, col) in self.columns.iter().enumerate() {
                p += alpha[c] * col[idx];
            }
            let r = w[idx] - p;
            sse += r * r;
        }
        Ok(SampleSolution { samples: InitialSamples { alpha: alpha.as_slice().to_vec() }, sse, info })
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jittered_series(rng: &mut ChaCha8Rng, len: usize, f: impl Fn(f64) -> f64) -> TimeSeries {
        let mut t = 0.3;
        let mut times = Vec::with_capacity(len);
        for _ in 0..len {
            times.push(t);
            t += rng.random_range(0.5..1.5);
        }
        let values = times.iter().map(|&t| f(t)).collect();
        TimeSeries::from_pairs(times, values).unwrap()
    }

    #[test]
    fn reference_rows_and_column_independence() {
        let grid = TimeGrid::new(vec![0.0, 0.7, 1.9, 2.4, 3.8]).unwrap();
        let one = build_design_matrix(&[1.3], &grid, Mode::Nonuniform).unwrap();
        assert_eq!((one.entry(0, 0), one.entry(0, 1)), (1.0, 0.0));
        assert_eq!((one.entry(1, 0), one.entry(1, 1)), (0.0, 1.0));

        let two = build_design_matrix(&[0.4, 1.3], &grid, Mode::Nonuniform).unwrap();
        for k in 0..grid.len() {
            assert_eq!(two.entry(k, 2), one.entry(k, 0));
            assert_eq!(two.entry(k, 3), one.entry(k, 1));
        }
    }

    #[test]
    fn uniform_design_row_three() {
        let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let d = build_design_matrix(&[1.5], &grid, Mode::Uniform).unwrap();
        assert_eq!((d.entry(2, 0), d.entry(2, 1)), (-1.0, 1.5));
        let bad = TimeGrid::new(vec![0.0, 1.0, 2.5]).unwrap();
        assert!(matches!(build_design_matrix(&[1.5], &bad, Mode::Uniform), Err(Error::ModeMismatch(_))));
    }

    #[test]
    fn noiseless_tone_at_true_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = jittered_series(&mut rng, 40, |t| 1.3 * (0.9 * t + 0.4).sin());
        let sol = solve_initial_samples(&s, &[0.9], Mode::Nonuniform).unwrap();
        assert!(sol.sse < 1e-16 * s.energy());
        let (y1, y2) = sol.samples.pairs().next().unwrap();
        assert!((y1 - s.values()[0]).abs() < 1e-8);
        assert!((y2 - s.values()[1]).abs() < 1e-8);
    }

    #[test]
    fn zero_data_gives_zero_samples() {
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.7, 2.0, 3.1, 4.4]).unwrap();
        let s = TimeSeries::new(grid, vec![0.0; 6]).unwrap();
        let sol = solve_initial_samples(&s, &[0.4, 1.9], Mode::Nonuniform).unwrap();
        assert!(sol.samples.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(sol.sse, 0.0);
    }

    #[test]
    fn errors() {
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.7]).unwrap();
        let s = TimeSeries::new(grid, vec![1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(solve_initial_samples(&s, &[0.4, 1.9], Mode::Nonuniform), Err(Error::InvalidInput(_))));
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.7, 2.2, 3.0]).unwrap();
        let s = TimeSeries::new(grid, vec![1.0, 0.0, 2.0, 1.0, 0.5]).unwrap();
        assert!(matches!(solve_initial_samples(&s, &[0.4, 0.4], Mode::Nonuniform), Err(Error::SingularSystem { .. })));
        assert!(matches!(
            solve_initial_samples(&s, &[0.4, 0.4 + 1e-14], Mode::Nonuniform),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn minimizer_is_locally_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = jittered_series(&mut rng, 30, |t| (0.7 * t).sin() + 0.3 * (2.1 * t + 1.0).cos());
        let noisy: Vec<f64> = s.values().iter().map(|v| v + rng.random_range(-0.2..0.2)).collect();
        let s = TimeSeries::new(s.grid().clone(), noisy).unwrap();
        let freqs = [0.65, 2.2];
        let sol = solve_initial_samples(&s, &freqs, Mode::Nonuniform).unwrap();
        let j = build_design_matrix(&freqs, s.grid(), Mode::Nonuniform).unwrap();
        let w = DVector::from_column_slice(s.values());
        let alpha = DVector::from_column_slice(sol.samples.as_slice());
        for _ in 0..1000 {
            let pert = DVector::from_fn(4, |_, _| rng.random_range(-1e-3..1e-3));
            let other = (&w - j.matrix() * (&alpha + pert)).norm_squared();
            assert!(sol.sse <= other);
        }
    }

    #[test]
    fn normal_equation_residual_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = jittered_series(&mut rng, 50, |t| (1.1 * t).sin() + 0.1 * t);
        let freqs = [0.0, 1.0, 2.5];
        let sol = solve_initial_samples(&s, &freqs, Mode::Nonuniform).unwrap();
        let j = build_design_matrix(&freqs, s.grid(), Mode::Nonuniform).unwrap();
        let jm = j.matrix();
        let alpha = DVector::from_column_slice(sol.samples.as_slice());
        let rhs = jm.tr_mul(&DVector::from_column_slice(s.values()));
        let res = jm.tr_mul(jm) * alpha - &rhs;
        assert!(res.norm() <= 1e-8 * rhs.norm());
    }

    #[test]
    fn matches_qr_oracle_on_small_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let times: Vec<f64> = {
                let mut t = 0.0;
                (0..8)
                    .map(|_| {
                        t += rng.random_range(0.3..1.2);
                        t
                    })
                    .collect()
            };
            let values: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = TimeSeries::from_pairs(times, values).unwrap();
            let freqs = [rng.random_range(0.1..1.0), rng.random_range(1.5..2.8)];
            let sol = match solve_initial_samples(&s, &freqs, Mode::Nonuniform) {
                Ok(sol) if !sol.info.least_norm => sol,
                _ => continue,
            };
            let j = build_design_matrix(&freqs, s.grid(), Mode::Nonuniform).unwrap();
            let qr = j.matrix().clone().qr();
            let qtw = qr.q().tr_mul(&DVector::from_column_slice(s.values()));
            let oracle = qr.r().solve_upper_triangular(&qtw).unwrap();
            for (x, y) in sol.samples.as_slice().iter().zip(oracle.iter()) {
                assert_relative_eq!(*x, *y, max_relative = 1e-8, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn adding_a_component_never_increases_sse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = jittered_series(&mut rng, 40, |t| (0.8 * t).sin() + 0.5 * (1.7 * t).sin());
        let noisy: Vec<f64> = s.values().iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
        let s = TimeSeries::new(s.grid().clone(), noisy).unwrap();
        let base = solve_initial_samples(&s, &[0.8], Mode::Nonuniform).unwrap();
        for j in 0..40 {
            let extra = 0.05 + j as f64 * 0.07;
            if let Ok(sol) = solve_initial_samples(&s, &[0.8, extra], Mode::Nonuniform) {
                assert!(sol.sse <= base.sse * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn fixed_basis_matches_full_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = jittered_series(&mut rng, 30, |t| (0.8 * t).sin() + 0.2 * t);
        let basis = FixedBasis::new(&s, &[0.0, 0.8], Mode::Nonuniform).unwrap();
        for extra in [0.3, 1.2, 2.9] {
            let a = basis.solve_with(extra).unwrap();
            let b = solve_initial_samples(&s, &[0.0, 0.8, extra], Mode::Nonuniform).unwrap();
            for (x, y) in a.samples.as_slice().iter().zip(b.samples.as_slice()) {
                assert_relative_eq!(*x, *y, max_relative = 1e-9, epsilon = 1e-12);
            }
            assert_relative_eq!(a.sse, b.sse, max_relative = 1e-9, epsilon = 1e-14);
        }
        assert!(basis.solve_with(0.8).is_err());
    }
}
