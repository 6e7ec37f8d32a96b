//! Ensemble statistics: pointwise mean and quantile band, mean phase orbit,
//! kernel density of the standardized end displacement.

use crate::uncertainty::ensemble::EnsembleResult;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Default relative prominence for [`count_density_modes`].
pub const DEFAULT_PROMINENCE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum StatsError {
    #[error("ensemble holds no successful realizations")]
    Empty,
    #[error("ensemble was run without time series")]
    NoSeries,
    #[error("coverage must lie in (0, 1), got {0}")]
    Coverage(f64),
    #[error("density estimation needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples have zero variance")]
    Degenerate,
    #[error("density grid needs at least 2 points, got {0}")]
    Grid(usize),
}

/// Empirical quantile of sorted data by linear interpolation between order
/// statistics (x₍ₖ₎ at p = (k − 1)/(n − 1)).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Pointwise mean and quantile band of u(L, t).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub coverage: f64,
}

/// Mean of u(L, ·) and u̇(L, ·) over the ensemble.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseMean {
    pub times: Vec<f64>,
    pub mean_u: Vec<f64>,
    pub mean_v: Vec<f64>,
}

/// Kernel density estimate on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Density {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsSummary {
    pub times: Vec<f64>,
    pub mean_u: Vec<f64>,
    pub q_low: Vec<f64>,
    pub q_high: Vec<f64>,
    pub mean_v: Vec<f64>,
    pub pdf_grid: Vec<f64>,
    pub pdf_density: Vec<f64>,
}

fn series(ens: &EnsembleResult) -> Result<(), StatsError> {
    if ens.is_empty() {
        return Err(StatsError::Empty);
    }
    if ens.times.is_empty() || ens.u_end[0].len() != ens.times.len() {
        return Err(StatsError::NoSeries);
    }
    Ok(())
}

fn column_mean(rows: &[Vec<f64>], k: usize) -> f64 {
    rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64
}

/// Pointwise mean and the central `coverage` band of u(L, t).
pub fn mean_envelope(ens: &EnsembleResult, coverage: f64) -> Result<Envelope, StatsError> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(StatsError::Coverage(coverage));
    }
    series(ens)?;
    let p_low = 0.5 * (1.0 - coverage);
    let p_high = 1.0 - p_low;
    let k_len = ens.times.len();
    let mut env = Envelope {
        times: ens.times.clone(),
        mean: Vec::with_capacity(k_len),
        low: Vec::with_capacity(k_len),
        high: Vec::with_capacity(k_len),
        coverage,
    };
    let mut column = vec![0.0; ens.len()];
    for k in 0..k_len {
        for (c, row) in column.iter_mut().zip(&ens.u_end) {
            *c = row[k];
        }
        env.mean.push(column_mean(&ens.u_end, k));
        column.sort_by(f64::total_cmp);
        env.low.push(quantile(&column, p_low));
        env.high.push(quantile(&column, p_high));
    }
    Ok(env)
}

/// Pointwise ensemble means of end displacement and velocity.
pub fn phase_mean(ens: &EnsembleResult) -> Result<PhaseMean, StatsError> {
    series(ens)?;
    let k_len = ens.times.len();
    Ok(PhaseMean {
        times: ens.times.clone(),
        mean_u: (0..k_len).map(|k| column_mean(&ens.u_end, k)).collect(),
        mean_v: (0..k_len).map(|k| column_mean(&ens.v_end, k)).collect(),
    })
}

/// Gaussian kernel density of the standardized samples, bandwidth
/// 1.06·n^(−1/5), on `grid_points` nodes over [min − 3h, max + 3h].
pub fn pdf_estimate(samples: &[f64], grid_points: usize) -> Result<Density, StatsError> {
    const MIN_SAMPLES: usize = 8;
    if samples.len() < MIN_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if grid_points < 2 {
        return Err(StatsError::Grid(grid_points));
    }
    let z = standardize(samples)?;
    let n = z.len() as f64;
    let h = 1.06 * n.powf(-0.2);
    let (lo, hi) = z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (a, b) = (lo - 3.0 * h, hi + 3.0 * h);
    let step = (b - a) / (grid_points - 1) as f64;
    let norm = 1.0 / (n * h * (2.0 * PI).sqrt());
    let grid: Vec<f64> = (0..grid_points).map(|i| a + i as f64 * step).collect();
    let density = grid
        .iter()
        .map(|&x| {
            norm * z
                .iter()
                .map(|&zi| (-0.5 * ((x - zi) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Ok(Density {
        grid,
        density,
        bandwidth: h,
    })
}

/// (x − mean)/std with the n − 1 standard deviation.
pub fn standardize(samples: &[f64]) -> Result<Vec<f64>, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let m = mean(samples);
    let s = std_dev(samples);
    if !(s > 0.0) {
        return Err(StatsError::Degenerate);
    }
    Ok(samples.iter().map(|x| (x - m) / s).collect())
}

/// Trapezoid rule on a uniform or non-uniform grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Number of significant maxima of a nonnegative curve.
///
/// Plateaus count as single points and the endpoints may be maxima. A
/// maximum is kept when it exceeds `prominence`·max; two neighbours are
/// separate modes only when the curve between them dips below
/// (1 − `prominence`) times the lower of the two, otherwise the lower one
/// is absorbed. A flat or monotone curve has one mode.
pub fn count_density_modes(density: &[f64], prominence: f64) -> usize {
    if density.is_empty() {
        return 0;
    }
    // run-length collapse: (value, first index)
    let mut runs: Vec<(f64, usize)> = Vec::new();
    for (i, &y) in density.iter().enumerate() {
        if runs.last().is_none_or(|r| r.0 != y) {
            runs.push((y, i));
        }
    }
    if runs.len() == 1 {
        return 1;
    }
    let top = density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let peaks: Vec<(f64, usize)> = (0..runs.len())
        .filter(|&j| {
            let y = runs[j].0;
            (j == 0 || runs[j - 1].0 < y) && (j + 1 == runs.len() || runs[j + 1].0 < y)
        })
        .map(|j| runs[j])
        .filter(|&(y, _)| y > prominence * top)
        .collect();

    let mut kept: Vec<(f64, usize)> = Vec::new();
    for p in peaks {
        match kept.last_mut() {
            None => kept.push(p),
            Some(last) => {
                let valley = density[last.1..=p.1]
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if valley < (1.0 - prominence) * last.0.min(p.0) {
                    kept.push(p);
                } else if p.0 > last.0 {
                    *last = p;
                }
            }
        }
    }
    kept.len()
}

/// Root mean square of `series` over t ∈ [t0, t1].
pub fn windowed_rms(times: &[f64], series: &[f64], t0: f64, t1: f64) -> f64 {
    let (sum, n) = times
        .iter()
        .zip(series)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .fold((0.0, 0usize), |(s, n), (_, y)| (s + y * y, n + 1));
    (sum / n as f64).sqrt()
}

/// RMS over the last `window` seconds divided by RMS over the first.
pub fn decay_ratio(times: &[f64], series: &[f64], window: f64) -> f64 {
    let t_end = *times.last().expect("non-empty series");
    let tol = 1e-9 * t_end;
    windowed_rms(times, series, t_end - window - tol, t_end)
        / windowed_rms(times, series, 0.0, window + tol)
}

/// Largest distance from the origin of the orbit (u, v/ω) for t ∈ [t0, t1].
pub fn radial_extent(phase: &PhaseMean, omega: f64, t0: f64, t1: f64) -> f64 {
    phase
        .times
        .iter()
        .zip(phase.mean_u.iter().zip(&phase.mean_v))
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(_, (u, v))| u.hypot(v / omega))
        .fold(0.0, f64::max)
}

/// Envelope, mean orbit and end-displacement density in one record.
pub fn summarize(
    ens: &EnsembleResult,
    coverage: f64,
    grid_points: usize,
) -> Result<StatsSummary, StatsError> {
    let env = mean_envelope(ens, coverage)?;
    let phase = phase_mean(ens)?;
    let pdf = pdf_estimate(&ens.end_values, grid_points)?;
    Ok(StatsSummary {
        times: env.times,
        mean_u: env.mean,
        q_low: env.low,
        q_high: env.high,
        mean_v: phase.mean_v,
        pdf_grid: pdf.grid,
        pdf_density: pdf.density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::rng::Mt19937;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ensemble(rows: Vec<Vec<f64>>) -> EnsembleResult {
        let k = rows[0].len();
        let n = rows.len();
        EnsembleResult {
            times: (0..k).map(|i| i as f64).collect(),
            indices: (0..n).collect(),
            moduli: vec![1.0; n],
            end_values: rows.iter().map(|r| *r.last().unwrap()).collect(),
            v_end: rows.iter().map(|r| r.iter().map(|x| 2.0 * x).collect()).collect(),
            u_end: rows,
            master_seed: 0,
            n_requested: n,
            failures: Vec::new(),
        }
    }

    fn normal_draws(n: usize, seed: u32) -> Vec<f64> {
        let mut rng = Mt19937::new(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn quantile_order_statistics() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&x, 0.25), 2.0);
        assert_eq!(quantile(&x, 0.75), 4.0);
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 5.0);
        assert!((quantile(&x, 0.01) - 1.04).abs() < 1e-12);
        assert_eq!(quantile(&[7.0], 0.99), 7.0);
    }

    #[test]
    fn five_constant_rows() {
        let rows = (1..=5).map(|v| vec![v as f64; 3]).collect();
        let env = mean_envelope(&ensemble(rows), 0.5).unwrap();
        assert_eq!(env.low, vec![2.0; 3]);
        assert_eq!(env.high, vec![4.0; 3]);
        assert_eq!(env.mean, vec![3.0; 3]);
    }

    #[test]
    fn identical_rows_give_zero_width_band() {
        let row = vec![0.5, -1.0, 2.0];
        let env = mean_envelope(&ensemble(vec![row.clone(); 4]), 0.98).unwrap();
        assert_eq!(env.mean, row);
        assert_eq!(env.low, row);
        assert_eq!(env.high, row);
    }

    #[test]
    fn single_row_band_collapses_to_mean() {
        let row = vec![0.1, 0.2, 0.3];
        let env = mean_envelope(&ensemble(vec![row.clone()]), 0.98).unwrap();
        assert_eq!(env.low, env.mean);
        assert_eq!(env.high, env.mean);
    }

    #[test]
    fn envelope_rejects_bad_input() {
        let e = ensemble(vec![vec![1.0]]);
        assert_eq!(mean_envelope(&e, 1.0), Err(StatsError::Coverage(1.0)));
        assert_eq!(mean_envelope(&e, 0.0), Err(StatsError::Coverage(0.0)));
        let mut empty = e.clone();
        empty.u_end.clear();
        empty.indices.clear();
        assert_eq!(mean_envelope(&empty, 0.5), Err(StatsError::Empty));
    }

    #[test]
    fn phase_mean_of_one_realization_is_its_orbit() {
        let row = vec![0.0, 1.0, -2.0];
        let p = phase_mean(&ensemble(vec![row.clone()])).unwrap();
        assert_eq!(p.mean_u, row);
        assert_eq!(p.mean_v, vec![0.0, 2.0, -4.0]);
    }

    #[test]
    fn standard_normal_density() {
        let d = pdf_estimate(&normal_draws(10_000, 3), 512).unwrap();
        assert_eq!(count_density_modes(&d.density, DEFAULT_PROMINENCE), 1);
        let at_zero = d
            .grid
            .iter()
            .zip(&d.density)
            .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
            .unwrap()
            .1;
        let want = 1.0 / (2.0 * PI).sqrt();
        assert!((at_zero - want).abs() < 0.15 * want, "{at_zero}");
        let argmax = d.density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(d.grid[argmax].abs() < 0.3);
        assert!((trapezoid(&d.grid, &d.density) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bimodal_mixture() {
        let draws: Vec<f64> = normal_draws(10_000, 4)
            .into_iter()
            .enumerate()
            .map(|(i, z)| if i % 2 == 0 { z - 3.0 } else { z + 3.0 })
            .collect();
        let d = pdf_estimate(&draws, 512).unwrap();
        assert_eq!(count_density_modes(&d.density, DEFAULT_PROMINENCE), 2);
    }

    #[test]
    fn standardization() {
        let z = standardize(&normal_draws(1000, 9).iter().map(|x| 5.0 + 2.0 * x).collect::<Vec<_>>()).unwrap();
        assert!(mean(&z).abs() < 1e-12);
        assert!((std_dev(&z) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_rejects_degenerate_input() {
        assert_eq!(pdf_estimate(&[1.0; 10], 64), Err(StatsError::Degenerate));
        assert_eq!(
            pdf_estimate(&[1.0, 2.0], 64),
            Err(StatsError::TooFewSamples { needed: 8, got: 2 })
        );
    }

    #[test]
    fn mode_counting_cases() {
        let monotone: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(count_density_modes(&monotone, 0.1), 1);
        let falling: Vec<f64> = monotone.iter().rev().cloned().collect();
        assert_eq!(count_density_modes(&falling, 0.1), 1);
        assert_eq!(count_density_modes(&[0.3; 20], 0.1), 1);
        let bumps: Vec<f64> = (0..201)
            .map(|i| {
                let x = -5.0 + 0.05 * i as f64;
                (-(x - 2.0f64).powi(2)).exp() + (-(x + 2.0f64).powi(2)).exp()
            })
            .collect();
        assert_eq!(count_density_modes(&bumps, 0.1), 2);
        // shallow dip between two bumps is one mode
        let shallow: Vec<f64> = (0..201)
            .map(|i| {
                let x = -5.0 + 0.05 * i as f64;
                (-(x - 0.6f64).powi(2)).exp() + (-(x + 0.6f64).powi(2)).exp()
            })
            .collect();
        assert_eq!(count_density_modes(&shallow, 0.1), 1);
        // a bump below the prominence floor is ignored
        let small: Vec<f64> = bumps
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let x = -5.0 + 0.05 * i as f64;
                y + 0.05 * (-((x - 4.5) / 0.1f64).powi(2)).exp()
            })
            .collect();
        assert_eq!(count_density_modes(&small, 0.1), 2);
        assert_eq!(count_density_modes(&[], 0.1), 0);
    }

    #[test]
    fn decay_ratio_of_damped_sine() {
        let times: Vec<f64> = (0..=8000).map(|i| i as f64 * 1e-6).collect();
        let y: Vec<f64> = times.iter().map(|t| (-200.0 * t).exp() * (2e4 * t).sin()).collect();
        let r = decay_ratio(&times, &y, 1e-3);
        // ratio of RMS envelopes ≈ e^(−200·7e-3)
        assert!((r - (-1.4f64).exp()).abs() < 0.02, "{r}");
    }

    proptest! {
        #[test]
        fn bands_nest(seed in 0u32..1000, n in 3usize..40) {
            let mut rng = Mt19937::new(seed);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng.sample(StandardNormal)).collect()).collect();
            let e = ensemble(rows);
            let wide = mean_envelope(&e, 0.98).unwrap();
            let narrow = mean_envelope(&e, 0.5).unwrap();
            for k in 0..6 {
                prop_assert!(wide.low[k] <= narrow.low[k]);
                prop_assert!(narrow.low[k] <= narrow.high[k]);
                prop_assert!(narrow.high[k] <= wide.high[k]);
            }
        }

        #[test]
        fn statistics_ignore_row_order(seed in 0u32..1000, n in 2usize..20, shift in 1usize..19) {
            let mut rng = Mt19937::new(seed);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect()).collect();
            let mut rotated = rows.clone();
            rotated.rotate_left(shift % n);
            let (a, b) = (ensemble(rows), ensemble(rotated));
            let (ea, eb) = (mean_envelope(&a, 0.9).unwrap(), mean_envelope(&b, 0.9).unwrap());
            prop_assert_eq!(&ea.low, &eb.low);
            prop_assert_eq!(&ea.high, &eb.high);
            let (pa, pb) = (phase_mean(&a).unwrap(), phase_mean(&b).unwrap());
            for k in 0..4 {
                prop_assert!((pa.mean_u[k] - pb.mean_u[k]).abs() <= 1e-15 * n as f64);
                prop_assert!((pa.mean_v[k] - pb.mean_v[k]).abs() <= 1e-15 * n as f64);
            }
        }

        #[test]
        fn density_has_unit_mass(values in prop::collection::vec(-1e3f64..1e3, 8..200)) {
            prop_assume!(std_dev(&values) > 1e-9);
            let d = pdf_estimate(&values, 2048).unwrap();
            prop_assert!(d.density.iter().all(|&p| p >= 0.0));
            prop_assert!((trapezoid(&d.grid, &d.density) - 1.0).abs() < 1e-3);
        }
    }
}
