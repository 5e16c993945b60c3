//! Validation error metrics, soiling summaries and soiling correction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Decomposition;
use crate::prep::{DailySignal, PowerSeries};
use crate::scalar::Scalar;

/// Rates above `-NEGATIVE_RATE_EPS` do not count as actively soiling.
pub const NEGATIVE_RATE_EPS: f64 = 1e-6;

/// Smallest admissible performance factor `1 + x4`.
pub const MIN_SOILING_FACTOR: f64 = 0.05;

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { expected: a, got: b });
    }
    Ok(())
}

fn mean_abs_diff<T: Scalar>(a: impl Iterator<Item = (T, T)>) -> T {
    let mut n = 0usize;
    let mut acc = T::zero();
    for (x, y) in a {
        acc += (x - y).abs();
        n += 1;
    }
    if n == 0 {
        T::zero()
    } else {
        acc / T::from_usize_lossy(n)
    }
}

pub fn loss_mae<T: Scalar>(truth: &[T], estimate: &[T]) -> Result<T> {
    check_len(truth.len(), estimate.len())?;
    Ok(mean_abs_diff(truth.iter().copied().zip(estimate.iter().copied())))
}

/// First difference `x[t+1] − x[t]`.
pub fn soiling_rate<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.len() < 2 {
        return Err(Error::InvalidValue(format!(
            "soiling rate needs at least 2 values, got {}",
            x.len()
        )));
    }
    Ok(x.windows(2).map(|w| w[1] - w[0]).collect())
}

pub fn rate_mae<T: Scalar>(truth: &[T], estimate: &[T]) -> Result<T> {
    check_len(truth.len(), estimate.len())?;
    let rt = soiling_rate(truth)?;
    let re = soiling_rate(estimate)?;
    loss_mae(&rt, &re)
}

/// Rate MAE restricted to days where both sequences are actively soiling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilteredRate<T> {
    pub mae: T,
    /// Length `T − 1`; true where both rates are below `−ε`.
    pub mask: Vec<bool>,
}

impl<T> FilteredRate<T> {
    pub fn is_empty_mask(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }
}

pub fn filtered_rate_mae<T: Scalar>(truth: &[T], estimate: &[T]) -> Result<FilteredRate<T>> {
    filtered_rate_mae_with(truth, estimate, T::lit(NEGATIVE_RATE_EPS))
}

pub fn filtered_rate_mae_with<T: Scalar>(truth: &[T], estimate: &[T], eps: T) -> Result<FilteredRate<T>> {
    check_len(truth.len(), estimate.len())?;
    let rt = soiling_rate(truth)?;
    let re = soiling_rate(estimate)?;
    let mask: Vec<bool> = rt.iter().zip(&re).map(|(a, b)| *a < -eps && *b < -eps).collect();
    let mae = mean_abs_diff(
        rt.iter()
            .zip(&re)
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|((a, b), _)| (*a, *b)),
    );
    Ok(FilteredRate { mae, mask })
}

/// The three validation metrics plus soiling summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoilingReport {
    pub loss_mae: Option<f64>,
    pub rate_mae: Option<f64>,
    pub filtered_rate_mae: Option<f64>,
    pub total_energy_loss_fraction: f64,
    pub mean_soiling_rate: f64,
    pub degradation_rate_per_year: f64,
    /// Mean of `x4` per calendar month (1–12); `None` where the month is absent
    /// or the signal has no dates.
    pub monthly_mean_loss: Vec<Option<f64>>,
    pub insoiling_mask: Option<Vec<bool>>,
}

/// Divides daily values by the performance factor `1 + x4_t`. Missing days pass through.
pub fn correct_daily<T: Scalar>(signal: &DailySignal<T>, soiling: &[T]) -> Result<DailySignal<T>> {
    check_len(signal.len(), soiling.len())?;
    let factors = factors(soiling)?;
    Ok(signal.map_known(|t, v| v / factors[t]))
}

/// Divides each sample by the performance factor of its calendar day (day 0 is the
/// first date of the series). Missing samples pass through.
pub fn correct_power<T: Scalar>(series: &PowerSeries<T>, soiling: &[T]) -> Result<PowerSeries<T>> {
    let days = series.day_indices().last().map_or(0, |d| d + 1);
    check_len(days, soiling.len())?;
    let factors = factors(soiling)?;
    let values = series
        .day_indices()
        .zip(series.values())
        .map(|(d, v)| v.map(|v| v / factors[d]))
        .collect();
    series.with_values(values)
}

fn factors<T: Scalar>(soiling: &[T]) -> Result<Vec<T>> {
    soiling
        .iter()
        .enumerate()
        .map(|(t, x)| {
            let f = T::one() + *x;
            if !(f > T::lit(MIN_SOILING_FACTOR)) {
                Err(Error::ImplausibleSoilingFactor {
                    day: t,
                    factor: f.to_f64_lossy(),
                })
            } else {
                Ok(f)
            }
        })
        .collect()
}

/// `1 − Σ_𝒦 y / Σ_𝒦 (y / (1 + x4))`: the fraction of unsoiled energy lost to soiling.
pub fn total_energy_loss<T: Scalar>(signal: &DailySignal<T>, soiling: &[T]) -> Result<T> {
    check_len(signal.len(), soiling.len())?;
    let factors = factors(soiling)?;
    let mut measured = T::zero();
    let mut clean = T::zero();
    for (t, y) in signal.known_values() {
        measured += y;
        clean += y / factors[t];
    }
    if clean == T::zero() {
        return Ok(T::zero());
    }
    Ok(T::one() - measured / clean)
}

/// Summary statistics of a solved decomposition. Validation metrics are filled in
/// only when `truth` is supplied.
pub fn summary<T: Scalar>(
    decomposition: &Decomposition<T>,
    signal: &DailySignal<T>,
    truth: Option<&[T]>,
) -> Result<SoilingReport> {
    let x4 = &decomposition.x4;
    let total = total_energy_loss(signal, x4)?.to_f64_lossy();
    let rates = soiling_rate(x4)?;
    let mean_rate = rates.iter().copied().sum::<T>().to_f64_lossy() / rates.len() as f64;

    let mut sums = [0.0f64; 12];
    let mut counts = [0usize; 12];
    if signal.start_date().is_some() {
        for (t, v) in x4.iter().enumerate() {
            let month = chrono::Datelike::month0(&signal.date_of(t).unwrap()) as usize;
            sums[month] += v.to_f64_lossy();
            counts[month] += 1;
        }
    }
    let monthly = (0..12)
        .map(|i| (counts[i] > 0).then(|| sums[i] / counts[i] as f64))
        .collect();

    let (loss, rate, filtered, mask) = match truth {
        Some(tr) => {
            let f = filtered_rate_mae(tr, x4)?;
            (
                Some(loss_mae(tr, x4)?.to_f64_lossy()),
                Some(rate_mae(tr, x4)?.to_f64_lossy()),
                Some(f.mae.to_f64_lossy()),
                Some(f.mask),
            )
        }
        None => (None, None, None, None),
    };

    Ok(SoilingReport {
        loss_mae: loss,
        rate_mae: rate,
        filtered_rate_mae: filtered,
        total_energy_loss_fraction: total,
        mean_soiling_rate: mean_rate,
        degradation_rate_per_year: decomposition.degradation_slope.to_f64_lossy() * 365.0,
        monthly_mean_loss: monthly,
        insoiling_mask: mask,
    })
}
