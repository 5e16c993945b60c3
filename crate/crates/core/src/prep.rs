//! Daily signal preparation: integration of sub-daily power, quality masking and
//! 95th-percentile scaling.

use chrono::{Duration, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fraction of a day's expected samples that must be present for the day to count.
pub const DEFAULT_COMPLETENESS: f64 = 0.95;

/// Percentile used for scaling.
pub const SCALE_PERCENTILE: f64 = 95.0;

const MINUTES_PER_DAY: i64 = 1440;

/// Uniformly sampled power measurements. Missing samples are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries<T> {
    timestamps: Vec<NaiveDateTime>,
    values: Vec<Option<T>>,
    interval_minutes: u32,
}

impl<T: Scalar> PowerSeries<T> {
    /// Builds a series, inferring the sampling interval from the first two timestamps.
    pub fn new(timestamps: Vec<NaiveDateTime>, values: Vec<Option<T>>) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::NoData);
        }
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: timestamps.len(),
                got: values.len(),
            });
        }
        if timestamps.len() < 2 {
            return Err(Error::IrregularSampling(
                "cannot infer interval from a single sample".into(),
            ));
        }
        let step = timestamps[1] - timestamps[0];
        if step <= Duration::zero() || step.num_seconds() % 60 != 0 {
            return Err(Error::IrregularSampling(format!(
                "interval {}s is not a positive whole number of minutes",
                step.num_seconds()
            )));
        }
        let interval = step.num_minutes();
        if MINUTES_PER_DAY % interval != 0 {
            return Err(Error::IrregularSampling(format!(
                "interval {interval} min does not divide a day"
            )));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[1] - w[0] != step) {
            return Err(Error::IrregularSampling(format!(
                "spacing changes between {} and {}",
                w[0], w[1]
            )));
        }
        for v in values.iter().flatten() {
            if !v.is_finite() {
                return Err(Error::InvalidValue(format!("non-finite power sample {v}")));
            }
        }
        Ok(Self {
            timestamps,
            values,
            interval_minutes: interval as u32,
        })
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn values(&self) -> &[Option<T>] {
        &self.values
    }

    pub fn interval_minutes(&self) -> u32 {
        self.interval_minutes
    }

    pub fn samples_per_day(&self) -> usize {
        (MINUTES_PER_DAY / self.interval_minutes as i64) as usize
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.timestamps[0].date()
    }

    /// Calendar day index (relative to the first date) of each sample.
    pub fn day_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let d0 = self.first_date();
        self.timestamps
            .iter()
            .map(move |ts| (ts.date() - d0).num_days() as usize)
    }

    pub fn with_values(&self, values: Vec<Option<T>>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            timestamps: self.timestamps.clone(),
            values,
            interval_minutes: self.interval_minutes,
        })
    }
}

/// Daily series `y` with missing-day markers.
///
/// `scale` is the cumulative divisor applied by [`scale_p95`]; original units are
/// recovered as `value * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySignal<T> {
    values: Vec<Option<T>>,
    known: Vec<usize>,
    scale: T,
    scaled: bool,
    normalized: bool,
    start: Option<NaiveDate>,
}

impl<T: Scalar> DailySignal<T> {
    /// Raw (unlabeled) daily energy. Values must be finite and nonnegative.
    pub fn new(values: Vec<Option<T>>) -> Result<Self> {
        Self::build(values, false)
    }

    /// A performance index (labeled data). It is already in normalized units and
    /// counts as prepared without percentile scaling.
    pub fn normalized(values: Vec<Option<T>>) -> Result<Self> {
        let mut s = Self::build(values, true)?;
        s.scaled = true;
        Ok(s)
    }

    /// Convenience constructor treating NaN as the missing marker.
    pub fn from_nan_slice(values: &[T], normalized: bool) -> Result<Self> {
        let v = values
            .iter()
            .map(|x| if x.is_nan() { None } else { Some(*x) })
            .collect();
        if normalized {
            Self::normalized(v)
        } else {
            Self::new(v)
        }
    }

    fn build(values: Vec<Option<T>>, normalized: bool) -> Result<Self> {
        for (t, v) in values.iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::InvalidValue(format!("day {t}: non-finite value")));
                }
                if !normalized && *v < T::zero() {
                    return Err(Error::InvalidValue(format!("day {t}: negative energy {v}")));
                }
            }
        }
        let known = known_indices(&values);
        Ok(Self {
            values,
            known,
            scale: T::one(),
            scaled: false,
            normalized,
            start: None,
        })
    }

    pub fn with_start(mut self, start: NaiveDate) -> Self {
        self.start = Some(start);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<T>] {
        &self.values
    }

    pub fn get(&self, t: usize) -> Option<T> {
        self.values[t]
    }

    /// Values with NaN in place of missing days.
    pub fn to_nan_vec(&self) -> Vec<T> {
        self.values.iter().map(|v| v.unwrap_or_else(T::nan)).collect()
    }

    /// The known set 𝒦: indices of non-missing days, ascending.
    pub fn known_set(&self) -> &[usize] {
        &self.known
    }

    pub fn missing_count(&self) -> usize {
        self.values.len() - self.known.len()
    }

    pub fn is_known(&self, t: usize) -> bool {
        self.values[t].is_some()
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn start_date(&self) -> Option<NaiveDate> {
        self.start
    }

    pub fn date_of(&self, t: usize) -> Option<NaiveDate> {
        self.start.map(|d| d + Duration::days(t as i64))
    }

    /// `(t, y_t)` over the known set.
    pub fn known_values(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.known.iter().map(move |&t| (t, self.values[t].unwrap()))
    }

    pub(crate) fn map_known(&self, f: impl Fn(usize, T) -> T) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(t, v)| v.map(|v| f(t, v)))
            .collect();
        Self {
            values,
            known: self.known.clone(),
            ..self.clone()
        }
    }
}

fn known_indices<T>(values: &[Option<T>]) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter_map(|(t, v)| v.as_ref().map(|_| t))
        .collect()
}

/// Integrates power to daily energy with the default completeness threshold.
pub fn integrate_daily<T: Scalar>(series: &PowerSeries<T>) -> Result<DailySignal<T>> {
    integrate_daily_with(series, DEFAULT_COMPLETENESS)
}

/// Rectangular-sum integration of power into one energy value per calendar day.
///
/// Each present sample contributes `value × interval_hours`. A day with fewer than
/// `completeness × samples_per_day` present samples becomes missing; partial days
/// are never extrapolated. Negative samples (night-time inverter draw) count as 0.
pub fn integrate_daily_with<T: Scalar>(
    series: &PowerSeries<T>,
    completeness: f64,
) -> Result<DailySignal<T>> {
    if series.is_empty() {
        return Err(Error::NoData);
    }
    if !(0.0..=1.0).contains(&completeness) {
        return Err(Error::InvalidParameter(format!(
            "completeness {completeness} outside [0, 1]"
        )));
    }
    let per_day = series.samples_per_day();
    let n_days = (series.timestamps.last().unwrap().date() - series.first_date()).num_days() as usize + 1;
    let hours = T::lit(series.interval_minutes as f64 / 60.0);

    let mut stamps = vec![0usize; n_days];
    let mut present = vec![0usize; n_days];
    let mut energy = vec![T::zero(); n_days];
    for (day, v) in series.day_indices().zip(&series.values) {
        stamps[day] += 1;
        if let Some(p) = v {
            present[day] += 1;
            energy[day] += p.max(T::zero()) * hours;
        }
    }
    if !stamps.contains(&per_day) {
        return Err(Error::NoCompleteDay);
    }
    let need = completeness * per_day as f64;
    let values = (0..n_days)
        .map(|d| (present[d] as f64 >= need && present[d] > 0).then_some(energy[d]))
        .collect();
    Ok(DailySignal::new(values)?.with_start(series.first_date()))
}

/// Marks days whose flag is `false` as missing.
pub fn apply_quality_mask<T: Scalar>(signal: &DailySignal<T>, good: &[bool]) -> Result<DailySignal<T>> {
    if good.len() != signal.len() {
        return Err(Error::LengthMismatch {
            expected: signal.len(),
            got: good.len(),
        });
    }
    let values: Vec<Option<T>> = signal
        .values
        .iter()
        .zip(good)
        .map(|(v, &ok)| if ok { *v } else { None })
        .collect();
    let known = known_indices(&values);
    if known.is_empty() {
        return Err(Error::EmptyKnownSet);
    }
    Ok(DailySignal {
        values,
        known,
        ..signal.clone()
    })
}

/// Percentile of `values` by sorted-order linear interpolation
/// (rank `h = (n-1)·p/100`, interpolating between neighbouring order statistics).
pub fn percentile<T: Scalar>(values: &[T], p: f64) -> Option<T> {
    if values.is_empty() || !(0.0..=100.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("percentile of NaN"));
    let h = (v.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let frac = T::lit(h - lo as f64);
    if lo + 1 >= v.len() {
        return Some(v[lo]);
    }
    Some(v[lo] + frac * (v[lo + 1] - v[lo]))
}

/// Divides known values by their 95th percentile.
pub fn scale_p95<T: Scalar>(signal: &DailySignal<T>) -> Result<DailySignal<T>> {
    if signal.known.is_empty() {
        return Err(Error::EmptyKnownSet);
    }
    let known: Vec<T> = signal.known_values().map(|(_, v)| v).collect();
    let p95 = percentile(&known, SCALE_PERCENTILE).unwrap();
    if !(p95 > T::zero()) {
        return Err(Error::DegenerateSignal(format!(
            "95th percentile is {p95}, must be positive"
        )));
    }
    let mut out = signal.map_known(|_, v| v / p95);
    out.scale = signal.scale * p95;
    out.scaled = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveTime;

    fn day_series(interval: u32, days: usize, f: impl Fn(usize) -> Option<f64>) -> PowerSeries<f64> {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1)
            .unwrap()
            .and_time(NaiveTime::MIN);
        let n = days * (1440 / interval as usize);
        let ts = (0..n)
            .map(|i| start + Duration::minutes(i as i64 * interval as i64))
            .collect();
        PowerSeries::new(ts, (0..n).map(f).collect()).unwrap()
    }

    #[test]
    fn constant_power_integrates_to_24_kwh() {
        let s = day_series(60, 1, |_| Some(1.0));
        let d = integrate_daily(&s).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.get(0), Some(24.0));
        assert_eq!(d.start_date(), NaiveDate::from_ymd_opt(2021, 3, 1));
    }

    #[test]
    fn all_missing_day_becomes_missing() {
        let s = day_series(60, 2, |i| if i < 24 { None } else { Some(2.0) });
        let d = integrate_daily(&s).unwrap();
        assert_eq!(d.get(0), None);
        assert_eq!(d.get(1), Some(48.0));
        assert_eq!(d.known_set(), &[1]);
    }

    #[test]
    fn ramp_matches_direct_sum() {
        let peak = 5.0;
        let n = 288;
        let s = day_series(5, 1, |i| Some(peak * i as f64 / (n - 1) as f64));
        let d = integrate_daily(&s).unwrap();
        // independent oracle: Σ p_i · (5/60) computed via the arithmetic series closed form
        let oracle = peak / (n - 1) as f64 * (n * (n - 1) / 2) as f64 * (5.0 / 60.0);
        assert!((d.get(0).unwrap() - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn completeness_threshold() {
        // 288 samples, drop 14 (< 5%) then 15 (> 5%)
        let s = day_series(5, 2, |i| {
            let in_day = i % 288;
            if (i < 288 && in_day < 14) || (i >= 288 && in_day < 15) {
                None
            } else {
                Some(1.0)
            }
        });
        let d = integrate_daily(&s).unwrap();
        assert!(d.get(0).is_some());
        assert!(d.get(1).is_none());
    }

    #[test]
    fn partial_coverage_only_is_an_error() {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap().and_hms_opt(12, 0, 0).unwrap();
        let ts = (0..6).map(|i| start + Duration::hours(i)).collect();
        let s = PowerSeries::new(ts, vec![Some(1.0); 6]).unwrap();
        assert!(matches!(integrate_daily(&s), Err(Error::NoCompleteDay)));
    }

    #[test]
    fn irregular_and_empty_inputs() {
        assert!(matches!(
            PowerSeries::<f64>::new(vec![], vec![]),
            Err(Error::NoData)
        ));
        let t0 = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap().and_time(NaiveTime::MIN);
        let ts = vec![t0, t0 + Duration::minutes(5), t0 + Duration::minutes(11)];
        assert!(matches!(
            PowerSeries::new(ts, vec![Some(1.0); 3]),
            Err(Error::IrregularSampling(_))
        ));
        let ts = vec![t0, t0 + Duration::minutes(7)];
        assert!(matches!(
            PowerSeries::new(ts, vec![Some(1.0); 2]),
            Err(Error::IrregularSampling(_))
        ));
    }

    #[test]
    fn quality_mask_examples() {
        let sig = DailySignal::new((0..7).map(|i| Some(i as f64 + 1.0)).collect()).unwrap();
        assert_eq!(apply_quality_mask(&sig, &[true; 7]).unwrap(), sig);
        assert!(matches!(
            apply_quality_mask(&sig, &[false; 7]),
            Err(Error::EmptyKnownSet)
        ));
        let mut flags = [true; 7];
        flags[2] = false;
        flags[5] = false;
        let m = apply_quality_mask(&sig, &flags).unwrap();
        assert_eq!(m.known_set(), &[0, 1, 3, 4, 6]);
        assert!(matches!(
            apply_quality_mask(&sig, &[true; 6]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn scale_examples() {
        let c = DailySignal::new(vec![Some(4.0); 10]).unwrap();
        let s = scale_p95(&c).unwrap();
        assert!(s.known_values().all(|(_, v)| v == 1.0));
        assert_eq!(s.scale(), 4.0);

        let ramp = DailySignal::new((1..=100).map(|i| Some(i as f64)).collect()).unwrap();
        let s = scale_p95(&ramp).unwrap();
        // sort + interpolate oracle: rank 0.95·99 = 94.05 → 95 + 0.05·(96 − 95)
        let oracle = 95.05;
        assert!((s.scale() - oracle).abs() < 1e-12);

        let unit = DailySignal::new(vec![Some(0.5), Some(1.0), Some(1.0), None]).unwrap();
        let s = scale_p95(&unit).unwrap();
        assert_eq!(s.scale(), 1.0);
        assert_eq!(s.values(), unit.values());
    }

    #[test]
    fn scale_rejects_degenerate() {
        let z = DailySignal::new(vec![Some(0.0); 5]).unwrap();
        assert!(matches!(scale_p95(&z), Err(Error::DegenerateSignal(_))));
        let e = DailySignal::<f64>::new(vec![None; 5]).unwrap();
        assert!(matches!(scale_p95(&e), Err(Error::EmptyKnownSet)));
    }

    #[test]
    fn rejects_negative_raw_energy() {
        assert!(DailySignal::new(vec![Some(-1.0)]).is_err());
        assert!(DailySignal::normalized(vec![Some(-1.0)]).is_ok());
    }
}
