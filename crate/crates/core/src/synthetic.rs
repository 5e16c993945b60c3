//! Synthetic performance-index realizations with known soiling, seasonal,
//! degradation and noise components, for the six validation scenarios.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prep::DailySignal;

pub const MIN_DAYS: usize = 365;
const YEAR: f64 = 365.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CleaningMode {
    /// Rain-like renewal process.
    Stochastic,
    /// Cleaning on the same calendar days every year.
    Seasonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: u8,
    pub name: String,
    /// Soiling rates are drawn per interval, uniform in `[lo, hi]` (fraction per day, as a loss).
    pub soiling_rate_range: (f64, f64),
    pub seasonal_multiplier: f64,
    pub noise_multiplier: f64,
    pub cleaning: CleaningMode,
}

impl ScenarioConfig {
    /// The six validation scenarios, by id 1–6.
    pub fn preset(id: u8) -> Result<Self> {
        let (name, hi, season, noise, cleaning) = match id {
            1 => ("normal", 0.003, 1.0, 1.0, CleaningMode::Stochastic),
            2 => ("M soil, H season", 0.001, 2.0, 1.0, CleaningMode::Stochastic),
            3 => ("M soil, H noise", 0.001, 1.0, 2.0, CleaningMode::Stochastic),
            4 => ("seasonal cleaning", 0.005, 1.0, 1.0, CleaningMode::Seasonal),
            5 => ("M soil", 0.005, 1.0, 1.0, CleaningMode::Stochastic),
            6 => ("L soil", 0.001, 1.0, 1.0, CleaningMode::Stochastic),
            _ => return Err(Error::InvalidParameter(format!("scenario id {id} not in 1..=6"))),
        };
        Ok(Self {
            id,
            name: name.to_string(),
            soiling_rate_range: (0.0, hi),
            seasonal_multiplier: season,
            noise_multiplier: noise,
            cleaning,
        })
    }

    pub fn all() -> Vec<Self> {
        (1..=6).map(|id| Self::preset(id).unwrap()).collect()
    }
}

/// Baseline magnitudes shared by all scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    /// Peak amplitude of the yearly seasonal term before the scenario multiplier.
    pub seasonal_amplitude: f64,
    /// Standard deviation of the daily noise before the scenario multiplier.
    pub noise_sigma: f64,
    /// Mean days between stochastic cleanings.
    pub mean_cleaning_interval: f64,
    /// Shortest stochastic cleaning interval.
    pub min_cleaning_interval: usize,
    /// Additional daily probability of a cleaning rain.
    pub rain_probability: f64,
    /// Days of the year (0-based) with a cleaning in seasonal mode.
    pub seasonal_cleaning_days: Vec<u32>,
    /// Degradation is drawn uniform in `[lo, hi]` per year.
    pub degradation_range: (f64, f64),
    /// Fraction of days removed as missing.
    pub missing_fraction: f64,
    pub start: NaiveDate,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            seasonal_amplitude: 0.02,
            noise_sigma: 0.005,
            mean_cleaning_interval: 30.0,
            min_cleaning_interval: 5,
            rain_probability: 0.005,
            seasonal_cleaning_days: vec![79, 171, 265, 354],
            degradation_range: (-0.01, 0.0),
            missing_fraction: 0.0,
            start: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRealization {
    pub scenario: u8,
    pub seed: u64,
    /// Normalized performance index; fit with τ1 = 0.5.
    pub pi: DailySignal<f64>,
    pub true_soiling: Vec<f64>,
    pub true_seasonal: Vec<f64>,
    pub true_degradation: Vec<f64>,
    pub true_noise: Vec<f64>,
    pub cleaning_days: Vec<usize>,
}

impl SyntheticRealization {
    pub fn len(&self) -> usize {
        self.true_soiling.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_soiling.is_empty()
    }

    /// `1 + seasonal + degradation + soiling + noise` on every day, missing or not.
    pub fn composed(&self, t: usize) -> f64 {
        1.0 + self.true_seasonal[t] + self.true_degradation[t] + self.true_soiling[t] + self.true_noise[t]
    }
}

pub fn generate(scenario: &ScenarioConfig, seed: u64, days: usize) -> Result<SyntheticRealization> {
    generate_with(scenario, &GeneratorParams::default(), seed, days)
}

pub fn generate_with(
    scenario: &ScenarioConfig,
    params: &GeneratorParams,
    seed: u64,
    days: usize,
) -> Result<SyntheticRealization> {
    if days < MIN_DAYS {
        return Err(Error::InvalidParameter(format!(
            "synthetic realizations need at least {MIN_DAYS} days, got {days}"
        )));
    }
    let (lo, hi) = scenario.soiling_rate_range;
    if !(0.0 <= lo && lo <= hi) {
        return Err(Error::InvalidParameter(format!("soiling rate range [{lo}, {hi}]")));
    }
    if !(0.0..1.0).contains(&params.missing_fraction) {
        return Err(Error::InvalidParameter("missing_fraction must be in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let amp = params.seasonal_amplitude * scenario.seasonal_multiplier;
    let true_seasonal: Vec<f64> = (0..days)
        .map(|t| amp * (std::f64::consts::TAU * t as f64 / YEAR + phase).sin())
        .collect();

    let (dlo, dhi) = params.degradation_range;
    let rd = if dhi > dlo { rng.gen_range(dlo..=dhi) } else { dlo };
    let true_degradation: Vec<f64> = (0..days).map(|t| rd * t as f64 / YEAR).collect();

    let cleaning_days = match scenario.cleaning {
        CleaningMode::Stochastic => stochastic_cleanings(&mut rng, params, days),
        CleaningMode::Seasonal => seasonal_cleanings(params, days),
    };

    let mut true_soiling = vec![0.0; days];
    let mut rate = draw_rate(&mut rng, lo, hi);
    let mut next_clean = cleaning_days.iter().peekable();
    let mut since = 0usize;
    for (t, s) in true_soiling.iter_mut().enumerate() {
        if next_clean.peek() == Some(&&t) {
            next_clean.next();
            since = 0;
            rate = draw_rate(&mut rng, lo, hi);
        }
        *s = -rate * since as f64;
        since += 1;
    }

    let sigma = params.noise_sigma * scenario.noise_multiplier;
    let true_noise: Vec<f64> = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        (0..days).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; days]
    };

    let values = (0..days)
        .map(|t| {
            let missing = params.missing_fraction > 0.0 && rng.gen_bool(params.missing_fraction);
            (!missing).then(|| 1.0 + true_seasonal[t] + true_degradation[t] + true_soiling[t] + true_noise[t])
        })
        .collect();
    let pi = DailySignal::normalized(values)?.with_start(params.start);

    Ok(SyntheticRealization {
        scenario: scenario.id,
        seed,
        pi,
        true_soiling,
        true_seasonal,
        true_degradation,
        true_noise,
        cleaning_days,
    })
}

fn draw_rate(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

fn stochastic_cleanings(rng: &mut ChaCha8Rng, params: &GeneratorParams, days: usize) -> Vec<usize> {
    let extra = (params.mean_cleaning_interval - params.min_cleaning_interval as f64).max(1.0);
    let exp = Exp::new(1.0 / extra).expect("positive rate");
    let mut out = Vec::new();
    let mut next = params.min_cleaning_interval + exp.sample(rng).round() as usize;
    for t in 1..days {
        let rain = params.rain_probability > 0.0 && rng.gen_bool(params.rain_probability);
        if t >= next || rain {
            out.push(t);
            next = t + params.min_cleaning_interval + exp.sample(rng).round() as usize;
        }
    }
    out
}

fn seasonal_cleanings(params: &GeneratorParams, days: usize) -> Vec<usize> {
    use chrono::Datelike;
    (1..days)
        .filter(|&t| {
            let date = params.start + chrono::Duration::days(t as i64);
            params.seasonal_cleaning_days.contains(&date.ordinal0())
        })
        .collect()
}

/// Seed of realization `index` of scenario `scenario` derived from `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, scenario: u8, index: usize) -> u64 {
    let mut z = base
        .wrapping_add((scenario as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((index as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `per_scenario` realizations of each of the six scenarios, scenario-major.
pub fn scenario_suite(per_scenario: usize, base_seed: u64, days: usize) -> Result<Vec<SyntheticRealization>> {
    if per_scenario < 1 {
        return Err(Error::InvalidParameter("realizations per scenario must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(6 * per_scenario);
    for sc in ScenarioConfig::all() {
        for i in 0..per_scenario {
            out.push(generate(&sc, derive_seed(base_seed, sc.id, i), days)?);
        }
    }
    Ok(out)
}
