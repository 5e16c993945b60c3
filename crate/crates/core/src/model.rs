//! Component cost functions, model parameters and problem assembly for the
//! four-component soiling decomposition
//!
//! ```text
//! y_t = x1_t + x2_t + x3_t + x4_t   for t in 𝒦
//! ```
//!
//! with `x1` the quantile-cost residual, `x2` a smooth yearly-periodic baseline,
//! `x3` a linear degradation trend through zero, and `x4` the nonpositive,
//! piecewise-linear soiling loss.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prep::DailySignal;
use crate::qp::SolveReport;
use crate::scalar::Scalar;
use crate::sparse::CscMatrix;

pub const MIN_SIGNAL_DAYS: usize = 30;

/// Residual quantile for raw (unlabeled) energy.
pub const TAU_UNLABELED: f64 = 0.85;
/// Residual quantile for performance-index (labeled) data.
pub const TAU_LABELED: f64 = 0.5;

/// Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdConfig {
    /// Quantile of the residual cost.
    pub tau1: f64,
    /// Stiffness of the seasonal baseline.
    pub lambda2: f64,
    /// Weight on ‖D2 x4‖₁; controls the number of soiling breakpoints.
    pub lambda4a: f64,
    /// Weight on Σ(−x4); penalizes large soiling values.
    pub lambda4b: f64,
    /// Weight on the asymmetric slope cost of x4.
    pub lambda4c: f64,
    /// Quantile of the soiling slope cost.
    pub tau4: f64,
    /// Seasonal period in days.
    pub period: usize,
}

impl SdConfig {
    pub fn unlabeled() -> Self {
        Self {
            tau1: TAU_UNLABELED,
            lambda2: 5e2,
            lambda4a: 2.0,
            lambda4b: 3e-2,
            lambda4c: 2e-1,
            tau4: 0.9,
            period: 365,
        }
    }

    pub fn labeled() -> Self {
        Self {
            tau1: TAU_LABELED,
            ..Self::unlabeled()
        }
    }

    pub fn for_data(labeled: bool) -> Self {
        if labeled {
            Self::labeled()
        } else {
            Self::unlabeled()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, tau) in [("tau1", self.tau1), ("tau4", self.tau4)] {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {tau} not in (0, 1)")));
            }
        }
        for (name, l) in [
            ("lambda2", self.lambda2),
            ("lambda4a", self.lambda4a),
            ("lambda4b", self.lambda4b),
            ("lambda4c", self.lambda4c),
        ] {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {l} must be finite and >= 0")));
            }
        }
        if self.period < 2 {
            return Err(Error::InvalidParameter(format!("period = {} must be >= 2", self.period)));
        }
        Ok(())
    }
}

impl Default for SdConfig {
    fn default() -> Self {
        Self::unlabeled()
    }
}

/// Partial configuration as read from a TOML or JSON file; absent keys fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdConfigFile {
    pub tau1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda4a: Option<f64>,
    pub lambda4b: Option<f64>,
    pub lambda4c: Option<f64>,
    pub tau4: Option<f64>,
    pub period: Option<usize>,
}

impl SdConfigFile {
    /// Reads a config file; `.json` files are parsed as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        }
    }

    /// Fills absent keys from the labeled/unlabeled defaults and validates.
    pub fn resolve(&self, labeled: bool) -> Result<SdConfig> {
        let d = SdConfig::for_data(labeled);
        let cfg = SdConfig {
            tau1: self.tau1.unwrap_or(d.tau1),
            lambda2: self.lambda2.unwrap_or(d.lambda2),
            lambda4a: self.lambda4a.unwrap_or(d.lambda4a),
            lambda4b: self.lambda4b.unwrap_or(d.lambda4b),
            lambda4c: self.lambda4c.unwrap_or(d.lambda4c),
            tau4: self.tau4.unwrap_or(d.tau4),
            period: self.period.unwrap_or(d.period),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// First- or second-order forward difference operator on sequences of length `dim`.
///
/// Row `t` of order 1 is `x[t+1] − x[t]`; row `t` of order 2 is `x[t] − 2x[t+1] + x[t+2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DifferenceOperator {
    order: usize,
    dim: usize,
}

impl DifferenceOperator {
    pub fn new(order: usize, dim: usize) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(Error::InvalidParameter(format!("difference order {order}")));
        }
        Ok(Self { order, dim })
    }

    pub fn first(dim: usize) -> Self {
        Self { order: 1, dim }
    }

    pub fn second(dim: usize) -> Self {
        Self { order: 2, dim }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.dim.saturating_sub(self.order)
    }

    /// The stencil of one row.
    pub fn stencil(&self) -> &'static [f64] {
        match self.order {
            1 => &[-1.0, 1.0],
            _ => &[1.0, -2.0, 1.0],
        }
    }

    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.dim, "difference operator dimension mismatch");
        match self.order {
            1 => x.windows(2).map(|w| w[1] - w[0]).collect(),
            _ => x.windows(3).map(|w| w[0] - (w[1] + w[1]) + w[2]).collect(),
        }
    }

    pub fn to_csc<T: Scalar>(&self) -> CscMatrix<T> {
        let stencil = self.stencil();
        let trip: Vec<_> = (0..self.rows())
            .flat_map(|r| stencil.iter().enumerate().map(move |(k, &c)| (r, r + k, T::lit(c))))
            .collect();
        CscMatrix::from_triplets(self.rows(), self.dim, &trip)
    }
}

/// Quantile (pinball) cost `Σ ½|x_t| + (τ − ½) x_t`.
pub fn quantile_cost<T: Scalar>(x: &[T], tau: T) -> Result<T> {
    if !(tau > T::zero() && tau < T::one()) {
        return Err(Error::InvalidParameter(format!("tau = {tau} not in (0, 1)")));
    }
    Ok(quantile_cost_unchecked(x, tau))
}

pub(crate) fn quantile_cost_unchecked<T: Scalar>(x: &[T], tau: T) -> T {
    let half = T::lit(0.5);
    x.iter().map(|&v| half * v.abs() + (tau - half) * v).sum()
}

/// Seasonal cost `λ2‖D2 x‖²` when `x_t = x_{t+Y}` holds exactly, `+∞` otherwise.
pub fn seasonal_cost<T: Scalar>(x: &[T], config: &SdConfig) -> T {
    let y = config.period;
    if x.len() > y && (0..x.len() - y).any(|t| x[t] != x[t + y]) {
        return T::infinity();
    }
    if x.len() < 3 {
        return T::zero();
    }
    let d2 = DifferenceOperator::second(x.len()).apply(x);
    T::lit(config.lambda2) * d2.iter().map(|v| *v * *v).sum::<T>()
}

/// Whether `x` is an affine sequence starting at zero (`x_t = m·t`).
pub fn degradation_feasible<T: Scalar>(x: &[T]) -> bool {
    if x.is_empty() {
        return true;
    }
    if x[0] != T::zero() {
        return false;
    }
    if x.len() < 3 {
        return true;
    }
    let scale = x.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let tol = T::lit(1e-9) * scale;
    DifferenceOperator::second(x.len())
        .apply(x)
        .iter()
        .all(|v| v.abs() <= tol)
}

/// Soiling cost `λ4a‖D2x‖₁ + λ4b Σ(−x_t) + λ4c·quant_τ4(D1x)` on `x ⪯ 0`, `+∞` otherwise.
pub fn soiling_cost<T: Scalar>(x: &[T], config: &SdConfig) -> T {
    if x.iter().any(|v| *v > T::zero()) {
        return T::infinity();
    }
    let n = x.len();
    let curvature = if n >= 3 {
        DifferenceOperator::second(n).apply(x).iter().map(|v| v.abs()).sum()
    } else {
        T::zero()
    };
    let magnitude: T = x.iter().map(|v| -*v).sum();
    let slope = if n >= 2 {
        quantile_cost_unchecked(&DifferenceOperator::first(n).apply(x), T::lit(config.tau4))
    } else {
        T::zero()
    };
    T::lit(config.lambda4a) * curvature + T::lit(config.lambda4b) * magnitude + T::lit(config.lambda4c) * slope
}

/// The four model components, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Residual,
    Seasonal,
    Degradation,
    Soiling,
}

pub const ROSTER: [Component; 4] = [
    Component::Residual,
    Component::Seasonal,
    Component::Degradation,
    Component::Soiling,
];

/// A validated decomposition problem.
#[derive(Debug, Clone)]
pub struct SdProblem<T> {
    signal: DailySignal<T>,
    config: SdConfig,
}

impl<T: Scalar> SdProblem<T> {
    pub fn signal(&self) -> &DailySignal<T> {
        &self.signal
    }

    pub fn config(&self) -> &SdConfig {
        &self.config
    }

    pub fn roster(&self) -> &'static [Component; 4] {
        &ROSTER
    }

    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }

    /// Length of the seasonal profile that is tiled across the record.
    pub fn profile_len(&self) -> usize {
        self.config.period.min(self.signal.len())
    }

    /// False when the record is no longer than one period, so `x_t = x_{t+Y}` never binds.
    pub fn periodicity_binding(&self) -> bool {
        self.signal.len() > self.config.period
    }

    /// Total model cost `φ1(x1) + φ2(x2) + φ3(x3) + φ4(x4)` with `x1` restricted to 𝒦.
    pub fn objective(&self, x1: &[T], x2: &[T], x3: &[T], x4: &[T]) -> T {
        let resid: Vec<T> = self.signal.known_set().iter().map(|&t| x1[t]).collect();
        let phi3 = if degradation_feasible(x3) { T::zero() } else { T::infinity() };
        quantile_cost_unchecked(&resid, T::lit(self.config.tau1))
            + seasonal_cost(x2, &self.config)
            + phi3
            + soiling_cost(x4, &self.config)
    }
}

/// Validates the signal and parameters and packages them as a problem.
pub fn assemble<T: Scalar>(signal: &DailySignal<T>, config: &SdConfig) -> Result<SdProblem<T>> {
    config.validate()?;
    if signal.len() < MIN_SIGNAL_DAYS {
        return Err(Error::SignalTooShort(signal.len()));
    }
    if signal.known_set().is_empty() {
        return Err(Error::EmptyKnownSet);
    }
    if !signal.is_scaled() {
        return Err(Error::NotScaled);
    }
    Ok(SdProblem {
        signal: signal.clone(),
        config: *config,
    })
}

/// Estimated components and solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition<T> {
    /// Residual; zero on missing days.
    pub x1: Vec<T>,
    /// Seasonal baseline.
    pub x2: Vec<T>,
    /// Degradation trend.
    pub x3: Vec<T>,
    /// Soiling loss (nonpositive).
    pub x4: Vec<T>,
    /// Degradation slope per day.
    pub degradation_slope: T,
    /// Objective reported by the solver.
    pub objective: T,
    pub report: SolveReport,
    pub periodicity_binding: bool,
}

impl<T: Scalar> Decomposition<T> {
    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    /// Sum of all components except the residual.
    pub fn denoised(&self) -> Vec<T> {
        (0..self.len())
            .map(|t| self.x2[t] + self.x3[t] + self.x4[t])
            .collect()
    }

    pub fn is_optimal(&self) -> bool {
        self.report.status.is_optimal()
    }
}
