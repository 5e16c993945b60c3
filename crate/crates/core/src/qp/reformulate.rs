//! Epigraph reformulation of the soiling decomposition as a [`StandardQp`].
//!
//! Decision variables, in order:
//!
//! | block     | length    | meaning                                             |
//! |-----------|-----------|-----------------------------------------------------|
//! | `theta`   | P=min(Y,T)| seasonal profile; `x2_t = theta[t mod P]`            |
//! | `drift`   | 1         | degradation at the last day; `x3_t = drift·t/(T−1)`  |
//! | `soil`    | T         | soiling `x4`                                         |
//! | `resid`   | \|𝒦\|     | epigraph of the residual quantile cost               |
//! | `curv`    | T−2       | epigraph of \|D2 x4\|                                |
//! | `slope`   | T−1       | epigraph of the quantile cost of D1 x4               |
//!
//! The residual `x1 = y − x2 − x3 − x4` is eliminated on 𝒦. Constraint rows, in order:
//!
//! * for the k-th known day `t`, with `g = theta[t mod P] + drift·t/(T−1) + soil[t]`:
//!   `resid[k] + τ1·g ≥ τ1·y_t` and `resid[k] − (1−τ1)·g ≥ −(1−τ1)·y_t`;
//! * `soil[t] ≤ 0` for every day;
//! * `curv[t] − (D2 s)_t ≥ 0` and `curv[t] + (D2 s)_t ≥ 0`;
//! * `slope[t] − τ4·(D1 s)_t ≥ 0` and `slope[t] + (1−τ4)·(D1 s)_t ≥ 0`.
//!
//! The only quadratic term is `λ2‖D2 x2‖²` on the tiled profile. Values of `y` on
//! missing days are never read.

use std::ops::Range;

use crate::model::SdProblem;
use crate::qp::StandardQp;
use crate::scalar::Scalar;
use crate::sparse::CscMatrix;

/// Index map between the stacked QP vector and the model components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QpLayout {
    pub days: usize,
    pub profile_len: usize,
    pub known: Vec<usize>,
    pub theta: Range<usize>,
    pub drift: usize,
    pub soil: Range<usize>,
    pub resid: Range<usize>,
    pub curv: Range<usize>,
    pub slope: Range<usize>,
    pub resid_rows: Range<usize>,
    pub soil_rows: Range<usize>,
    pub curv_rows: Range<usize>,
    pub slope_rows: Range<usize>,
}

impl QpLayout {
    pub fn new(days: usize, profile_len: usize, known: &[usize]) -> Self {
        let nk = known.len();
        let curv_len = days.saturating_sub(2);
        let slope_len = days.saturating_sub(1);
        let theta = 0..profile_len;
        let drift = profile_len;
        let soil = drift + 1..drift + 1 + days;
        let resid = soil.end..soil.end + nk;
        let curv = resid.end..resid.end + curv_len;
        let slope = curv.end..curv.end + slope_len;
        let resid_rows = 0..2 * nk;
        let soil_rows = resid_rows.end..resid_rows.end + days;
        let curv_rows = soil_rows.end..soil_rows.end + 2 * curv_len;
        let slope_rows = curv_rows.end..curv_rows.end + 2 * slope_len;
        Self {
            days,
            profile_len,
            known: known.to_vec(),
            theta,
            drift,
            soil,
            resid,
            curv,
            slope,
            resid_rows,
            soil_rows,
            curv_rows,
            slope_rows,
        }
    }

    /// Total number of QP variables.
    pub fn n(&self) -> usize {
        self.slope.end
    }

    /// Total number of constraint rows.
    pub fn m(&self) -> usize {
        self.slope_rows.end
    }

    /// Variables of the model itself (profile, drift, soiling), before epigraph lifting.
    pub fn core_variables(&self) -> usize {
        self.soil.end
    }

    /// Coefficient of `drift` in `x3_t`.
    pub fn time_coefficient<T: Scalar>(&self, t: usize) -> T {
        if self.days <= 1 {
            T::zero()
        } else {
            T::from_usize_lossy(t) / T::from_usize_lossy(self.days - 1)
        }
    }

    pub fn seasonal<T: Scalar>(&self, z: &[T]) -> Vec<T> {
        (0..self.days)
            .map(|t| z[self.theta.start + t % self.profile_len])
            .collect()
    }

    pub fn degradation<T: Scalar>(&self, z: &[T]) -> Vec<T> {
        let d = z[self.drift];
        (0..self.days).map(|t| d * self.time_coefficient::<T>(t)).collect()
    }

    /// Degradation slope per day.
    pub fn slope_per_day<T: Scalar>(&self, z: &[T]) -> T {
        if self.days <= 1 {
            T::zero()
        } else {
            z[self.drift] / T::from_usize_lossy(self.days - 1)
        }
    }

    pub fn soiling<T: Scalar>(&self, z: &[T]) -> Vec<T> {
        z[self.soil.clone()].to_vec()
    }
}

/// Builds the standard-form QP for `problem` and the layout to read its solution.
pub fn reformulate<T: Scalar>(problem: &SdProblem<T>) -> (StandardQp<T>, QpLayout) {
    let cfg = problem.config();
    let signal = problem.signal();
    let days = problem.len();
    let plen = problem.profile_len();
    let layout = QpLayout::new(days, plen, signal.known_set());
    let n = layout.n();
    let m = layout.m();

    let lambda2 = T::lit(cfg.lambda2);
    let tau1 = T::lit(cfg.tau1);
    let tau4 = T::lit(cfg.tau4);
    let one = T::one();
    let inf = T::infinity();

    // quadratic: ½θᵀ(2λ2 RᵀD2ᵀD2R)θ, upper triangle
    let mut p_trip: Vec<(usize, usize, T)> = Vec::new();
    let two_l2 = lambda2 + lambda2;
    for t in 0..days.saturating_sub(2) {
        let mut coef: Vec<(usize, T)> = Vec::with_capacity(3);
        for (k, c) in [(0usize, 1.0), (1, -2.0), (2, 1.0)] {
            let j = (t + k) % plen;
            match coef.iter_mut().find(|(i, _)| *i == j) {
                Some(e) => e.1 += T::lit(c),
                None => coef.push((j, T::lit(c))),
            }
        }
        for &(i, ci) in &coef {
            for &(j, cj) in &coef {
                if i <= j {
                    p_trip.push((layout.theta.start + i, layout.theta.start + j, two_l2 * ci * cj));
                }
            }
        }
    }
    let p = CscMatrix::from_triplets(n, n, &p_trip);

    let mut q = vec![T::zero(); n];
    for j in layout.soil.clone() {
        q[j] = -T::lit(cfg.lambda4b);
    }
    for j in layout.resid.clone() {
        q[j] = one;
    }
    for j in layout.curv.clone() {
        q[j] = T::lit(cfg.lambda4a);
    }
    for j in layout.slope.clone() {
        q[j] = T::lit(cfg.lambda4c);
    }

    let mut a_trip: Vec<(usize, usize, T)> = Vec::new();
    let mut l = vec![-inf; m];
    let mut u = vec![inf; m];

    for (k, &t) in layout.known.iter().enumerate() {
        let y = signal.get(t).expect("known day has a value");
        let ct = layout.time_coefficient::<T>(t);
        let theta = layout.theta.start + t % plen;
        let soil = layout.soil.start + t;
        let epi = layout.resid.start + k;
        for (row, w, rhs) in [
            (layout.resid_rows.start + 2 * k, tau1, tau1 * y),
            (layout.resid_rows.start + 2 * k + 1, -(one - tau1), -(one - tau1) * y),
        ] {
            a_trip.push((row, epi, one));
            a_trip.push((row, theta, w));
            a_trip.push((row, layout.drift, w * ct));
            a_trip.push((row, soil, w));
            l[row] = rhs;
        }
    }

    for t in 0..days {
        let row = layout.soil_rows.start + t;
        a_trip.push((row, layout.soil.start + t, one));
        u[row] = T::zero();
    }

    let stencil2 = [one, -(one + one), one];
    for t in 0..days.saturating_sub(2) {
        let epi = layout.curv.start + t;
        for (row, sign) in [(layout.curv_rows.start + 2 * t, -one), (layout.curv_rows.start + 2 * t + 1, one)] {
            a_trip.push((row, epi, one));
            for (k, c) in stencil2.iter().enumerate() {
                a_trip.push((row, layout.soil.start + t + k, sign * *c));
            }
            l[row] = T::zero();
        }
    }

    for t in 0..days.saturating_sub(1) {
        let epi = layout.slope.start + t;
        for (row, w) in [(layout.slope_rows.start + 2 * t, -tau4), (layout.slope_rows.start + 2 * t + 1, one - tau4)] {
            a_trip.push((row, epi, one));
            a_trip.push((row, layout.soil.start + t, -w));
            a_trip.push((row, layout.soil.start + t + 1, w));
            l[row] = T::zero();
        }
    }

    let a = CscMatrix::from_triplets(m, n, &a_trip);
    let qp = StandardQp { p, q, a, l, u };
    debug_assert!(qp.validate().is_ok());
    (qp, layout)
}
