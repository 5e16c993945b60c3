//! ADMM operator-splitting solver for [`StandardQp`].
//!
//! Each iteration solves one quasi-definite KKT system
//!
//! ```text
//! [ P + σI      Aᵀ      ] [ x̃ ]   [ σx − q     ]
//! [   A     −diag(1/ρ)  ] [ ν  ] = [ z − y ⊘ ρ ]
//! ```
//!
//! with a factorization computed once (and again only when ρ changes), followed by
//! an over-relaxed projection onto `[l, u]` and a dual ascent step. Modified Ruiz
//! equilibration is available but off by default: on the decomposition QPs it slows the
//! tail of the iteration. Residuals and termination are always evaluated on the
//! unscaled problem. A polishing step solves the equality-constrained
//! problem on the guessed active set and is accepted only if it satisfies the KKT
//! conditions, dual sign consistency included.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::qp::ldl::LdlFactor;
use crate::qp::StandardQp;
use crate::scalar::{dot, norm_inf, Scalar};
use crate::sparse::CscMatrix;

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const RHO_EQ_TOL: f64 = 1e-4;
const MIN_SCALING: f64 = 1e-4;
const MAX_SCALING: f64 = 1e4;
const DIVISION_TOL: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub eps_dual_inf: f64,
    pub max_iter: usize,
    /// Initial step parameter ρ.
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    pub adaptive_rho: bool,
    /// Iterations between ρ updates.
    pub adaptive_rho_interval: usize,
    /// ρ is only changed when the proposed value differs by more than this factor.
    pub adaptive_rho_tolerance: f64,
    pub scaling_iters: usize,
    /// Iterations between termination checks.
    pub check_interval: usize,
    pub polish: bool,
    pub polish_delta: f64,
    pub polish_refine_iter: usize,
    /// Active-set correction rounds within one polish attempt.
    pub polish_rounds: usize,
    /// Times the working tolerances are cut tenfold to retry a polish that failed at convergence.
    pub polish_tighten: usize,
    /// Attempt polishing before ADMM convergence once both residuals are within
    /// this factor of their tolerances. Values below 1 disable early attempts.
    pub early_polish_factor: f64,
    /// Keep the residual history in the report.
    pub record_history: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            eps_prim_inf: 1e-5,
            eps_dual_inf: 1e-5,
            max_iter: 50_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho: true,
            adaptive_rho_interval: 50,
            adaptive_rho_tolerance: 5.0,
            scaling_iters: 0,
            check_interval: 25,
            polish: true,
            polish_delta: 1e-9,
            polish_refine_iter: 10,
            polish_rounds: 8,
            polish_tighten: 2,
            early_polish_factor: 1e3,
            record_history: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(crate::error::Error::InvalidParameter(m));
        if !(self.eps_abs > 0.0 && self.eps_rel >= 0.0) {
            return bad(format!("tolerances must be positive (eps_abs={}, eps_rel={})", self.eps_abs, self.eps_rel));
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.rho > 0.0 && self.sigma > 0.0) {
            return bad("rho and sigma must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return bad(format!("alpha = {} not in (0, 2)", self.alpha));
        }
        if self.check_interval < 1 || self.adaptive_rho_interval < 1 {
            return bad("intervals must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    #[serde(rename = "optimal")]
    Optimal,
    #[serde(rename = "max-iter")]
    MaxIterations,
    #[serde(rename = "infeasible-detected")]
    PrimalInfeasible,
    #[serde(rename = "unbounded-detected")]
    DualInfeasible,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max-iter",
            SolveStatus::PrimalInfeasible => "infeasible-detected",
            SolveStatus::DualInfeasible => "unbounded-detected",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    pub objective: f64,
    pub polished: bool,
    pub rho_updates: usize,
    pub final_rho: f64,
    pub wall_time_secs: f64,
    #[serde(skip)]
    pub history: Vec<ResidualSample>,
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    /// Primal solution.
    pub x: Vec<T>,
    /// Constraint values projected onto `[l, u]`.
    pub z: Vec<T>,
    /// Dual variables; positive entries mark active upper bounds, negative ones lower bounds.
    pub y: Vec<T>,
    pub report: SolveReport,
}

/// Equilibrated copy of the problem: `P̂ = c·DPD`, `q̂ = c·Dq`, `Â = EAD`, `l̂ = El`, `û = Eu`.
struct Scaled<T> {
    p: CscMatrix<T>,
    q: Vec<T>,
    a: CscMatrix<T>,
    l: Vec<T>,
    u: Vec<T>,
    d: Vec<T>,
    e: Vec<T>,
    c: T,
    d_inv: Vec<T>,
    e_inv: Vec<T>,
}

fn limit_scaling<T: Scalar>(v: T) -> T {
    if v < T::lit(MIN_SCALING) {
        T::one()
    } else {
        v.min(T::lit(MAX_SCALING))
    }
}

fn equilibrate<T: Scalar>(qp: &StandardQp<T>, iters: usize) -> Scaled<T> {
    let n = qp.n();
    let m = qp.m();
    let mut p = qp.p.clone();
    let mut a = qp.a.clone();
    let mut q = qp.q.clone();
    let mut d = vec![T::one(); n];
    let mut e = vec![T::one(); m];
    let mut c = T::one();

    for _ in 0..iters {
        let cp = p.sym_upper_col_norms_inf();
        let ca = a.col_norms_inf();
        let d_tmp: Vec<T> = (0..n)
            .map(|j| T::one() / limit_scaling(cp[j].max(ca[j])).sqrt())
            .collect();
        let ra = a.row_norms_inf();
        let e_tmp: Vec<T> = (0..m).map(|i| T::one() / limit_scaling(ra[i]).sqrt()).collect();

        p.scale_rows_cols(&d_tmp, &d_tmp);
        a.scale_rows_cols(&e_tmp, &d_tmp);
        for j in 0..n {
            q[j] *= d_tmp[j];
            d[j] *= d_tmp[j];
        }
        for i in 0..m {
            e[i] *= e_tmp[i];
        }

        let cp = p.sym_upper_col_norms_inf();
        let mean = if n > 0 {
            cp.iter().copied().sum::<T>() / T::from_usize_lossy(n)
        } else {
            T::zero()
        };
        let c_tmp = T::one() / limit_scaling(mean.max(norm_inf(&q)));
        p.scale_rows_cols(&vec![c_tmp; n], &vec![T::one(); n]);
        q.iter_mut().for_each(|v| *v *= c_tmp);
        c *= c_tmp;
    }

    let l = (0..m).map(|i| qp.l[i] * e[i]).collect();
    let u = (0..m).map(|i| qp.u[i] * e[i]).collect();
    let d_inv = d.iter().map(|v| T::one() / *v).collect();
    let e_inv = e.iter().map(|v| T::one() / *v).collect();
    Scaled {
        p,
        q,
        a,
        l,
        u,
        d,
        e,
        c,
        d_inv,
        e_inv,
    }
}

fn rho_for_row<T: Scalar>(l: T, u: T, rho: T) -> T {
    if l == T::neg_infinity() && u == T::infinity() {
        T::lit(RHO_MIN)
    } else if u - l < T::lit(RHO_EQ_TOL) {
        rho * T::lit(RHO_EQ_FACTOR)
    } else {
        rho
    }
}

/// Upper triangle of `[P + σI, Aᵀ; A, −diag(1/ρ)]`.
fn build_kkt<T: Scalar>(p: &CscMatrix<T>, a: &CscMatrix<T>, sigma: T, rho: &[T]) -> CscMatrix<T> {
    let n = p.ncols();
    let m = a.nrows();
    let mut trip = Vec::with_capacity(p.nnz() + n + a.nnz() + m);
    trip.extend(p.triplets());
    trip.extend((0..n).map(|j| (j, j, sigma)));
    trip.extend(a.triplets().map(|(r, c, v)| (c, n + r, v)));
    trip.extend((0..m).map(|i| (n + i, n + i, -T::one() / rho[i])));
    CscMatrix::from_triplets(n + m, n + m, &trip)
}

fn kkt_signs(n: usize, m: usize) -> Vec<i8> {
    let mut s = vec![1i8; n + m];
    s[n..].iter_mut().for_each(|v| *v = -1);
    s
}

fn project<T: Scalar>(v: T, l: T, u: T) -> T {
    v.max(l).min(u)
}

#[derive(Clone, Copy)]
struct Residuals<T> {
    prim: T,
    dual: T,
    eps_prim: T,
    eps_dual: T,
    // scaled-space normalizers for adaptive rho
    prim_norm: T,
    dual_norm: T,
    prim_scaled: T,
    dual_scaled: T,
}

/// Scaled `(x, z, y)` with its residuals.
type Iterate<T> = (Vec<T>, Vec<T>, Vec<T>, Residuals<T>);

struct Workspace<T> {
    ax: Vec<T>,
    px: Vec<T>,
    aty: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(n: usize, m: usize) -> Self {
        Self {
            ax: vec![T::zero(); m],
            px: vec![T::zero(); n],
            aty: vec![T::zero(); n],
        }
    }
}

fn residuals<T: Scalar>(s: &Scaled<T>, x: &[T], z: &[T], y: &[T], ws: &mut Workspace<T>, settings: &SolverSettings) -> Residuals<T> {
    let n = x.len();
    let m = z.len();
    s.a.mul_vec_into(x, &mut ws.ax);
    s.p.sym_upper_mul_vec_into(x, &mut ws.px);
    s.a.tr_mul_vec_into(y, &mut ws.aty);
    let cinv = T::one() / s.c;

    let mut prim = T::zero();
    let mut ax_n = T::zero();
    let mut z_n = T::zero();
    let mut prim_scaled = T::zero();
    let mut ax_sn = T::zero();
    let mut z_sn = T::zero();
    for i in 0..m {
        let r = ws.ax[i] - z[i];
        prim = prim.max((r * s.e_inv[i]).abs());
        ax_n = ax_n.max((ws.ax[i] * s.e_inv[i]).abs());
        z_n = z_n.max((z[i] * s.e_inv[i]).abs());
        prim_scaled = prim_scaled.max(r.abs());
        ax_sn = ax_sn.max(ws.ax[i].abs());
        z_sn = z_sn.max(z[i].abs());
    }
    let mut dual = T::zero();
    let mut px_n = T::zero();
    let mut aty_n = T::zero();
    let mut q_n = T::zero();
    let mut dual_scaled = T::zero();
    let mut px_sn = T::zero();
    let mut aty_sn = T::zero();
    let mut q_sn = T::zero();
    for j in 0..n {
        let r = ws.px[j] + s.q[j] + ws.aty[j];
        dual = dual.max((r * s.d_inv[j]).abs() * cinv);
        px_n = px_n.max((ws.px[j] * s.d_inv[j]).abs() * cinv);
        aty_n = aty_n.max((ws.aty[j] * s.d_inv[j]).abs() * cinv);
        q_n = q_n.max((s.q[j] * s.d_inv[j]).abs() * cinv);
        dual_scaled = dual_scaled.max(r.abs());
        px_sn = px_sn.max(ws.px[j].abs());
        aty_sn = aty_sn.max(ws.aty[j].abs());
        q_sn = q_sn.max(s.q[j].abs());
    }
    let eps_abs = T::lit(settings.eps_abs);
    let eps_rel = T::lit(settings.eps_rel);
    Residuals {
        prim,
        dual,
        eps_prim: eps_abs + eps_rel * ax_n.max(z_n),
        eps_dual: eps_abs + eps_rel * px_n.max(aty_n).max(q_n),
        prim_norm: ax_sn.max(z_sn),
        dual_norm: px_sn.max(aty_sn).max(q_sn),
        prim_scaled,
        dual_scaled,
    }
}

/// Solves a convex QP with ADMM.
pub fn solve<T: Scalar>(qp: &StandardQp<T>, settings: &SolverSettings) -> Result<Solution<T>> {
    qp.validate()?;
    settings.validate()?;
    let start = Instant::now();
    let n = qp.n();
    let m = qp.m();
    let s = equilibrate(qp, settings.scaling_iters);

    let sigma = T::lit(settings.sigma);
    let alpha = T::lit(settings.alpha);
    let one_m_alpha = T::one() - alpha;
    let mut rho = T::lit(settings.rho);
    let mut rho_vec: Vec<T> = (0..m).map(|i| rho_for_row(s.l[i], s.u[i], rho)).collect();
    let mut kkt = build_kkt(&s.p, &s.a, sigma, &rho_vec);
    let signs = kkt_signs(n, m);
    let mut ldl = LdlFactor::new(&kkt, &signs, T::lit(1e-13), T::lit(1e-7))?;

    let mut x = vec![T::zero(); n];
    let mut z = vec![T::zero(); m];
    let mut y = vec![T::zero(); m];
    let mut x_prev = vec![T::zero(); n];
    let mut y_prev = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); n + m];
    let mut ws = Workspace::new(n, m);
    let mut history = Vec::new();
    let mut rho_updates = 0usize;

    let mut status = SolveStatus::MaxIterations;
    let mut iterations = settings.max_iter;
    let mut last: Option<Residuals<T>> = None;
    let mut polished: Option<Iterate<T>> = None;
    let mut last_polish_ratio = f64::INFINITY;
    let mut last_polish_iter = 0usize;
    let mut working = *settings;
    let mut tighten_left = settings.polish_tighten;
    let mut fallback: Option<(usize, Iterate<T>)> = None;

    for k in 1..=settings.max_iter {
        x_prev.copy_from_slice(&x);
        y_prev.copy_from_slice(&y);
        for j in 0..n {
            rhs[j] = sigma * x[j] - s.q[j];
        }
        for i in 0..m {
            rhs[n + i] = z[i] - y[i] / rho_vec[i];
        }
        ldl.solve_in_place(&mut rhs);
        for j in 0..n {
            x[j] = alpha * rhs[j] + one_m_alpha * x_prev[j];
        }
        for i in 0..m {
            let zt = z[i] + (rhs[n + i] - y[i]) / rho_vec[i];
            let relaxed = alpha * zt + one_m_alpha * z[i];
            let z_new = project(relaxed + y[i] / rho_vec[i], s.l[i], s.u[i]);
            y[i] += rho_vec[i] * (relaxed - z_new);
            z[i] = z_new;
        }

        let check = k % settings.check_interval == 0 || k == settings.max_iter;
        let adapt = settings.adaptive_rho && k % settings.adaptive_rho_interval == 0;
        if !(check || adapt) {
            continue;
        }
        let res = residuals(&s, &x, &z, &y, &mut ws, &working);
        if check {
            if settings.record_history {
                history.push(ResidualSample {
                    iter: k,
                    primal: res.prim.to_f64_lossy(),
                    dual: res.dual.to_f64_lossy(),
                });
            }
            if res.prim <= res.eps_prim && res.dual <= res.eps_dual {
                if settings.polish {
                    if let Some(p) = polish(&s, &x, &z, &y, &mut ws, settings) {
                        iterations = k;
                        polished = Some(p);
                        status = SolveStatus::Optimal;
                        break;
                    }
                    // a failed polish usually means a poor active-set guess; iterate further,
                    // keeping this iterate in case the tighter tolerances are never met
                    if fallback.is_none() {
                        fallback = Some((k, (x.clone(), z.clone(), y.clone(), res)));
                    }
                    if tighten_left > 0 {
                        tighten_left -= 1;
                        working.eps_abs *= 0.1;
                        working.eps_rel *= 0.1;
                        last = Some(res);
                        continue;
                    }
                }
                status = SolveStatus::Optimal;
                iterations = k;
                last = Some(res);
                break;
            }
            if matches!(&fallback, Some(f) if k >= 2 * f.0) {
                break;
            }
            // attempts are spaced geometrically in both residual ratio and iteration count
            let ratio = (res.prim / res.eps_prim).max(res.dual / res.eps_dual).to_f64_lossy();
            if settings.polish
                && ratio <= settings.early_polish_factor
                && (ratio <= last_polish_ratio / 4.0 || k >= 2 * last_polish_iter)
            {
                last_polish_ratio = ratio;
                last_polish_iter = k;
                if let Some(p) = polish(&s, &x, &z, &y, &mut ws, settings) {
                    iterations = k;
                    polished = Some(p);
                    status = SolveStatus::Optimal;
                    break;
                }
            }
            if primal_infeasible(&s, &y, &y_prev, settings) {
                status = SolveStatus::PrimalInfeasible;
                iterations = k;
                last = Some(res);
                break;
            }
            if dual_infeasible(&s, &x, &x_prev, settings) {
                status = SolveStatus::DualInfeasible;
                iterations = k;
                last = Some(res);
                break;
            }
        }
        if adapt {
            let prim_ratio = res.prim_scaled / (res.prim_norm + T::lit(DIVISION_TOL));
            let dual_ratio = res.dual_scaled / (res.dual_norm + T::lit(DIVISION_TOL));
            let proposed = (rho * (prim_ratio / (dual_ratio + T::lit(DIVISION_TOL))).sqrt())
                .max(T::lit(RHO_MIN))
                .min(T::lit(RHO_MAX));
            let tol = T::lit(settings.adaptive_rho_tolerance);
            if proposed.is_finite() && (proposed > rho * tol || proposed < rho / tol) {
                rho = proposed;
                for i in 0..m {
                    rho_vec[i] = rho_for_row(s.l[i], s.u[i], rho);
                }
                kkt = build_kkt(&s.p, &s.a, sigma, &rho_vec);
                ldl.refactor(&kkt)?;
                rho_updates += 1;

            }
        }
        last = Some(res);
    }

    if status == SolveStatus::MaxIterations && polished.is_none() {
        if let Some((k, (fx, fz, fy, fres))) = fallback {
            x = fx;
            z = fz;
            y = fy;
            last = Some(fres);
            iterations = k;
            status = SolveStatus::Optimal;
        }
    }

    let mut was_polished = false;
    let res = match polished {
        Some((px, pz, py, pres)) => {
            x = px;
            z = pz;
            y = py;
            was_polished = true;
            pres
        }
        None => match last {
            Some(r) => r,
            None => residuals(&s, &x, &z, &y, &mut ws, settings),
        },
    };

    // unscale
    let cinv = T::one() / s.c;
    let x: Vec<T> = (0..n).map(|j| x[j] * s.d[j]).collect();
    let z: Vec<T> = (0..m).map(|i| z[i] * s.e_inv[i]).collect();
    let y: Vec<T> = (0..m).map(|i| y[i] * s.e[i] * cinv).collect();
    let objective = qp.objective(&x).to_f64_lossy();

    Ok(Solution {
        x,
        z,
        y,
        report: SolveReport {
            status,
            iterations,
            primal_residual: res.prim.to_f64_lossy(),
            dual_residual: res.dual.to_f64_lossy(),
            primal_tolerance: res.eps_prim.to_f64_lossy(),
            dual_tolerance: res.eps_dual.to_f64_lossy(),
            objective,
            polished: was_polished,
            rho_updates,
            final_rho: rho.to_f64_lossy(),
            wall_time_secs: start.elapsed().as_secs_f64(),
            history,
        },
    })
}

/// Solves the equality-constrained problem on the active set guessed from `(z, y)`.
///
/// The guess is corrected over a few rounds: active rows whose multiplier has the
/// wrong sign are released and violated rows are added. Each reduced system is
/// solved by proximal iterative refinement anchored at the ADMM iterate, which keeps
/// rank-deficient reduced systems well posed. Returns the polished scaled iterate
/// only when it satisfies the KKT conditions.
fn polish<T: Scalar>(
    s: &Scaled<T>,
    x: &[T],
    z: &[T],
    y: &[T],
    ws: &mut Workspace<T>,
    settings: &SolverSettings,
) -> Option<Iterate<T>> {
    let n = x.len();
    let m = z.len();
    let cinv = T::one() / s.c;
    // −1 lower bound active, +1 upper bound active, 0 inactive
    let mut state: Vec<i8> = (0..m)
        .map(|i| {
            if z[i] - s.l[i] < -y[i] {
                -1
            } else if s.u[i] - z[i] < y[i] {
                1
            } else {
                0
            }
        })
        .collect();
    let mut x_anchor = x.to_vec();
    let mut y_anchor = y.to_vec();
    let delta = T::lit(settings.polish_delta);

    for _ in 0..settings.polish_rounds.max(1) {
        let active: Vec<usize> = (0..m).filter(|&i| state[i] != 0).collect();
        let na = active.len();
        let mut row_of = vec![usize::MAX; m];
        for (k, &i) in active.iter().enumerate() {
            row_of[i] = k;
        }
        let a_red: Vec<(usize, usize, T)> = s
            .a
            .triplets()
            .filter(|(r, _, _)| row_of[*r] != usize::MAX)
            .map(|(r, c, v)| (row_of[r], c, v))
            .collect();

        let mut trip: Vec<(usize, usize, T)> = Vec::with_capacity(s.p.nnz() + n + a_red.len() + na);
        trip.extend(s.p.triplets());
        trip.extend((0..n).map(|j| (j, j, delta)));
        trip.extend(a_red.iter().map(|&(r, c, v)| (c, n + r, v)));
        trip.extend((0..na).map(|k| (n + k, n + k, -delta)));
        let k_reg = CscMatrix::from_triplets(n + na, n + na, &trip);
        let mut ldl = LdlFactor::new(&k_reg, &kkt_signs(n, na), T::lit(1e-13), delta).ok()?;

        let mut trip_true: Vec<(usize, usize, T)> = s.p.triplets().collect();
        trip_true.extend(a_red.iter().map(|&(r, c, v)| (c, n + r, v)));
        let k_true = CscMatrix::from_triplets(n + na, n + na, &trip_true);

        let mut rhs = vec![T::zero(); n + na];
        for j in 0..n {
            rhs[j] = -s.q[j];
        }
        for (k, &i) in active.iter().enumerate() {
            rhs[n + k] = if state[i] < 0 { s.l[i] } else { s.u[i] };
        }
        let mut sol = vec![T::zero(); n + na];
        sol[..n].copy_from_slice(&x_anchor);
        for (k, &i) in active.iter().enumerate() {
            sol[n + k] = y_anchor[i];
        }
        // refinement stops once the KKT residual no longer shrinks: on an
        // inconsistent active set the multipliers would otherwise grow like 1/δ
        let mut r = vec![T::zero(); n + na];
        let mut best = sol.clone();
        let mut best_norm = T::infinity();
        for _ in 0..=settings.polish_refine_iter.max(1) {
            k_true.sym_upper_mul_vec_into(&sol, &mut r);
            for i in 0..n + na {
                r[i] = rhs[i] - r[i];
            }
            let norm = norm_inf(&r);
            if !(norm < best_norm) {
                break;
            }
            best_norm = norm;
            best.copy_from_slice(&sol);
            ldl.solve_in_place(&mut r);
            for i in 0..n + na {
                sol[i] += r[i];
            }
        }
        let sol = best;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }

        let xp = sol[..n].to_vec();
        let mut yp = vec![T::zero(); m];
        for (k, &i) in active.iter().enumerate() {
            yp[i] = sol[n + k];
        }
        let mut ax = vec![T::zero(); m];
        s.a.mul_vec_into(&xp, &mut ax);
        let zp: Vec<T> = (0..m).map(|i| project(ax[i], s.l[i], s.u[i])).collect();
        // multipliers pointing into the feasible set are clipped to zero; the dual
        // residual then measures whether the clipped point is still stationary
        let mut wrong: Vec<(T, usize)> = Vec::new();
        let mut yc = yp.clone();
        for &i in &active {
            if s.u[i] - s.l[i] < T::lit(RHO_EQ_TOL) {
                continue;
            }
            if (state[i] < 0 && yp[i] > T::zero()) || (state[i] > 0 && yp[i] < T::zero()) {
                wrong.push(((yp[i] * s.e[i] * cinv).abs(), i));
                yc[i] = T::zero();
            }
        }
        let res = residuals(s, &xp, &zp, &yc, ws, settings);
        if res.prim <= res.eps_prim && res.dual <= res.eps_dual {
            return Some((xp, zp, yc, res));
        }
        let mut changed = false;
        for i in 0..m {
            if state[i] == 0 {
                if (s.l[i] - ax[i]) * s.e_inv[i] > res.eps_prim {
                    state[i] = -1;
                    changed = true;
                } else if (ax[i] - s.u[i]) * s.e_inv[i] > res.eps_prim {
                    state[i] = 1;
                    changed = true;
                }
            }
        }
        for &(mag, i) in &wrong {
            if mag > res.eps_dual {
                state[i] = 0;
                changed = true;
            }
        }
        if !changed {
            return None;
        }
        x_anchor = xp;
        y_anchor = yp;
    }
    None
}

fn primal_infeasible<T: Scalar>(s: &Scaled<T>, y: &[T], y_prev: &[T], settings: &SolverSettings) -> bool {
    let m = y.len();
    let big = T::lit(1e20);
    let mut dy: Vec<T> = (0..m).map(|i| y[i] - y_prev[i]).collect();
    for i in 0..m {
        if s.u[i] >= big {
            dy[i] = dy[i].min(T::zero());
        }
        if s.l[i] <= -big {
            dy[i] = dy[i].max(T::zero());
        }
    }
    let norm_dy = (0..m).fold(T::zero(), |acc, i| acc.max((dy[i] * s.e[i]).abs()));
    if norm_dy <= T::lit(DIVISION_TOL) {
        return false;
    }
    let eps = T::lit(settings.eps_prim_inf) * norm_dy;
    let mut support = T::zero();
    for i in 0..m {
        if dy[i] > T::zero() {
            support += s.u[i] * dy[i];
        } else if dy[i] < T::zero() {
            support += s.l[i] * dy[i];
        }
    }
    if !(support < -eps) {
        return false;
    }
    let aty = s.a.tr_mul_vec(&dy);
    (0..aty.len()).all(|j| (aty[j] * s.d_inv[j]).abs() <= eps)
}

fn dual_infeasible<T: Scalar>(s: &Scaled<T>, x: &[T], x_prev: &[T], settings: &SolverSettings) -> bool {
    let n = x.len();
    let dx: Vec<T> = (0..n).map(|j| x[j] - x_prev[j]).collect();
    let norm_dx = (0..n).fold(T::zero(), |acc, j| acc.max((dx[j] * s.d[j]).abs()));
    if norm_dx <= T::lit(DIVISION_TOL) {
        return false;
    }
    let eps = T::lit(settings.eps_dual_inf) * norm_dx;
    if !(dot(&s.q, &dx) / s.c < -eps) {
        return false;
    }
    let pdx = s.p.sym_upper_mul_vec(&dx);
    if (0..n).any(|j| (pdx[j] * s.d_inv[j]).abs() / s.c > eps) {
        return false;
    }
    let adx = s.a.mul_vec(&dx);
    let big = T::lit(1e20);
    (0..adx.len()).all(|i| {
        let v = adx[i] * s.e_inv[i];
        (s.u[i] >= big || v <= eps) && (s.l[i] <= -big || v >= -eps)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn projection_onto_halfline() {
        // minimize z² s.t. z ≥ 1
        let qp = StandardQp::new(
            CscMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]),
            vec![0.0],
            CscMatrix::identity(1),
            vec![1.0],
            vec![f64::INFINITY],
        )
        .unwrap();
        let sol = solve(&qp, &settings()).unwrap();
        assert_eq!(sol.report.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6, "{}", sol.x[0]);
        assert!((sol.report.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn small_lp_with_equality() {
        // minimize −x0 − x1 s.t. x0 + x1 = 1, 0 ≤ x ≤ 0.7 → objective −1
        let qp = StandardQp::new(
            CscMatrix::zeros(2, 2),
            vec![-1.0, -1.0],
            CscMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (2, 1, 1.0)]),
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.7, 0.7],
        )
        .unwrap();
        let sol = solve(&qp, &settings()).unwrap();
        assert!(sol.report.status.is_optimal());
        assert!((sol.report.objective + 1.0).abs() < 1e-5);
    }

    #[test]
    fn detects_primal_infeasibility() {
        // x ≥ 2 and x ≤ 1
        let qp = StandardQp::new(
            CscMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]),
            vec![0.0],
            CscMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]),
            vec![2.0, f64::NEG_INFINITY],
            vec![f64::INFINITY, 1.0],
        )
        .unwrap();
        let sol = solve(&qp, &settings()).unwrap();
        assert_eq!(sol.report.status, SolveStatus::PrimalInfeasible);
    }

    #[test]
    fn detects_unbounded() {
        // minimize −x s.t. x ≥ 0
        let qp = StandardQp::new(
            CscMatrix::zeros(1, 1),
            vec![-1.0],
            CscMatrix::identity(1),
            vec![0.0],
            vec![f64::INFINITY],
        )
        .unwrap();
        let sol = solve(&qp, &settings()).unwrap();
        assert_eq!(sol.report.status, SolveStatus::DualInfeasible);
    }

    #[test]
    fn max_iter_returns_iterate() {
        let qp = StandardQp::new(
            CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]),
            vec![1.0, -1.0],
            CscMatrix::identity(2),
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let s = SolverSettings {
            max_iter: 3,
            polish: false,
            ..settings()
        };
        let sol = solve(&qp, &s).unwrap();
        assert_eq!(sol.report.status, SolveStatus::MaxIterations);
        assert_eq!(sol.report.iterations, 3);
        assert_eq!(sol.x.len(), 2);
    }

    #[test]
    fn works_in_single_precision() {
        let qp = StandardQp::<f32>::new(
            CscMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]),
            vec![0.0],
            CscMatrix::identity(1),
            vec![1.0],
            vec![f32::INFINITY],
        )
        .unwrap();
        let s = SolverSettings {
            eps_abs: 1e-4,
            eps_rel: 1e-4,
            ..settings()
        };
        let sol = solve(&qp, &s).unwrap();
        assert!(sol.report.status.is_optimal());
        assert!((sol.x[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_settings() {
        let s = SolverSettings {
            alpha: 2.5,
            ..settings()
        };
        assert!(s.validate().is_err());
        let s = SolverSettings {
            max_iter: 0,
            ..settings()
        };
        assert!(s.validate().is_err());
    }
}
