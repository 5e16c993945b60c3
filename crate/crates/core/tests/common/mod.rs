//! Test-only oracles, written from the model definitions and independent of the
//! sparse reformulation and the ADMM solver.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soilsd::{DailySignal, SdConfig};

/// Dense QP `min ½zᵀPz + qᵀz  s.t.  l ≤ Az ≤ u` with full (symmetric) `p`.
pub struct DenseQp {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl DenseQp {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let n = self.n();
        let mut v = 0.0;
        for i in 0..n {
            v += self.q[i] * z[i];
            for j in 0..n {
                v += 0.5 * z[i] * self.p[i][j] * z[j];
            }
        }
        v
    }
}

/// Dense assembly of the decomposition QP, in the documented variable/row layout,
/// built term by term from the component cost definitions.
pub fn dense_sd_qp(y: &[Option<f64>], cfg: &SdConfig) -> DenseQp {
    let t_len = y.len();
    let plen = cfg.period.min(t_len);
    let known: Vec<usize> = (0..t_len).filter(|&t| y[t].is_some()).collect();
    let nk = known.len();
    let th = 0;
    let dr = plen;
    let so = plen + 1;
    let re = so + t_len;
    let cu = re + nk;
    let sl = cu + t_len - 2;
    let n = sl + t_len - 1;
    let m = 2 * nk + t_len + 2 * (t_len - 2) + 2 * (t_len - 1);

    // tiling matrix R (T × P) and its second differences
    let mut r = vec![vec![0.0; plen]; t_len];
    for t in 0..t_len {
        r[t][t % plen] = 1.0;
    }
    let mut d2r = vec![vec![0.0; plen]; t_len - 2];
    for t in 0..t_len - 2 {
        for j in 0..plen {
            d2r[t][j] = r[t][j] - 2.0 * r[t + 1][j] + r[t + 2][j];
        }
    }
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..plen {
        for j in 0..plen {
            let mut s = 0.0;
            for row in &d2r {
                s += row[i] * row[j];
            }
            p[th + i][th + j] = 2.0 * cfg.lambda2 * s;
        }
    }

    let mut q = vec![0.0; n];
    for t in 0..t_len {
        q[so + t] = -cfg.lambda4b;
    }
    for k in 0..nk {
        q[re + k] = 1.0;
    }
    for t in 0..t_len - 2 {
        q[cu + t] = cfg.lambda4a;
    }
    for t in 0..t_len - 1 {
        q[sl + t] = cfg.lambda4c;
    }

    let mut a = vec![vec![0.0; n]; m];
    let mut l = vec![f64::NEG_INFINITY; m];
    let mut u = vec![f64::INFINITY; m];
    let mut row = 0;
    let tau = cfg.tau1;
    for (k, &t) in known.iter().enumerate() {
        let ct = t as f64 / (t_len - 1) as f64;
        // u_k ≥ τ·(y − g)  and  u_k ≥ (τ − 1)·(y − g)
        for w in [tau, tau - 1.0] {
            a[row][re + k] = 1.0;
            a[row][th + t % plen] = w;
            a[row][dr] = w * ct;
            a[row][so + t] = w;
            l[row] = w * y[t].unwrap();
            row += 1;
        }
    }
    for t in 0..t_len {
        a[row][so + t] = 1.0;
        u[row] = 0.0;
        row += 1;
    }
    for t in 0..t_len - 2 {
        for sign in [-1.0, 1.0] {
            a[row][cu + t] = 1.0;
            a[row][so + t] = sign;
            a[row][so + t + 1] = -2.0 * sign;
            a[row][so + t + 2] = sign;
            l[row] = 0.0;
            row += 1;
        }
    }
    for t in 0..t_len - 1 {
        // w ≥ τ4·d  and  w ≥ (τ4 − 1)·d with d = s[t+1] − s[t]
        for w in [cfg.tau4, cfg.tau4 - 1.0] {
            a[row][sl + t] = 1.0;
            a[row][so + t + 1] = -w;
            a[row][so + t] = w;
            l[row] = 0.0;
            row += 1;
        }
    }
    assert_eq!(row, m);
    DenseQp { p, q, a, l, u }
}

/// Components `(x2, x3, x4)` read from a stacked solution of [`dense_sd_qp`].
pub fn dense_components(z: &[f64], t_len: usize, cfg: &SdConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let plen = cfg.period.min(t_len);
    let x2 = (0..t_len).map(|t| z[t % plen]).collect();
    let x3 = (0..t_len).map(|t| z[plen] * t as f64 / (t_len - 1) as f64).collect();
    let x4 = z[plen + 1..plen + 1 + t_len].to_vec();
    (x2, x3, x4)
}

/// Primal-dual interior-point (Mehrotra predictor-corrector) solver for dense QPs,
/// applied to `min ½zᵀPz + qᵀz s.t. Gz ≤ h` after splitting two-sided rows.
pub struct IpmResult {
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn ipm_solve(qp: &DenseQp) -> IpmResult {
    let n = qp.n();
    // sparse rows of G for cheap products
    let mut g: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut h: Vec<f64> = Vec::new();
    for (i, row) in qp.a.iter().enumerate() {
        let nz: Vec<(usize, f64)> = row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect();
        if qp.u[i].is_finite() {
            g.push(nz.clone());
            h.push(qp.u[i]);
        }
        if qp.l[i].is_finite() {
            g.push(nz.iter().map(|&(j, v)| (j, -v)).collect());
            h.push(-qp.l[i]);
        }
    }
    let m = g.len();
    let pm = DMatrix::from_fn(n, n, |i, j| qp.p[i][j]);
    let gz = |z: &DVector<f64>| -> DVector<f64> {
        DVector::from_iterator(m, g.iter().map(|r| r.iter().map(|&(j, v)| v * z[j]).sum::<f64>()))
    };
    let gtv = |v: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for (i, r) in g.iter().enumerate() {
            for &(j, a) in r {
                out[j] += a * v[i];
            }
        }
        out
    };
    let q = DVector::from_vec(qp.q.clone());
    let hv = DVector::from_vec(h);

    let mut z = DVector::zeros(n);
    let mut s = DVector::from_element(m, 1.0);
    let mut lam = DVector::from_element(m, 1.0);
    let scale = 1.0 + q.amax().max(hv.amax());
    let mut converged = false;
    let mut it = 0;
    while it < 200 {
        it += 1;
        let rd = &pm * &z + &q + gtv(&lam);
        let rp = gz(&z) + &s - &hv;
        let mu = s.dot(&lam) / m as f64;
        if rd.amax() < 1e-9 * scale && rp.amax() < 1e-9 * scale && mu < 1e-11 * scale {
            converged = true;
            break;
        }
        let w: Vec<f64> = (0..m).map(|i| lam[i] / s[i]).collect();
        let mut mat = pm.clone();
        for (i, r) in g.iter().enumerate() {
            for &(a, va) in r {
                for &(b, vb) in r {
                    mat[(a, b)] += w[i] * va * vb;
                }
            }
        }
        // diagonal shift grows until the barrier-weighted system factors
        let mut shift = 1e-12;
        let chol = loop {
            let mut shifted = mat.clone();
            for i in 0..n {
                shifted[(i, i)] += shift;
            }
            match shifted.cholesky() {
                Some(c) => break Some(c),
                None if shift < 1e-6 => shift *= 100.0,
                None => break None,
            }
        };
        let Some(chol) = chol else { break };
        let newton = |rc: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>) {
            // rhs = −r_d + Gᵀ S⁻¹ (r_c − Λ r_p)
            let tmp = DVector::from_iterator(m, (0..m).map(|i| (rc[i] - lam[i] * rp[i]) / s[i]));
            let rhs = -&rd + gtv(&tmp);
            let dz = chol.solve(&rhs);
            let gdz = gz(&dz);
            let ds = -&rp - &gdz;
            let dl = DVector::from_iterator(m, (0..m).map(|i| (-rc[i] - lam[i] * ds[i]) / s[i]));
            (dz, ds, dl)
        };
        let step = |ds: &DVector<f64>, dl: &DVector<f64>| -> f64 {
            let mut a: f64 = 1.0;
            for i in 0..m {
                if ds[i] < 0.0 {
                    a = a.min(-s[i] / ds[i]);
                }
                if dl[i] < 0.0 {
                    a = a.min(-lam[i] / dl[i]);
                }
            }
            a
        };
        let rc_aff = s.component_mul(&lam);
        let (_, ds_a, dl_a) = newton(&rc_aff);
        let a_aff = step(&ds_a, &dl_a);
        let mu_aff = (&s + a_aff * &ds_a).dot(&(&lam + a_aff * &dl_a)) / m as f64;
        let sigma = (mu_aff / mu).powi(3);
        let rc = DVector::from_iterator(m, (0..m).map(|i| s[i] * lam[i] + ds_a[i] * dl_a[i] - sigma * mu));
        let (dz, ds, dl) = newton(&rc);
        let a = (0.99 * step(&ds, &dl)).min(1.0);
        z += a * dz;
        s += a * ds;
        lam += a * dl;
    }
    let zv: Vec<f64> = z.iter().copied().collect();
    IpmResult {
        objective: qp.objective(&zv),
        z: zv,
        iterations: it,
        converged,
    }
}

/// A random prepared (normalized) signal with soiling-like structure and missing days.
pub fn random_signal(seed: u64, days: usize, period: usize, missing: f64) -> DailySignal<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = rng.gen_range(0.01..0.05);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let slope = rng.gen_range(-2e-5..0.0);
    let rate = rng.gen_range(0.0..0.003);
    let mut soil = 0.0;
    let values = (0..days)
        .map(|t| {
            if rng.gen_bool(1.0 / 25.0) {
                soil = 0.0;
            } else {
                soil -= rate;
            }
            let v = 1.0
                + amp * (std::f64::consts::TAU * t as f64 / period as f64 + phase).sin()
                + slope * t as f64
                + soil
                + rng.gen_range(-0.01..0.01);
            (!rng.gen_bool(missing)).then_some(v)
        })
        .collect();
    DailySignal::normalized(values).unwrap()
}
