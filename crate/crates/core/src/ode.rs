//! Adaptive Dormand–Prince 5(4) integrator with dense output grid stepping.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Tolerance {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerance { rtol, atol, h_init: 1e-3, h_max: f64::INFINITY, max_steps: 10_000_000 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

/// Integrates y' = f(t, y) through the monotone output grid `ts`, starting at
/// `ts[0]` with value `y0`. Returns the state at every grid point.
pub fn dopri5<F>(mut f: F, ts: &[f64], y0: &[f64], tol: Tolerance) -> Result<(Vec<Vec<f64>>, Stats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut stats = Stats::default();
    let mut out = vec![y0.to_vec()];
    if ts.len() < 2 {
        return Ok((out, stats));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = ts[0];
    let mut h = tol.h_init.min(ts[ts.len() - 1] - ts[0]).max(1e-12);
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    f(t, &y, &mut k[0]);
    stats.evals += 1;
    for &target in &ts[1..] {
        if target < t {
            return Err(Error::Integrator { t, msg: "time grid is not monotone".into() });
        }
        while t < target {
            if stats.accepted + stats.rejected > tol.max_steps {
                return Err(Error::Integrator { t, msg: "step budget exhausted".into() });
            }
            let mut last = false;
            h = h.min(tol.h_max);
            let h_prop = h;
            if t + h >= target {
                h = target - t;
                last = true;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integrator { t, msg: format!("step size underflow (h = {h:e})") });
            }
            let stage = |k: &Vec<Vec<f64>>, coef: &[f64], tmp: &mut Vec<f64>, y: &Vec<f64>| {
                for i in 0..n {
                    let mut s = 0.0;
                    for (j, c) in coef.iter().enumerate() {
                        s += c * k[j][i];
                    }
                    tmp[i] = y[i] + h * s;
                }
            };
            stage(&k, &[A21], &mut tmp, &y);
            f(t + C2 * h, &tmp, &mut k[1]);
            stage(&k, &[A31, A32], &mut tmp, &y);
            f(t + C3 * h, &tmp, &mut k[2]);
            stage(&k, &[A41, A42, A43], &mut tmp, &y);
            f(t + C4 * h, &tmp, &mut k[3]);
            stage(&k, &[A51, A52, A53, A54], &mut tmp, &y);
            f(t + C5 * h, &tmp, &mut k[4]);
            stage(&k, &[A61, A62, A63, A64, A65], &mut tmp, &y);
            f(t + h, &tmp, &mut k[5]);
            for i in 0..n {
                ynew[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
            }
            f(t + h, &ynew, &mut k[6]);
            stats.evals += 6;
            let mut err = 0.0;
            for i in 0..n {
                let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                stats.rejected += 1;
                h *= 0.1;
                continue;
            }
            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { target } else { t + h };
                std::mem::swap(&mut y, &mut ynew);
                let k6 = std::mem::take(&mut k[6]);
                k[0] = k6;
                k[6] = vec![0.0; n];
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = if last { h_prop.max(h * fac) } else { h * fac };
            } else {
                stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
