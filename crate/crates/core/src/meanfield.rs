//! Superradiance potential of the F=1/2 → F'=3/2 scheme driven with σ+ light,
//! its dark and critical points, and the mean-field angle dynamics.

use crate::error::{Error, Result};
use crate::ode::{dopri5, Tolerance};
use std::f64::consts::PI;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Populations of the two driven transitions, (cos²(β/2), sin²(β/2)).
pub fn weights(beta: f64) -> (f64, f64) {
    let c = (beta / 2.0).cos();
    let s = (beta / 2.0).sin();
    (c * c, s * s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldPoint {
    pub theta: f64,
    pub beta: f64,
    pub v: f64,
    pub dv: f64,
    pub d2v: f64,
}

pub fn potential(beta: f64, theta: f64) -> MeanFieldPoint {
    let (cb2, sb2) = weights(beta);
    let v = cb2 * (theta / (2.0 * SQRT3)).sin().powi(2) + sb2 * (theta / 2.0).sin().powi(2);
    MeanFieldPoint { theta, beta, v, dv: dv(beta, theta), d2v: d2v(beta, theta) }
}

pub fn dv(beta: f64, theta: f64) -> f64 {
    let (cb2, sb2) = weights(beta);
    cb2 / (2.0 * SQRT3) * (theta / SQRT3).sin() + sb2 / 2.0 * theta.sin()
}

pub fn d2v(beta: f64, theta: f64) -> f64 {
    let (cb2, sb2) = weights(beta);
    cb2 / 6.0 * (theta / SQRT3).cos() + sb2 / 2.0 * theta.cos()
}

/// Ω = NΓ ∂V/∂θ at θ₀, which makes θ₀ a fixed point of the mean-field flow.
pub fn stationary_drive(beta: f64, theta0: f64, n: f64, gamma: f64) -> f64 {
    n * gamma * dv(beta, theta0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

pub fn classify(d2v: f64) -> Stability {
    if d2v.abs() < 1e-9 {
        Stability::Marginal
    } else if d2v > 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StationaryPoint {
    pub theta: f64,
    pub stability: Stability,
}

impl StationaryPoint {
    pub fn stable(&self) -> bool {
        self.stability == Stability::Stable
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a < tol {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Roots of `f` in [lo, hi], bracketed on a grid of spacing ≤ 1e−3 and refined
/// by bisection to `tol`.
pub fn grid_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    if !(hi > lo) {
        return Vec::new();
    }
    let steps = ((hi - lo) / 1e-3).ceil().max(1.0) as usize;
    let dx = (hi - lo) / steps as f64;
    let mut roots: Vec<f64> = Vec::new();
    let push = |r: f64, roots: &mut Vec<f64>| {
        if roots.last().map_or(true, |&p| (r - p).abs() > 10.0 * tol) {
            roots.push(r);
        }
    };
    let mut xa = lo;
    let mut fa = f(xa);
    for k in 1..=steps {
        let xb = lo + k as f64 * dx;
        let fb = f(xb);
        if fa == 0.0 {
            push(xa, &mut roots);
        } else if fa * fb < 0.0 {
            push(bisect(&f, xa, xb, tol), &mut roots);
        }
        xa = xb;
        fa = fb;
    }
    if fa == 0.0 {
        push(xa, &mut roots);
    }
    roots
}

/// Zeros of ∂V/∂θ in the window, classified by the sign of ∂²V/∂θ².
pub fn find_dark_states(beta: f64, lo: f64, hi: f64) -> Vec<StationaryPoint> {
    grid_roots(|t| dv(beta, t), lo, hi, 1e-10)
        .into_iter()
        .map(|theta| StationaryPoint { theta, stability: classify(d2v(beta, theta)) })
        .collect()
}

/// Zeros of ∂²V/∂θ² in the window.
pub fn find_critical_points(beta: f64, lo: f64, hi: f64) -> Vec<f64> {
    grid_roots(|t| d2v(beta, t), lo, hi, 1e-12)
}

/// The stable dark state closest to `theta`.
pub fn nearest_dark_state(beta: f64, theta: f64, half_width: f64) -> Option<f64> {
    find_dark_states(beta, theta - half_width, theta + half_width)
        .into_iter()
        .filter(|p| p.stable())
        .map(|p| p.theta)
        .min_by(|a, b| (a - theta).abs().total_cmp(&(b - theta).abs()))
}

/// β for which θ is a mean-field dark state, when one exists.
pub fn dark_manifold_beta(theta: f64) -> Option<f64> {
    let r = -(theta / SQRT3).sin() / (SQRT3 * theta.sin());
    if !(r >= 0.0) || !r.is_finite() {
        return None;
    }
    Some(2.0 * r.sqrt().atan())
}

/// Solves tan(θ/√3) = tanθ/√3 near `theta_guess` and returns the (θ, β) point
/// where the dark and critical conditions hold together.
pub fn dark_critical_intersection(theta_guess: f64) -> Result<(f64, f64)> {
    // tan(θ/√3) − tanθ/√3 times cosθ·cos(θ/√3)
    let g = |t: f64| (t / SQRT3).sin() * t.cos() - t.sin() * (t / SQRT3).cos() / SQRT3;
    let gp = |t: f64| {
        (t / SQRT3).cos() * t.cos() / SQRT3 - (t / SQRT3).sin() * t.sin() - t.cos() * (t / SQRT3).cos() / SQRT3
            + t.sin() * (t / SQRT3).sin() / 3.0
    };
    let mut lo = theta_guess - 0.5;
    let mut hi = theta_guess + 0.5;
    let mut t = theta_guess;
    let bracketed = g(lo) * g(hi) < 0.0;
    for _ in 0..100 {
        let gv = g(t);
        let d = gp(t);
        let mut next = if d != 0.0 { t - gv / d } else { f64::NAN };
        if bracketed {
            if gv * g(lo) < 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
        } else if !next.is_finite() || (next - theta_guess).abs() > 0.5 {
            return Err(Error::NoSolution(format!("Newton iteration left the branch near θ = {theta_guess}")));
        }
        let done = (next - t).abs() < 1e-12;
        t = next;
        if done {
            break;
        }
    }
    let radicand = -(t / SQRT3).cos() / (3.0 * t.cos());
    if !(radicand >= 0.0) || !radicand.is_finite() {
        return Err(Error::NoSolution(format!(
            "branch at θ = {:.6}π has radicand {radicand:.4} < 0",
            t / PI
        )));
    }
    if t.abs() < 1e-8 {
        return Err(Error::NoSolution("trivial root θ = 0 has undefined β".into()));
    }
    Ok((t, 2.0 * radicand.sqrt().atan()))
}

#[derive(Clone, Debug)]
pub struct BlochTrajectory {
    /// Times in units of 1/(NΓ).
    pub times: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Per-atom Bloch vectors of the m = −1/2 and m = +1/2 transitions.
    pub bloch: Vec<[[f64; 3]; 2]>,
}

pub fn bloch_vectors(beta: f64, theta: f64) -> [[f64; 3]; 2] {
    let (cb2, sb2) = weights(beta);
    let v = |r: f64, c: f64| [0.0, r * (c * theta).sin(), -r * (c * theta).cos()];
    [v(cb2 / 2.0, 1.0 / SQRT3), v(sb2 / 2.0, 1.0)]
}

/// Integrates θ̇ = Ω − NΓ ∂V/∂θ over the physical time grid `t_grid`.
pub fn evolve_meanfield(beta: f64, theta0: f64, omega: f64, n: f64, gamma: f64, t_grid: &[f64]) -> Result<BlochTrajectory> {
    let ng = n * gamma;
    let mut tol = Tolerance::new(1e-10, 1e-12);
    tol.h_init = 1e-3 / ng.max(1e-300);
    let (ys, _) = dopri5(|_, y, dy| dy[0] = omega - ng * dv(beta, y[0]), t_grid, &[theta0], tol)?;
    let thetas: Vec<f64> = ys.iter().map(|y| y[0]).collect();
    Ok(BlochTrajectory {
        times: t_grid.iter().map(|t| t * ng).collect(),
        bloch: thetas.iter().map(|&t| bloch_vectors(beta, t)).collect(),
        thetas,
    })
}
