//! Holstein–Primakoff description around the condensate |ψ(θ₀;β)⟩: the boson
//! frame ĉ₀…ĉ₃, Gaussian covariance dynamics of the quadratures and the
//! resulting squeezing spectrum.

use crate::error::{Error, Result};
use crate::linalg::{c, sym_eig, CMat, RMat};
use crate::meanfield::{d2v, dv, weights, SQRT3};
use nalgebra::{DVector, Matrix3};
use num_complex::Complex64 as C64;

const TINY: f64 = 1e-12;
/// |cosφ| below this counts as the critical manifold.
const CRIT: f64 = 1e-9;

/// Single-particle condensate amplitudes exp(−iθ d^x)(cos β/2, sin β/2, 0, 0).
pub fn condensate(beta: f64, theta: f64) -> DVector<C64> {
    let (cb, sb) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let h = theta / (2.0 * SQRT3);
    let q = theta / 2.0;
    DVector::from_vec(vec![
        c(cb * h.cos(), 0.0),
        c(sb * q.cos(), 0.0),
        c(0.0, -cb * h.sin()),
        c(0.0, -sb * q.sin()),
    ])
}

#[derive(Clone, Debug)]
pub struct HpFrame {
    pub theta0: f64,
    pub beta: f64,
    pub x: f64,
    pub y: f64,
    pub cos_phi: f64,
    pub sin_phi: f64,
    /// Rows are the coefficients of ĉ₀…ĉ₃ over the level annihilators.
    pub m: CMat,
    /// ĉ₂, ĉ₃ were completed by Gram–Schmidt because sinφ or sinβ vanished.
    pub convention_completed: bool,
}

impl HpFrame {
    /// Frame for the stationary drive Ω = NΓ ∂V/∂θ at θ₀.
    pub fn new(beta: f64, theta0: f64) -> Result<Self> {
        Self::with_drive(beta, theta0, dv(beta, theta0))
    }

    /// Frame with an explicit drive ω = Ω/(NΓ); θ₀ must be stationary for it.
    pub fn with_drive(beta: f64, theta0: f64, omega: f64) -> Result<Self> {
        let (cb2, sb2) = weights(beta);
        let x = (cb2 / 6.0 + sb2 / 2.0).sqrt();
        let y2 = x * x - 2.0 * omega * omega;
        if y2 < -TINY {
            return Err(Error::Instability(format!("y² = {y2:.3e} < 0 at θ₀ = {theta0}, β = {beta}")));
        }
        let y = y2.max(0.0).sqrt();
        if y < TINY {
            return Err(Error::Instability(format!("y = 0 at θ₀ = {theta0}, β = {beta}")));
        }
        let cos_phi = (d2v(beta, theta0) / (x * y)).clamp(-1.0, 1.0);
        let sin_phi = (1.0 - cos_phi * cos_phi).max(0.0).sqrt();

        let (cb, sb) = ((beta / 2.0).cos(), (beta / 2.0).sin());
        let h = theta0 / (2.0 * SQRT3);
        let q = theta0 / 2.0;
        let th = theta0;
        let row0: Vec<C64> = condensate(beta, theta0).iter().map(|z| z.conj()).collect();
        let den = (cb * cb + 3.0 * sb * sb).sqrt();
        let row1: Vec<C64> = vec![
            c(0.0, cb * h.sin()),
            c(0.0, SQRT3 * sb * q.sin()),
            c(cb * h.cos(), 0.0),
            c(SQRT3 * sb * q.cos(), 0.0),
        ]
        .into_iter()
        .map(|z| z / den)
        .collect();

        let mut m = CMat::zeros(4, 4);
        for j in 0..4 {
            m[(0, j)] = row0[j];
            m[(1, j)] = row1[j];
        }
        let degenerate = sin_phi < 1e-9 || beta.sin().abs() < 1e-9;
        if !degenerate {
            let a = th.sin() - (th / SQRT3).sin() / SQRT3;
            let b = th.cos() - (th / SQRT3).cos();
            let v1 = [c(0.0, sb * h.cos()), c(0.0, -cb * q.cos()), c(-sb * h.sin(), 0.0), c(cb * q.sin(), 0.0)];
            let v2 = [
                c(0.0, -SQRT3 * sb * h.sin()),
                c(0.0, cb * q.sin()),
                c(-SQRT3 * sb * h.cos(), 0.0),
                c(cb * q.cos(), 0.0),
            ];
            let k2 = beta.sin() / (2.0 * 2f64.sqrt() * y * sin_phi);
            let k3 = beta.sin() / (4.0 * SQRT3 * x * y * sin_phi);
            for j in 0..4 {
                m[(2, j)] = v1[j] * (k2 * a) + v2[j] * (k2 * b / (cb * cb + 3.0 * sb * sb));
                m[(3, j)] = v1[j] * (k3 * b) - v2[j] * (k3 * a);
            }
            polish_rows(&mut m, 2);
        } else {
            complete_rows(&mut m, 2);
        }
        Ok(HpFrame { theta0, beta, x, y, cos_phi, sin_phi, m, convention_completed: degenerate })
    }

    pub fn phi(&self) -> f64 {
        self.sin_phi.atan2(self.cos_phi)
    }

    pub fn stable(&self) -> bool {
        self.cos_phi > 0.0
    }

    /// Single-particle wavefunction of mode μ (ĉ_μ = a(φ_μ)).
    pub fn mode(&self, mu: usize) -> DVector<C64> {
        DVector::from_iterator(4, self.m.row(mu).iter().map(|z| z.conj()))
    }

    pub fn modes(&self) -> CMat {
        self.m.map(|z| z.conj()).transpose()
    }

    pub fn unitarity_error(&self) -> f64 {
        crate::linalg::max_abs(&(&self.m * self.m.adjoint() - CMat::identity(4, 4)))
    }

    /// Coefficients of d⁻ expanded to first order around the condensate:
    /// d⁻ ≈ √N Σ_μ (u_μ ĉ_μ + v_μ ĉ_μ†) + mean value.
    pub fn jump_linearization(&self, d_minus: &CMat) -> ([C64; 4], [C64; 4]) {
        let t = &self.m * d_minus * self.m.adjoint();
        let mut u = [C64::new(0.0, 0.0); 4];
        let mut v = [C64::new(0.0, 0.0); 4];
        for mu in 0..4 {
            u[mu] = t[(0, mu)];
            v[mu] = t[(mu, 0)];
        }
        (u, v)
    }
}

/// Frame with Ω given in physical units.
pub fn hp_frame(beta: f64, theta0: f64, n: f64, gamma: f64, omega: Option<f64>) -> Result<HpFrame> {
    match omega {
        Some(o) => HpFrame::with_drive(beta, theta0, o / (n * gamma)),
        None => HpFrame::new(beta, theta0),
    }
}

/// Completes rows `from..` of `m` to an orthonormal set by Gram–Schmidt over
/// the level basis.
fn complete_rows(m: &mut CMat, from: usize) {
    let n = m.nrows();
    let mut k = from;
    for cand in 0..n {
        if k == n {
            break;
        }
        let mut v: Vec<C64> = (0..n).map(|j| if j == cand { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect();
        for r in 0..k {
            let ov: C64 = (0..n).map(|j| m[(r, j)].conj() * v[j]).sum();
            for j in 0..n {
                v[j] -= ov * m[(r, j)];
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for j in 0..n {
                m[(k, j)] = v[j] / norm;
            }
            k += 1;
        }
    }
}

/// One modified Gram–Schmidt pass over rows `from..`, removing the rounding
/// error of the closed-form rows at small sinφ.
fn polish_rows(m: &mut CMat, from: usize) {
    let n = m.nrows();
    for k in from..n {
        for r in 0..k {
            let ov: C64 = (0..n).map(|j| m[(r, j)].conj() * m[(k, j)]).sum();
            for j in 0..n {
                let d = ov * m[(r, j)];
                m[(k, j)] -= d;
            }
        }
        let norm = (0..n).map(|j| m[(k, j)].norm_sqr()).sum::<f64>().sqrt();
        for j in 0..n {
            m[(k, j)] /= norm;
        }
    }
}

/// 1 − f and (1 − f)/cosφ with f = exp(−τ x y cosφ), accurate as cosφ → 0.
fn decay_factors(frame: &HpFrame, tau: f64) -> (f64, f64, f64) {
    let k = frame.x * frame.y;
    let arg = tau * k * frame.cos_phi;
    let one_minus_f = -(-arg).exp_m1();
    let g = if frame.cos_phi.abs() < 1e-300 {
        tau * k
    } else if arg.abs() < 1e-6 {
        tau * k * (1.0 - arg / 2.0 + arg * arg / 6.0)
    } else {
        one_minus_f / frame.cos_phi
    };
    (1.0 - one_minus_f, one_minus_f, g)
}

/// Quadrature second moments Σ_ij = ⟨{R_i, R_j}⟩ over (X₁, X₂, X₃, Y₁, Y₂, Y₃).
#[derive(Clone, Debug)]
pub struct CovarianceState {
    pub sigma: RMat,
    pub time: f64,
    pub critical: bool,
}

impl CovarianceState {
    pub fn vacuum() -> Self {
        CovarianceState { sigma: RMat::identity(6, 6), time: 0.0, critical: false }
    }

    pub fn xx(&self) -> RMat {
        self.sigma.view((0, 0), (3, 3)).into_owned()
    }

    pub fn yy(&self) -> RMat {
        self.sigma.view((3, 3), (3, 3)).into_owned()
    }

    pub fn xy_max(&self) -> f64 {
        self.sigma.view((0, 3), (3, 3)).iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        sym_eig(&self.sigma).0[0]
    }
}

/// Covariance at time τ = NΓt starting from the vacuum of ĉ₁…ĉ₃.
pub fn covariance_at(frame: &HpFrame, tau: f64) -> Result<CovarianceState> {
    if tau < 0.0 {
        return Err(Error::Domain(format!("NΓt = {tau} < 0")));
    }
    if frame.cos_phi < -CRIT {
        return Err(Error::Instability(format!("cosφ = {:.3e} < 0: no stationary Gaussian state", frame.cos_phi)));
    }
    let (f, one_minus_f, g) = decay_factors(frame, tau);
    let (x, y, cp, sp) = (frame.x, frame.y, frame.cos_phi.max(0.0), frame.sin_phi);
    let one_minus_f2 = one_minus_f * (1.0 + f);
    let mut s = RMat::zeros(6, 6);
    s[(0, 0)] = (y / x) * cp * one_minus_f2 + f * f;
    s[(0, 1)] = sp * ((y / x) * one_minus_f2 - f * g);
    s[(1, 0)] = s[(0, 1)];
    s[(1, 1)] = 1.0 + sp * sp * ((y / x) * (1.0 + f) * g + g * g);
    s[(2, 2)] = 1.0;
    s[(3, 3)] = (x / y) * (1.0 + f) * g + f * f + sp * sp * g * g;
    s[(3, 4)] = -sp * g;
    s[(4, 3)] = s[(3, 4)];
    s[(4, 4)] = 1.0;
    s[(5, 5)] = 1.0;
    Ok(CovarianceState { sigma: s, time: tau, critical: frame.cos_phi.abs() <= CRIT })
}

/// Bogoliubov maps X^b = T_x X^c and Y^b = T_y Y^c.
pub fn bogoliubov(frame: &HpFrame) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    if frame.cos_phi <= 1e-9 {
        return Err(Error::Degenerate(format!("Bogoliubov map singular at cosφ = {:.3e}", frame.cos_phi)));
    }
    let (x, y, cp, sp) = (frame.x, frame.y, frame.cos_phi, frame.sin_phi);
    let q = (x * y * cp).sqrt();
    let tx = Matrix3::new(x / q, 0.0, 0.0, -sp / cp, 1.0, 0.0, 0.0, 0.0, 1.0);
    let ty = Matrix3::new(y * cp / q, y * sp / q, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
    Ok((tx, ty))
}

fn block_diag(a: &Matrix3<f64>, b: &Matrix3<f64>) -> RMat {
    let mut m = RMat::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = a[(i, j)];
            m[(i + 3, j + 3)] = b[(i, j)];
        }
    }
    m
}

/// Full 6×6 map R^b = B R^c.
pub fn bogoliubov_matrix(frame: &HpFrame) -> Result<RMat> {
    let (tx, ty) = bogoliubov(frame)?;
    Ok(block_diag(&tx, &ty))
}

/// Gaussian evolution of an arbitrary covariance over Δτ in the given frame:
/// the b̂₁ mode relaxes to vacuum, b̂₂ and b̂₃ are untouched.
pub fn evolve_covariance(frame: &HpFrame, sigma: &RMat, dtau: f64) -> Result<RMat> {
    let b = bogoliubov_matrix(frame)?;
    let binv = b.clone().try_inverse().ok_or_else(|| Error::Degenerate("Bogoliubov map not invertible".into()))?;
    let mut sb = &b * sigma * b.transpose();
    let f = (-dtau * frame.x * frame.y * frame.cos_phi).exp();
    let in_b1 = |i: usize| i == 0 || i == 3;
    for i in 0..6 {
        for j in 0..6 {
            match (in_b1(i), in_b1(j)) {
                (true, true) => {
                    let d = if i == j { 1.0 } else { 0.0 };
                    sb[(i, j)] = d * (1.0 - f * f) + sb[(i, j)] * f * f;
                }
                (true, false) | (false, true) => sb[(i, j)] *= f,
                _ => {}
            }
        }
    }
    Ok(&binv * sb * binv.transpose())
}

#[derive(Clone, Debug)]
pub struct SqueezingSpectrum {
    /// (ξ²₁, ξ²₂, ξ²₃, ξ²₄): X squeezed, Y squeezed, X anti-squeezed, Y anti-squeezed.
    pub xi2: [f64; 4],
    /// Eigenvalues belonging to the untouched ĉ₃ quadratures.
    pub unit: [f64; 2],
    /// All six eigenvalues, ascending.
    pub all: Vec<f64>,
    /// Eigenvectors as columns over (X₁, X₂, X₃, Y₁, Y₂, Y₃), aligned with `all`.
    pub vectors: RMat,
    pub critical: bool,
}

impl SqueezingSpectrum {
    pub fn min(&self) -> f64 {
        self.all[0]
    }
}

fn split_block(vals: &[f64], vecs: &RMat, mode3: usize) -> (f64, f64, f64) {
    let k3 = (0..3).max_by(|&a, &b| vecs[(mode3, a)].abs().total_cmp(&vecs[(mode3, b)].abs())).unwrap();
    let rest: Vec<f64> = (0..3).filter(|&k| k != k3).map(|k| vals[k]).collect();
    (rest[0].min(rest[1]), rest[0].max(rest[1]), vals[k3])
}

/// Eigen-decomposition of Σ in the ĉ quadrature basis.
pub fn squeezing_spectrum(cov: &CovarianceState) -> Result<SqueezingSpectrum> {
    let s = &cov.sigma;
    let asym = (s - s.transpose()).iter().map(|v| v.abs()).fold(0.0, f64::max);
    if asym > 1e-10 {
        return Err(Error::Malformed(format!("covariance asymmetric by {asym:.3e}")));
    }
    let (all, vectors) = sym_eig(s);
    let scale = s.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if cov.xy_max() <= 1e-12 * scale {
        let (vx, ex) = sym_eig(&cov.xx());
        let (vy, ey) = sym_eig(&cov.yy());
        let (x1, x3, xu) = split_block(&vx, &ex, 2);
        let (y1, y3, yu) = split_block(&vy, &ey, 2);
        return Ok(SqueezingSpectrum { xi2: [x1, y1, x3, y3], unit: [xu, yu], all, vectors, critical: cov.critical });
    }
    Ok(SqueezingSpectrum {
        xi2: [all[0], all[1], all[5], all[4]],
        unit: [all[2], all[3]],
        all,
        vectors,
        critical: cov.critical,
    })
}

/// Closed-form (ξ²₁, ξ²₂, ξ²₃, ξ²₄) at time τ from the A_x, A_y quadratics.
pub fn closed_form_xi2(frame: &HpFrame, tau: f64) -> [f64; 4] {
    let (f, _, g) = decay_factors(frame, tau);
    let (x, y, sp) = (frame.x, frame.y, frame.sin_phi);
    let s2g2 = sp * sp * g * g;
    let roots = |a: f64| {
        let hi = (a + 1.0) / 2.0 + (((a - 1.0) / 2.0).powi(2) + s2g2).sqrt();
        let prod = a - s2g2;
        (prod / hi, hi)
    };
    let ax = (y / x) * (1.0 + f) * g - (1.0 - 2.0 * f) + g * g;
    let ay = (x / y) * (1.0 + f) * g - (1.0 - 2.0 * f) + g * g;
    let (x1, x3) = roots(ax);
    let (y1, y3) = roots(ay);
    [x1, y1, x3, y3]
}

/// Steady-state spectrum (f = 0). At cosφ = 0 returns the limits {0, ∞}
/// and leaves `vectors` zero.
pub fn steady_state_squeezing(frame: &HpFrame) -> Result<SqueezingSpectrum> {
    if frame.cos_phi < -CRIT {
        return Err(Error::Instability(format!("cosφ = {:.3e} < 0", frame.cos_phi)));
    }
    let critical = frame.cos_phi <= CRIT;
    let xi2 = if critical {
        [0.0, 0.0, f64::INFINITY, f64::INFINITY]
    } else {
        let (x, y, cp) = (frame.x, frame.y, frame.cos_phi);
        let t2 = (frame.sin_phi / cp).powi(2);
        let roots = |a: f64| {
            let hi = (a + 1.0) / 2.0 + (((a - 1.0) / 2.0).powi(2) + t2).sqrt();
            ((a - t2) / hi, hi)
        };
        let (x1, x3) = roots(y / (x * cp) + t2);
        let (y1, y3) = roots(x / (y * cp) + t2);
        [x1, y1, x3, y3]
    };
    let mut all = vec![xi2[0], xi2[1], 1.0, 1.0, xi2[2], xi2[3]];
    all.sort_by(|a, b| a.total_cmp(b));
    let vectors = if critical { RMat::zeros(6, 6) } else { sym_eig(&covariance_at(frame, f64::INFINITY)?.sigma).1 };
    Ok(SqueezingSpectrum { xi2, unit: [1.0, 1.0], all, vectors, critical })
}

/// Products ξ²₁ξ²₃ and ξ²₂ξ²₄ implied by the steady-state quadratics.
pub fn steady_state_products(frame: &HpFrame) -> (f64, f64) {
    let (x, y, cp) = (frame.x, frame.y, frame.cos_phi);
    (y / (x * cp), x / (y * cp))
}

#[derive(Clone, Debug)]
pub struct DecoherenceEstimate {
    pub xi2_effective: [f64; 4],
    /// Optimal NΓt from the small-(1−f) analysis.
    pub tau_opt: f64,
    pub xi2_opt: f64,
    pub in_regime: bool,
}

/// ξ² = ξ²₀ + γ̃t with γ̃ = Γ/C, evaluated at τ = NΓt.
pub fn decoherence_adjusted(frame: &HpFrame, n: f64, coop: f64, tau: f64) -> Result<DecoherenceEstimate> {
    if !(coop > 0.0) {
        return Err(Error::Domain(format!("cooperativity C = {coop} must be positive")));
    }
    let base = closed_form_xi2(frame, tau);
    let drift = if coop.is_infinite() { 0.0 } else { tau / (n * coop) };
    let nc = n * coop;
    Ok(DecoherenceEstimate {
        xi2_effective: base.map(|v| v + drift),
        tau_opt: (2.0 * nc).sqrt() / frame.x,
        xi2_opt: (2.0 / frame.x) * (2.0 / nc).sqrt(),
        in_regime: frame.cos_phi * frame.y * (2.0 * nc).sqrt() <= 0.1,
    })
}

#[derive(Clone, Debug)]
pub struct FiniteNOptimum {
    /// Predicted optimum of (1 − f)/cosφ.
    pub g_opt: f64,
    /// Steady-state variant: optimal cosφ = 1/g_opt.
    pub cos_phi_steady: f64,
    pub xi2_best: f64,
}

/// Balance of the leading HP squeezing rate against the O(Γ) anti-squeezing
/// leak, in the regime cosφ ≪ 1 − f ≪ 1.
pub fn finite_n_optimum(frame: &HpFrame, n: f64) -> Result<FiniteNOptimum> {
    if n < 10.0 {
        return Err(Error::Domain(format!("N = {n} < 10")));
    }
    let (x, y) = (frame.x, frame.y);
    let g = (2.0 * n * y * y).powf(0.25);
    let a = 2.0 * (y / x) * g + 1.0 + g * g;
    let hi = (a + 1.0) / 2.0 + (((a - 1.0) / 2.0).powi(2) + g * g).sqrt();
    Ok(FiniteNOptimum { g_opt: g, cos_phi_steady: 1.0 / g, xi2_best: (a - g * g) / hi })
}
