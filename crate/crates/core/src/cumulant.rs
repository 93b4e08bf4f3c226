//! Second-order cumulant dynamics of collective generalized Gell-Mann operators.
//!
//! State variables are scaled: μ_k = ⟨G_k⟩/N and c_kl = (⟨{G_k,G_l}⟩/2 − ⟨G_k⟩⟨G_l⟩)/N.
//! Time is τ = NΓt and the drive enters as ω = Ω/(NΓ).

use crate::atomic_model::DipoleOps;
use crate::error::{Error, Result};
use crate::linalg::{c, sym_eig, CMat, RMat};
use crate::ode::{dopri5, Tolerance};
use nalgebra::DVector;
use num_complex::Complex64 as C64;

#[derive(Clone, Debug)]
pub struct GellMannBasis {
    pub ell: usize,
    pub generators: Vec<CMat>,
    /// f[k][l][m] = Tr([g_k, g_l] g_m)/(4i).
    pub f: Vec<f64>,
    /// d[k][l][m] = Tr({g_k, g_l} g_m)/4.
    pub d: Vec<f64>,
}

impl GellMannBasis {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn f(&self, k: usize, l: usize, m: usize) -> f64 {
        let n = self.len();
        self.f[(k * n + l) * n + m]
    }

    pub fn d(&self, k: usize, l: usize, m: usize) -> f64 {
        let n = self.len();
        self.d[(k * n + l) * n + m]
    }

    /// Coefficients o_k = Tr(O g_k)/2 of the traceless part of O.
    pub fn coefficients(&self, op: &CMat) -> Vec<C64> {
        self.generators.iter().map(|g| (op * g).trace() * 0.5).collect()
    }

    /// Single-particle expectation values ⟨ψ|g_k|ψ⟩.
    pub fn expectations(&self, psi: &DVector<C64>) -> Vec<f64> {
        self.generators.iter().map(|g| psi.dotc(&(g * psi)).re).collect()
    }

    /// Matrix C(v) with [Σ_k v_k G_k, G_a] = Σ_m C(v)_am G_m.
    pub fn adjoint_action(&self, v: &[C64]) -> CMat {
        let n = self.len();
        CMat::from_fn(n, n, |a, m| {
            let mut s = C64::new(0.0, 0.0);
            for (k, vk) in v.iter().enumerate() {
                s += vk * self.f(k, a, m);
            }
            s * C64::new(0.0, 2.0)
        })
    }

    /// Real orthogonal R with V† g_k V = Σ_l R_kl g_l.
    pub fn conjugation(&self, v: &CMat) -> RMat {
        let n = self.len();
        let vd = v.adjoint();
        RMat::from_fn(n, n, |k, l| ((&vd * &self.generators[k] * v * &self.generators[l]).trace() * 0.5).re)
    }
}

pub fn gellmann_basis(ell: usize) -> GellMannBasis {
    assert!(ell >= 2, "ell must be at least 2");
    let e = |i: usize, j: usize| {
        let mut m = CMat::zeros(ell, ell);
        m[(i, j)] = c(1.0, 0.0);
        m
    };
    let mut gens = Vec::new();
    for j in 0..ell {
        for k in j + 1..ell {
            gens.push(e(j, k) + e(k, j));
        }
    }
    for j in 0..ell {
        for k in j + 1..ell {
            gens.push(e(j, k) * c(0.0, -1.0) + e(k, j) * c(0.0, 1.0));
        }
    }
    for l in 1..ell {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = CMat::zeros(ell, ell);
        for j in 0..l {
            m[(j, j)] = c(norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) * norm, 0.0);
        gens.push(m);
    }
    let n = gens.len();
    let mut f = vec![0.0; n * n * n];
    let mut d = vec![0.0; n * n * n];
    for k in 0..n {
        for l in 0..n {
            let p = &gens[k] * &gens[l];
            let q = &gens[l] * &gens[k];
            let com = &p - &q;
            let anti = &p + &q;
            for m in 0..n {
                f[(k * n + l) * n + m] = ((&com * &gens[m]).trace() / C64::new(0.0, 4.0)).re;
                d[(k * n + l) * n + m] = ((&anti * &gens[m]).trace() / 4.0).re;
            }
        }
    }
    GellMannBasis { ell, generators: gens, f, d }
}

/// Precomputed equations of motion for one dipole scheme.
#[derive(Clone, Debug)]
pub struct CumulantSystem {
    pub basis: GellMannBasis,
    u: Vec<C64>,
    w: Vec<C64>,
    r: CMat,
    s: CMat,
    hx: CMat,
}

impl CumulantSystem {
    pub fn new(ops: &DipoleOps) -> Self {
        let basis = gellmann_basis(ops.d_minus.nrows());
        let u = basis.coefficients(&ops.d_minus);
        let w: Vec<C64> = u.iter().map(|z| z.conj()).collect();
        let h = basis.coefficients(&ops.d_x);
        let r = -basis.adjoint_action(&u);
        let s = basis.adjoint_action(&w);
        let hx = basis.adjoint_action(&h);
        CumulantSystem { basis, u, w, r, s, hx }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    fn n_state(&self) -> usize {
        let l = self.len();
        l + l * (l + 1) / 2
    }

    /// dy/dτ for y = (μ, upper triangle of c); `omega` = Ω/(NΓ) and
    /// `diss` scales the collective decay (1 for the physical model).
    pub fn rhs(&self, n_atoms: f64, omega: f64, diss: f64, y: &[f64], dy: &mut [f64]) {
        let l = self.len();
        let bs = &self.basis;
        let mu = &y[..l];
        let mut kap = CMat::zeros(l, l);
        let mut idx = l;
        for a in 0..l {
            for b in a..l {
                kap[(a, b)] = c(y[idx], 0.0);
                kap[(b, a)] = c(y[idx], 0.0);
                idx += 1;
            }
        }
        for a in 0..l {
            for b in 0..l {
                let mut fsum = 0.0;
                for (m, mv) in mu.iter().enumerate() {
                    fsum += bs.f(a, b, m) * mv;
                }
                kap[(a, b)] += c(0.0, fsum);
            }
        }
        let muc = DVector::from_iterator(l, mu.iter().map(|&v| c(v, 0.0)));
        let uv = DVector::from_vec(self.u.clone());
        let wv = DVector::from_vec(self.w.clone());
        let w_mu: C64 = wv.dot(&muc);
        let u_mu: C64 = uv.dot(&muc);
        let r_mu = &self.r * &muc;
        let s_mu = &self.s * &muc;
        let h_mu = &self.hx * &muc;
        let kt_w = kap.transpose() * &wv;
        let k_u = &kap * &uv;
        let r_ktw = &self.r * &kt_w;
        let s_ku = &self.s * &k_u;
        let inv_n = 1.0 / n_atoms;
        let iom = c(0.0, omega);
        for a in 0..l {
            let v = iom * h_mu[a]
                + c(0.5 * diss, 0.0) * (w_mu * r_mu[a] + s_mu[a] * u_mu + (r_ktw[a] + s_ku[a]) * inv_n);
            dy[a] = v.re;
        }
        let hk = &self.hx * &kap;
        let rk = &self.r * &kap;
        let sk = &self.s * &kap;
        let kh = &kap * self.hx.transpose();
        let kr = &kap * self.r.transpose();
        let ks = &kap * self.s.transpose();
        let half = 0.5 * diss;
        let mut idx = l;
        for a in 0..l {
            for b in a..l {
                let one = |a: usize, b: usize| {
                    let ham = iom * (hk[(a, b)] + kh[(a, b)]);
                    let dis = kt_w[b] * r_mu[a]
                        + rk[(a, b)] * w_mu
                        + kt_w[a] * r_mu[b]
                        + kr[(a, b)] * w_mu
                        + sk[(a, b)] * u_mu
                        + k_u[b] * s_mu[a]
                        + ks[(a, b)] * u_mu
                        + k_u[a] * s_mu[b];
                    ham + dis * half
                };
                dy[idx] = 0.5 * (one(a, b) + one(b, a)).re;
                idx += 1;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CumulantState {
    pub n: f64,
    pub mu: Vec<f64>,
    pub cov: RMat,
    pub time: f64,
}

impl CumulantState {
    /// Product state ψ^{⊗N}.
    pub fn product(sys: &CumulantSystem, psi: &DVector<C64>, n: f64) -> Self {
        let bs = &sys.basis;
        let mu = bs.expectations(psi);
        let l = bs.len();
        let cov = RMat::from_fn(l, l, |a, b| {
            let sym = (&bs.generators[a] * &bs.generators[b] + &bs.generators[b] * &bs.generators[a]) * c(0.5, 0.0);
            psi.dotc(&(sym * psi)).re - mu[a] * mu[b]
        });
        CumulantState { n, mu, cov, time: 0.0 }
    }

    pub fn first(&self) -> Vec<f64> {
        self.mu.iter().map(|m| m * self.n).collect()
    }

    /// Symmetrized second moments ⟨{G_k, G_l}⟩/2.
    pub fn second(&self) -> RMat {
        let l = self.mu.len();
        RMat::from_fn(l, l, |a, b| self.n * self.cov[(a, b)] + self.n * self.n * self.mu[a] * self.mu[b])
    }

    /// Σ_k ⟨G_k²⟩.
    pub fn casimir(&self) -> f64 {
        let l = self.mu.len();
        (0..l).map(|k| self.n * self.cov[(k, k)] + self.n * self.n * self.mu[k] * self.mu[k]).sum()
    }

    fn pack(&self) -> Vec<f64> {
        let l = self.mu.len();
        let mut y = self.mu.clone();
        for a in 0..l {
            for b in a..l {
                y.push(self.cov[(a, b)]);
            }
        }
        y
    }

    fn unpack(n: f64, l: usize, y: &[f64], time: f64) -> Self {
        let mut cov = RMat::zeros(l, l);
        let mut idx = l;
        for a in 0..l {
            for b in a..l {
                cov[(a, b)] = y[idx];
                cov[(b, a)] = y[idx];
                idx += 1;
            }
        }
        CumulantState { n, mu: y[..l].to_vec(), cov, time }
    }

    /// Applies the single-particle unitary V to every atom.
    pub fn rotate(&self, basis: &GellMannBasis, v: &CMat) -> Self {
        let r = basis.conjugation(v);
        let mu = &r * DVector::from_vec(self.mu.clone());
        CumulantState { n: self.n, mu: mu.iter().copied().collect(), cov: &r * &self.cov * r.transpose(), time: self.time }
    }
}

/// Analytic Casimir value of a symmetric N-atom state.
pub fn casimir_symmetric(ell: usize, n: f64) -> f64 {
    let l = ell as f64;
    n * 2.0 * (l * l - 1.0) / l + n * (n - 1.0) * 2.0 * (l - 1.0) / l
}

#[derive(Clone, Debug)]
pub struct CumulantTrajectory {
    pub states: Vec<CumulantState>,
}

/// Integrates over the τ grid with the drive ω = Ω/(NΓ).
pub fn integrate(sys: &CumulantSystem, state: &CumulantState, omega: f64, diss: f64, taus: &[f64], rtol: f64) -> Result<CumulantTrajectory> {
    let l = sys.len();
    let n = state.n;
    let y0 = state.pack();
    debug_assert_eq!(y0.len(), sys.n_state());
    let mut tol = Tolerance::new(rtol, rtol * 1e-2);
    tol.h_init = 1e-3;
    let shifted: Vec<f64> = taus.iter().map(|t| t - taus[0]).collect();
    let (ys, _) = dopri5(|_, y, dy| sys.rhs(n, omega, diss, y, dy), &shifted, &y0, tol)?;
    let mut states = Vec::with_capacity(ys.len());
    for (y, &t) in ys.iter().zip(taus) {
        let st = CumulantState::unpack(n, l, y, state.time + t - taus[0]);
        let min = sym_eig(&st.cov).0[0];
        if min < -1e-4 {
            return Err(Error::Closure { t: st.time, eig: min });
        }
        states.push(st);
    }
    Ok(CumulantTrajectory { states })
}

/// Physical-unit wrapper: Ω and Γ are rates and `t_grid` is in seconds.
pub fn cumulant_integrate(sys: &CumulantSystem, state: &CumulantState, big_omega: f64, gamma: f64, t_grid: &[f64]) -> Result<CumulantTrajectory> {
    if gamma > 0.0 {
        let ng = state.n * gamma;
        let taus: Vec<f64> = t_grid.iter().map(|t| t * ng).collect();
        integrate(sys, state, big_omega / ng, 1.0, &taus, 1e-8)
    } else {
        integrate(sys, state, big_omega, 0.0, t_grid, 1e-8)
    }
}

#[derive(Clone, Debug)]
pub struct SpinCovariance {
    /// Σ̃/(2N).
    pub sigma_tilde: RMat,
    /// The 2(ℓ−1) largest eigenvalues, ascending.
    pub leading: Vec<f64>,
}

impl SpinCovariance {
    pub fn from_cov(cov: &RMat, ell: usize) -> Self {
        let vals = sym_eig(cov).0;
        let k = 2 * (ell - 1);
        let leading = vals[vals.len() - k..].to_vec();
        SpinCovariance { sigma_tilde: cov.clone(), leading }
    }

    pub fn min(&self) -> f64 {
        self.leading[0]
    }
}

pub fn spin_covariance(state: &CumulantState, ell: usize) -> SpinCovariance {
    SpinCovariance::from_cov(&state.cov, ell)
}
