//! Separability bound (ΔΛ_μ)² ≥ n₀ − ⟨Λ_μ⟩²/N for Λ_μ = ĉ₀†ĉ_μ + h.c.

use crate::cumulant::{CumulantState, GellMannBasis};
use crate::error::{Error, Result};
use crate::exact_ed::{trace_product, DensityMatrix, SymmetricBasis};
use crate::linalg::{c, outer, vdot, CMat};
use nalgebra::DVector;
use num_complex::Complex64 as C64;

pub const TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    /// Λ built from |μ⟩.
    X,
    /// Λ built from i|μ⟩.
    Y,
}

#[derive(Clone, Debug)]
pub struct WitnessReport {
    pub label: String,
    pub variance: f64,
    /// n₀ − ⟨Λ⟩²/N, the bound the report is judged against.
    pub bound: f64,
    /// n₀ + n_μ − ⟨Λ⟩²/N.
    pub bound_full: f64,
    pub violated: bool,
    /// bound − variance; positive when violated.
    pub margin: f64,
    pub hp_xi2: Option<f64>,
}

pub fn witness_check(n0: f64, n_mu: f64, mean_lambda: f64, var_lambda: f64, n: f64) -> WitnessReport {
    let bound = n0 - mean_lambda * mean_lambda / n;
    WitnessReport {
        label: String::new(),
        variance: var_lambda,
        bound,
        bound_full: bound + n_mu,
        violated: var_lambda < bound - TOLERANCE,
        margin: bound - var_lambda,
        hp_xi2: None,
    }
}

/// Moments (n₀, n_μ, ⟨Λ⟩, (ΔΛ)²) of the relevant collective operators.
pub trait CollectiveMoments {
    fn atoms(&self) -> f64;
    fn mean(&self, op: &CMat) -> f64;
    fn variance(&self, op: &CMat) -> f64;
}

pub struct EdState<'a> {
    pub rho: &'a DensityMatrix,
    pub basis: &'a SymmetricBasis,
}

impl CollectiveMoments for EdState<'_> {
    fn atoms(&self) -> f64 {
        self.basis.n as f64
    }
    fn mean(&self, op: &CMat) -> f64 {
        self.rho.expect(&self.basis.collective(op)).re
    }
    fn variance(&self, op: &CMat) -> f64 {
        let a = self.basis.collective(op);
        let n = self.rho.dim;
        let mut y = vec![c(0.0, 0.0); n * n];
        a.mul_dense_into(&self.rho.data, &mut y);
        let m = self.rho.expect(&a).re;
        trace_product(&a, &y, n).re - m * m
    }
}

pub struct CumulantView<'a> {
    pub state: &'a CumulantState,
    pub basis: &'a GellMannBasis,
}

impl CollectiveMoments for CumulantView<'_> {
    fn atoms(&self) -> f64 {
        self.state.n
    }
    fn mean(&self, op: &CMat) -> f64 {
        let ell = self.basis.ell as f64;
        let o = self.basis.coefficients(op);
        let traceless: f64 = o.iter().zip(&self.state.mu).map(|(a, m)| a.re * m).sum();
        self.state.n * (traceless + op.trace().re / ell)
    }
    fn variance(&self, op: &CMat) -> f64 {
        let o: Vec<f64> = self.basis.coefficients(op).iter().map(|z| z.re).collect();
        let mut s = 0.0;
        for (a, oa) in o.iter().enumerate() {
            for (b, ob) in o.iter().enumerate() {
                s += oa * ob * self.state.cov[(a, b)];
            }
        }
        self.state.n * s
    }
}

/// Witness along `direction`, which must be orthogonal to the condensate.
pub fn witness_from_state<S: CollectiveMoments>(
    state: &S,
    condensate: &DVector<C64>,
    direction: &DVector<C64>,
    quadrature: Quadrature,
) -> Result<WitnessReport> {
    let psi = condensate / c(condensate.norm(), 0.0);
    let mut mu = direction / c(direction.norm(), 0.0);
    let overlap = vdot(&psi, &mu).norm();
    if overlap > 1e-8 {
        return Err(Error::Domain(format!("direction overlaps the condensate: |⟨0|μ⟩| = {overlap:.3e}")));
    }
    if quadrature == Quadrature::Y {
        mu *= c(0.0, 1.0);
    }
    let lam = outer(&psi, &mu) + outer(&mu, &psi);
    let n0 = state.mean(&outer(&psi, &psi));
    let n_mu = state.mean(&outer(&mu, &mu));
    let mean = state.mean(&lam);
    let var = state.variance(&lam);
    let mut rep = witness_check(n0, n_mu, mean, var, state.atoms());
    rep.label = format!("{quadrature:?}");
    Ok(rep)
}

/// Dominant eigenvector of the one-body density matrix 1/ℓ + Σ_k μ_k g_k/2.
pub fn condensate_from_moments(basis: &GellMannBasis, mu: &[f64]) -> DVector<C64> {
    let ell = basis.ell;
    let mut rho1 = CMat::identity(ell, ell) * c(1.0 / ell as f64, 0.0);
    for (g, m) in basis.generators.iter().zip(mu) {
        rho1 += g * c(0.5 * m, 0.0);
    }
    let eig = nalgebra::SymmetricEigen::new(rho1);
    let (k, _) = eig.eigenvalues.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    eig.eigenvectors.column(k).into_owned()
}

/// Direction μ with Σ_k v_k g_k ≈ |ψ⟩⟨μ| + h.c. on the condensate.
pub fn direction_from_generator(basis: &GellMannBasis, v: &[f64], psi: &DVector<C64>) -> DVector<C64> {
    let ell = basis.ell;
    let mut o = CMat::zeros(ell, ell);
    for (g, vk) in basis.generators.iter().zip(v) {
        o += g * c(*vk, 0.0);
    }
    let opsi = &o * psi;
    let along = psi.dotc(&opsi);
    let mu = opsi - psi * along;
    let n = mu.norm();
    if n > 0.0 {
        mu / c(n, 0.0)
    } else {
        mu
    }
}
