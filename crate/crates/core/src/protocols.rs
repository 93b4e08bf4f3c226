//! Transfer of squeezing from a driven point to a dark state: the Bloch
//! rotation, the noise-frame map (λ, λ′) and the beam-splitter rotations
//! U_rot,1 and U_rot,2, applied to Gaussian, cumulant or exact states.

use crate::atomic_model::{single_particle_ops, LevelScheme};
use crate::cumulant::{CumulantState, GellMannBasis};
use crate::error::{Error, Result};
use crate::exact_ed::{rotate, DensityMatrix, SymmetricBasis};
use crate::hp_gaussian::{CovarianceState, HpFrame};
use crate::linalg::{c, dagger, hermiticity_error, max_abs, op_norm, outer, vdot, CMat, RMat};
use crate::meanfield::{classify, d2v, dv, nearest_dark_state, Stability};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Collective rotation exp(−i·angle·Σᵢ generatorᵢ).
#[derive(Clone, Debug)]
pub struct RotationStep {
    pub generator: CMat,
    pub angle: f64,
    pub label: String,
}

impl RotationStep {
    pub fn new(generator: CMat, angle: f64, label: &str) -> Result<Self> {
        let err = hermiticity_error(&generator);
        if err > 1e-12 {
            return Err(Error::Domain(format!("generator of '{label}' is not Hermitian (error {err:.2e})")));
        }
        Ok(RotationStep { generator, angle, label: label.to_string() })
    }

    /// Single-particle unitary.
    pub fn unitary(&self) -> CMat {
        (&self.generator * c(0.0, -self.angle)).exp()
    }

    /// H with exp(iH) equal to the single-particle unitary.
    pub fn hamiltonian(&self) -> CMat {
        &self.generator * c(-self.angle, 0.0)
    }
}

fn proj(i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(4, 4);
    m[(i, j)] = c(1.0, 0.0);
    m
}

/// Named single-particle operators on the four-level basis
/// (g,−½), (g,+½), (e,+½), (e,+3/2); the lower m is "up" in each manifold.
pub struct SpinOperators;

impl SpinOperators {
    pub fn sx_g() -> CMat {
        (proj(0, 1) + proj(1, 0)) * c(0.5, 0.0)
    }
    pub fn sy_g() -> CMat {
        (proj(0, 1) - proj(1, 0)) * c(0.0, -0.5)
    }
    pub fn sz_g() -> CMat {
        (proj(0, 0) - proj(1, 1)) * c(0.5, 0.0)
    }
    pub fn sx_e() -> CMat {
        (proj(2, 3) + proj(3, 2)) * c(0.5, 0.0)
    }
    pub fn sy_e() -> CMat {
        (proj(2, 3) - proj(3, 2)) * c(0.0, -0.5)
    }
    pub fn sz_e() -> CMat {
        (proj(2, 2) - proj(3, 3)) * c(0.5, 0.0)
    }
    /// Ŝ^x_{−1/2}: the σ-transition starting at (g,−½).
    pub fn sx_minus() -> CMat {
        (proj(0, 2) + proj(2, 0)) * c(0.5, 0.0)
    }
    /// Ŝ^x_{1/2}.
    pub fn sx_plus() -> CMat {
        (proj(1, 3) + proj(3, 1)) * c(0.5, 0.0)
    }
    /// Π̂^x_{1/2} = ½|g,½⟩⟨e,½| + h.c.
    pub fn pi_x() -> CMat {
        (proj(1, 2) + proj(2, 1)) * c(0.5, 0.0)
    }
    /// T̂^x_{−1/2} = ½|g,−½⟩⟨e,3/2| + h.c.
    pub fn t_x() -> CMat {
        (proj(0, 3) + proj(3, 0)) * c(0.5, 0.0)
    }
}

/// Coefficients of a Hamiltonian on a set of named operators, 2·Tr(H O).
#[derive(Clone, Debug)]
pub struct OperatorDecomposition {
    pub terms: Vec<(String, f64)>,
    /// ‖H − Σ coef·O‖ after projection.
    pub residual: f64,
}

impl OperatorDecomposition {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == name).map(|t| t.1)
    }
}

pub fn decompose(h: &CMat) -> OperatorDecomposition {
    let ops: Vec<(&str, CMat)> = vec![
        ("Sx_-1/2", SpinOperators::sx_minus()),
        ("Sx_1/2", SpinOperators::sx_plus()),
        ("Pi_x", SpinOperators::pi_x()),
        ("T_x", SpinOperators::t_x()),
        ("Sy_g", SpinOperators::sy_g()),
        ("Sy_e", SpinOperators::sy_e()),
        ("Sx_g", SpinOperators::sx_g()),
        ("Sx_e", SpinOperators::sx_e()),
        ("Sz_g", SpinOperators::sz_g()),
        ("Sz_e", SpinOperators::sz_e()),
    ];
    let mut rest = h.clone();
    let mut terms = Vec::new();
    for (name, o) in &ops {
        let coef = 2.0 * (h * o).trace().re;
        rest -= o * c(coef, 0.0);
        terms.push((name.to_string(), coef));
    }
    OperatorDecomposition { terms, residual: op_norm(&rest) }
}

/// Transport of the source frame into the target frame through V:
/// T_μν = ⟨φ_μ(target)|V φ_ν(source)⟩.
pub fn mode_transfer(source: &HpFrame, target: &HpFrame, v: &CMat) -> CMat {
    CMat::from_fn(4, 4, |mu, nu| vdot(&target.mode(mu), &(v * source.mode(nu))))
}

fn bloch_unitary(theta1: f64, theta2: f64) -> CMat {
    let ops = single_particle_ops(&LevelScheme::half_to_three_half(), 1).expect("level scheme is valid");
    (&ops.d_x * c(0.0, -(theta2 - theta1))).exp()
}

/// (λ, λ′) for the rotation θ₁ → θ₂ at fixed β, from frame transport.
pub fn noise_rotation_map(beta: f64, theta1: f64, theta2: f64) -> Result<(f64, f64)> {
    let f1 = HpFrame::new(beta, theta1)?;
    let f2 = HpFrame::new(beta, theta2)?;
    let t = mode_transfer(&f1, &f2, &bloch_unitary(theta1, theta2));
    Ok((t[(2, 2)].re, t[(3, 2)].re))
}

#[derive(Clone, Debug)]
pub struct BeamSplitter {
    pub lambda: f64,
    pub tau: f64,
    /// Hermitian single-particle generator i(|t⟩⟨s| − |s⟩⟨t|).
    pub generator: CMat,
}

impl BeamSplitter {
    pub fn step(&self, label: &str) -> Result<RotationStep> {
        RotationStep::new(self.generator.clone(), self.tau, label)
    }
}

/// exp(τ(|t⟩⟨s| − |s⟩⟨t|)) with τ = cos⁻¹λ/√(1−λ²) maps |s⟩ onto |t⟩ for
/// normalized s, t with real overlap λ.
pub fn beam_splitter(s: &DVector<C64>, t: &DVector<C64>) -> Result<BeamSplitter> {
    let ov = vdot(s, t);
    if ov.im.abs() > 1e-9 {
        return Err(Error::Degenerate(format!("complex mode overlap {ov}")));
    }
    let lambda = ov.re;
    if lambda.abs() >= 1.0 - 1e-12 {
        return Err(Error::Degenerate(format!("modes coincide (λ = {lambda})")));
    }
    let k = outer(t, s) - outer(s, t);
    Ok(BeamSplitter { lambda, tau: beam_splitter_tau(lambda), generator: k * c(0.0, 1.0) })
}

pub fn beam_splitter_tau(lambda: f64) -> f64 {
    let w = (1.0 - lambda * lambda).sqrt();
    if w < 1e-4 {
        let e = 1.0 - lambda;
        return 1.0 + e / 3.0 + 2.0 * e * e / 15.0;
    }
    lambda.acos() / w
}

/// Beam splitter between frame modes i and j (rotating ĉ_j into ĉ_i).
pub fn beam_splitter_modes(frame: &HpFrame, i: usize, j: usize) -> Result<BeamSplitter> {
    beam_splitter(&frame.mode(j), &frame.mode(i))
}

/// U = (R_g R_e)† R_eg (R_g R_e) with R_g = exp(iπ(g·S_g)),
/// R_e = exp(iπ(e·S_e)) and R_eg = exp(iπ c Ŝ^x_{−1/2}).
#[derive(Clone, Debug)]
pub struct RDecomposition {
    /// (x, y, z) components on Ŝ_g.
    pub g: [f64; 3],
    /// (x, y, z) components on Ŝ_e.
    pub e: [f64; 3],
    pub c: f64,
    /// Operator-norm distance of the recomposed product to U, up to a global phase.
    pub residual: f64,
}

impl RDecomposition {
    pub fn r_g(&self) -> CMat {
        let h = SpinOperators::sx_g() * c(self.g[0], 0.0) + SpinOperators::sy_g() * c(self.g[1], 0.0) + SpinOperators::sz_g() * c(self.g[2], 0.0);
        (h * c(0.0, PI)).exp()
    }
    pub fn r_e(&self) -> CMat {
        let h = SpinOperators::sx_e() * c(self.e[0], 0.0) + SpinOperators::sy_e() * c(self.e[1], 0.0) + SpinOperators::sz_e() * c(self.e[2], 0.0);
        (h * c(0.0, PI)).exp()
    }
    pub fn r_eg(&self) -> CMat {
        (SpinOperators::sx_minus() * c(0.0, PI * self.c)).exp()
    }
    pub fn product(&self) -> CMat {
        let w = self.r_g() * self.r_e();
        dagger(&w) * self.r_eg() * w
    }
}

/// π rotation of a two-level block taking the normalized vector (a, b) to the
/// upper state; returns the unit axis (x, y, z) with positive z.
fn pi_axis(a: C64, b: C64) -> Result<[f64; 3]> {
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / n, b / n);
    let r = [2.0 * (a.conj() * b).re, 2.0 * (a.conj() * b).im, a.norm_sqr() - b.norm_sqr()];
    let v = [r[0], r[1], r[2] + 1.0];
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if len < 1e-9 {
        return Ok([1.0, 0.0, 0.0]);
    }
    Ok([v[0] / len, v[1] / len, v[2] / len])
}

/// Decomposes U = exp(a(|φ₁⟩⟨φ₂| − |φ₂⟩⟨φ₁|)); requires the ground and
/// excited parts of φ₁ and φ₂ to be parallel.
pub fn r_decomposition(phi1: &DVector<C64>, phi2: &DVector<C64>, a: f64) -> Result<RDecomposition> {
    let (g1, e1) = ((phi1[0], phi1[1]), (phi1[2], phi1[3]));
    let (g2, e2) = ((phi2[0], phi2[1]), (phi2[2], phi2[3]));
    let parallel = |p: (C64, C64), q: (C64, C64)| {
        let np = (p.0.norm_sqr() + p.1.norm_sqr()).sqrt();
        let nq = (q.0.norm_sqr() + q.1.norm_sqr()).sqrt();
        if np < 1e-12 || nq < 1e-12 {
            return 1.0;
        }
        (p.0.conj() * q.0 + p.1.conj() * q.1).norm() / (np * nq)
    };
    let pg = parallel(g1, g2);
    let pe = parallel(e1, e2);
    if pg < 1.0 - 1e-6 || pe < 1.0 - 1e-6 {
        return Err(Error::Degenerate(format!("manifold parts not parallel (ground {pg:.6}, excited {pe:.6})")));
    }
    let gref = if g1.0.norm() + g1.1.norm() > g2.0.norm() + g2.1.norm() { g1 } else { g2 };
    let eref = if e1.0.norm() + e1.1.norm() > e2.0.norm() + e2.1.norm() { e1 } else { e2 };
    let g = pi_axis(gref.0, gref.1)?;
    let e = pi_axis(eref.0, eref.1)?;
    let mut dec = RDecomposition { g, e, c: 0.0, residual: f64::INFINITY };
    let w = dec.r_g() * dec.r_e();
    let k = outer(phi1, phi2) - outer(phi2, phi1);
    let kp = &w * &k * dagger(&w);
    dec.c = 2.0 * a * kp[(0, 2)].im / PI;
    let u = (k * c(a, 0.0)).exp();
    let p = dec.product();
    let ph: C64 = p.iter().zip(u.iter()).map(|(x, y)| x.conj() * y).sum();
    let ph = if ph.norm() > 0.0 { ph / ph.norm() } else { c(1.0, 0.0) };
    dec.residual = op_norm(&(p * ph - u));
    Ok(dec)
}

#[derive(Clone, Debug)]
pub struct TransferProtocol {
    pub steps: Vec<RotationStep>,
    pub beta: f64,
    pub theta_source: f64,
    pub theta_dark: f64,
    pub frame_before: HpFrame,
    pub frame_after: HpFrame,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub phi_dark: f64,
    /// Beam-splitter parameter of U_rot,2.
    pub tau: f64,
}

impl TransferProtocol {
    /// Product of all single-particle unitaries, last step leftmost.
    pub fn unitary(&self) -> CMat {
        self.steps.iter().fold(CMat::identity(4, 4), |acc, s| s.unitary() * acc)
    }

    pub fn step(&self, label: &str) -> Option<&RotationStep> {
        self.steps.iter().find(|s| s.label == label)
    }

    pub fn h_rot1(&self) -> OperatorDecomposition {
        decompose(&self.step("u_rot1").expect("u_rot1 present").hamiltonian())
    }

    pub fn h_rot2(&self) -> OperatorDecomposition {
        decompose(&self.step("u_rot2").expect("u_rot2 present").hamiltonian())
    }

    pub fn r_decomposition(&self) -> Result<RDecomposition> {
        let f = &self.frame_after;
        r_decomposition(&f.mode(1), &f.mode(2), PI / 2.0 - self.phi_dark)
    }

    /// |⟨Ψ(θ_dark)|U Ψ(θ_source)⟩|².
    pub fn target_fidelity(&self) -> f64 {
        let src = self.frame_before.mode(0);
        let tgt = self.frame_after.mode(0);
        vdot(&tgt, &(self.unitary() * src)).norm_sqr()
    }
}

/// The dark target is refined to the exact root of ∂V/∂θ within ±0.05π.
pub fn build_transfer_protocol(beta: f64, theta_source: f64, theta_dark: f64) -> Result<TransferProtocol> {
    let theta_dark = nearest_dark_state(beta, theta_dark, 0.05 * PI)
        .ok_or_else(|| Error::NoSolution(format!("no dark state near θ = {:.4}π at β = {:.4}π", theta_dark / PI, beta / PI)))?;
    if classify(d2v(beta, theta_dark)) != Stability::Stable {
        return Err(Error::Instability(format!("dark state θ = {:.6}π is not stable", theta_dark / PI)));
    }
    let before = HpFrame::new(beta, theta_source)?;
    let after = HpFrame::with_drive(beta, theta_dark, dv(beta, theta_dark))?;
    let ops = single_particle_ops(&LevelScheme::half_to_three_half(), 1)?;
    let bloch = RotationStep::new(ops.d_x.clone(), theta_dark - theta_source, "bloch")?;
    let vb = bloch.unitary();
    let t = mode_transfer(&before, &after, &vb);
    let (lambda, lambda_prime) = (t[(2, 2)].re, t[(3, 2)].re);

    let phi_dark = after.phi();
    let a = PI / 2.0 - phi_dark;
    let (p1, p2, p3) = (after.mode(1), after.mode(2), after.mode(3));
    let k1 = outer(&p1, &p2) - outer(&p2, &p1);
    let rot1 = RotationStep::new(&k1 * c(0.0, 1.0), a, "u_rot1")?;

    let chi = rot1.unitary() * &vb * before.mode(2);
    let ov = vdot(&chi, &p3);
    let target = if ov.norm() > 1e-12 { &p3 * (ov.conj() / ov.norm()) } else { p3.clone() };
    let bs = beam_splitter(&chi, &target)?;
    let tau = bs.tau;
    let rot2 = bs.step("u_rot2")?;

    Ok(TransferProtocol {
        steps: vec![bloch, rot1, rot2],
        beta,
        theta_source,
        theta_dark,
        frame_before: before,
        frame_after: after,
        lambda,
        lambda_prime,
        phi_dark,
        tau,
    })
}

/// Real symplectic map on (X₁, X₂, X₃, Y₁, Y₂, Y₃) induced by ĉ′_μ = Σ T_μν ĉ_ν.
pub fn quadrature_map(t: &CMat) -> Result<RMat> {
    let leak = (1..4).map(|k| t[(0, k)].norm().max(t[(k, 0)].norm())).fold(0.0, f64::max);
    if (t[(0, 0)] - c(1.0, 0.0)).norm() > 1e-8 || leak > 1e-8 {
        return Err(Error::Domain(format!("step does not preserve the condensate (T00 = {}, leak {leak:.2e})", t[(0, 0)])));
    }
    let mut s = RMat::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            let z = t[(i + 1, j + 1)];
            s[(i, j)] = z.re;
            s[(i, j + 3)] = -z.im;
            s[(i + 3, j)] = z.im;
            s[(i + 3, j + 3)] = z.re;
        }
    }
    Ok(s)
}

/// Applies the protocol to a covariance expressed in `protocol.frame_before`;
/// the result is expressed in `protocol.frame_after`.
pub fn apply_protocol_gaussian(cov: &CovarianceState, protocol: &TransferProtocol) -> Result<CovarianceState> {
    let mut sigma = cov.sigma.clone();
    let mut frame = &protocol.frame_before;
    for step in &protocol.steps {
        let t = mode_transfer(frame, &protocol.frame_after, &step.unitary());
        let s = quadrature_map(&t)?;
        sigma = &s * sigma * s.transpose();
        frame = &protocol.frame_after;
    }
    Ok(CovarianceState { sigma, time: cov.time, critical: false })
}

/// Applies a list of steps to a Gaussian state whose frame is unchanged by them.
pub fn apply_steps_gaussian(cov: &CovarianceState, frame: &HpFrame, steps: &[RotationStep]) -> Result<CovarianceState> {
    let mut sigma = cov.sigma.clone();
    for step in steps {
        let s = quadrature_map(&mode_transfer(frame, frame, &step.unitary()))?;
        sigma = &s * sigma * s.transpose();
    }
    Ok(CovarianceState { sigma, time: cov.time, critical: cov.critical })
}

pub fn apply_protocol_ed(rho: &mut DensityMatrix, steps: &[RotationStep], basis: &SymmetricBasis) -> Result<()> {
    for step in steps {
        if step.generator.nrows() != basis.ell {
            return Err(Error::Domain(format!("step '{}' acts on {} levels, basis has {}", step.label, step.generator.nrows(), basis.ell)));
        }
        rotate(rho, basis, &step.generator, step.angle);
    }
    Ok(())
}

pub fn apply_protocol_cumulant(state: &CumulantState, steps: &[RotationStep], basis: &GellMannBasis) -> CumulantState {
    steps.iter().fold(state.clone(), |s, step| s.rotate(basis, &step.unitary()))
}

/// max |U†U − 1| over the steps.
pub fn unitarity_error(steps: &[RotationStep]) -> f64 {
    steps
        .iter()
        .map(|s| {
            let u = s.unitary();
            max_abs(&(u.adjoint() * &u - CMat::identity(u.nrows(), u.nrows())))
        })
        .fold(0.0, f64::max)
}
