use nalgebra::DVector;
use proptest::prelude::*;
use std::f64::consts::PI;
use superrad::atomic_model::*;
use superrad::exact_ed::*;
use superrad::hp_gaussian::*;
use superrad::linalg::{c, max_abs, sym_eigvals, CMat, RMat};
use superrad::meanfield::*;
use superrad::protocols::*;

const S3: f64 = 1.732_050_807_568_877_2;

/// v⃗₁, v⃗₂ written out for β = π/2.
fn v12(t: f64) -> ([f64; 3], [f64; 3]) {
    let f = HpFrame::new(0.5 * PI, t).unwrap();
    let (x, y, cp, sp) = (f.x, f.y, f.cos_phi, f.sin_phi);
    let a = 1.0 / (2.0 * y * sp);
    let v1 = [
        a * (t.sin() - (t / S3).sin() / S3) / 2f64.sqrt(),
        a * ((t / S3).cos() - y * cp / x) / S3,
        a * (t.cos() - y * cp / x),
    ];
    let b = 1.0 / (4.0 * x * y * sp);
    let v2 = [
        b * (t.cos() - (t / S3).cos()) / S3,
        b * (t.sin() - (t / S3).sin() / S3) / 2f64.sqrt(),
        b * ((t / S3).sin() / S3 - t.sin()) / 6f64.sqrt(),
    ];
    (v1, v2)
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn protocol() -> TransferProtocol {
    build_transfer_protocol(0.5 * PI, 4.47 * PI, 3.87 * PI).unwrap()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn noise_map_identity() {
    for t in [0.7, 2.0 * PI, 4.3 * PI] {
        let (l, lp) = noise_rotation_map(0.5 * PI, t, t).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && lp.abs() < 1e-12, "{l} {lp}");
    }
}

#[test]
fn noise_map_matches_closed_form() {
    for (t1, t2) in [(4.47 * PI, 3.87 * PI), (4.2 * PI, 4.3 * PI), (1.0, 2.0), (3.1 * PI, 2.2 * PI)] {
        let (a1, _) = v12(t1);
        let (b1, b2) = v12(t2);
        let (l, lp) = noise_rotation_map(0.5 * PI, t1, t2).unwrap();
        assert!((l - dot(&a1, &b1)).abs() < 1e-9, "λ {l} vs {}", dot(&a1, &b1));
        assert!((lp - dot(&a1, &b2)).abs() < 1e-9, "λ′ {lp} vs {}", dot(&a1, &b2));
    }
}

#[test]
fn closed_form_vectors_orthonormal() {
    for t in [0.9, 2.5, 4.47 * PI, 3.87 * PI] {
        let (v1, v2) = v12(t);
        assert!((dot(&v1, &v1) - 1.0).abs() < 1e-10);
        assert!((dot(&v2, &v2) - 1.0).abs() < 1e-10);
        assert!(dot(&v1, &v2).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]
    #[test]
    fn noise_map_is_rotation(t1 in 0.3f64..14.0, t2 in 0.3f64..14.0) {
        let f1 = HpFrame::new(0.5 * PI, t1);
        let f2 = HpFrame::new(0.5 * PI, t2);
        prop_assume!(f1.is_ok() && f2.is_ok());
        prop_assume!(f1.unwrap().sin_phi.abs() > 1e-3 && f2.unwrap().sin_phi.abs() > 1e-3);
        let (l, lp) = noise_rotation_map(0.5 * PI, t1, t2).unwrap();
        prop_assert!((l * l + lp * lp - 1.0).abs() < 1e-8, "{}", l * l + lp * lp);
    }

    #[test]
    fn beam_splitter_maps_source_to_target(re in proptest::collection::vec(-1.0f64..1.0, 8), mix in -0.95f64..0.95) {
        let s = DVector::from_fn(4, |i, _| c(re[i], re[i + 4]));
        prop_assume!(s.norm() > 0.1);
        let s = &s / c(s.norm(), 0.0);
        let mut o = DVector::from_fn(4, |i, _| c(re[(i + 3) % 8], -re[(i + 5) % 8]));
        let p = superrad::linalg::vdot(&s, &o);
        o -= &s * p;
        prop_assume!(o.norm() > 0.1);
        let o = &o / c(o.norm(), 0.0);
        let t = &s * c(mix, 0.0) + &o * c((1.0 - mix * mix).sqrt(), 0.0);
        let bs = beam_splitter(&s, &t).unwrap();
        prop_assert!((bs.lambda - mix).abs() < 1e-10);
        let u = bs.step("bs").unwrap().unitary();
        prop_assert!((&u * &s - &t).norm() < 1e-10);
    }
}

#[test]
fn beam_splitter_tau_limits() {
    assert!((beam_splitter_tau(0.0) - PI / 2.0).abs() < 1e-15);
    for e in [1e-3, 1e-6, 1e-9] {
        let l: f64 = 1.0 - e;
        // series of cos⁻¹(1−e)/√(2e−e²) about e = 0
        let series = 1.0 + e / 3.0 + 2.0 * e * e / 15.0;
        assert!((beam_splitter_tau(l) - series).abs() < 1e-7, "{e}");
    }
    let l: f64 = 0.3;
    assert!((beam_splitter_tau(l) - l.acos() / (1.0 - l * l).sqrt()).abs() < 1e-15);
}

#[test]
fn beam_splitter_rejects_coincident_modes() {
    let f = HpFrame::new(0.5 * PI, 4.2 * PI).unwrap();
    assert!(beam_splitter(&f.mode(1), &f.mode(1)).is_err());
    let bs = beam_splitter_modes(&f, 1, 2).unwrap();
    assert!(bs.lambda.abs() < 1e-12);
    assert!((bs.tau - PI / 2.0).abs() < 1e-10);
}

#[test]
fn u_rot1_angle() {
    let p = protocol();
    let s = p.step("u_rot1").unwrap();
    assert!((s.angle - (PI / 2.0 - p.phi_dark)).abs() < 1e-14);
    let labels: Vec<&str> = p.steps.iter().map(|s| s.label.as_str()).collect();
    assert_eq!(labels, ["bloch", "u_rot1", "u_rot2"]);
    let b = p.step("bloch").unwrap();
    assert!((b.angle - (p.theta_dark - p.theta_source)).abs() < 1e-14);
}

#[test]
fn h_rot1_coefficients() {
    let h = protocol().h_rot1();
    for (name, v) in [("Sx_-1/2", -0.74), ("Sx_1/2", 1.28), ("Pi_x", -0.71), ("T_x", 1.36)] {
        let got = h.get(name).unwrap();
        assert!((got - v).abs() < 0.02, "{name}: {got} vs {v}");
    }
    assert!(h.residual < 1e-12);
}

#[test]
fn h_rot2_ground_coefficient() {
    let h = protocol().h_rot2();
    let g = h.get("Sy_g").unwrap();
    assert!((g + 0.12).abs() < 0.02, "{g}");
    assert!(h.residual < 1e-12);
}

#[test]
fn r_decomposition_of_u_rot1() {
    let p = protocol();
    let r = p.r_decomposition().unwrap();
    let want_g = [0.69, 0.0, 0.72];
    let want_e = [-0.88, 0.0, 0.48];
    for k in 0..3 {
        assert!((r.g[k] - want_g[k]).abs() < 0.01, "g {:?}", r.g);
        assert!((r.e[k] - want_e[k]).abs() < 0.01, "e {:?}", r.e);
    }
    assert!((r.c + 0.68).abs() < 0.01, "{}", r.c);
    let u = p.step("u_rot1").unwrap().unitary();
    let prod = r.product();
    let ph: num_complex::Complex64 = prod.iter().zip(u.iter()).map(|(a, b)| a.conj() * b).sum();
    let ph = ph / ph.norm();
    assert!(max_abs(&(prod * ph - u)) < 1e-6);
}

#[test]
fn protocol_reaches_dark_state() {
    let p = protocol();
    assert!(p.target_fidelity() >= 1.0 - 1e-8, "{}", p.target_fidelity());
    assert!(unitarity_error(&p.steps) < 1e-12);
    assert!(dv(0.5 * PI, p.theta_dark).abs() < 1e-10);
    let mf = p.unitary() * condensate(0.5 * PI, 4.47 * PI);
    let overlap = superrad::linalg::vdot(&condensate(0.5 * PI, p.theta_dark), &mf).norm_sqr();
    assert!(overlap >= 1.0 - 1e-8, "{overlap}");
}

#[test]
fn unstable_target_rejected() {
    let beta = 0.5 * PI;
    let unstable = find_dark_states(beta, 0.1, 6.0 * PI)
        .into_iter()
        .find(|p| p.stability == Stability::Unstable)
        .expect("an unstable stationary point exists");
    assert!(build_transfer_protocol(beta, 4.47 * PI, unstable.theta).is_err());
}

#[test]
fn identity_steps_leave_states_unchanged() {
    let frame = HpFrame::new(0.5 * PI, 4.47 * PI).unwrap();
    let cov = covariance_at(&frame, 3.0).unwrap();
    let ops = single_particle_ops(&LevelScheme::half_to_three_half(), 1).unwrap();
    let id = vec![RotationStep::new(ops.d_x.clone(), 0.0, "noop").unwrap()];
    let out = apply_steps_gaussian(&cov, &frame, &id).unwrap();
    assert!((&out.sigma - &cov.sigma).abs().max() < 1e-14);

    let b = symmetric_basis(4, 5, DEFAULT_MAX_DIM).unwrap();
    let mut rho = prepare_initial(&b, &condensate(0.5 * PI, 4.47 * PI));
    let before = rho.to_dense();
    apply_protocol_ed(&mut rho, &id, &b).unwrap();
    assert!(max_abs(&(rho.to_dense() - before)) < 1e-14);
}

#[test]
fn gaussian_steps_preserve_spectrum() {
    let p = protocol();
    let cov = covariance_at(&p.frame_before, 50.0).unwrap();
    let want = sorted(sym_eigvals(&cov.sigma));
    let mut sigma = cov.sigma.clone();
    let mut frame = &p.frame_before;
    for step in &p.steps {
        let t = mode_transfer(frame, &p.frame_after, &step.unitary());
        let s = quadrature_map(&t).unwrap();
        assert!((s.transpose() * &s - RMat::identity(6, 6)).abs().max() < 1e-10);
        sigma = &s * sigma * s.transpose();
        frame = &p.frame_after;
        let got = sorted(sym_eigvals(&sigma));
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).abs() < 1e-10, "{}: {a} vs {b}", step.label);
        }
    }
    let full = apply_protocol_gaussian(&cov, &p).unwrap();
    assert!((full.sigma - sigma).abs().max() < 1e-12);
}

#[test]
fn quadrature_map_of_phase() {
    let a: f64 = 0.37;
    let mut t = CMat::identity(4, 4);
    t[(1, 1)] = c(a.cos(), a.sin());
    let s = quadrature_map(&t).unwrap();
    // ĉ₁ → e^{ia}ĉ₁: X′ = cos a X − sin a Y, Y′ = sin a X + cos a Y
    assert!((s[(0, 0)] - a.cos()).abs() < 1e-15);
    assert!((s[(0, 3)] + a.sin()).abs() < 1e-15);
    assert!((s[(3, 0)] - a.sin()).abs() < 1e-15);
    assert!((s[(3, 3)] - a.cos()).abs() < 1e-15);
    let mut leak = CMat::identity(4, 4);
    leak[(0, 1)] = c(0.1, 0.0);
    assert!(quadrature_map(&leak).is_err());
}

#[test]
fn post_protocol_conserved_quadratures() {
    let p = protocol();
    let cov = covariance_at(&p.frame_before, 200.0).unwrap();
    let post = apply_protocol_gaussian(&cov, &p).unwrap();
    let dark = HpFrame::with_drive(0.5 * PI, p.theta_dark, 0.0).unwrap();
    let b = bogoliubov_matrix(&dark).unwrap();
    let sb0 = &b * &post.sigma * b.transpose();
    for dtau in [1.0, 10.0, 100.0] {
        let s = evolve_covariance(&dark, &post.sigma, dtau).unwrap();
        let sb = &b * s * b.transpose();
        for i in [1, 2, 4, 5] {
            assert!((sb[(i, i)] - sb0[(i, i)]).abs() < 1e-10, "index {i} at {dtau}");
        }
    }
}

#[test]
fn ed_rotations_conserve_purity() {
    let p = protocol();
    let ops = single_particle_ops(&LevelScheme::half_to_three_half(), 1).unwrap();
    let b = symmetric_basis(4, 6, DEFAULT_MAX_DIM).unwrap();
    let mut rho = prepare_initial(&b, &condensate(0.5 * PI, 4.47 * PI));
    let lind = superradiance_lindbladian(&b, &ops.d_minus, dv(0.5 * PI, 4.47 * PI));
    ed_integrate(&mut rho, &lind, &[1.0], 0.01, |_| {}).unwrap();
    let p0 = rho.purity();
    let tr0 = rho.trace();
    apply_protocol_ed(&mut rho, &p.steps, &b).unwrap();
    assert!((rho.purity() - p0).abs() < 1e-10);
    assert!((rho.trace() - tr0).norm() < 1e-10);
    assert!(rho.hermiticity_error() < 1e-10);

    let small = symmetric_basis(3, 3, DEFAULT_MAX_DIM).unwrap();
    let mut r3 = prepare_initial(&small, &DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
    assert!(apply_protocol_ed(&mut r3, &p.steps, &small).is_err());
}
