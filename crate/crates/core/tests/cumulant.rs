use std::f64::consts::PI;
use superrad::atomic_model::*;
use superrad::cumulant::*;
use superrad::harness::{cumulant_steady_min, initial_amplitudes};
use superrad::hp_gaussian::{condensate, steady_state_squeezing, HpFrame};
use superrad::linalg::{c, CMat};
use superrad::meanfield::dv;

fn scheme_system() -> CumulantSystem {
    CumulantSystem::new(&single_particle_ops(&LevelScheme::half_to_three_half(), 1).unwrap())
}

#[test]
fn su2_structure() {
    let b = gellmann_basis(2);
    assert_eq!(b.len(), 3);
    let eps = |k: usize, l: usize, m: usize| -> f64 {
        match (k, l, m) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    };
    // Generators may be ordered differently from (x, y, z); compare |f| up to a permutation sign.
    let mut total = 0.0;
    for k in 0..3 {
        for l in 0..3 {
            for m in 0..3 {
                assert!(b.d(k, l, m).abs() < 1e-14);
                assert!((b.f(k, l, m).abs() - eps(k, l, m).abs()).abs() < 1e-14);
                total += b.f(k, l, m) * eps(k, l, m);
            }
        }
    }
    assert!((total.abs() - 6.0).abs() < 1e-12);
}

#[test]
fn orthonormality_and_closure() {
    for ell in [2, 3, 4] {
        let b = gellmann_basis(ell);
        let n = b.len();
        assert_eq!(n, ell * ell - 1);
        for k in 0..n {
            assert!((&b.generators[k] - b.generators[k].adjoint()).norm() < 1e-14);
            for l in 0..n {
                let tr = (&b.generators[k] * &b.generators[l]).trace();
                let want = if k == l { 2.0 } else { 0.0 };
                assert!((tr - c(want, 0.0)).norm() < 1e-12);
                let mut rec = CMat::identity(ell, ell) * c(if k == l { 2.0 / ell as f64 } else { 0.0 }, 0.0);
                for m in 0..n {
                    rec += &b.generators[m] * c(b.d(k, l, m), b.f(k, l, m));
                    assert!((b.f(k, l, m) + b.f(l, k, m)).abs() < 1e-14);
                    assert!((b.d(k, l, m) - b.d(l, k, m)).abs() < 1e-14);
                }
                assert!((rec - &b.generators[k] * &b.generators[l]).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn product_state_moments() {
    let sys = scheme_system();
    let psi = condensate(0.0, 0.0);
    let st = CumulantState::product(&sys, &psi, 50.0);
    let first = st.first();
    for (k, g) in sys.basis.generators.iter().enumerate() {
        let diag = (0..4).all(|i| (0..4).all(|j| i == j || g[(i, j)].norm() == 0.0));
        if diag {
            assert!((first[k] - 50.0 * g[(0, 0)].re).abs() < 1e-12);
        } else {
            assert!(first[k].abs() < 1e-12);
        }
    }
    for (b, t) in [(0.0, 0.0), (0.5 * PI, 4.46 * PI), (1.1, 2.0)] {
        let st = CumulantState::product(&sys, &condensate(b, t), 200.0);
        let cas = casimir_symmetric(4, 200.0);
        assert!((st.casimir() - cas).abs() < 1e-10 * cas);
        let sc = spin_covariance(&st, 4);
        assert!(sc.leading.iter().all(|v| (v - 1.0).abs() < 1e-12), "{:?}", sc.leading);
    }
}

#[test]
fn pure_rotation_conserves_spectrum() {
    let sys = scheme_system();
    let st = CumulantState::product(&sys, &condensate(0.5 * PI, 4.0 * PI), 1000.0);
    let tr = integrate(&sys, &st, 3.0, 0.0, &[0.0, 0.5, 1.0, 2.0], 1e-10).unwrap();
    let phys = cumulant_integrate(&sys, &st, 3.0, 0.0, &[0.0, 2.0]).unwrap();
    assert!((&phys.states[1].cov - &tr.states[3].cov).amax() < 1e-6);
    let l0 = spin_covariance(&st, 4).leading;
    for s in &tr.states {
        assert!((s.casimir() / st.casimir() - 1.0).abs() < 1e-8);
        let l = spin_covariance(s, 4).leading;
        for (a, b) in l.iter().zip(&l0) {
            assert!((a - b).abs() < 1e-8, "{l:?} {l0:?}");
        }
    }
}

#[test]
fn casimir_conserved_with_decay() {
    let sys = scheme_system();
    let (b, t) = (0.5 * PI, 4.3 * PI);
    let st = CumulantState::product(&sys, &condensate(b, t), 1e4);
    let taus: Vec<f64> = (0..=10).map(|i| 10.0 * i as f64).collect();
    let tr = integrate(&sys, &st, dv(b, t), 1.0, &taus, 1e-8).unwrap();
    let c0 = st.casimir();
    for s in &tr.states {
        assert!((s.casimir() / c0 - 1.0).abs() < 1e-6);
        assert!((&s.cov - s.cov.transpose()).amax() < 1e-10);
    }
}

#[test]
fn four_level_reduces_to_two_level() {
    let s4 = scheme_system();
    let s2 = CumulantSystem::new(&single_particle_ops(&LevelScheme::two_level(), 1).unwrap());
    let t0 = 0.6;
    let n = 500.0;
    let a4 = CumulantState::product(&s4, &initial_amplitudes(4, PI, t0), n);
    let a2 = CumulantState::product(&s2, &initial_amplitudes(2, PI, t0), n);
    let taus = [0.0, 1.0, 3.0, 10.0];
    let w = dv(PI, t0);
    let t4 = integrate(&s4, &a4, w, 1.0, &taus, 1e-10).unwrap();
    let t2 = integrate(&s2, &a2, w, 1.0, &taus, 1e-10).unwrap();
    for (x, y) in t4.states.iter().zip(&t2.states) {
        let l4 = spin_covariance(x, 4).leading;
        for v in spin_covariance(y, 2).leading {
            assert!(l4.iter().any(|u| (u - v).abs() < 1e-8), "{v} not in {l4:?}");
        }
    }
}

#[test]
fn steady_state_near_critical_matches_hp() {
    let sys = scheme_system();
    let t = 4.40 * PI;
    let m = cumulant_steady_min(&sys, 0.5 * PI, t, dv(0.5 * PI, t), 1e4).unwrap();
    let hp = steady_state_squeezing(&HpFrame::new(0.5 * PI, t).unwrap()).unwrap().min();
    assert!((m / hp - 1.0).abs() < 0.15, "{m} vs {hp}");
}

#[test]
fn two_level_steady_state_near_cos_theta() {
    let s2 = CumulantSystem::new(&single_particle_ops(&LevelScheme::two_level(), 1).unwrap());
    let t0 = 0.3;
    let st = CumulantState::product(&s2, &initial_amplitudes(2, PI, t0), 100.0);
    let tr = integrate(&s2, &st, dv(PI, t0), 1.0, &[0.0, 40.0], 1e-8).unwrap();
    let m = spin_covariance(&tr.states[1], 2).min();
    assert!((m / t0.cos() - 1.0).abs() < 0.1, "{m}");
}

#[test]
fn rotation_preserves_spectrum() {
    let sys = scheme_system();
    let st = CumulantState::product(&sys, &condensate(0.5 * PI, 4.2 * PI), 300.0);
    let st = integrate(&sys, &st, dv(0.5 * PI, 4.2 * PI), 1.0, &[0.0, 5.0], 1e-8).unwrap().states[1].clone();
    let ops = single_particle_ops(&LevelScheme::half_to_three_half(), 1).unwrap();
    let v = (&ops.d_y * c(0.0, -0.7)).exp();
    let r = st.rotate(&sys.basis, &v);
    let a = spin_covariance(&st, 4).leading;
    let b = spin_covariance(&r, 4).leading;
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10);
    }
    assert!((r.casimir() / st.casimir() - 1.0).abs() < 1e-12);
}
