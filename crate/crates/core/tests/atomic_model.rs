use proptest::prelude::*;
use superrad::atomic_model::*;
use superrad::linalg::{c, CMat};

/// Closed-form table for ⟨j, m; 1, q | J, m+q⟩ with J ∈ {j−1, j, j+1}.
fn cg_table(j: f64, m: f64, q: i32, jj: f64) -> f64 {
    let mm = m + q as f64;
    if (jj - (j + 1.0)).abs() < 1e-9 {
        match q {
            1 => ((j + mm) * (j + mm + 1.0) / ((2.0 * j + 1.0) * (2.0 * j + 2.0))).sqrt(),
            0 => ((j - mm + 1.0) * (j + mm + 1.0) / ((2.0 * j + 1.0) * (j + 1.0))).sqrt(),
            _ => ((j - mm) * (j - mm + 1.0) / ((2.0 * j + 1.0) * (2.0 * j + 2.0))).sqrt(),
        }
    } else if (jj - j).abs() < 1e-9 {
        match q {
            1 => -((j + mm) * (j - mm + 1.0) / (2.0 * j * (j + 1.0))).sqrt(),
            0 => mm / (j * (j + 1.0)).sqrt(),
            _ => ((j - mm) * (j + mm + 1.0) / (2.0 * j * (j + 1.0))).sqrt(),
        }
    } else {
        match q {
            1 => ((j - mm) * (j - mm + 1.0) / (2.0 * j * (2.0 * j + 1.0))).sqrt(),
            0 => -((j - mm) * (j + mm) / (j * (2.0 * j + 1.0))).sqrt(),
            _ => ((j + mm + 1.0) * (j + mm) / (2.0 * j * (2.0 * j + 1.0))).sqrt(),
        }
    }
}

#[test]
fn stretched_and_half_integer_coefficients() {
    assert!((clebsch_gordan(0.5, 0.5, 1, 1.5).unwrap() - 1.0).abs() < 1e-14);
    let s = 1.0 / 3f64.sqrt();
    assert!((clebsch_gordan(0.5, -0.5, 1, 1.5).unwrap() - s).abs() < 1e-14);
    assert!((clebsch_gordan(0.5, 0.5, -1, 1.5).unwrap() - s).abs() < 1e-14);
}

#[test]
fn out_of_range_quantum_numbers_rejected() {
    assert!(clebsch_gordan(0.5, 1.5, 1, 1.5).is_err());
    assert!(clebsch_gordan(0.5, 0.5, 2, 1.5).is_err());
    assert!(clebsch_gordan(0.5, 0.5, 1, 0.5).is_err());
    assert!(clebsch_gordan(0.5, 0.5, 0, 3.5).is_err());
    assert!(clebsch_gordan(0.5, 0.3, 0, 1.5).is_err());
}

proptest! {
    #[test]
    fn racah_matches_closed_form_table(j2 in 1i32..8, dj in -1i32..=1, q in -1i32..=1, mi in 0i32..8) {
        let j = j2 as f64 / 2.0;
        let jj = j + dj as f64;
        prop_assume!(jj >= 0.5 || (jj == 0.0 && j2 == 2));
        let m = -j + (mi % (j2 + 1)) as f64;
        let me = m + q as f64;
        prop_assume!(me.abs() <= jj + 1e-9);
        let got = clebsch_gordan(j, m, q, jj).unwrap();
        prop_assert!((got - cg_table(j, m, q, jj)).abs() < 1e-12, "j={j} m={m} q={q} J={jj}: {got}");
    }

    #[test]
    fn column_normalization(j2 in 1i32..8, dj in -1i32..=1, mi in 0i32..8) {
        let j = j2 as f64 / 2.0;
        let jj = j + dj as f64;
        prop_assume!(jj > 0.0);
        let m = -j + (mi % (j2 + 1)) as f64;
        let s: f64 = (-1..=1)
            .filter(|&q| (m + q as f64).abs() <= jj + 1e-9)
            .map(|q| clebsch_gordan(j, m, q, jj).unwrap().powi(2))
            .sum();
        prop_assert!((s - (2.0 * jj + 1.0) / (2.0 * j + 1.0)).abs() < 1e-12);
    }
}

#[test]
fn four_level_dipole_entries() {
    let ops = single_particle_ops(&LevelScheme::half_to_three_half(), 1).unwrap();
    let s = 1.0 / 3f64.sqrt();
    for i in 0..4 {
        for j in 0..4 {
            let want = match (i, j) {
                (2, 0) => s,
                (3, 1) => 1.0,
                _ => 0.0,
            };
            assert!((ops.d_plus[(i, j)] - c(want, 0.0)).norm() < 1e-14, "({i},{j})");
        }
    }
    assert!((&ops.d_minus - ops.d_plus.adjoint()).norm() < 1e-15);
    assert!((&ops.d_x - ops.d_x.adjoint()).norm() < 1e-15);
    assert!((&ops.d_y - ops.d_y.adjoint()).norm() < 1e-15);
    assert!((ops.n_e[(2, 2)].re - 1.0).abs() < 1e-15 && (ops.n_e[(3, 3)].re - 1.0).abs() < 1e-15);
    assert!(ops.n_e[(0, 0)].norm() + ops.n_e[(1, 1)].norm() == 0.0);
}

#[test]
fn sigma_minus_polarization_is_zero_in_four_level_scheme() {
    let ops = single_particle_ops(&LevelScheme::half_to_three_half(), -1).unwrap();
    assert_eq!(ops.d_plus.norm(), 0.0);
    assert!(single_particle_ops(&LevelScheme::half_to_three_half(), 0).is_err());
}

#[test]
fn sz_commutator_identity() {
    let sch = LevelScheme::half_to_three_half();
    let ops = single_particle_ops(&sch, 1).unwrap();
    let sz = total_sz(&sch);
    let comm = &sz * &ops.d_x - &ops.d_x * &sz;
    let rhs = &ops.d_y * c(0.0, 1.0);
    assert!((comm - rhs).norm() < 1e-12);
    let k = &ops.d_x * &ops.d_y - &ops.d_y * &ops.d_x;
    assert!((&k + k.adjoint()).norm() < 1e-12);
}

#[test]
fn scheme_validation() {
    assert!(LevelScheme::new(0.5, 1.5, vec![Level::g(0.5), Level::g(0.5)]).is_err());
    assert!(LevelScheme::new(0.5, 1.5, vec![Level::e(2.5)]).is_err());
    assert!(LevelScheme::new(0.5, 1.3, vec![]).is_err());
    let s = LevelScheme::half_to_three_half();
    assert_eq!(s.ell(), 4);
    assert_eq!(s.index(Level::e(1.5)), Some(3));
    assert_eq!(LevelScheme::two_level().ell(), 2);
}

#[test]
fn cavity_map() {
    let p = cavity_to_effective(&CavityParams { g: 1.0, kappa: 4.0, epsilon_minus: 0.0, epsilon_plus: 2.0 }).unwrap();
    assert!((p.gamma - 1.0).abs() < 1e-15 && (p.omega_plus - 1.0).abs() < 1e-15);
    let p = cavity_to_effective(&CavityParams { g: 0.0, kappa: 1.0, epsilon_minus: 5.0, epsilon_plus: 5.0 }).unwrap();
    assert_eq!((p.gamma, p.omega_minus, p.omega_plus), (0.0, 0.0, 0.0));
    let p = cavity_to_effective(&CavityParams { g: 0.5, kappa: 10.0, epsilon_minus: 0.0, epsilon_plus: 3.0 }).unwrap();
    assert!((p.gamma - 0.1).abs() < 1e-15 && (p.omega_plus - 0.3).abs() < 1e-15 && p.omega_minus == 0.0);
    assert!(cavity_to_effective(&CavityParams { g: 1.0, kappa: 0.0, epsilon_minus: 0.0, epsilon_plus: 0.0 }).is_err());
    let _unused: CMat = CMat::zeros(1, 1);
}
