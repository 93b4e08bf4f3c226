//! Level structure, dipole operators and the cavity parameter map.

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Manifold {
    Ground,
    Excited,
}

/// A magnetic sublevel; `m2` is twice the projection quantum number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Level {
    pub manifold: Manifold,
    pub m2: i32,
}

impl Level {
    pub fn g(m: f64) -> Self {
        Level { manifold: Manifold::Ground, m2: (2.0 * m).round() as i32 }
    }
    pub fn e(m: f64) -> Self {
        Level { manifold: Manifold::Excited, m2: (2.0 * m).round() as i32 }
    }
    pub fn m(&self) -> f64 {
        self.m2 as f64 / 2.0
    }
}

#[derive(Clone, Debug)]
pub struct LevelScheme {
    pub f_ground2: i32,
    pub f_excited2: i32,
    pub levels: Vec<Level>,
}

fn twice(x: f64, name: &str) -> Result<i32> {
    let t = 2.0 * x;
    if (t - t.round()).abs() > 1e-9 {
        return Err(Error::Domain(format!("{name} = {x} is not a half-integer")));
    }
    Ok(t.round() as i32)
}

impl LevelScheme {
    pub fn new(f_ground: f64, f_excited: f64, levels: Vec<Level>) -> Result<Self> {
        let fg = twice(f_ground, "F_g")?;
        let fe = twice(f_excited, "F_e")?;
        for (i, l) in levels.iter().enumerate() {
            let f = match l.manifold {
                Manifold::Ground => fg,
                Manifold::Excited => fe,
            };
            if l.m2.abs() > f || (l.m2 - f) % 2 != 0 {
                return Err(Error::Domain(format!("level {:?} m = {} outside |m| <= F", l.manifold, l.m())));
            }
            if levels[..i].contains(l) {
                return Err(Error::Domain(format!("duplicate level {:?} m = {}", l.manifold, l.m())));
            }
        }
        Ok(LevelScheme { f_ground2: fg, f_excited2: fe, levels })
    }

    /// F_g = 1/2, F_e = 3/2 with levels (g,−1/2), (g,1/2), (e,1/2), (e,3/2).
    pub fn half_to_three_half() -> Self {
        LevelScheme::new(0.5, 1.5, vec![Level::g(-0.5), Level::g(0.5), Level::e(0.5), Level::e(1.5)]).unwrap()
    }

    /// The stretched two-level transition (g,1/2) ↔ (e,3/2).
    pub fn two_level() -> Self {
        LevelScheme::new(0.5, 1.5, vec![Level::g(0.5), Level::e(1.5)]).unwrap()
    }

    pub fn ell(&self) -> usize {
        self.levels.len()
    }

    pub fn index(&self, l: Level) -> Option<usize> {
        self.levels.iter().position(|&x| x == l)
    }

    pub fn f_ground(&self) -> f64 {
        self.f_ground2 as f64 / 2.0
    }

    pub fn f_excited(&self) -> f64 {
        self.f_excited2 as f64 / 2.0
    }
}

fn fact(n: i32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Clebsch–Gordan coefficient ⟨j1 m1; j2 m2 | J M⟩ from the Racah sum, all
/// arguments doubled.
pub fn cg2(j1: i32, m1: i32, j2: i32, m2: i32, jj: i32, mm: i32) -> f64 {
    if m1 + m2 != mm || m1.abs() > j1 || m2.abs() > j2 || mm.abs() > jj {
        return 0.0;
    }
    if jj > j1 + j2 || jj < (j1 - j2).abs() || (j1 + j2 + jj) % 2 != 0 {
        return 0.0;
    }
    let h = |x: i32| x / 2;
    let pre = ((jj + 1) as f64 * fact(h(jj + j1 - j2)) * fact(h(jj - j1 + j2)) * fact(h(j1 + j2 - jj))
        / fact(h(j1 + j2 + jj) + 1))
        .sqrt();
    let norm = (fact(h(jj + mm)) * fact(h(jj - mm)) * fact(h(j1 - m1)) * fact(h(j1 + m1)) * fact(h(j2 - m2)) * fact(h(j2 + m2)))
        .sqrt();
    let mut sum = 0.0;
    for k in 0..=h(j1 + j2 + jj) {
        let d = [
            k,
            h(j1 + j2 - jj) - k,
            h(j1 - m1) - k,
            h(j2 + m2) - k,
            h(jj - j2 + m1) + k,
            h(jj - j1 - m2) + k,
        ];
        if d.iter().any(|&x| x < 0) {
            continue;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / d.iter().map(|&x| fact(x)).product::<f64>();
    }
    pre * norm * sum
}

/// C_m^α = ⟨F_g, m; 1, α | F_e, m+α⟩.
pub fn clebsch_gordan(f_g: f64, m: f64, alpha: i32, f_e: f64) -> Result<f64> {
    let fg = twice(f_g, "F_g")?;
    let fe = twice(f_e, "F_e")?;
    let m2 = twice(m, "m")?;
    if !(-1..=1).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} not in {{-1, 0, 1}}")));
    }
    if m2.abs() > fg || (m2 - fg) % 2 != 0 {
        return Err(Error::Domain(format!("m = {m} outside |m| <= F_g = {f_g}")));
    }
    if (m2 + 2 * alpha).abs() > fe {
        return Err(Error::Domain(format!("m + alpha = {} outside |m_e| <= F_e = {f_e}", m + alpha as f64)));
    }
    if (fe - fg).abs() > 2 {
        return Err(Error::Domain(format!("F_e - F_g = {} not in {{-1, 0, 1}}", f_e - f_g)));
    }
    Ok(cg2(fg, m2, 2, 2 * alpha, fe, m2 + 2 * alpha))
}

/// Single-particle dipole operators for one polarization.
#[derive(Clone, Debug)]
pub struct DipoleOps {
    pub d_plus: CMat,
    pub d_minus: CMat,
    pub d_x: CMat,
    pub d_y: CMat,
    pub n_e: CMat,
}

pub fn single_particle_ops(scheme: &LevelScheme, alpha: i32) -> Result<DipoleOps> {
    if alpha != 1 && alpha != -1 {
        return Err(Error::Domain(format!("alpha = {alpha}; expected -1 or +1")));
    }
    let l = scheme.ell();
    let mut dp = CMat::zeros(l, l);
    let mut ne = CMat::zeros(l, l);
    for (j, lev) in scheme.levels.iter().enumerate() {
        match lev.manifold {
            Manifold::Excited => ne[(j, j)] = c(1.0, 0.0),
            Manifold::Ground => {
                let target = Level { manifold: Manifold::Excited, m2: lev.m2 + 2 * alpha };
                if let Some(i) = scheme.index(target) {
                    let cg = cg2(scheme.f_ground2, lev.m2, 2, 2 * alpha, scheme.f_excited2, target.m2);
                    dp[(i, j)] = c(cg, 0.0);
                }
            }
        }
    }
    let dm = dp.adjoint();
    let dx = (&dp + &dm) * c(0.5, 0.0);
    let dy = (&dp - &dm) * C64::new(0.0, -0.5);
    Ok(DipoleOps { d_plus: dp, d_minus: dm, d_x: dx, d_y: dy, n_e: ne })
}

/// Σ_m s^z_m: half the population difference summed over driven transitions.
pub fn total_sz(scheme: &LevelScheme) -> CMat {
    let l = scheme.ell();
    CMat::from_fn(l, l, |i, j| {
        if i != j {
            return c(0.0, 0.0);
        }
        match scheme.levels[i].manifold {
            Manifold::Excited => c(0.5, 0.0),
            Manifold::Ground => c(-0.5, 0.0),
        }
    })
}

#[derive(Clone, Copy, Debug)]
pub struct CavityParams {
    pub g: f64,
    pub kappa: f64,
    pub epsilon_minus: f64,
    pub epsilon_plus: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveParams {
    pub gamma: f64,
    pub omega_minus: f64,
    pub omega_plus: f64,
}

impl CavityParams {
    pub fn bad_cavity_ratio(&self, n: f64) -> f64 {
        self.g * n.sqrt() / self.kappa
    }
}

pub fn cavity_to_effective(p: &CavityParams) -> Result<EffectiveParams> {
    if !(p.kappa > 0.0) {
        return Err(Error::Domain(format!("kappa = {} must be positive", p.kappa)));
    }
    Ok(EffectiveParams {
        gamma: 4.0 * p.g * p.g / p.kappa,
        omega_minus: 2.0 * p.epsilon_minus * p.g / p.kappa,
        omega_plus: 2.0 * p.epsilon_plus * p.g / p.kappa,
    })
}
