//! Run configuration, experiment drivers and CSV tables for the command line.

use crate::atomic_model::{single_particle_ops, LevelScheme};
use crate::cumulant::{gellmann_basis, integrate, spin_covariance, CumulantState, CumulantSystem, GellMannBasis};
use crate::error::{Error, Result};
use crate::exact_ed::{
    default_step, ed_covariance, ed_integrate, prepare_initial, superradiance_lindbladian, symmetric_basis, CollectiveGellMann,
    DensityMatrix, SymmetricBasis, DEFAULT_MAX_DIM, DEFAULT_STEP_CAP,
};
use crate::hp_gaussian::{condensate, covariance_at, evolve_covariance, squeezing_spectrum, steady_state_squeezing, CovarianceState, HpFrame};
use crate::linalg::sym_eig;
use crate::meanfield::{d2v, dark_manifold_beta, dv, find_critical_points, find_dark_states, potential};
use crate::protocols::{apply_protocol_cumulant, apply_protocol_ed, apply_protocol_gaussian, build_transfer_protocol, RotationStep, SpinOperators};
use crate::witness::{condensate_from_moments, direction_from_generator, witness_from_state, CumulantView, EdState, Quadrature, WitnessReport};
use nalgebra::DVector;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Engine {
    MeanField,
    Hp,
    Cumulant,
    Ed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OmegaMode {
    Stationary,
    Zero,
    /// Ω in units of Γ.
    Explicit(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Branch {
    /// β = π/2 with the stationary drive.
    Bright,
    /// Mean-field dark states with Ω = 0.
    Dark,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub variable: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Scan {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        (0..self.count).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub engine: Engine,
    pub ell: usize,
    pub beta: f64,
    pub theta0: f64,
    pub n: f64,
    pub gamma: f64,
    pub omega_mode: OmegaMode,
    pub t_max: f64,
    pub dt_out: f64,
    /// Fixed RK4 step for the exact engine; chosen automatically when absent.
    pub dt: Option<f64>,
    pub scan: Option<Scan>,
    pub scan2: Option<Scan>,
    pub protocol_file: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub cooperativity: Option<f64>,
    pub max_dim: usize,
    pub witness: bool,
    pub observables: Vec<String>,
    pub rotate_at: f64,
    pub n_values: Vec<f64>,
    pub branch: Branch,
    pub grid: usize,
    entries: Vec<(String, String)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            engine: Engine::Hp,
            ell: 4,
            beta: 0.5 * PI,
            theta0: 4.46 * PI,
            n: 1e4,
            gamma: 1.0,
            omega_mode: OmegaMode::Stationary,
            t_max: 20.0,
            dt_out: 0.5,
            dt: None,
            scan: None,
            scan2: None,
            protocol_file: None,
            output: None,
            seed: 0,
            cooperativity: None,
            max_dim: DEFAULT_MAX_DIM,
            witness: false,
            observables: vec!["eigs".into()],
            rotate_at: 20.0,
            n_values: vec![1e3, 1e4, 1e5],
            branch: Branch::Bright,
            grid: 40,
            entries: Vec::new(),
        }
    }
}

/// Reads a number with an optional `pi` or `π` suffix (multiplies by π).
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    let (body, scale) = if let Some(b) = t.strip_suffix("pi").or_else(|| t.strip_suffix('π')) {
        (b.trim().trim_end_matches('*'), PI)
    } else {
        (t, 1.0)
    };
    if body.is_empty() {
        return Ok(scale);
    }
    body.parse::<f64>().map(|v| v * scale).map_err(|_| Error::Config(format!("cannot parse number '{s}'")))
}

fn parse_scan(key: &str, s: &str) -> Result<Scan> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!("{key}: expected variable:lo:hi:count, got '{s}'")));
    }
    let count = parts[3].trim().parse::<usize>().map_err(|_| Error::Config(format!("{key}: bad count '{}'", parts[3])))?;
    Ok(Scan { variable: parts[0].trim().to_string(), lo: parse_angle(parts[1])?, hi: parse_angle(parts[2])?, count })
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{s}'"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let num = |v: &str| parse_angle(v).map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")));
        match key {
            "engine" => {
                self.engine = match v {
                    "meanfield" => Engine::MeanField,
                    "hp" => Engine::Hp,
                    "cumulant" => Engine::Cumulant,
                    "ed" => Engine::Ed,
                    _ => return Err(Error::Config(format!("engine: unknown engine '{v}'"))),
                }
            }
            "ell" => self.ell = v.parse().map_err(|_| Error::Config(format!("ell: cannot parse '{v}'")))?,
            "beta" => self.beta = num(v)?,
            "theta0" => self.theta0 = num(v)?,
            "N" | "n" => self.n = num(v)?,
            "gamma" | "Gamma" => self.gamma = num(v)?,
            "omega_mode" => {
                self.omega_mode = match v {
                    "stationary" => OmegaMode::Stationary,
                    "zero" => OmegaMode::Zero,
                    _ => match v.strip_prefix("explicit:") {
                        Some(r) => OmegaMode::Explicit(num(r)?),
                        None => return Err(Error::Config(format!("omega_mode: unknown mode '{v}'"))),
                    },
                }
            }
            "t_max" | "n_gamma_t_max" => self.t_max = num(v)?,
            "dt_out" => self.dt_out = num(v)?,
            "dt" => self.dt = Some(num(v)?),
            "scan" => self.scan = Some(parse_scan(key, v)?),
            "scan2" => self.scan2 = Some(parse_scan(key, v)?),
            "protocol_file" => self.protocol_file = Some(PathBuf::from(v)),
            "output" => self.output = Some(PathBuf::from(v)),
            "seed" => self.seed = v.parse().map_err(|_| Error::Config(format!("seed: cannot parse '{v}'")))?,
            "cooperativity" | "C" => self.cooperativity = Some(num(v)?),
            "max_dim" => self.max_dim = v.parse().map_err(|_| Error::Config(format!("max_dim: cannot parse '{v}'")))?,
            "witness" => self.witness = parse_bool(key, v)?,
            "observables" => self.observables = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            "rotate_at" => self.rotate_at = num(v)?,
            "n_values" => self.n_values = v.split(',').map(num).collect::<Result<_>>()?,
            "branch" => {
                self.branch = match v {
                    "bright" => Branch::Bright,
                    "dark" => Branch::Dark,
                    _ => return Err(Error::Config(format!("branch: expected bright or dark, got '{v}'"))),
                }
            }
            "grid" => self.grid = v.parse().map_err(|_| Error::Config(format!("grid: cannot parse '{v}'")))?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), v.to_string()));
        Ok(())
    }

    /// Parses `key=value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_lines(text)?;
        Ok(cfg)
    }

    pub fn apply_lines(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_override(line).map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got '{kv}'")))?;
        self.set(k.trim(), v)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.ell != 2 && self.ell != 4 {
            return bad(format!("ell = {} (supported: 2, 4)", self.ell));
        }
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return bad(format!("N = {} must be ≥ 1", self.n));
        }
        if matches!(self.engine, Engine::Ed) && self.n.fract() != 0.0 {
            return bad(format!("N = {} must be an integer for the exact engine", self.n));
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma = {} must be positive", self.gamma));
        }
        if !(self.t_max >= 0.0) || !(self.dt_out > 0.0) {
            return bad(format!("time grid t_max = {}, dt_out = {} invalid", self.t_max, self.dt_out));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad(format!("dt = {dt} must be positive"));
            }
        }
        for s in [&self.scan, &self.scan2].into_iter().flatten() {
            if s.count == 0 || !(s.hi >= s.lo) {
                return bad(format!("scan {}: need lo ≤ hi and count ≥ 1", s.variable));
            }
        }
        if let Some(c) = self.cooperativity {
            if !(c > 0.0) {
                return bad(format!("cooperativity = {c} must be positive"));
            }
        }
        if self.grid < 3 {
            return bad(format!("grid = {} must be at least 3", self.grid));
        }
        for o in &self.observables {
            if !["eigs", "ne", "casimir", "purity"].contains(&o.as_str()) {
                return bad(format!("unknown observable '{o}'"));
            }
        }
        Ok(())
    }

    pub fn scheme(&self) -> LevelScheme {
        if self.ell == 2 {
            LevelScheme::two_level()
        } else {
            LevelScheme::half_to_three_half()
        }
    }

    /// Drive ω = Ω/(NΓ) at the configured point.
    pub fn omega(&self) -> f64 {
        match self.omega_mode {
            OmegaMode::Stationary => dv(self.beta, self.theta0),
            OmegaMode::Zero => 0.0,
            OmegaMode::Explicit(o) => o / (self.n * self.gamma),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let k = (self.t_max / self.dt_out + 1e-9).floor() as usize;
        let mut t: Vec<f64> = (0..=k).map(|i| i as f64 * self.dt_out).collect();
        if (self.t_max - t[k]).abs() > 1e-9 {
            t.push(self.t_max);
        }
        t
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

/// Single-particle amplitudes of the configured condensate on `ell` levels.
pub fn initial_amplitudes(ell: usize, beta: f64, theta0: f64) -> DVector<nalgebra::Complex<f64>> {
    let psi = condensate(beta, theta0);
    if ell == 4 {
        return psi;
    }
    let v = DVector::from_vec(vec![psi[1], psi[3]]);
    let n = v.norm();
    v / nalgebra::Complex::new(n, 0.0)
}

#[derive(Clone, Debug, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Vec<String>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable { columns: columns.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Malformed(format!("row of length {} for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Sorts rows lexicographically by the first `k` columns.
    pub fn sort_by_leading(&mut self, k: usize) {
        self.rows.sort_by(|a, b| {
            for i in 0..k {
                let o = a[i].total_cmp(&b[i]);
                if o != std::cmp::Ordering::Equal {
                    return o;
                }
            }
            std::cmp::Ordering::Equal
        });
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// CSV body: header row and data rows, without metadata.
    pub fn body(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for m in &self.metadata {
            let _ = writeln!(s, "# {m}");
        }
        s.push_str(&self.body());
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Potential,
    DarkStates,
    HpSqueeze,
    HpMap,
    CumulantRun,
    EdRun,
    Protocol,
    Scaling,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Potential => "potential",
            Command::DarkStates => "darkstates",
            Command::HpSqueeze => "hp-squeeze",
            Command::HpMap => "hp-map",
            Command::CumulantRun => "cumulant-run",
            Command::EdRun => "ed-run",
            Command::Protocol => "protocol",
            Command::Scaling => "scaling",
        }
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let mut table = match command {
        Command::Potential => run_potential(cfg)?,
        Command::DarkStates => run_darkstates(cfg)?,
        Command::HpSqueeze => run_hp_squeeze(cfg)?,
        Command::HpMap => run_hp_map(cfg)?,
        Command::CumulantRun => run_cumulant(cfg)?,
        Command::EdRun => run_ed(cfg)?,
        Command::Protocol => run_protocol(cfg)?,
        Command::Scaling => run_scaling(cfg)?,
    };
    let mut meta = vec![format!("superrad {} {}", env!("CARGO_PKG_VERSION"), command.name())];
    meta.extend(cfg.entries().iter().map(|(k, v)| format!("{k}={v}")));
    meta.append(&mut table.metadata);
    meta.push(format!("wall_time_s={:.3}", start.elapsed().as_secs_f64()));
    table.metadata = meta;
    Ok(table)
}

fn theta_scan(cfg: &RunConfig, default: Scan) -> Scan {
    cfg.scan.clone().unwrap_or(default)
}

fn run_potential(cfg: &RunConfig) -> Result<ResultTable> {
    let scan = theta_scan(cfg, Scan { variable: "theta".into(), lo: 0.0, hi: 5.0 * PI, count: 501 });
    let mut t = ResultTable::new(&["theta", "V", "dV", "d2V"]);
    for th in scan.points() {
        let p = potential(cfg.beta, th);
        t.push(vec![th, p.v, p.dv, d2v(cfg.beta, th)])?;
    }
    Ok(t)
}

fn run_darkstates(cfg: &RunConfig) -> Result<ResultTable> {
    let scan = theta_scan(cfg, Scan { variable: "theta".into(), lo: 0.0, hi: 5.0 * PI, count: 2 });
    let mut t = ResultTable::new(&["theta", "kind", "stable"]);
    for p in find_dark_states(cfg.beta, scan.lo, scan.hi) {
        t.push(vec![p.theta, 0.0, if p.stable() { 1.0 } else { 0.0 }])?;
    }
    for th in find_critical_points(cfg.beta, scan.lo, scan.hi) {
        t.push(vec![th, 1.0, f64::NAN])?;
    }
    t.sort_by_leading(2);
    t.metadata.push("kind: 0 = dark state, 1 = critical point".into());
    Ok(t)
}

fn hp_frame_for(cfg: &RunConfig, beta: f64, theta0: f64) -> Result<HpFrame> {
    match cfg.omega_mode {
        OmegaMode::Stationary => HpFrame::new(beta, theta0),
        OmegaMode::Zero => HpFrame::with_drive(beta, theta0, 0.0),
        OmegaMode::Explicit(o) => HpFrame::with_drive(beta, theta0, o / (cfg.n * cfg.gamma)),
    }
}

fn run_hp_squeeze(cfg: &RunConfig) -> Result<ResultTable> {
    let frame = hp_frame_for(cfg, cfg.beta, cfg.theta0)?;
    let mut t = ResultTable::new(&["NGamma_t", "xi2_1", "xi2_2", "xi2_3", "xi2_4"]);
    for tau in cfg.times() {
        let s = squeezing_spectrum(&covariance_at(&frame, tau)?)?;
        t.push(vec![tau, s.xi2[0], s.xi2[1], s.xi2[2], s.xi2[3]])?;
    }
    let ss = steady_state_squeezing(&frame)?;
    t.metadata.push(format!("x={:.12e} y={:.12e} cos_phi={:.12e}", frame.x, frame.y, frame.cos_phi));
    t.metadata.push(format!("steady_state_xi2={:?}", ss.xi2));
    Ok(t)
}

fn run_hp_map(cfg: &RunConfig) -> Result<ResultTable> {
    let s1 = theta_scan(cfg, Scan { variable: "theta0".into(), lo: 0.0, hi: 5.0 * PI, count: 200 });
    let s2 = cfg.scan2.clone().unwrap_or(Scan { variable: "beta".into(), lo: 0.0, hi: PI, count: 100 });
    let pts: Vec<(f64, f64)> = s1.points().into_iter().flat_map(|a| s2.points().into_iter().map(move |b| (a, b))).collect();
    let mut rows: Vec<Vec<f64>> = pts
        .par_iter()
        .map(|&(th, be)| {
            let v = HpFrame::new(be, th)
                .ok()
                .filter(|f| f.cos_phi > 1e-12)
                .and_then(|f| steady_state_squeezing(&f).ok())
                .map(|s| s.min())
                .unwrap_or(f64::NAN);
            vec![th, be, v]
        })
        .collect();
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut t = ResultTable::new(&["theta0", "beta", "xi2_min"]);
    for r in rows {
        t.push(r)?;
    }
    t.metadata.push("xi2_min = NaN marks unstable points".into());
    Ok(t)
}

fn witness_columns(enabled: bool) -> Vec<&'static str> {
    if enabled {
        vec!["w_variance_over_N", "w_bound_over_N", "w_margin_over_N", "w_violated"]
    } else {
        vec![]
    }
}

/// Witness along the most squeezed Σ̃ direction, in both quadrature variants;
/// reports the one with the larger margin.
pub fn best_witness<S: crate::witness::CollectiveMoments>(state: &S, basis: &GellMannBasis, mu: &[f64], cov: &nalgebra::DMatrix<f64>) -> Result<WitnessReport> {
    let psi = condensate_from_moments(basis, mu);
    let (vals, vecs) = sym_eig(cov);
    let k = 2 * (basis.ell - 1);
    let idx = vals.len() - k;
    let v: Vec<f64> = vecs.column(idx).iter().copied().collect();
    let dir = direction_from_generator(basis, &v, &psi);
    let x = witness_from_state(state, &psi, &dir, Quadrature::X)?;
    let y = witness_from_state(state, &psi, &dir, Quadrature::Y)?;
    Ok(if x.margin >= y.margin { x } else { y })
}

fn witness_row(r: &WitnessReport, n: f64) -> Vec<f64> {
    vec![r.variance / n, r.bound / n, r.margin / n, if r.violated { 1.0 } else { 0.0 }]
}

fn run_cumulant(cfg: &RunConfig) -> Result<ResultTable> {
    let ops = single_particle_ops(&cfg.scheme(), 1)?;
    let sys = CumulantSystem::new(&ops);
    let psi = initial_amplitudes(cfg.ell, cfg.beta, cfg.theta0);
    let st = CumulantState::product(&sys, &psi, cfg.n);
    let traj = integrate(&sys, &st, cfg.omega(), 1.0, &cfg.times(), 1e-8)?;
    let k = 2 * (cfg.ell - 1);
    let mut cols: Vec<String> = vec!["NGamma_t".into()];
    cols.extend((1..=k).map(|i| format!("eig{i}")));
    cols.extend(witness_columns(cfg.witness).into_iter().map(String::from));
    let mut t = ResultTable { columns: cols, ..Default::default() };
    for s in &traj.states {
        let mut row = vec![s.time];
        row.extend(spin_covariance(s, cfg.ell).leading);
        if cfg.witness {
            let view = CumulantView { state: s, basis: &sys.basis };
            row.extend(witness_row(&best_witness(&view, &sys.basis, &s.mu, &s.cov)?, s.n));
        }
        t.push(row)?;
    }
    Ok(t)
}

/// Exact-engine state together with the operators needed for observables.
pub struct EdSetup {
    pub basis: SymmetricBasis,
    pub gm: GellMannBasis,
    pub cgm: CollectiveGellMann,
    pub d_minus: nalgebra::DMatrix<nalgebra::Complex<f64>>,
    pub n_e: nalgebra::DMatrix<nalgebra::Complex<f64>>,
}

impl EdSetup {
    pub fn new(scheme: &LevelScheme, n: usize, max_dim: usize) -> Result<Self> {
        let ops = single_particle_ops(scheme, 1)?;
        let basis = symmetric_basis(scheme.ell(), n, max_dim)?;
        let gm = gellmann_basis(scheme.ell());
        let cgm = CollectiveGellMann::new(&basis, &gm);
        Ok(EdSetup { basis, gm, cgm, d_minus: ops.d_minus, n_e: ops.n_e })
    }

    pub fn leading(&self, rho: &DensityMatrix) -> Vec<f64> {
        ed_covariance(rho, &self.cgm, self.basis.n, self.basis.ell).leading
    }

    /// Evolves ρ with drive ω through `times`, recording leading eigenvalues.
    pub fn evolve(&self, rho: &mut DensityMatrix, omega: f64, times: &[f64], dt: Option<f64>) -> Result<Vec<(f64, Vec<f64>)>> {
        let lind = superradiance_lindbladian(&self.basis, &self.d_minus, omega);
        let step = dt.unwrap_or_else(|| default_step(&lind, DEFAULT_STEP_CAP));
        let mut out = Vec::new();
        ed_integrate(rho, &lind, times, step, |r| out.push((r.time, self.leading(r))))?;
        Ok(out)
    }
}

fn run_ed(cfg: &RunConfig) -> Result<ResultTable> {
    let scheme = cfg.scheme();
    let setup = EdSetup::new(&scheme, cfg.n as usize, cfg.max_dim)?;
    let psi = initial_amplitudes(cfg.ell, cfg.beta, cfg.theta0);
    let mut rho = prepare_initial(&setup.basis, &psi);
    let lind = superradiance_lindbladian(&setup.basis, &setup.d_minus, cfg.omega());
    let dt = cfg.dt.unwrap_or_else(|| default_step(&lind, DEFAULT_STEP_CAP));
    let k = 2 * (cfg.ell - 1);
    let mut cols: Vec<String> = vec!["NGamma_t".into()];
    let want = |o: &str| cfg.observables.iter().any(|x| x == o);
    if want("eigs") {
        cols.extend((1..=k).map(|i| format!("eig{i}")));
    }
    if want("ne") {
        cols.push("excited_fraction".into());
    }
    if want("casimir") {
        cols.push("casimir".into());
    }
    if want("purity") {
        cols.push("purity".into());
    }
    cols.extend(witness_columns(cfg.witness).into_iter().map(String::from));
    let ne = setup.basis.collective(&setup.n_e);
    let n = cfg.n;
    let mut rows = Vec::new();
    let mut failure = None;
    let report = ed_integrate(&mut rho, &lind, &cfg.times(), dt, |r| {
        let mut row = vec![r.time];
        let (mean, second) = setup.cgm.moments(r);
        if want("eigs") {
            row.extend(setup.leading(r));
        }
        if want("ne") {
            row.push(r.expect(&ne).re / n);
        }
        if want("casimir") {
            row.push(second.trace());
        }
        if want("purity") {
            row.push(r.purity());
        }
        if cfg.witness {
            let l = mean.len();
            let cov = nalgebra::DMatrix::from_fn(l, l, |a, b| (second[(a, b)] - mean[a] * mean[b]) / n);
            let mu: Vec<f64> = mean.iter().map(|m| m / n).collect();
            let view = EdState { rho: r, basis: &setup.basis };
            match best_witness(&view, &setup.gm, &mu, &cov) {
                Ok(w) => row.extend(witness_row(&w, n)),
                Err(e) => failure = Some(e),
            }
        }
        rows.push(row);
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut t = ResultTable { columns: cols, rows, metadata: vec![] };
    t.metadata.push(format!("dim={} dt={:.6e} steps={} trace_drift={:.3e}", setup.basis.dim(), dt, report.steps, report.trace_drift));
    Ok(t)
}

/// A protocol file: one step per line, either
/// `auto-transfer target=<θ_dark>` or `step generator=<name> angle=<a> [label=<l>]`.
pub fn parse_protocol(text: &str, beta: f64, theta_source: f64) -> Result<(Vec<RotationStep>, Option<crate::protocols::TransferProtocol>)> {
    let mut steps = Vec::new();
    let mut transfer = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let kind = words.next().unwrap_or("");
        let mut kv = std::collections::HashMap::new();
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| Error::Malformed(format!("protocol line {}: expected key=value, got '{w}'", lineno + 1)))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Malformed(format!("protocol line {}: missing '{k}'", lineno + 1)));
        match kind {
            "auto-transfer" => {
                let target = parse_angle(get("target")?)?;
                let source = kv.get("source").map(|s| parse_angle(s)).transpose()?.unwrap_or(theta_source);
                let p = build_transfer_protocol(beta, source, target)?;
                steps.extend(p.steps.iter().cloned());
                transfer = Some(p);
            }
            "step" => {
                let name = get("generator")?;
                let g = named_generator(name).ok_or_else(|| Error::Malformed(format!("protocol line {}: unknown generator '{name}'", lineno + 1)))?;
                let angle = parse_angle(get("angle")?)?;
                let label = kv.get("label").cloned().unwrap_or_else(|| name.clone());
                steps.push(RotationStep::new(g, angle, &label)?);
            }
            _ => return Err(Error::Malformed(format!("protocol line {}: unknown entry '{kind}'", lineno + 1))),
        }
    }
    Ok((steps, transfer))
}

pub fn named_generator(name: &str) -> Option<nalgebra::DMatrix<nalgebra::Complex<f64>>> {
    let ops = single_particle_ops(&LevelScheme::half_to_three_half(), 1).ok()?;
    Some(match name {
        "d_x" => ops.d_x,
        "d_y" => ops.d_y,
        "n_e" => ops.n_e,
        "sx_g" => SpinOperators::sx_g(),
        "sy_g" => SpinOperators::sy_g(),
        "sz_g" => SpinOperators::sz_g(),
        "sx_e" => SpinOperators::sx_e(),
        "sy_e" => SpinOperators::sy_e(),
        "sz_e" => SpinOperators::sz_e(),
        "sx_minus" => SpinOperators::sx_minus(),
        "sx_plus" => SpinOperators::sx_plus(),
        "pi_x" => SpinOperators::pi_x(),
        "t_x" => SpinOperators::t_x(),
        _ => return None,
    })
}

/// Drives at θ₀ until `rotate_at`, applies the protocol, then evolves with
/// Ω = 0 until `t_max`.
fn run_protocol(cfg: &RunConfig) -> Result<ResultTable> {
    if cfg.ell != 4 {
        return Err(Error::Config("protocols act on the four-level scheme (ell = 4)".into()));
    }
    let path = cfg.protocol_file.as_ref().ok_or_else(|| Error::Config("protocol_file is required".into()))?;
    let (steps, transfer) = parse_protocol(&std::fs::read_to_string(path)?, cfg.beta, cfg.theta0)?;
    let times = cfg.times();
    let before: Vec<f64> = times.iter().copied().filter(|&t| t <= cfg.rotate_at).collect();
    let after: Vec<f64> = times.iter().copied().filter(|&t| t >= cfg.rotate_at).collect();
    let before = with_endpoint(before, cfg.rotate_at);
    let omega = cfg.omega();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut table_cols = vec!["NGamma_t".to_string(), "phase".to_string()];
    table_cols.extend((1..=6).map(|i| format!("eig{i}")));
    match cfg.engine {
        Engine::Hp | Engine::MeanField => {
            let p = transfer.ok_or_else(|| Error::Config("the Gaussian engine needs an auto-transfer entry".into()))?;
            for &t in &before {
                rows.push(gaussian_row(t, 0.0, &covariance_at(&p.frame_before, t)?));
            }
            let mut cov = apply_protocol_gaussian(&covariance_at(&p.frame_before, cfg.rotate_at)?, &p)?;
            let dark = HpFrame::with_drive(cfg.beta, p.theta_dark, 0.0)?;
            let mut last = cfg.rotate_at;
            for &t in &after {
                cov.sigma = evolve_covariance(&dark, &cov.sigma, t - last)?;
                last = t;
                rows.push(gaussian_row(t, 1.0, &cov));
            }
        }
        Engine::Cumulant => {
            let ops = single_particle_ops(&LevelScheme::half_to_three_half(), 1)?;
            let sys = CumulantSystem::new(&ops);
            let st = CumulantState::product(&sys, &condensate(cfg.beta, cfg.theta0), cfg.n);
            let tr = integrate(&sys, &st, omega, 1.0, &before, 1e-8)?;
            for s in &tr.states {
                rows.push(eig_row(s.time, 0.0, spin_covariance(s, 4).leading));
            }
            let rotated = apply_protocol_cumulant(tr.states.last().expect("non-empty"), &steps, &sys.basis);
            let tr2 = integrate(&sys, &rotated, 0.0, 1.0, &after, 1e-8)?;
            for s in &tr2.states {
                rows.push(eig_row(s.time, 1.0, spin_covariance(s, 4).leading));
            }
        }
        Engine::Ed => {
            let setup = EdSetup::new(&LevelScheme::half_to_three_half(), cfg.n as usize, cfg.max_dim)?;
            let mut rho = prepare_initial(&setup.basis, &condensate(cfg.beta, cfg.theta0));
            for (t, l) in setup.evolve(&mut rho, omega, &before, cfg.dt)? {
                rows.push(eig_row(t, 0.0, l));
            }
            apply_protocol_ed(&mut rho, &steps, &setup.basis)?;
            for (t, l) in setup.evolve(&mut rho, 0.0, &after, cfg.dt)? {
                rows.push(eig_row(t, 1.0, l));
            }
        }
    }
    let mut t = ResultTable { columns: table_cols, rows, metadata: vec![] };
    t.metadata.push("phase: 0 = driven, 1 = after protocol with Omega = 0".into());
    Ok(t)
}

fn with_endpoint(mut v: Vec<f64>, end: f64) -> Vec<f64> {
    if v.is_empty() || (v[v.len() - 1] - end).abs() > 1e-12 {
        v.push(end);
    }
    v
}

fn eig_row(t: f64, phase: f64, eigs: Vec<f64>) -> Vec<f64> {
    let mut r = vec![t, phase];
    r.extend(eigs);
    r
}

fn gaussian_row(t: f64, phase: f64, cov: &CovarianceState) -> Vec<f64> {
    eig_row(t, phase, sym_eig(&cov.sigma).0)
}

/// Leading Σ̃ minimum of a cumulant run from the product state, integrated
/// in blocks until it changes by less than 1e−5 relative.
pub fn cumulant_steady_min(sys: &CumulantSystem, beta: f64, theta0: f64, omega: f64, n: f64) -> Result<f64> {
    let ell = sys.basis.ell;
    let psi = initial_amplitudes(ell, beta, theta0);
    let mut st = CumulantState::product(sys, &psi, n);
    let mut prev = f64::INFINITY;
    let block = 50.0;
    for _ in 0..80 {
        let tr = integrate(sys, &st, omega, 1.0, &[st.time, st.time + block], 1e-8)?;
        st = tr.states.last().expect("non-empty").clone();
        let m = spin_covariance(&st, ell).min();
        if (m - prev).abs() <= 1e-5 * m.abs() {
            return Ok(m);
        }
        prev = m;
    }
    Err(Error::Accuracy(format!("no steady state by NΓt = {}", st.time)))
}

/// Steady-state squeezing at θ₀ on a branch; None where the point is not a
/// stable stationary state or the closure breaks down.
pub fn branch_point(sys: &CumulantSystem, branch: Branch, theta0: f64, n: f64) -> Option<f64> {
    let (beta, omega) = match branch {
        Branch::Bright => (0.5 * PI, dv(0.5 * PI, theta0)),
        Branch::Dark => (dark_manifold_beta(theta0)?, 0.0),
    };
    let frame = HpFrame::with_drive(beta, theta0, omega).ok()?;
    if frame.cos_phi <= 1e-9 {
        return None;
    }
    cumulant_steady_min(sys, beta, theta0, omega, n).ok()
}

pub fn branch_window(branch: Branch) -> (f64, f64) {
    match branch {
        Branch::Bright => (3.87 * PI, 4.47 * PI),
        Branch::Dark => (2.0 * PI, 2.45 * PI),
    }
}

#[derive(Clone, Debug)]
pub struct BestSqueezing {
    pub n: f64,
    pub theta0: f64,
    pub xi2: f64,
}

/// Coarse grid over the branch window followed by golden-section refinement
/// around the best grid point.
pub fn best_squeezing(sys: &CumulantSystem, branch: Branch, n: f64, grid: usize) -> Result<BestSqueezing> {
    let (lo, hi) = branch_window(branch);
    let h = (hi - lo) / (grid - 1) as f64;
    let pts: Vec<f64> = (0..grid).map(|i| lo + h * i as f64).collect();
    let vals: Vec<Option<f64>> = pts.par_iter().map(|&t| branch_point(sys, branch, t, n)).collect();
    let (ib, vb) = vals
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::NoSolution(format!("no stable point on the {branch:?} branch at N = {n}")))?;
    let f = |t: f64| branch_point(sys, branch, t, n).unwrap_or(f64::INFINITY);
    let (mut a, mut b) = (pts[ib.saturating_sub(1)], pts[(ib + 1).min(grid - 1)]);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let (mut best_t, mut best_v) = (pts[ib], vb);
    while b - a > 1e-5 * PI {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
        for (x, v) in [(x1, f1), (x2, f2)] {
            if v < best_v {
                best_t = x;
                best_v = v;
            }
        }
    }
    Ok(BestSqueezing { n, theta0: best_t, xi2: best_v })
}

#[derive(Clone, Debug)]
pub struct ScalingFit {
    pub exponent: f64,
    pub stderr: f64,
    pub prefactor: f64,
}

/// Least-squares slope of log ξ² against log N.
pub fn scaling_fit(ns: &[f64], xi2: &[f64]) -> Result<ScalingFit> {
    if ns.len() != xi2.len() {
        return Err(Error::Malformed("N and ξ² lists differ in length".into()));
    }
    let (lo, hi) = ns.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &n| (a.min(n), b.max(n)));
    if ns.len() < 4 || hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("need ≥ 4 values of N spanning ≥ 2 decades, got {} spanning {:.2}", ns.len(), (hi / lo).log10())));
    }
    if xi2.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("ξ² values must be positive".into()));
    }
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = xi2.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let stderr = if x.len() > 2 { (rss / (k - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(ScalingFit { exponent: slope, stderr, prefactor: icpt.exp() })
}

fn run_scaling(cfg: &RunConfig) -> Result<ResultTable> {
    let ops = single_particle_ops(&LevelScheme::half_to_three_half(), 1)?;
    let sys = CumulantSystem::new(&ops);
    let mut best: Vec<BestSqueezing> = cfg.n_values.iter().map(|&n| best_squeezing(&sys, cfg.branch, n, cfg.grid)).collect::<Result<_>>()?;
    best.sort_by(|a, b| a.n.total_cmp(&b.n));
    let mut t = ResultTable::new(&["N", "theta0_best", "xi2_best"]);
    for b in &best {
        t.push(vec![b.n, b.theta0, b.xi2])?;
    }
    let ns: Vec<f64> = best.iter().map(|b| b.n).collect();
    let xs: Vec<f64> = best.iter().map(|b| b.xi2).collect();
    match scaling_fit(&ns, &xs) {
        Ok(fit) => t.metadata.push(format!("exponent={:.12e} stderr={:.12e}", fit.exponent, fit.stderr)),
        Err(e) => t.metadata.push(format!("fit unavailable: {e}")),
    }
    Ok(t)
}
