use proptest::prelude::*;
use std::f64::consts::PI;
use std::process::Command as Proc;
use superrad::harness::*;
use superrad::hp_gaussian::HpFrame;

fn scratch_path(name: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("superrad-{}-{name}", std::process::id()))
}

#[test]
fn config_parsing() {
    let cfg = RunConfig::parse(
        "# comment\nengine = cumulant\nbeta=0.411pi\ntheta0 = 2.41 π  # trailing\nN=1e4\nomega_mode=explicit:3.5\nscan=theta:2pi:2.45pi:11\nn_values=1e3,1e4\n",
    )
    .unwrap();
    assert_eq!(cfg.engine, Engine::Cumulant);
    assert!((cfg.beta - 0.411 * PI).abs() < 1e-15);
    assert!((cfg.theta0 - 2.41 * PI).abs() < 1e-15);
    assert_eq!(cfg.n, 1e4);
    assert_eq!(cfg.omega_mode, OmegaMode::Explicit(3.5));
    assert!((cfg.omega() - 3.5 / 1e4).abs() < 1e-18);
    let s = cfg.scan.clone().unwrap();
    assert_eq!(s.points().len(), 11);
    assert!((s.points()[10] - 2.45 * PI).abs() < 1e-14);
    assert_eq!(cfg.n_values, vec![1e3, 1e4]);
    assert!(cfg.validate().is_ok());
    assert_eq!(parse_angle("pi").unwrap(), PI);
    assert_eq!(parse_angle("0.5*pi").unwrap(), 0.5 * PI);
}

#[test]
fn config_rejects_bad_input() {
    assert!(RunConfig::parse("colour=blue").is_err());
    assert!(RunConfig::parse("engine=quantum").is_err());
    assert!(RunConfig::parse("beta").is_err());
    assert!(RunConfig::parse("scan=theta:0:1").is_err());
    assert!(RunConfig::parse("beta=abc").is_err());
    for bad in ["ell=3", "N=0", "gamma=-1", "dt_out=0", "grid=2", "observables=eigs,spin", "scan=theta:2:1:5", "C=0"] {
        let cfg = RunConfig::parse(bad).unwrap();
        assert!(cfg.validate().is_err(), "{bad}");
    }
    let cfg = RunConfig::parse("engine=ed\nN=10.5").unwrap();
    assert!(cfg.validate().is_err());
}

#[test]
fn time_grid() {
    let cfg = RunConfig::parse("t_max=2.25\ndt_out=0.5").unwrap();
    assert_eq!(cfg.times(), vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.25]);
}

#[test]
fn potential_scan_locates_dark_and_critical_points() {
    let cfg = RunConfig::parse("engine=meanfield\nbeta=0.411pi\nscan=theta:0:5pi:1001").unwrap();
    let t = run(Command::Potential, &cfg).unwrap();
    assert_eq!(t.columns, ["theta", "V", "dV", "d2V"]);
    assert_eq!(t.rows.len(), 1001);
    let cfg = RunConfig::parse("beta=0.411pi\nscan=theta:2pi:2.5pi:2").unwrap();
    let d = run(Command::DarkStates, &cfg).unwrap();
    let dark: Vec<&Vec<f64>> = d.rows.iter().filter(|r| r[1] == 0.0 && r[2] == 1.0).collect();
    let crit: Vec<&Vec<f64>> = d.rows.iter().filter(|r| r[1] == 1.0).collect();
    assert!(dark.iter().any(|r| (r[0] / PI - 2.41).abs() < 0.01));
    assert!(crit.iter().any(|r| (r[0] / PI - 2.45).abs() < 0.01));
}

#[test]
fn runs_are_deterministic() {
    let cfg = RunConfig::parse("engine=hp\nbeta=0.5pi\ntheta0=4.3pi\nt_max=5").unwrap();
    let a = run(Command::HpSqueeze, &cfg).unwrap();
    let b = run(Command::HpSqueeze, &cfg).unwrap();
    assert_eq!(a.body(), b.body());
    let cfg = RunConfig::parse("engine=hp\nscan=theta0:4pi:4.5pi:7\nscan2=beta:0.3pi:0.6pi:5").unwrap();
    assert_eq!(run(Command::HpMap, &cfg).unwrap().body(), run(Command::HpMap, &cfg).unwrap().body());
}

#[test]
fn hp_map_marks_unstable_points() {
    let cfg = RunConfig::parse("engine=hp\nscan=theta0:0.1:5pi:40\nscan2=beta:0.1pi:0.9pi:9").unwrap();
    let t = run(Command::HpMap, &cfg).unwrap();
    assert_eq!(t.rows.len(), 360);
    let mut nan = 0;
    for r in &t.rows {
        let stable = HpFrame::new(r[1], r[0]).map(|f| f.cos_phi > 1e-12).unwrap_or(false);
        assert_eq!(r[2].is_nan(), !stable, "{r:?}");
        nan += r[2].is_nan() as usize;
    }
    assert!(nan > 0 && nan < 360);
    for w in t.rows.windows(2) {
        assert!((w[0][0], w[0][1]) < (w[1][0], w[1][1]));
    }
}

#[test]
fn csv_format() {
    let cfg = RunConfig::parse("engine=hp\ntheta0=4.2pi\nt_max=1").unwrap();
    let t = run(Command::HpSqueeze, &cfg).unwrap();
    let csv = t.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    let meta = lines.iter().take_while(|l| l.starts_with('#')).count();
    assert!(meta >= 3);
    assert!(lines.iter().any(|l| l.starts_with("# theta0=")));
    assert!(lines.iter().any(|l| l.starts_with("# wall_time_s=")));
    assert_eq!(lines[meta], "NGamma_t,xi2_1,xi2_2,xi2_3,xi2_4");
    for row in &lines[meta + 1..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 5);
        for c in cells {
            let mantissa = c.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert!(mantissa.len() >= 9, "{c}");
            c.parse::<f64>().unwrap();
        }
    }
    let mut bad = ResultTable::new(&["a", "b"]);
    assert!(bad.push(vec![1.0]).is_err());
}

#[test]
fn scaling_fit_recovers_exponent() {
    let ns: [f64; 4] = [1e3, 1e4, 1e5, 1e6];
    let xi: Vec<f64> = ns.iter().map(|n| 2.7 * n.powf(-0.25)).collect();
    let f = scaling_fit(&ns, &xi).unwrap();
    assert!((f.exponent + 0.25).abs() < 1e-12);
    assert!((f.prefactor - 2.7).abs() < 1e-10);
    assert!(f.stderr < 1e-10);
    assert!(scaling_fit(&ns[..3], &xi[..3]).is_err());
    assert!(scaling_fit(&[1e3, 2e3, 4e3, 8e3], &xi).is_err());
    assert!(scaling_fit(&ns, &[0.1, -0.2, 0.1, 0.1]).is_err());
}

proptest! {
    #[test]
    fn scaling_fit_any_power(a in -1.0f64..0.0, c in 0.01f64..10.0) {
        let ns: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];
        let xi: Vec<f64> = ns.iter().map(|n| c * n.powf(a)).collect();
        let f = scaling_fit(&ns, &xi).unwrap();
        prop_assert!((f.exponent - a).abs() < 1e-10);
    }
}

#[test]
fn protocol_file_parsing() {
    let (steps, tr) = parse_protocol("auto-transfer target=3.87pi\nstep generator=sy_e angle=0.25pi label=extra\n", 0.5 * PI, 4.47 * PI).unwrap();
    assert_eq!(steps.len(), 4);
    assert_eq!(steps[3].label, "extra");
    assert!(tr.unwrap().target_fidelity() > 1.0 - 1e-8);
    assert!(parse_protocol("step generator=nope angle=1", 0.5 * PI, 4.47 * PI).is_err());
    assert!(parse_protocol("rotate everything", 0.5 * PI, 4.47 * PI).is_err());
    assert!(parse_protocol("step angle=1", 0.5 * PI, 4.47 * PI).is_err());
}

#[test]
fn gaussian_protocol_run() {
    let path = scratch_path("transfer.txt");
    std::fs::write(&path, "auto-transfer target=3.87pi\n").unwrap();
    let cfg = RunConfig::parse(&format!("engine=hp\ntheta0=4.46pi\nt_max=30\ndt_out=5\nrotate_at=20\nprotocol_file={}", path.display())).unwrap();
    let t = run(Command::Protocol, &cfg).unwrap();
    std::fs::remove_file(&path).ok();
    let phase = t.column("phase").unwrap();
    assert_eq!(phase.iter().filter(|&&p| p == 0.0).count(), 5);
    assert_eq!(phase.iter().filter(|&&p| p == 1.0).count(), 3);
    let e: Vec<f64> = t.column("eig1").unwrap();
    // the driven part ends where the stored part starts
    assert!((e[4] - e[5]).abs() < 1e-10, "{} {}", e[4], e[5]);
}

#[test]
fn initial_amplitudes_two_level() {
    let v = initial_amplitudes(2, PI, 0.7);
    assert_eq!(v.len(), 2);
    assert!((v.norm() - 1.0).abs() < 1e-14);
    assert!((v[1].norm_sqr() - (0.35f64).sin().powi(2)).abs() < 1e-12 || (v[0].norm_sqr() - (0.35f64).sin().powi(2)).abs() < 1e-12);
}

#[test]
fn cli_writes_csv() {
    let out = scratch_path("potential.csv");
    let status = Proc::new(env!("CARGO_BIN_EXE_superrad"))
        .args(["potential", "-s", "beta=0.41pi", "-s", "scan=theta:0:5pi:21", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    std::fs::remove_file(&out).ok();
    assert!(text.starts_with("# superrad"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 22);
    let bad = Proc::new(env!("CARGO_BIN_EXE_superrad")).args(["potential", "-s", "bogus=1"]).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown key"));
}
