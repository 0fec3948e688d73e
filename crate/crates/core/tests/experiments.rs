use std::path::Path;
use std::process::Command;

use normsol::energy::{fiber_h, FiberCoeffs};
use normsol::experiments::{
    analyze_sweep, critical_report, fiber_table, read_sweep_csv, run_sweep, write_sweep_csv, CriticalOptions,
    GridSpec, RMax, SweepRecord, SweepReport, Verdict,
};
use normsol::exponents::{classify_regime, ProblemParams};
use normsol::solver::SolveConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AUTO: GridSpec = GridSpec {
    r_max: RMax::Auto,
    m: 2000,
};

#[test]
fn sweep_csv_roundtrip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let records: Vec<SweepRecord> = (0..20)
        .map(|_| SweepRecord {
            c: rng.gen_range(0.1..10.0),
            level: rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-12..12)),
            lambda: -rng.gen::<f64>() / 3.0,
            grad2: rng.gen(),
            gradq: rng.gen::<f64>() * 1e5,
            lp: std::f64::consts::PI,
            converged: rng.gen(),
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&path, &records).unwrap();
    assert_eq!(read_sweep_csv(&path).unwrap(), records);
}

#[test]
fn sweep_rejects_wrong_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "c,level\n1,2\n").unwrap();
    assert!(matches!(read_sweep_csv(&path), Err(normsol::Error::Parse { .. })));
}

#[test]
fn subcritical_sweep_fits_predicted_rates() {
    let base = ProblemParams::new(3, 2.5, 3.0, 1.0).unwrap();
    let cs: Vec<f64> = (0..6).map(|i| 0.3 * (1.0f64 / 0.3).powf(i as f64 / 5.0)).collect();
    let records = run_sweep(&base, &cs, &AUTO, &SolveConfig::default()).unwrap();
    let SweepReport::Subcritical(rep) = analyze_sweep(&classify_regime(&base).unwrap(), &records).unwrap() else {
        panic!("wrong regime");
    };
    assert!(rep.level_fit.unwrap().rel_err < 0.15);
    assert!(rep.lambda_fit.unwrap().rel_err < 0.15);
    assert!(rep.level_trend && rep.lambda_trend);
}

#[test]
fn supercritical_sweep_flags() {
    let base = ProblemParams::new(3, 2.5, 5.0, 1.0).unwrap();
    let records = run_sweep(&base, &[0.6, 0.8, 1.0, 1.2], &AUTO, &SolveConfig::default()).unwrap();
    let SweepReport::Supercritical(rep) = analyze_sweep(&classify_regime(&base).unwrap(), &records).unwrap() else {
        panic!("wrong regime");
    };
    assert!(rep.sigma_positive && rep.sigma_decreasing);
    assert!(rep.lambda_negative && rep.lambda_trend);
    assert!(rep.bound_satisfied);
}

#[test]
fn sweep_needs_four_masses() {
    let base = ProblemParams::new(3, 2.5, 3.0, 1.0).unwrap();
    let err = run_sweep(&base, &[0.5, 1.0], &AUTO, &SolveConfig::default()).unwrap_err();
    assert!(matches!(err, normsol::Error::FitSkipped { need: 4, have: 2 }));
}

#[test]
fn critical_verdicts_l2() {
    let base = ProblemParams::new(2, 1.5, 4.0, 1.0).unwrap();
    let probe = critical_report(&base, &[1.0], &CriticalOptions::default()).unwrap();
    let c_star = probe.masses.c_star.unwrap();
    assert!((c_star / 3.4206 - 1.0).abs() < 5e-3);
    let rep = critical_report(&base, &[0.9 * c_star, 1.1 * c_star], &CriticalOptions::default()).unwrap();
    assert_eq!(rep.verdicts[0].verdict, Verdict::ZeroInfimumEvidence);
    let pr = rep.verdicts[0].probe.unwrap();
    assert!(pr.min >= -1e-6 && pr.last < pr.initial);
    assert_eq!(rep.verdicts[1].verdict, Verdict::UnboundedBelowEvidence);
}

#[test]
fn critical_verdicts_lq_gap() {
    let q = 2.5;
    let base = ProblemParams::new(3, q, q * (1.0 + 2.0 / 3.0), 1.0).unwrap();
    let opts = CriticalOptions {
        probe_iters: 0,
        ..CriticalOptions::default()
    };
    let rep = critical_report(&base, &[1.0], &opts).unwrap();
    let (lo, hi) = (rep.masses.c_2star.unwrap(), rep.masses.chat_2star.unwrap());
    assert_eq!(rep.gap_ordered, Some(true));
    assert!(lo < hi);
    let mid = 0.5 * (lo + hi);
    let rep = critical_report(&base, &[0.5 * lo, mid, 5.0 * hi], &opts).unwrap();
    assert_eq!(rep.verdicts[0].verdict, Verdict::ZeroInfimumEvidence);
    assert_eq!(rep.verdicts[1].verdict, Verdict::OpenGap);
    assert_eq!(rep.verdicts[2].verdict, Verdict::UnboundedBelowEvidence);
}

#[test]
fn critical_report_needs_a_critical_exponent() {
    let base = ProblemParams::new(3, 2.5, 3.0, 1.0).unwrap();
    assert!(matches!(
        critical_report(&base, &[1.0], &CriticalOptions::default()),
        Err(normsol::Error::Regime(_))
    ));
}

#[test]
fn fiber_table_identities() {
    let sup = ProblemParams::new(3, 2.5, 5.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let k = FiberCoeffs::new(rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0), &sup);
        let t = fiber_table(&k).unwrap();
        assert_eq!(t.h_prime_at_one, t.pohozaev);
        // t₀ falls in the bucket of the sampled argmax
        let t0 = t.t0.unwrap();
        let i = (0..t.rows.len()).max_by(|&a, &b| t.rows[a].h.total_cmp(&t.rows[b].h)).unwrap();
        let lo = t.rows[i.saturating_sub(1)].t;
        let hi = t.rows[(i + 1).min(t.rows.len() - 1)].t;
        assert!(lo <= t0 && t0 <= hi, "t0 = {t0} outside [{lo}, {hi}]");
    }
    let sub = ProblemParams::new(3, 2.5, 3.0, 1.0).unwrap();
    let k = FiberCoeffs::new(1.0, 1.0, 1.0, &sub);
    let t = fiber_table(&k).unwrap();
    assert!(t.t0.is_none());
    assert!(fiber_h(1e-3, &k) < 0.0);
    assert!(t.rows[0].h < 0.0);
}

fn normsol(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_normsol"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn cli_regime_tags() {
    let dir = tempfile::tempdir().unwrap();
    for (args, tag) in [
        (["--n", "3", "--q", "2.5", "--p", "3"], "Subcritical"),
        (["--n", "3", "--q", "2.5", "--p", "5"], "Supercritical"),
        (["--n", "2", "--q", "1.5", "--p", "4"], "L2Critical"),
    ] {
        let mut all = vec!["regime"];
        all.extend(args);
        let (code, out) = normsol(&all, dir.path());
        assert_eq!(code, 0);
        assert!(out.starts_with(&format!("regime: {tag}")), "{out}");
    }
    assert!(dir.path().join("regime.json").exists());
}

#[test]
fn cli_solve_outputs_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = normsol(
        &["solve", "--n", "3", "--q", "2.5", "--p", "5", "--c", "1", "--r-max", "auto"],
        dir.path(),
    );
    assert_eq!(code, 0, "{out}");
    for f in ["profile.csv", "breakdown.csv", "history.csv", "summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let breakdown = std::fs::read_to_string(dir.path().join("breakdown.csv")).unwrap();
    let row: Vec<f64> = breakdown.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!(row[1] > 0.0);

    let (code, _) = normsol(&["solve", "--n", "2", "--q", "1.5", "--p", "4", "--c", "1"], dir.path());
    assert_eq!(code, 2);
    let (code, _) = normsol(&["solve", "--n", "3", "--q", "2.5", "--p", "9", "--c", "1"], dir.path());
    assert_eq!(code, 2);
    let (code, _) = normsol(
        &["solve", "--n", "3", "--q", "2.5", "--p", "3", "--c", "1", "--r-max", "auto", "--max-iters", "2"],
        dir.path(),
    );
    assert_eq!(code, 3);
    let (code, _) = normsol(
        &["fiber", "--n", "3", "--q", "2.5", "--p", "5", "--field", "/nonexistent/profile.csv"],
        dir.path(),
    );
    assert_eq!(code, 4);
}

#[test]
fn cli_config_file_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# subcritical sweep\nn = 3\nq = 2.5\np = 3\nr-max = auto\nc_list = 0.4,0.6,0.8,1.0\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg_s = cfg.to_str().unwrap();
    assert_eq!(normsol(&["sweep", "--config", cfg_s], &a).0, 0);
    assert_eq!(normsol(&["sweep", "--config", cfg_s], &b).0, 0);
    for f in ["sweep.csv", "sweep_report.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    // flags override the file
    let c = dir.path().join("c");
    assert_eq!(normsol(&["sweep", "--config", cfg_s, "--c-list", "0.5,0.6,0.7,0.9"], &c).0, 0);
    let recs = read_sweep_csv(&c.join("sweep.csv")).unwrap();
    assert_eq!(recs[0].c, 0.5);
}

#[test]
fn cli_critical_and_fiber() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = normsol(&["critical", "--n", "2", "--q", "1.5", "--p", "4", "--c-list", "3,3.8"], dir.path());
    assert_eq!(code, 0);
    assert!(out.contains("ZeroInfimumEvidence") && out.contains("UnboundedBelowEvidence"), "{out}");
    let (code, out) = normsol(&["fiber", "--n", "3", "--q", "2.5", "--p", "5", "--coeffs", "1,0.5,3"], dir.path());
    assert_eq!(code, 0);
    assert!(out.contains("t0 = "));
    let text = std::fs::read_to_string(dir.path().join("fiber.csv")).unwrap();
    assert_eq!(text.lines().count(), 201);
}
