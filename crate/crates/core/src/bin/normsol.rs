use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use normsol::energy::{FiberCoeffs, BREAKDOWN_HEADER};
use normsol::experiments::{
    analyze_sweep, critical_report, fiber_table, fiber_table_for_field, run_sweep, solve_ground_state,
    write_fiber_csv, write_json, write_sweep_csv, CriticalOptions, GridSpec, RMax, SweepReport,
};
use normsol::exponents::{classify_regime, ProblemParams, Regime};
use normsol::radial_grid::{field_from_samples, make_grid, read_field_csv, write_field_csv};
use normsol::solver::{multistart, Init, SolveConfig, SolveResult};
use normsol::Error;

#[derive(Parser)]
#[command(name = "normsol", version, about = "Normalized solutions of -Δu - Δ_q u = λu + |u|^(p-2)u, ‖u‖₂ = c")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify (N, q, p) and print the derived exponents.
    Regime(Common),
    /// Ground state at one mass.
    Solve(Common),
    /// Ground states over a list of masses, with power-law fits or trend checks.
    Sweep(Common),
    /// Threshold masses and per-mass verdicts at p = p̄ or p = p̂.
    Critical(Common),
    /// Fiber map t ↦ I(u_t) from coefficients or a stored profile.
    Fiber(FiberArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// Truncation radius, or `auto`.
    #[arg(long)]
    r_max: Option<String>,
    #[arg(long)]
    grid_m: Option<usize>,
    /// Relative tangential-gradient tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// `gaussian:<width>`, `wp` or `file:<path>`.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated masses.
    #[arg(long)]
    c_list: Option<String>,
    #[arg(long)]
    theta_max: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
}

#[derive(Args, Clone)]
struct FiberArgs {
    #[command(flatten)]
    common: Common,
    /// `A,B,C` = grad2, gradq, lp.
    #[arg(long, conflicts_with = "field")]
    coeffs: Option<String>,
    /// Profile CSV (`r,u`).
    #[arg(long)]
    field: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(String),
    NotConverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::NotConverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Io { .. } | Error::Parse { .. } => Failure::Io(m),
            Error::Dependency(_)
            | Error::ShootingBracket(_)
            | Error::Normalization(_)
            | Error::Truncation(_)
            | Error::DegenerateFiber(_)
            | Error::ZeroField => Failure::NotConverged(m),
            _ => Failure::Input(m),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

/// Merged view of the config file and the flags.
struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    fn load(common: &Common) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = &common.config {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Failure::Io(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
                map.insert(k.trim().replace('-', "_"), v.trim().to_string());
            }
        }
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        set("n", common.n.map(|v| v.to_string()));
        set("q", common.q.map(|v| v.to_string()));
        set("p", common.p.map(|v| v.to_string()));
        set("c", common.c.map(|v| v.to_string()));
        set("r_max", common.r_max.clone());
        set("grid_m", common.grid_m.map(|v| v.to_string()));
        set("tol", common.tol.map(|v| v.to_string()));
        set("max_iters", common.max_iters.map(|v| v.to_string()));
        set("init", common.init.clone());
        set("out_dir", common.out_dir.as_ref().map(|v| v.display().to_string()));
        set("c_list", common.c_list.clone());
        set("theta_max", common.theta_max.map(|v| v.to_string()));
        set("floor", common.floor.map(|v| v.to_string()));
        Ok(Settings { map })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::Input(format!("cannot parse {key} = {v:?}"))),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> CliResult<T> {
        self.get(key)?
            .ok_or_else(|| Failure::Input(format!("missing --{}", key.replace('_', "-"))))
    }

    fn params(&self, need_c: bool) -> CliResult<ProblemParams> {
        let c = if need_c { self.require("c")? } else { self.get("c")?.unwrap_or(1.0) };
        Ok(ProblemParams::new(self.require("n")?, self.require("q")?, self.require("p")?, c)?)
    }

    fn grid_spec(&self) -> CliResult<GridSpec> {
        let d = GridSpec::default();
        let r_max = match self.map.get("r_max").map(String::as_str) {
            None => d.r_max,
            Some("auto") => RMax::Auto,
            Some(v) => RMax::Fixed(v.parse().map_err(|_| Failure::Input(format!("cannot parse r_max = {v:?}")))?),
        };
        Ok(GridSpec {
            r_max,
            m: self.get("grid_m")?.unwrap_or(d.m),
        })
    }

    fn solve_config(&self) -> CliResult<SolveConfig> {
        let mut cfg = SolveConfig::default();
        if let Some(t) = self.get("tol")? {
            cfg.tol_grad = t;
        }
        if let Some(m) = self.get("max_iters")? {
            cfg.max_iters = m;
        }
        if let Some(s) = self.map.get("init") {
            cfg.init = parse_init(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn c_list(&self) -> CliResult<Vec<f64>> {
        let raw: String = self.require("c_list")?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Failure::Input(format!("cannot parse mass {s:?} in c_list")))
            })
            .collect()
    }

    fn out_dir(&self) -> CliResult<PathBuf> {
        let dir = PathBuf::from(self.map.get("out_dir").map_or("out", String::as_str));
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn parse_init(s: &str) -> CliResult<Init> {
    if s == "wp" {
        return Ok(Init::WpSeed);
    }
    if let Some(w) = s.strip_prefix("gaussian:") {
        return w
            .parse()
            .map(Init::Gaussian)
            .map_err(|_| Failure::Input(format!("cannot parse Gaussian width {w:?}")));
    }
    if let Some(p) = s.strip_prefix("file:") {
        return Ok(Init::FromFile(PathBuf::from(p)));
    }
    Err(Failure::Input(format!("unknown init {s:?}; use gaussian:<w>, wp or file:<path>")))
}

fn regime(common: &Common) -> CliResult<()> {
    let s = Settings::load(common)?;
    let params = s.params(false)?;
    let report = classify_regime(&params)?;
    let ex = &report.exponents;
    println!("regime: {:?}", report.regime);
    println!(
        "delta_p = {:.6}  delta_q = {:.6}  nu = {:.6}  pbar = {:.6}  phat = {:.6}",
        ex.delta_p, ex.delta_q, ex.nu_pq, ex.pbar, ex.phat
    );
    println!("conditions: {:?}", report.satisfied_conditions);
    match report.regime {
        Regime::L2Critical => println!("threshold: c_* = ‖W_p̄‖₂ (see `critical`)"),
        Regime::LqCritical => println!("thresholds: c_** < ĉ_** (see `critical`)"),
        _ => {}
    }
    let out = s.out_dir()?;
    write_json(&out.join("regime.json"), &report)?;
    Ok(())
}

fn summary(res: &SolveResult, params: &ProblemParams, r_max: f64) -> String {
    let bd = &res.breakdown;
    let mut s = String::new();
    let _ = writeln!(s, "N = {}  q = {}  p = {}  c = {}  R = {r_max}", params.n, params.q, params.p, params.c);
    let _ = writeln!(s, "mode        {:?}", res.mode);
    let _ = writeln!(s, "converged   {} ({} iterations)", res.converged, res.iterations);
    let _ = writeln!(s, "level       {:.12e}", res.level);
    let _ = writeln!(s, "lambda      {:.12e}", res.lambda);
    let _ = writeln!(s, "P           {:.6e}  (relative {:.3e})", bd.pohozaev, bd.pohozaev / (bd.kin2 + bd.kinq));
    let _ = writeln!(s, "residual    {:.6e}", res.residual);
    let _ = writeln!(s, "grad_norm   {:.6e}", res.grad_norm);
    s
}

fn solve(common: &Common) -> CliResult<()> {
    let s = Settings::load(common)?;
    let params = s.params(true)?;
    let cfg = s.solve_config()?;
    let grid = s.grid_spec()?.build(&params)?;
    let res = match cfg.init {
        Init::Gaussian(w) => multistart(&params, &grid, &cfg, &[0.5 * w, w, 2.0 * w])?,
        _ => solve_ground_state(&params, &grid, &cfg)?,
    };
    let out = s.out_dir()?;
    write_field_csv(&out.join("profile.csv"), &res.u)?;
    res.write_history_csv(&out.join("history.csv"))?;
    let path = out.join("breakdown.csv");
    let row: Vec<String> = res.breakdown.csv_row(params.c).iter().map(|v| format!("{v:.16e}")).collect();
    let text = format!("{}\n{}\n", BREAKDOWN_HEADER.join(","), row.join(","));
    std::fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let text = summary(&res, &params, grid.r_max());
    print!("{text}");
    let path = out.join("summary.txt");
    std::fs::write(&path, &text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    if !res.converged {
        return Err(Failure::NotConverged("ground-state solve did not converge".into()));
    }
    Ok(())
}

fn sweep(common: &Common) -> CliResult<()> {
    let s = Settings::load(common)?;
    let params = s.params(false)?;
    let cfg = s.solve_config()?;
    let grid = s.grid_spec()?;
    let c_list = s.c_list()?;
    let records = run_sweep(&params, &c_list, &grid, &cfg)?;
    let report = analyze_sweep(&classify_regime(&params)?, &records)?;
    let out = s.out_dir()?;
    write_sweep_csv(&out.join("sweep.csv"), &records)?;
    write_json(&out.join("sweep_report.json"), &report)?;
    println!("{:>12} {:>20} {:>20} {:>5}", "c", "level", "lambda", "conv");
    for r in &records {
        println!("{:>12.6} {:>20.10e} {:>20.10e} {:>5}", r.c, r.level, r.lambda, r.converged);
    }
    let warnings = match &report {
        SweepReport::Subcritical(r) => {
            for (what, fit) in [("level", &r.level_fit), ("lambda", &r.lambda_fit)] {
                if let Some(f) = fit {
                    println!(
                        "{what} exponent {:.4} (predicted {:.4}, rel err {:.3}, r2 {:.6})",
                        f.exponent, f.predicted, f.rel_err, f.r2
                    );
                }
            }
            println!("trends: level {} lambda {}", r.level_trend, r.lambda_trend);
            &r.warnings
        }
        SweepReport::Supercritical(r) => {
            println!(
                "sigma > 0 {}  sigma decreasing {}  lambda < 0 {}  lambda trend {}  bound K {:?}",
                r.sigma_positive, r.sigma_decreasing, r.lambda_negative, r.lambda_trend, r.bound_k
            );
            &r.warnings
        }
    };
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn critical(common: &Common) -> CliResult<()> {
    let s = Settings::load(common)?;
    let params = s.params(false)?;
    let d = CriticalOptions::default();
    let opts = CriticalOptions {
        theta_max: s.get("theta_max")?.unwrap_or(d.theta_max),
        floor: s.get("floor")?.unwrap_or(d.floor),
        ..d
    };
    let c_list = s.c_list()?;
    let report = critical_report(&params, &c_list, &opts)?;
    let m = &report.masses;
    for (name, v) in [("c_*", m.c_star), ("c_**", m.c_2star), ("ĉ_**", m.chat_2star)] {
        if let Some(v) = v {
            println!("{name} = {v:.8}");
        }
    }
    for v in &report.verdicts {
        println!("c = {:<12.6} {:?}", v.c, v.verdict);
    }
    write_json(&s.out_dir()?.join("critical.json"), &report)?;
    Ok(())
}

fn fiber(args: &FiberArgs) -> CliResult<()> {
    let s = Settings::load(&args.common)?;
    let params = s.params(false)?;
    let table = match (&args.coeffs, &args.field) {
        (Some(raw), _) => {
            let v: Vec<f64> = raw
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| Failure::Input(format!("cannot parse coefficient {x:?}"))))
                .collect::<CliResult<_>>()?;
            if v.len() != 3 {
                return Err(Failure::Input("--coeffs takes exactly three values A,B,C".into()));
            }
            fiber_table(&FiberCoeffs::new(v[0], v[1], v[2], &params))?
        }
        (None, Some(path)) => fiber_table_for_field(&params, &load_field(path, params.n)?)?,
        (None, None) => return Err(Failure::Input("fiber needs --coeffs or --field".into())),
    };
    let out = s.out_dir()?;
    write_fiber_csv(&out.join("fiber.csv"), &table)?;
    write_json(&out.join("fiber.json"), &table)?;
    match table.t0 {
        Some(t0) => println!("t0 = {t0:.12}"),
        None => println!("t0: not defined (fiber map is not of supercritical type)"),
    }
    println!("h'(1) = {:.12e}  P = {:.12e}", table.h_prime_at_one, table.pohozaev);
    Ok(())
}

/// Reads a profile on its own uniform grid.
fn load_field(path: &Path, n: usize) -> CliResult<normsol::radial_grid::RadialField> {
    let (rs, us) = read_field_csv(path)?;
    let r_max = *rs.last().ok_or_else(|| Failure::Io(format!("{}: empty profile", path.display())))?;
    let grid = make_grid(n, r_max, rs.len())?;
    Ok(field_from_samples(grid, &rs, &us)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Regime(c) => regime(c),
        Command::Solve(c) => solve(c),
        Command::Sweep(c) => sweep(c),
        Command::Critical(c) => critical(c),
        Command::Fiber(a) => fiber(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
