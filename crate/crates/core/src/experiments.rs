//! Experiment harness behind the `normsol` binary: mass sweeps with
//! power-law fits, threshold reports at the critical exponents and fiber
//! tables.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{fiber_h, fiber_hprime, find_t0, FiberCoeffs};
use crate::error::{Error, Result};
use crate::exponents::{
    classify_regime, critical_masses, CriticalMasses, ExtremalNorms, ProblemParams, Regime, RegimeReport,
};
use crate::groundstate::{build_phi1, solve_wp, solve_wpq, ExtremalProfile};
use crate::radial_grid::{make_grid, norms, RadialGrid};
use crate::solver::{
    auto_radius, csv_io, descend, detect_blowdown, minimize_global, minimize_pohozaev, theta_grid, Mode,
    SolveConfig, SolveResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RMax {
    Fixed(f64),
    /// [`auto_radius`] per mass point.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: RMax,
    pub m: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            r_max: RMax::Fixed(20.0),
            m: 2000,
        }
    }
}

impl GridSpec {
    pub fn build(&self, params: &ProblemParams) -> Result<Arc<RadialGrid>> {
        let r = match self.r_max {
            RMax::Fixed(r) => r,
            RMax::Auto => auto_radius(params)?,
        };
        make_grid(params.n, r, self.m)
    }
}

/// Dispatches to the ground-state solver of the regime.
pub fn solve_ground_state(params: &ProblemParams, grid: &Arc<RadialGrid>, cfg: &SolveConfig) -> Result<SolveResult> {
    match classify_regime(params)?.regime {
        Regime::Subcritical => minimize_global(params, grid, cfg),
        Regime::Supercritical => minimize_pohozaev(params, grid, cfg),
        Regime::L2Critical | Regime::LqCritical => Err(Error::Regime(format!(
            "p = {} is a critical exponent; use the `critical` report instead of a ground-state solve",
            params.p
        ))),
        Regime::OutsideTheory => Err(Error::Regime(format!(
            "(N, q, p) = ({}, {}, {}) satisfies neither the subcritical nor the supercritical hypotheses",
            params.n, params.q, params.p
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub c: f64,
    pub level: f64,
    pub lambda: f64,
    pub grad2: f64,
    pub gradq: f64,
    pub lp: f64,
    pub converged: bool,
}

pub const SWEEP_HEADER: [&str; 7] = ["c", "level", "lambda", "grad2", "gradq", "lp", "converged"];

impl SweepRecord {
    pub fn from_result(c: f64, res: &SolveResult) -> Self {
        SweepRecord {
            c,
            level: res.level,
            lambda: res.lambda,
            grad2: res.norms.grad2,
            gradq: res.norms.gradq,
            lp: res.norms.lp,
            converged: res.converged,
        }
    }
}

/// One solve per mass, run in parallel. Non-convergence is recorded, not
/// raised.
pub fn run_sweep(base: &ProblemParams, c_list: &[f64], grid: &GridSpec, cfg: &SolveConfig) -> Result<Vec<SweepRecord>> {
    if c_list.len() < MIN_FIT_POINTS {
        return Err(Error::FitSkipped {
            need: MIN_FIT_POINTS,
            have: c_list.len(),
        });
    }
    c_list
        .par_iter()
        .map(|&c| {
            let params = base.with_mass(c);
            params.validate()?;
            let g = grid.build(&params)?;
            let res = solve_ground_state(&params, &g, cfg)?;
            Ok(SweepRecord::from_result(c, &res))
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(SWEEP_HEADER).map_err(|e| csv_io(path, e))?;
    for r in records {
        w.write_record([
            format!("{:.16e}", r.c),
            format!("{:.16e}", r.level),
            format!("{:.16e}", r.lambda),
            format!("{:.16e}", r.grad2),
            format!("{:.16e}", r.gradq),
            format!("{:.16e}", r.lp),
            r.converged.to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let header = rd.headers().map_err(|e| csv_io(path, e))?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(Error::parse(path, format!("expected header {}", SWEEP_HEADER.join(","))));
    }
    rd.deserialize()
        .map(|row| row.map_err(|e| Error::parse(path, e.to_string())))
        .collect()
}

pub const MIN_FIT_POINTS: usize = 4;

/// Least-squares slope of `log|y|` against `log c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub r2: f64,
    pub predicted: f64,
    pub rel_err: f64,
    pub points: usize,
}

/// Fit of `|level|` over the converged records with `|level| > 10⁻¹⁰`.
pub fn fit_power_law(records: &[SweepRecord], predicted: f64) -> Result<PowerLawFit> {
    fit_power_law_by(records, predicted, |r| r.level)
}

/// Same as [`fit_power_law`] for another column, e.g. `|r| r.lambda`.
pub fn fit_power_law_by(
    records: &[SweepRecord],
    predicted: f64,
    value: impl Fn(&SweepRecord) -> f64,
) -> Result<PowerLawFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.converged && value(r).abs() > 1e-10 && r.c > 0.0)
        .map(|r| (r.c.ln(), value(r).abs().ln()))
        .unzip();
    fit_log_log(&xs, &ys, predicted)
}

fn fit_log_log(xs: &[f64], ys: &[f64], predicted: f64) -> Result<PowerLawFit> {
    let n = xs.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::FitSkipped {
            need: MIN_FIT_POINTS,
            have: n,
        });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 1e-24 * nf) {
        return Err(Error::ParamDomain("power-law fit needs at least two distinct masses".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(PowerLawFit {
        exponent: slope,
        r2,
        predicted,
        rel_err: (slope - predicted).abs() / predicted.abs(),
        points: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcriticalSweepReport {
    pub level_fit: Option<PowerLawFit>,
    pub lambda_fit: Option<PowerLawFit>,
    /// `m(c) < 0` and increasing towards 0 as `c` decreases.
    pub level_trend: bool,
    pub lambda_trend: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupercriticalSweepReport {
    pub sigma_positive: bool,
    /// `σ(c₂) < σ(c₁)` for all adjacent converged `c₂ > c₁`.
    pub sigma_decreasing: bool,
    pub lambda_negative: bool,
    /// `λ_c` decreases as `c` decreases.
    pub lambda_trend: bool,
    /// Largest `K` with `λ_c ≤ −K(c^{−a} + c^{−b})` on the converged points.
    pub bound_k: Option<f64>,
    /// `max/min` of `−λ_c/(c^{−a} + c^{−b})`; bounded for a genuine rate.
    pub bound_spread: Option<f64>,
    pub bound_satisfied: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum SweepReport {
    Subcritical(SubcriticalSweepReport),
    Supercritical(SupercriticalSweepReport),
}

fn converged_sorted(records: &[SweepRecord]) -> Vec<SweepRecord> {
    let mut v: Vec<SweepRecord> = records.iter().filter(|r| r.converged).copied().collect();
    v.sort_by(|a, b| a.c.total_cmp(&b.c));
    v
}

fn strictly(v: &[SweepRecord], f: impl Fn(&SweepRecord) -> f64, increasing: bool) -> bool {
    v.windows(2).all(|w| if increasing { f(&w[1]) > f(&w[0]) } else { f(&w[1]) < f(&w[0]) })
}

pub fn analyze_sweep(report: &RegimeReport, records: &[SweepRecord]) -> Result<SweepReport> {
    let pe = &report.predicted_exponents;
    let conv = converged_sorted(records);
    let mut warnings = Vec::new();
    let skipped = records.len() - conv.len();
    if skipped > 0 {
        warnings.push(format!("{skipped} of {} points did not converge and were skipped", records.len()));
    }
    match report.regime {
        Regime::Subcritical => {
            let mut fit = |pred: Option<f64>, f: fn(&SweepRecord) -> f64, what: &str| {
                let pred = pred?;
                match fit_power_law_by(records, pred, f) {
                    Ok(fit) => Some(fit),
                    Err(e) => {
                        warnings.push(format!("{what} fit skipped: {e}"));
                        None
                    }
                }
            };
            let level_fit = fit(pe.m_of_c, |r| r.level, "level");
            let lambda_fit = fit(pe.lambda_of_c_sub, |r| r.lambda, "lambda");
            Ok(SweepReport::Subcritical(SubcriticalSweepReport {
                level_fit,
                lambda_fit,
                level_trend: conv.iter().all(|r| r.level < 0.0) && strictly(&conv, |r| r.level, false),
                lambda_trend: conv.iter().all(|r| r.lambda < 0.0) && strictly(&conv, |r| r.lambda, false),
                warnings,
            }))
        }
        Regime::Supercritical => {
            let (a, b) = (
                pe.lambda_of_c_super_a.unwrap_or(0.0),
                pe.lambda_of_c_super_b.unwrap_or(0.0),
            );
            let ratios: Vec<f64> = conv
                .iter()
                .map(|r| -r.lambda / (r.c.powf(-a) + r.c.powf(-b)))
                .collect();
            let lambda_negative = conv.iter().all(|r| r.lambda < 0.0);
            let (bound_k, bound_spread) = if conv.is_empty() {
                warnings.push("no converged points".into());
                (None, None)
            } else {
                let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (Some(lo), Some(hi / lo))
            };
            Ok(SweepReport::Supercritical(SupercriticalSweepReport {
                sigma_positive: conv.iter().all(|r| r.level > 0.0),
                sigma_decreasing: strictly(&conv, |r| r.level, false),
                lambda_negative,
                lambda_trend: strictly(&conv, |r| r.lambda, true),
                bound_satisfied: lambda_negative && bound_k.is_some_and(|k| k > 0.0),
                bound_k,
                bound_spread,
                warnings,
            }))
        }
        other => Err(Error::Regime(format!("sweeps need a subcritical or supercritical regime, got {other:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ZeroInfimumEvidence,
    UnboundedBelowEvidence,
    Inconclusive,
    /// Mass inside `[c_**, ĉ_**]`, where the question is open.
    OpenGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalOptions {
    /// Concentration parameter of the test function.
    pub tau: f64,
    pub theta_max: f64,
    pub theta_points: usize,
    pub floor: f64,
    /// Iterations of the descent probe; 0 skips it.
    pub probe_iters: usize,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions {
            tau: 16.0,
            theta_max: 8.0,
            theta_points: 161,
            floor: -1e-6,
            probe_iters: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub initial: f64,
    pub min: f64,
    pub last: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassVerdict {
    pub c: f64,
    pub verdict: Verdict,
    pub unbounded: bool,
    pub trace_min: f64,
    pub trace_last: f64,
    pub probe: Option<ProbeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub n: usize,
    pub q: f64,
    pub p: f64,
    pub regime: Regime,
    pub masses: CriticalMasses,
    /// Set when `c_** < ĉ_**` could be checked.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_ordered: Option<bool>,
    pub verdicts: Vec<MassVerdict>,
}

const EXTREMAL_RADIUS: f64 = 40.0;
const EXTREMAL_NODES: usize = 4001;

/// Semilinear extremal on a table wide enough for the test function.
pub fn critical_extremal(n: usize, p: f64) -> Result<ExtremalProfile> {
    solve_wp(n, p, &make_grid(n, EXTREMAL_RADIUS, EXTREMAL_NODES)?)
}

/// Grid carrying `φ₁` at concentration `τ`: four cutoff radii wide, 32 nodes
/// per length `1/τ`.
pub fn phi1_grid(n: usize, tau: f64) -> Result<Arc<RadialGrid>> {
    let r = 4.0 / tau.sqrt();
    let m = (r * 32.0 * tau).ceil() as usize + 1;
    make_grid(n, r, m)
}

/// Thresholds and per-mass verdicts at `p = p̄` or `p = p̂`.
pub fn critical_report(base: &ProblemParams, c_list: &[f64], opts: &CriticalOptions) -> Result<CriticalReport> {
    let report = classify_regime(base)?;
    let (n, q, p) = (base.n, base.q, base.p);
    let wp = critical_extremal(n, p)?;
    let wp_norms = ExtremalNorms {
        norms: wp.norms_with_q(q),
        converged: wp.converged,
    };
    let masses = match report.regime {
        Regime::L2Critical => critical_masses(base, Some(&wp_norms), None)?,
        Regime::LqCritical => {
            let wpq = solve_wpq(n, p, q, &make_grid(n, EXTREMAL_RADIUS, EXTREMAL_NODES)?)?;
            critical_masses(base, Some(&wp_norms), Some(&wpq.extremal_norms()))?
        }
        other => {
            return Err(Error::Regime(format!(
                "threshold reports need p = p̄ or p = p̂, got {other:?} at p = {p}"
            )))
        }
    };
    let gap_ordered = match (masses.c_2star, masses.chat_2star) {
        (Some(a), Some(b)) => Some(a < b),
        _ => None,
    };
    let grid = phi1_grid(n, opts.tau)?;
    let thetas = theta_grid(opts.theta_max, opts.theta_points);
    let verdicts = c_list
        .par_iter()
        .map(|&c| {
            let params = base.with_mass(c);
            params.validate()?;
            if let (Some(lo), Some(hi)) = (masses.c_2star, masses.chat_2star) {
                if (lo..=hi).contains(&c) {
                    return mass_verdict(&params, &wp, &grid, &thetas, opts, true);
                }
            }
            mass_verdict(&params, &wp, &grid, &thetas, opts, false)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CriticalReport {
        n,
        q,
        p,
        regime: report.regime,
        masses,
        gap_ordered,
        verdicts,
    })
}

fn mass_verdict(
    params: &ProblemParams,
    wp: &ExtremalProfile,
    grid: &Arc<RadialGrid>,
    thetas: &[f64],
    opts: &CriticalOptions,
    in_gap: bool,
) -> Result<MassVerdict> {
    let seed = build_phi1(opts.tau, params.c, wp, grid)?;
    let bd = detect_blowdown(params, &seed, thetas, opts.floor)?;
    let trace_min = bd.trace.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let trace_last = bd.trace.last().map_or(f64::NAN, |t| t.1);
    let probe = if opts.probe_iters > 0 {
        let cfg = SolveConfig {
            max_iters: opts.probe_iters,
            ..SolveConfig::default()
        };
        let res = descend(params, seed, &cfg, Mode::Global)?;
        let energies = res.history.iter().map(|h| h.energy);
        Some(ProbeSummary {
            initial: res.history.first().map_or(f64::NAN, |h| h.energy),
            min: energies.fold(f64::INFINITY, f64::min),
            last: res.level,
            iterations: res.iterations,
        })
    } else {
        None
    };
    let verdict = if in_gap {
        Verdict::OpenGap
    } else if bd.unbounded {
        Verdict::UnboundedBelowEvidence
    } else {
        let bounded_trace = trace_min >= opts.floor;
        let probe_ok = probe.is_none_or(|pr| pr.min >= opts.floor && pr.last <= pr.initial);
        if bounded_trace && probe_ok {
            Verdict::ZeroInfimumEvidence
        } else {
            Verdict::Inconclusive
        }
    };
    Ok(MassVerdict {
        c: params.c,
        verdict,
        unbounded: bd.unbounded,
        trace_min,
        trace_last,
        probe,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberRow {
    pub t: f64,
    pub h: f64,
    pub h_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberTable {
    pub coeffs: FiberCoeffs,
    pub rows: Vec<FiberRow>,
    /// Fiber maximizer, present for supercritical orderings.
    pub t0: Option<f64>,
    pub h_prime_at_one: f64,
    /// `A + (1+δ_q)B − δ_pC`.
    pub pohozaev: f64,
}

pub const FIBER_SAMPLES: usize = 200;

/// `h` and `h′` at 200 log-spaced `t` spanning two decades either side of
/// `1` and `t₀`.
pub fn fiber_table(k: &FiberCoeffs) -> Result<FiberTable> {
    let t0 = if k.is_supercritical_ordering() {
        Some(find_t0(k)?)
    } else {
        None
    };
    let lo = t0.map_or(1.0, |t| t.min(1.0)) / 100.0;
    let hi = t0.map_or(1.0, |t| t.max(1.0)) * 100.0;
    let (a, b) = (lo.ln(), hi.ln());
    let rows = (0..FIBER_SAMPLES)
        .map(|i| {
            let t = (a + (b - a) * i as f64 / (FIBER_SAMPLES - 1) as f64).exp();
            FiberRow {
                t,
                h: fiber_h(t, k),
                h_prime: fiber_hprime(t, k),
            }
        })
        .collect();
    Ok(FiberTable {
        coeffs: *k,
        rows,
        t0,
        h_prime_at_one: fiber_hprime(1.0, k),
        pohozaev: k.a + (1.0 + k.delta_q()) * k.b - k.delta_p() * k.c,
    })
}

/// Fiber table of a stored profile.
pub fn fiber_table_for_field(params: &ProblemParams, u: &crate::radial_grid::RadialField) -> Result<FiberTable> {
    fiber_table(&FiberCoeffs::from_norms(&norms(u, params.q, params.p), params))
}

pub fn write_fiber_csv(path: &Path, table: &FiberTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["t", "h", "h_prime"]).map_err(|e| csv_io(path, e))?;
    for r in &table.rows {
        w.write_record([format!("{:.16e}", r.t), format!("{:.16e}", r.h), format!("{:.16e}", r.h_prime)])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    std::fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
}
