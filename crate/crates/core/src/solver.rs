//! Minimization on the mass sphere `S_c = {‖u‖₂ = c}` over nonnegative
//! radial profiles.
//!
//! Two objectives share one descent engine:
//!
//! * `Global`: the energy `I` itself (subcritical ground states, `m(c)`).
//! * `Pohozaev`: the fiber maximum `J(u) = max_t I(u_t) = I(u_{t₀(u)})`,
//!   whose minimizers over `S_c` are the minimizers of `I` on the Pohozaev
//!   manifold (supercritical ground states, `σ(c)`). By the envelope
//!   theorem `∇J = t₀²∇(½A) + t₀^{e2}∇(B/q) − t₀^{e3}∇(C/p)`. Since `J` is
//!   dilation invariant, the iterate is dilated back onto the manifold only
//!   when `t₀` drifts by more than [`REPROJECT_DRIFT`], and once at the end.
//!
//! The search direction is a Riemannian gradient in the metric of
//! `S = S₂ + S_q(u) + σM`, where `S₂`, `S_q` are the stiffness matrices of
//! the two gradient terms (the second linearized at `u`) and `M` the mass
//! matrix; with the tangent projection `D = S⁻¹G − μS⁻¹Mu` it satisfies
//! `⟨G, D⟩ = DᵀSD > 0`. Directions are combined by Polak–Ribière+ and the
//! step is an Armijo backtracking on `E(normalize(clip(u − sD)))`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{
    default_eps_reg, evaluate, fiber_h, fiber_minimizer, find_t0, gradient_parts, EnergyBreakdown,
    FiberCoeffs,
};
use crate::error::{Error, Result};
use crate::exponents::{classify_regime, ProblemParams, Regime};
use crate::groundstate::solve_wp;
use crate::radial_grid::{
    field_from_samples, make_grid, norms, read_field_csv, resample_dilation, Norms, RadialField,
    RadialGrid,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `exp(−r²/(2w²))`, fitted to the fiber optimum.
    Gaussian(f64),
    /// The semilinear extremal `W_p` at the problem's `p`.
    WpSeed,
    FromFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_iters: usize,
    /// Bound on `‖g − (⟨g,u⟩/c²)u‖ / ‖g‖`.
    pub tol_grad: f64,
    /// Bound on `|P| / (‖∇u‖₂² + ‖∇u‖_q^q)`.
    pub tol_pohozaev: f64,
    /// Pohozaev mode: relative improvement of the best objective over the
    /// last [`STAGNATION_WINDOW`] iterations regarded as stagnation.
    pub tol_energy: f64,
    pub step0: f64,
    /// Backtracking factor.
    pub armijo_shrink: f64,
    /// Sufficient-decrease constant.
    pub armijo_c: f64,
    /// `None` picks [`default_eps_reg`] of the initial field for `q < 2`.
    pub eps_reg: Option<f64>,
    pub init: Init,
    /// Dilate the seed to the optimum of its fiber map before descending.
    pub fit_seed: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iters: 5000,
            tol_grad: 1e-6,
            tol_pohozaev: 1e-3,
            tol_energy: 1e-8,
            step0: 1.0,
            armijo_shrink: 0.5,
            armijo_c: 1e-4,
            eps_reg: None,
            init: Init::Gaussian(1.0),
            fit_seed: true,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.tol_grad) && pos(self.tol_pohozaev) && pos(self.tol_energy) && pos(self.step0)) {
            return Err(Error::ParamDomain("tolerances and step0 must be positive".into()));
        }
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(unit(self.armijo_shrink) && unit(self.armijo_c)) {
            return Err(Error::ParamDomain("Armijo constants must lie in (0,1)".into()));
        }
        if let Init::Gaussian(w) = self.init {
            if !pos(w) {
                return Err(Error::ParamDomain(format!("Gaussian width must be positive (w = {w})")));
            }
        }
        if matches!(self.eps_reg, Some(e) if !(e >= 0.0)) {
            return Err(Error::ParamDomain("eps_reg must be nonnegative".into()));
        }
        Ok(())
    }
}

pub const STAGNATION_WINDOW: usize = 10;

/// Largest `|t₀ − 1|` tolerated between Pohozaev projections.
pub const REPROJECT_DRIFT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Global,
    Pohozaev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub pohozaev: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: RadialField,
    pub breakdown: EnergyBreakdown,
    pub norms: Norms,
    /// `m(c)` or `σ(c)` estimate.
    pub level: f64,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub history: Vec<HistoryEntry>,
    pub mode: Mode,
    /// Final relative tangential gradient.
    pub grad_norm: f64,
    pub residual: f64,
}

impl SolveResult {
    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["iter", "I", "grad_norm", "P"]).map_err(|e| csv_io(path, e))?;
        for h in &self.history {
            w.write_record([
                h.iter.to_string(),
                format!("{:.16e}", h.energy),
                format!("{:.16e}", h.grad_norm),
                format!("{:.16e}", h.pohozaev),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// `(c/‖u‖₂)·u`.
pub fn project_mass(u: &RadialField, c: f64) -> Result<RadialField> {
    let m = u.mass2();
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::ZeroField);
    }
    Ok(u.scaled(c / m.sqrt()))
}

/// Energy-minimizing dilation factor of `u` for its regime: the fiber
/// minimizer when `pδ_p < min(2, q(1+δ_q))`, the maximizer `t₀` when
/// `pδ_p > max(2, q(1+δ_q))`, otherwise 1.
fn fiber_fit(k: &FiberCoeffs) -> f64 {
    let t = if k.is_subcritical_ordering() {
        fiber_minimizer(k)
    } else if k.is_supercritical_ordering() {
        find_t0(k)
    } else {
        Ok(1.0)
    };
    t.unwrap_or(1.0)
}

/// Fiber-optimal dilation `t*` of the Gaussian `exp(−r²/(2w²))` at mass
/// `c`, with the multiplier estimate `λ*` of the dilated profile.
fn gaussian_fiber(params: &ProblemParams, w: f64) -> Result<(f64, f64)> {
    let grid = make_grid(params.n, 12.0 * w, 2400)?;
    let u = project_mass(&RadialField::from_fn(grid, |r| (-0.5 * (r / w).powi(2)).exp()), params.c)?;
    let nm = norms(&u, params.q, params.p);
    let k = FiberCoeffs::from_norms(&nm, params);
    let t = fiber_fit(&k);
    let lambda = (k.a * t * t + k.b * t.powf(k.e2) - k.c * t.powf(k.e3)) / nm.mass2;
    Ok((t, lambda))
}

/// Truncation radius sized to the expected ground state: the fiber-optimal
/// dilation of a Gaussian gives a width `w*` and a multiplier estimate `λ*`,
/// and `R = max(6w*, 25/√|λ*|)`.
pub fn auto_radius(params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    let (t, lambda) = gaussian_fiber(params, 1.0)?;
    let width = 1.0 / t;
    let decay = if lambda < 0.0 { 25.0 / (-lambda).sqrt() } else { 12.0 * width };
    Ok((6.0 * width).max(decay))
}

/// Initial profile on `grid` with mass `c`.
///
/// With `fit_seed` the seed is first dilated to the optimum of its fiber
/// map, with the resulting width kept between 8 grid spacings and `R/6`.
pub fn initial_field(params: &ProblemParams, grid: &Arc<RadialGrid>, cfg: &SolveConfig) -> Result<RadialField> {
    let (w_min, w_max) = (8.0 * grid.spacing(), grid.r_max() / 6.0);
    let raw = match &cfg.init {
        Init::Gaussian(w) => {
            let mut w = *w;
            if cfg.fit_seed {
                let (t, _) = gaussian_fiber(params, w)?;
                w = (w / t).clamp(w_min, w_max);
            }
            return project_mass(&RadialField::from_fn(grid.clone(), |r| (-0.5 * (r / w).powi(2)).exp()), params.c);
        }
        Init::WpSeed => solve_wp(params.n, params.p, grid)?.field,
        Init::FromFile(path) => {
            let (rs, us) = read_field_csv(path)?;
            field_from_samples(grid.clone(), &rs, &us)?
        }
    };
    let mut u = project_mass(&raw, params.c)?;
    if cfg.fit_seed {
        let k = FiberCoeffs::from_norms(&norms(&u, params.q, params.p), params);
        let t = fiber_fit(&k);
        let width = rms_radius(&u);
        let t_eff = width / (width / t).clamp(w_min, w_max);
        if (t_eff - 1.0).abs() > 1e-12 {
            u = resample_dilation(&u, t_eff)?;
        }
    }
    Ok(u)
}

/// `(∫r²u²/(N∫u²))^{1/2}`, the width of a Gaussian with the same moment.
fn rms_radius(u: &RadialField) -> f64 {
    let g = u.grid();
    let r2: Vec<f64> = g.nodes().iter().zip(u.values()).map(|(r, x)| r * r * x * x).collect();
    (g.integrate(&r2).unwrap_or(0.0) / u.mass2() / g.dim() as f64).sqrt()
}

fn check_regime(params: &ProblemParams, want: Regime) -> Result<()> {
    let report = classify_regime(params)?;
    if report.regime != want {
        return Err(Error::Regime(format!(
            "expected {want:?} parameters, got {:?} for (N, q, p) = ({}, {}, {})",
            report.regime, params.n, params.q, params.p
        )));
    }
    Ok(())
}

pub fn minimize_global(params: &ProblemParams, grid: &Arc<RadialGrid>, cfg: &SolveConfig) -> Result<SolveResult> {
    check_regime(params, Regime::Subcritical)?;
    let u0 = initial_field(params, grid, cfg)?;
    descend(params, u0, cfg, Mode::Global)
}

pub fn minimize_pohozaev(params: &ProblemParams, grid: &Arc<RadialGrid>, cfg: &SolveConfig) -> Result<SolveResult> {
    check_regime(params, Regime::Supercritical)?;
    let u0 = initial_field(params, grid, cfg)?;
    descend(params, u0, cfg, Mode::Pohozaev)
}

/// Best of several Gaussian starts (by level). Only local minimality is
/// certified; the result is the best one found.
pub fn multistart(
    params: &ProblemParams,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    widths: &[f64],
) -> Result<SolveResult> {
    let regime = classify_regime(params)?.regime;
    let mut best: Option<SolveResult> = None;
    for &w in widths {
        let c = SolveConfig {
            init: Init::Gaussian(w),
            ..cfg.clone()
        };
        let res = match regime {
            Regime::Subcritical => minimize_global(params, grid, &c)?,
            Regime::Supercritical => minimize_pohozaev(params, grid, &c)?,
            other => {
                return Err(Error::Regime(format!(
                    "no ground-state solver for {other:?} parameters; use the critical report"
                )))
            }
        };
        let better = match &best {
            None => true,
            Some(b) => (res.converged && !b.converged) || (res.converged == b.converged && res.level < b.level),
        };
        if better {
            best = Some(res);
        }
    }
    best.ok_or_else(|| Error::ParamDomain("multistart needs at least one width".into()))
}

/// Runs the descent engine from `u0` without a regime check; used for
/// probes at critical exponents.
pub fn descend(params: &ProblemParams, u0: RadialField, cfg: &SolveConfig, mode: Mode) -> Result<SolveResult> {
    cfg.validate()?;
    Engine::new(params, u0, cfg, mode)?.run()
}

/// Relative residual of `−Δu − Δ_q u − |u|^{p−2}u − λu` (discrete gradient
/// minus `λu`) over the nodes `2..M−2`, normalized by the sum of the norms of
/// its four terms.
pub fn pde_residual(u: &RadialField, lambda: f64, params: &ProblemParams) -> f64 {
    let eps = if params.q < 2.0 { default_eps_reg(u) } else { 0.0 };
    let parts = gradient_parts(u, params, eps);
    let grid = u.grid();
    let w = grid.weights();
    let v = u.values();
    let m = v.len();
    let (mut num, mut n2, mut nq, mut np, mut nu) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 2..m - 1 {
        let g = parts.kin2[i] + parts.kinq[i] + parts.pot[i];
        let r = g - lambda * v[i];
        num += w[i] * r * r;
        n2 += w[i] * parts.kin2[i].powi(2);
        nq += w[i] * parts.kinq[i].powi(2);
        np += w[i] * parts.pot[i].powi(2);
        nu += w[i] * v[i] * v[i];
    }
    let scale = n2.sqrt() + nq.sqrt() + np.sqrt() + lambda.abs() * nu.sqrt();
    if scale == 0.0 {
        0.0
    } else {
        num.sqrt() / scale
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowdownReport {
    pub unbounded: bool,
    /// `(θ, I(u⋆θ))`
    pub trace: Vec<(f64, f64)>,
}

/// Energy along `θ ↦ e^{Nθ/2}u(e^θ r)`, evaluated exactly from the fiber
/// coefficients of `seed`. Unbounded below means the trace dips under
/// `floor` and is still decreasing at the last θ.
pub fn detect_blowdown(
    params: &ProblemParams,
    seed: &RadialField,
    theta_grid: &[f64],
    floor: f64,
) -> Result<BlowdownReport> {
    if theta_grid.len() < 2 || theta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::ParamDomain("θ grid must be increasing with at least two points".into()));
    }
    if !(floor < 0.0) {
        return Err(Error::ParamDomain(format!("floor < 0 violated (floor = {floor})")));
    }
    let k = FiberCoeffs::from_norms(&norms(seed, params.q, params.p), params);
    let trace: Vec<(f64, f64)> = theta_grid.iter().map(|&th| (th, fiber_h(th.exp(), &k))).collect();
    let dips = trace.iter().any(|&(_, e)| e < floor);
    let n = trace.len();
    let decreasing = trace[n - 1].1 < trace[n - 2].1;
    Ok(BlowdownReport {
        unbounded: dips && decreasing,
        trace,
    })
}

pub fn theta_grid(theta_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -theta_max + 2.0 * theta_max * i as f64 / (points - 1) as f64)
        .collect()
}

struct Engine<'a> {
    params: &'a ProblemParams,
    cfg: &'a SolveConfig,
    mode: Mode,
    grid: Arc<RadialGrid>,
    eps: f64,
    c2: f64,
    start: RadialField,
}

struct Point {
    u: Vec<f64>,
    norms: Norms,
    /// Objective value (`I` or `J`).
    f: f64,
    /// Fiber maximizer (1 in global mode).
    t0: f64,
}

impl<'a> Engine<'a> {
    fn new(params: &'a ProblemParams, u0: RadialField, cfg: &'a SolveConfig, mode: Mode) -> Result<Self> {
        let grid = u0.grid().clone();
        if grid.dim() != params.n {
            return Err(Error::ParamDomain(format!("grid dimension {} ≠ N = {}", grid.dim(), params.n)));
        }
        let eps = match cfg.eps_reg {
            Some(e) => e,
            None if params.q < 2.0 => default_eps_reg(&u0),
            None => 0.0,
        };
        Ok(Engine {
            params,
            cfg,
            mode,
            grid,
            eps,
            c2: params.c * params.c,
            start: u0,
        })
    }

    fn dot_w(&self, a: &[f64], b: &[f64]) -> f64 {
        self.grid.dot(a, b)
    }

    /// Clip, impose the boundary values and rescale to mass `c`.
    fn retract(&self, mut u: Vec<f64>) -> Result<Vec<f64>> {
        let m = u.len();
        for x in u.iter_mut() {
            if *x < 0.0 || !x.is_finite() {
                *x = 0.0;
            }
        }
        u[m - 1] = 0.0;
        u[0] = u[1];
        let mass = self.dot_w(&u, &u);
        if !(mass > 0.0) {
            return Err(Error::ZeroField);
        }
        let s = (self.c2 / mass).sqrt();
        u.iter_mut().for_each(|x| *x *= s);
        Ok(u)
    }

    fn field(&self, u: Vec<f64>) -> RadialField {
        RadialField::new(self.grid.clone(), u).expect("engine vectors have the grid length")
    }

    fn point(&self, u: Vec<f64>) -> Option<Point> {
        let f = self.field(u);
        let nm = norms(&f, self.params.q, self.params.p);
        let (obj, t0) = match self.mode {
            Mode::Global => (EnergyBreakdown::from_norms(&nm, self.params).total, 1.0),
            Mode::Pohozaev => {
                let k = FiberCoeffs::from_norms(&nm, self.params);
                let t0 = find_t0(&k).ok()?;
                (fiber_h(t0, &k), t0)
            }
        };
        if !obj.is_finite() {
            return None;
        }
        Some(Point {
            u: f.into_values(),
            norms: nm,
            f: obj,
            t0,
        })
    }

    /// Moves a Pohozaev-mode point onto the manifold when its fiber
    /// maximizer is farther than `threshold` from 1.
    fn project_fiber(&self, pt: Point, threshold: f64) -> Result<Point> {
        if self.mode == Mode::Global || (pt.t0 - 1.0).abs() <= threshold {
            return Ok(pt);
        }
        let f = resample_dilation(&self.field(pt.u), pt.t0)?;
        let u = self.retract(f.into_values())?;
        self.point(u).ok_or_else(|| Error::DegenerateFiber("fiber map degenerate after projection".into()))
    }

    /// L² gradient of the objective.
    fn l2_gradient(&self, pt: &Point) -> Vec<f64> {
        let parts = gradient_parts(&self.field(pt.u.clone()), self.params, self.eps);
        let k = FiberCoeffs::from_norms(&pt.norms, self.params);
        let (a, b, c) = (pt.t0 * pt.t0, pt.t0.powf(k.e2), pt.t0.powf(k.e3));
        let m = pt.u.len();
        let mut g: Vec<f64> = (0..m).map(|i| a * parts.kin2[i] + b * parts.kinq[i] + c * parts.pot[i]).collect();
        g[m - 1] = 0.0;
        g
    }

    /// Solves `(S₂t₀² + S_q t₀^{e2} + σM) x = rhs` on the interior nodes.
    fn precondition(&self, pt: &Point, sigma: f64, rhs: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let m = rhs.len();
        let h = g.spacing();
        let q = self.params.q;
        let v = &pt.u;
        let k = FiberCoeffs::from_norms(&pt.norms, self.params);
        let (s2, sq) = (pt.t0 * pt.t0, pt.t0.powf(k.e2));
        let e2 = self.eps * self.eps;
        let cw = g.cell_weights();
        let w = g.weights();
        // cell coefficients a_k, k = 1..M−2 (cell k joins nodes k, k+1)
        let mut a = vec![0.0; m - 1];
        for kk in 1..m - 1 {
            let d = (v[kk + 1] - v[kk]) / h;
            let s = d * d + e2;
            let qfac = if s > 0.0 { s.powf((q - 4.0) / 2.0) * ((q - 1.0) * d * d + e2) } else { 0.0 };
            a[kk] = cw[kk] / (h * h) * (s2 + sq * qfac);
        }
        // unknowns: nodes 1..=M−2
        let n = m - 2;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut b = vec![0.0; n];
        for j in 0..n {
            let i = j + 1;
            diag[j] = sigma * w[i] + a[i] + if i >= 2 { a[i - 1] } else { 0.0 };
            off[j] = if j + 1 < n { -a[i] } else { 0.0 };
            b[j] = rhs[i];
        }
        let x = thomas(&off, &diag, &b);
        let mut out = vec![0.0; m];
        out[1..=n].copy_from_slice(&x);
        out[0] = out[1];
        out
    }

    fn run(&self) -> Result<SolveResult> {
        let cfg = self.cfg;
        let m = self.grid.len();
        let w = self.grid.weights().to_vec();
        let sigma_floor = (std::f64::consts::PI / self.grid.r_max()).powi(2);
        let u0 = self.retract(self.start.values().to_vec())?;
        let mut pt = self
            .point(u0)
            .ok_or_else(|| Error::DegenerateFiber("initial profile has a degenerate fiber map".into()))?;
        pt = self.project_fiber(pt, 0.0)?;

        let mut history = Vec::new();
        // previous (D, G·D)
        let mut prev: Option<(Vec<f64>, f64)> = None;
        let mut search_prev: Option<Vec<f64>> = None;
        let mut step = cfg.step0;
        let mut converged = false;
        let mut iterations = 0;
        let mut rel = f64::INFINITY;
        let mut stalled = false;
        let mut objective: Vec<f64> = Vec::new();

        for iter in 0..=cfg.max_iters {
            iterations = iter;
            let g = self.l2_gradient(&pt);
            let lam = self.dot_w(&g, &pt.u) / self.dot_w(&pt.u, &pt.u);
            let gt: Vec<f64> = g.iter().zip(&pt.u).map(|(a, b)| a - lam * b).collect();
            let gn = self.dot_w(&g, &g).sqrt();
            rel = if gn > 0.0 { self.dot_w(&gt, &gt).sqrt() / gn } else { 0.0 };
            let bd = EnergyBreakdown::from_norms(&pt.norms, self.params);
            history.push(HistoryEntry {
                iter,
                energy: bd.total,
                grad_norm: rel,
                pohozaev: bd.pohozaev,
            });
            let p_ok = bd.pohozaev.abs() <= cfg.tol_pohozaev * (pt.norms.grad2 + pt.norms.gradq);
            objective.push(pt.f);
            // best objective of the last window against the best before it
            let stagnant = objective.len() > STAGNATION_WINDOW && {
                let split = objective.len() - STAGNATION_WINDOW;
                let before = objective[..split].iter().copied().fold(f64::INFINITY, f64::min);
                let recent = objective[split..].iter().copied().fold(f64::INFINITY, f64::min);
                before - recent <= cfg.tol_energy * pt.f.abs()
            };
            converged = match self.mode {
                Mode::Global => rel <= cfg.tol_grad,
                Mode::Pohozaev => p_ok && (rel <= cfg.tol_grad || stagnant),
            };
            if converged || stalled || iter == cfg.max_iters {
                break;
            }

            // Euclidean gradient and preconditioned tangent direction
            let big_g: Vec<f64> = (0..m).map(|i| w[i] * g[i]).collect();
            let wu: Vec<f64> = (0..m).map(|i| w[i] * pt.u[i]).collect();
            let sigma = lam.abs().max(sigma_floor);
            let d = self.precondition(&pt, sigma, &big_g);
            let z = self.precondition(&pt, sigma, &wu);
            let mu = dot(&d, &wu) / dot(&z, &wu);
            let dir: Vec<f64> = d.iter().zip(&z).map(|(a, b)| a - mu * b).collect();
            let gd = dot(&big_g, &dir);

            // Polak–Ribière+ with transport by tangent projection
            let mut search = dir.clone();
            if let (Some((d_old, gd_old)), Some(s_old)) = (&prev, &search_prev) {
                let num = dot(&big_g, &dir) - dot(&big_g, d_old);
                let beta = (num / gd_old).max(0.0);
                if beta > 0.0 && beta.is_finite() {
                    let proj = dot(s_old, &wu) / self.c2;
                    for i in 0..m {
                        search[i] += beta * (s_old[i] - proj * pt.u[i]);
                    }
                    if dot(&big_g, &search) <= 1e-12 * gd {
                        search = dir.clone();
                    }
                }
            }
            prev = Some((dir.clone(), gd));

            let mut accepted = None;
            for attempt in 0..2 {
                let slope = dot(&big_g, &search);
                let mut s = step;
                while s > 1e-20 {
                    let cand: Vec<f64> = pt.u.iter().zip(&search).map(|(a, b)| a - s * b).collect();
                    if let Ok(cu) = self.retract(cand) {
                        if let Some(cp) = self.point(cu) {
                            if cp.f <= pt.f - cfg.armijo_c * s * slope {
                                accepted = Some((cp, s));
                                break;
                            }
                        }
                    }
                    s *= cfg.armijo_shrink;
                }
                if accepted.is_some() || attempt == 1 {
                    break;
                }
                search = dir.clone();
            }
            match accepted {
                Some((cp, s)) => {
                    step = (2.0 * s).min(1e6);
                    // dilating by interpolation perturbs the iterate at the
                    // O(h²) level, so it is done only on a visible drift
                    let big_move = (cp.t0 - 1.0).abs() > REPROJECT_DRIFT;
                    pt = self.project_fiber(cp, REPROJECT_DRIFT)?;
                    search_prev = if big_move { None } else { Some(search) };
                    if big_move {
                        prev = None;
                    }
                }
                None => stalled = true,
            }
        }

        let pt = self.project_fiber(pt, 0.0)?;
        let u = self.field(pt.u);
        let breakdown = evaluate(&u, self.params);
        let lambda = match self.mode {
            Mode::Global => breakdown.lambda_general,
            Mode::Pohozaev => breakdown.lambda_pohozaev,
        };
        let residual = pde_residual(&u, breakdown.lambda_general, self.params);
        Ok(SolveResult {
            level: breakdown.total,
            breakdown,
            norms: pt.norms,
            lambda,
            converged,
            iterations,
            history,
            mode: self.mode,
            grad_norm: rel,
            residual,
            u,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric tridiagonal solve; `off[j]` couples unknowns `j` and `j+1`.
fn thomas(off: &[f64], diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = off[0] / beta;
    d[0] = rhs[0] / beta;
    for j in 1..n {
        beta = diag[j] - off[j - 1] * c[j - 1];
        c[j] = off[j] / beta;
        d[j] = (rhs[j] - off[j - 1] * d[j - 1]) / beta;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for j in (0..n - 1).rev() {
        x[j] = d[j] - c[j] * x[j + 1];
    }
    x
}
