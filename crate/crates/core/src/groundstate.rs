//! Gagliardo–Nirenberg extremals by shooting, and the cutoff test function
//! used to probe the L²-critical threshold.
//!
//! `W_p` solves `−ΔW + αW = βW^{p−1}` with `α = 1/δ_p − 1`, `β = 2/(pδ_p)`.
//! With these coefficients `‖∇W_p‖₂² = ‖W_p‖₂² = (2/p)‖W_p‖_p^p`.
//!
//! `W_{p,q}` solves `−Δ_q W + W = ζW^{p−1}` with `ζ = ‖∇W‖_q^q + ‖W‖₂²`.
//! It is built in two stages. First the unit profile
//! `−Δ_q V + V = V^{p−1}` is shot in flux variables `(V, |V′|^{q−2}V′)`,
//! which removes the degeneracy of the q-Laplacian at `V′ = 0`. Then
//!
//! ```text
//! W(r) = γ V(γ^{(2−q)/q} r),     ζ = γ^{2−p}
//! ```
//!
//! turns `V` into a solution of the ζ-equation for every `γ > 0`, and `γ` is
//! fixed by bisection on `‖∇W‖_q^q + ‖W‖₂² = γ^{2−p}`.
//!
//! Shooting classifies a centre value `s` by the first event along the
//! trajectory: the profile reaching zero means `s` is too large, the profile
//! turning upward while still positive means `s` is too small.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{DerivedExponents, ExtremalNorms};
use crate::ode::Dp45;
use crate::radial_grid::{make_grid, Norms, RadialField, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremalKind {
    SemilinearWp,
    QLaplacianWpq,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    pub rtol: f64,
    /// Absolute tolerance as a fraction of the centre value.
    pub atol_rel: f64,
    pub max_bisections: usize,
    /// Samples below `tail_floor·W(0)` are set to zero.
    pub tail_floor: f64,
    /// Largest admissible `W(R)/W(0)`.
    pub truncation_tol: f64,
    /// Residual under which a profile counts as converged.
    pub residual_tol: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            rtol: 1e-11,
            atol_rel: 1e-14,
            max_bisections: 200,
            tail_floor: 1e-10,
            truncation_tol: 1e-8,
            residual_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtremalProfile {
    pub field: RadialField,
    /// `W′` at the nodes.
    pub derivative: Vec<f64>,
    pub norms: Norms,
    /// Exponent used for `norms.gradq` (2 for `W_p`).
    pub q: f64,
    pub p: f64,
    pub shoot_value: f64,
    pub ode_residual: f64,
    pub kind: ExtremalKind,
    pub zeta: Option<f64>,
    /// Radius beyond which the profile is the attached tail.
    pub cut_radius: f64,
    pub bisections: usize,
    pub converged: bool,
}

impl ExtremalProfile {
    pub fn extremal_norms(&self) -> ExtremalNorms {
        ExtremalNorms {
            norms: self.norms,
            converged: self.converged,
        }
    }

    /// Norms with the gradient measured in `L^q`.
    pub fn norms_with_q(&self, q: f64) -> Norms {
        node_norms(self.field.grid(), self.field.values(), &self.derivative, q, self.p)
    }

    /// Cubic Hermite interpolation of the profile; zero beyond `R`.
    pub fn eval(&self, r: f64) -> f64 {
        hermite(self.field.grid().spacing(), self.field.values(), &self.derivative, r).0
    }

    pub fn eval_deriv(&self, r: f64) -> f64 {
        hermite(self.field.grid().spacing(), self.field.values(), &self.derivative, r).1
    }
}

/// Value and derivative of the cubic Hermite interpolant through
/// `(r_i, u_i, u′_i)`.
fn hermite(h: f64, u: &[f64], du: &[f64], r: f64) -> (f64, f64) {
    let r = r.abs();
    let m = u.len();
    let x = r / h;
    let i = x.floor() as usize;
    if i >= m - 1 {
        return if i == m - 1 && x == (m - 1) as f64 {
            (u[m - 1], du[m - 1])
        } else {
            (0.0, 0.0)
        };
    }
    let t = x - i as f64;
    let (t2, t3) = (t * t, t * t * t);
    let (h00, h10, h01, h11) = (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2);
    let val = h00 * u[i] + h10 * h * du[i] + h01 * u[i + 1] + h11 * h * du[i + 1];
    let (d00, d10, d01, d11) = (6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0, -6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t);
    let der = (d00 * u[i] + d01 * u[i + 1]) / h + d10 * du[i] + d11 * du[i + 1];
    (val, der)
}

/// Norms from node values and an exact derivative array (trapezoid rule).
fn node_norms(grid: &RadialGrid, u: &[f64], du: &[f64], q: f64, p: f64) -> Norms {
    let mut nm = Norms::default();
    for ((&w, &x), &d) in grid.weights().iter().zip(u).zip(du) {
        nm.mass2 += w * x * x;
        nm.grad2 += w * d * d;
        nm.gradq += w * d.abs().powf(q);
        nm.lp += w * x.abs().powf(p);
    }
    nm
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    TooLarge,
    TooSmall,
    Undecided,
}

struct Trajectory {
    value: Vec<f64>,
    deriv: Vec<f64>,
    outcome: Outcome,
}

/// Radial second-order problem in first-order form: state `y`, with the
/// profile value `y[0]` and a monotone function of the slope in `y[1]`.
trait RadialSystem {
    fn rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2];
    /// Series start at small `r` for centre value `s`.
    fn start(&self, s: f64, r: f64) -> [f64; 2];
    fn slope(&self, y: &[f64; 2]) -> f64;
}

struct Semilinear {
    n: f64,
    p: f64,
    alpha: f64,
    beta: f64,
}

impl RadialSystem for Semilinear {
    fn rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        let w = y[0];
        [
            y[1],
            -(self.n - 1.0) / r * y[1] + self.alpha * w - self.beta * w.abs().powf(self.p - 2.0) * w,
        ]
    }

    fn start(&self, s: f64, r: f64) -> [f64; 2] {
        let a = self.alpha * s - self.beta * s.powf(self.p - 1.0);
        [s + a * r * r / (2.0 * self.n), a * r / self.n]
    }

    fn slope(&self, y: &[f64; 2]) -> f64 {
        y[1]
    }
}

/// `(V, Φ)` with `Φ = |V′|^{q−2}V′`.
struct FluxForm {
    n: f64,
    p: f64,
    q: f64,
}

impl FluxForm {
    fn inv_flux(&self, phi: f64) -> f64 {
        phi.signum() * phi.abs().powf(1.0 / (self.q - 1.0))
    }
}

impl RadialSystem for FluxForm {
    fn rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        let v = y[0];
        [
            self.inv_flux(y[1]),
            -(self.n - 1.0) / r * y[1] + v - v.abs().powf(self.p - 2.0) * v,
        ]
    }

    fn start(&self, s: f64, r: f64) -> [f64; 2] {
        let a = s - s.powf(self.p - 1.0);
        let q = self.q;
        let v = s + a.signum() * (a.abs() / self.n).powf(1.0 / (q - 1.0)) * r.powf(q / (q - 1.0)) * (q - 1.0) / q;
        [v, a * r / self.n]
    }

    fn slope(&self, y: &[f64; 2]) -> f64 {
        self.inv_flux(y[1])
    }
}

fn shoot<S: RadialSystem>(sys: &S, s: f64, h: f64, m: usize, opts: &ShootOptions) -> Trajectory {
    let mut value = vec![s];
    let mut deriv = vec![0.0];
    let r_start = 1e-3 * h.min(1.0);
    let f = |r: f64, y: &[f64; 2]| sys.rhs(r, y);
    let mut st = Dp45::new(r_start, sys.start(s, r_start), 0.1 * h, opts.rtol, opts.atol_rel * s);
    for i in 1..m {
        let res = st.advance(&f, i as f64 * h);
        let (w, dw) = (st.y[0], sys.slope(&st.y));
        if res.is_err() {
            let outcome = if dw > 0.0 { Outcome::TooSmall } else { Outcome::TooLarge };
            return Trajectory { value, deriv, outcome };
        }
        value.push(w);
        deriv.push(dw);
        if w <= 0.0 {
            return Trajectory { value, deriv, outcome: Outcome::TooLarge };
        }
        if dw > 0.0 {
            return Trajectory { value, deriv, outcome: Outcome::TooSmall };
        }
    }
    Trajectory { value, deriv, outcome: Outcome::Undecided }
}

struct ShotProfile {
    value: Vec<f64>,
    deriv: Vec<f64>,
    s: f64,
    cut: usize,
    bisections: usize,
}

/// Bisection on the centre value between `lo` (too small) and a doubled
/// upper bracket (too large). Returns the averaged profile up to the radius
/// where the two bracketing trajectories separate; the caller attaches a
/// tail beyond that node.
fn shoot_bisect<S: RadialSystem>(
    sys: &S,
    lo0: f64,
    h: f64,
    m: usize,
    opts: &ShootOptions,
) -> Result<ShotProfile> {
    const S_MAX: f64 = 1e6;
    let mut lo = lo0;
    let mut hi = lo0 * 2.0;
    let mut t_hi = loop {
        let t = shoot(sys, hi, h, m, opts);
        if t.outcome == Outcome::TooLarge {
            break t;
        }
        if t.outcome == Outcome::TooSmall {
            lo = hi;
        }
        hi *= 2.0;
        if hi > S_MAX {
            return Err(Error::ShootingBracket(format!(
                "no overshooting centre value in [{lo0:e}, {S_MAX:e}]"
            )));
        }
    };
    let mut t_lo = shoot(sys, lo, h, m, opts);
    if t_lo.outcome == Outcome::TooLarge {
        return Err(Error::ShootingBracket(format!("lower bracket {lo:e} overshoots")));
    }
    let mut bisections = 0;
    while bisections < opts.max_bisections && hi - lo > 4.0 * f64::EPSILON * hi {
        if t_lo.outcome == Outcome::Undecided && t_hi.outcome == Outcome::Undecided {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        bisections += 1;
        let t = shoot(sys, mid, h, m, opts);
        match t.outcome {
            Outcome::TooLarge => {
                hi = mid;
                t_hi = t;
            }
            _ => {
                lo = mid;
                t_lo = t;
            }
        }
    }
    let len = t_lo.value.len().min(t_hi.value.len());
    let mut cut = 0;
    let mut value = Vec::with_capacity(len);
    let mut deriv = Vec::with_capacity(len);
    for i in 0..len {
        let (a, b) = (t_lo.value[i], t_hi.value[i]);
        let avg = 0.5 * (a + b);
        let dv = 0.5 * (t_lo.deriv[i] + t_hi.deriv[i]);
        if !(a > 0.0 && b > 0.0 && (a - b).abs() <= 1e-3 * avg && dv <= 0.0) {
            break;
        }
        value.push(avg);
        deriv.push(dv);
        cut = i;
    }
    Ok(ShotProfile {
        value,
        deriv,
        s: 0.5 * (lo + hi),
        cut,
        bisections,
    })
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::ParamDomain(format!("N ≥ 2 violated (N = {n})")));
    }
    Ok(())
}

pub fn solve_wp(n: usize, p: f64, grid: &Arc<RadialGrid>) -> Result<ExtremalProfile> {
    solve_wp_with(n, p, grid, &ShootOptions::default())
}

pub fn solve_wp_with(n: usize, p: f64, grid: &Arc<RadialGrid>, opts: &ShootOptions) -> Result<ExtremalProfile> {
    check_dimension(n)?;
    if grid.dim() != n {
        return Err(Error::ParamDomain(format!("grid dimension {} ≠ N = {n}", grid.dim())));
    }
    let two_star = crate::exponents::sobolev_exponent(n, 2.0);
    if !(p > 2.0 && two_star.is_none_or(|s| p < s)) {
        return Err(Error::ParamDomain(format!("2 < p < 2* violated (p = {p})")));
    }
    // δ_q is irrelevant here; q = 3 keeps the constructor away from q = 2
    let dp = DerivedExponents::new(n, 3.0, p).delta_p;
    let alpha = 1.0 / dp - 1.0;
    let beta = 2.0 / (p * dp);
    let sys = Semilinear { n: n as f64, p, alpha, beta };
    let m = grid.len();
    let h = grid.spacing();
    let s_const = (alpha / beta).powf(1.0 / (p - 2.0));
    let shot = shoot_bisect(&sys, s_const, h, m, opts)?;

    let kappa = alpha.sqrt();
    let mut value = vec![0.0; m];
    let mut deriv = vec![0.0; m];
    value[..=shot.cut].copy_from_slice(&shot.value[..=shot.cut]);
    deriv[..=shot.cut].copy_from_slice(&shot.deriv[..=shot.cut]);
    let r = grid.nodes();
    let rc = r[shot.cut];
    let wc = shot.value[shot.cut];
    let floor = opts.tail_floor * shot.s;
    let mut tail_at_r = wc;
    for i in shot.cut + 1..m {
        let w = wc * (-kappa * (r[i] - rc)).exp() * (rc / r[i]).powf((n as f64 - 1.0) / 2.0);
        tail_at_r = w;
        if w < floor {
            break;
        }
        value[i] = w;
        deriv[i] = -w * (kappa + (n as f64 - 1.0) / (2.0 * r[i]));
    }
    if shot.cut + 1 >= m {
        tail_at_r = wc;
    }
    if tail_at_r > opts.truncation_tol * shot.s && value[m - 1] > 0.0 {
        return Err(Error::Truncation(format!(
            "W(R)/W(0) = {:.3e} exceeds {:.0e}; increase R",
            tail_at_r / shot.s,
            opts.truncation_tol
        )));
    }
    let field = RadialField::new(grid.clone(), value)?;
    let norms = node_norms(grid, field.values(), &deriv, 2.0, p);
    let ode_residual = wp_residual(&field, &deriv, alpha, beta, p);
    Ok(ExtremalProfile {
        field,
        derivative: deriv,
        norms,
        q: 2.0,
        p,
        shoot_value: shot.s,
        ode_residual,
        kind: ExtremalKind::SemilinearWp,
        zeta: None,
        cut_radius: rc,
        bisections: shot.bisections,
        converged: ode_residual <= opts.residual_tol,
    })
}

/// Relative weighted residual of `−ΔW + αW − βW^{p−1}`, with `ΔW` from
/// differences of the flux `r^{N−1}W′`.
fn wp_residual(field: &RadialField, deriv: &[f64], alpha: f64, beta: f64, p: f64) -> f64 {
    let grid = field.grid();
    let n = grid.dim() as i32;
    let w = field.values();
    let flux: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(deriv)
        .map(|(&r, &d)| r.powi(n - 1) * d)
        .collect();
    residual_from_flux(grid, &flux, |i| alpha * w[i], |i| beta * w[i].abs().powf(p - 1.0))
}

/// `‖−r^{1−N}(F)′ + lin − nonlin‖ / (‖r^{1−N}F′‖ + ‖lin‖ + ‖nonlin‖)` over
/// interior nodes, with fourth-order differences of the flux `F`.
fn residual_from_flux(
    grid: &RadialGrid,
    flux: &[f64],
    lin: impl Fn(usize) -> f64,
    nonlin: impl Fn(usize) -> f64,
) -> f64 {
    let n = grid.dim() as i32;
    let h = grid.spacing();
    let r = grid.nodes();
    let wts = grid.weights();
    let (mut num, mut d1, mut d2, mut d3) = (0.0, 0.0, 0.0, 0.0);
    let m = grid.len();
    for i in 2..m - 1 {
        let df = if i + 2 < m {
            (8.0 * (flux[i + 1] - flux[i - 1]) - (flux[i + 2] - flux[i - 2])) / (12.0 * h)
        } else {
            (flux[i + 1] - flux[i - 1]) / (2.0 * h)
        };
        let div = df / r[i].powi(n - 1);
        let (a, b) = (lin(i), nonlin(i));
        let res = -div + a - b;
        num += wts[i] * res * res;
        d1 += wts[i] * div * div;
        d2 += wts[i] * a * a;
        d3 += wts[i] * b * b;
    }
    num.sqrt() / (d1.sqrt() + d2.sqrt() + d3.sqrt())
}

/// Internal grid for the unit profile of the q-Laplacian extremal.
pub const UNIT_PROFILE_RADIUS: f64 = 60.0;
pub const UNIT_PROFILE_NODES: usize = 24_001;

pub fn solve_wpq(n: usize, p: f64, q: f64, grid: &Arc<RadialGrid>) -> Result<ExtremalProfile> {
    solve_wpq_with(n, p, q, grid, &ShootOptions::default())
}

pub fn solve_wpq_with(
    n: usize,
    p: f64,
    q: f64,
    grid: &Arc<RadialGrid>,
    opts: &ShootOptions,
) -> Result<ExtremalProfile> {
    check_dimension(n)?;
    let nf = n as f64;
    if grid.dim() != n {
        return Err(Error::ParamDomain(format!("grid dimension {} ≠ N = {n}", grid.dim())));
    }
    if !(q > 2.0 * nf / (nf + 2.0) && q < nf) {
        return Err(Error::ParamDomain(format!("2N/(N+2) < q < N violated (q = {q})")));
    }
    let q_star = nf * q / (nf - q);
    if !(p > 2.0 && p < q_star) {
        return Err(Error::ParamDomain(format!("2 < p < q* = {q_star} violated (p = {p})")));
    }
    if q == 2.0 {
        return Err(Error::ParamDomain("q ≠ 2 violated".into()));
    }

    // stage 1: unit profile on an internal grid
    let unit_grid = make_grid(n, UNIT_PROFILE_RADIUS, UNIT_PROFILE_NODES)?;
    let sys = FluxForm { n: nf, p, q };
    let hv = unit_grid.spacing();
    let mv = unit_grid.len();
    let shot = shoot_bisect(&sys, 1.0, hv, mv, opts)?;
    let mut v = vec![0.0; mv];
    let mut dv = vec![0.0; mv];
    v[..=shot.cut].copy_from_slice(&shot.value[..=shot.cut]);
    dv[..=shot.cut].copy_from_slice(&shot.deriv[..=shot.cut]);
    let v_cut = shot.value[shot.cut];
    if shot.cut + 1 >= mv && v_cut > opts.truncation_tol * shot.s {
        return Err(Error::Truncation(format!(
            "unit profile V({UNIT_PROFILE_RADIUS})/V(0) = {:.3e}",
            v_cut / shot.s
        )));
    }
    let v_support = unit_grid.nodes()[shot.cut];

    // stage 2: γ from ‖∇W‖_q^q + ‖W‖₂² = γ^{2−p} on the target grid
    let r = grid.nodes();
    let sample = |gamma: f64| -> (Vec<f64>, Vec<f64>) {
        let k = gamma.powf((2.0 - q) / q);
        r.iter()
            .map(|&ri| {
                let (a, b) = hermite(hv, &v, &dv, k * ri);
                (gamma * a, gamma * k * b)
            })
            .unzip()
    };
    let mismatch = |lg: f64| -> f64 {
        let gamma = lg.exp();
        let (w, dw) = sample(gamma);
        let nm = node_norms(grid, &w, &dw, q, p);
        (nm.gradq + nm.mass2).ln() - (2.0 - p) * lg
    };
    let (mut a, mut b) = (-1.0_f64, 1.0_f64);
    let mut fa = mismatch(a);
    let mut fb = mismatch(b);
    let mut expand = 0;
    while fa.signum() == fb.signum() {
        expand += 1;
        if expand > 60 || !fa.is_finite() || !fb.is_finite() {
            return Err(Error::Normalization("no bracket for the scaling factor γ".into()));
        }
        a -= 1.0;
        b += 1.0;
        fa = mismatch(a);
        fb = mismatch(b);
    }
    while b - a > 1e-14 * a.abs().max(1.0) {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = mismatch(mid);
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let gamma = (0.5 * (a + b)).exp();
    let k = gamma.powf((2.0 - q) / q);
    let support = v_support / k;
    if support > grid.r_max() && v_cut > opts.truncation_tol * shot.s {
        return Err(Error::Truncation(format!(
            "W_p,q support radius {support:.3} exceeds R = {}",
            grid.r_max()
        )));
    }
    let (w, dw) = sample(gamma);
    let zeta = gamma.powf(2.0 - p);
    let field = RadialField::new(grid.clone(), w)?;
    let norms = node_norms(grid, field.values(), &dw, q, p);
    let ode_residual = wpq_residual(&field, &dw, q, p, zeta);
    Ok(ExtremalProfile {
        field,
        derivative: dw,
        norms,
        q,
        p,
        shoot_value: gamma * shot.s,
        ode_residual,
        kind: ExtremalKind::QLaplacianWpq,
        zeta: Some(zeta),
        cut_radius: support.min(grid.r_max()),
        bisections: shot.bisections,
        converged: ode_residual <= opts.residual_tol,
    })
}

fn wpq_residual(field: &RadialField, deriv: &[f64], q: f64, p: f64, zeta: f64) -> f64 {
    let grid = field.grid();
    let n = grid.dim() as i32;
    let w = field.values();
    let flux: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(deriv)
        .map(|(&r, &d)| if d == 0.0 { 0.0 } else { r.powi(n - 1) * d.abs().powf(q - 2.0) * d })
        .collect();
    residual_from_flux(grid, &flux, |i| w[i], |i| zeta * w[i].abs().powf(p - 1.0))
}

/// Quintic smoothstep cutoff: 1 on `[0,1]`, 0 on `[2,∞)`, C² in between.
pub fn cutoff(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let x = s - 1.0;
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

/// `φ₁(r) = A φ(r/R_τ) W_p(τr)` with `R_τ = τ^{−1/2}` and `A` fixed by
/// quadrature so that `‖φ₁‖₂ = c`.
///
/// The normalising constant absorbs the prefactor `(τc)^{N/2}/‖W_p‖₂`, so
/// only the shape matters. The grid must contain the cutoff support
/// `2R_τ` and resolve the length scale `1/τ`.
pub fn build_phi1(tau: f64, c: f64, wp: &ExtremalProfile, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(Error::ParamDomain(format!("τ ≥ 1 violated (τ = {tau})")));
    }
    if !(c > 0.0) {
        return Err(Error::ParamDomain(format!("c > 0 violated (c = {c})")));
    }
    if !wp.converged {
        return Err(Error::Dependency("W_p extremal did not converge".into()));
    }
    let r_cut = tau.powf(-0.5);
    if 2.0 * r_cut > grid.r_max() {
        return Err(Error::Resolution(format!(
            "cutoff support 2τ^(-1/2) = {:.4} exceeds R = {}",
            2.0 * r_cut,
            grid.r_max()
        )));
    }
    const NODES_PER_SCALE: f64 = 8.0;
    if 1.0 / tau < NODES_PER_SCALE * grid.spacing() {
        return Err(Error::Resolution(format!(
            "length scale 1/τ = {:.3e} below {NODES_PER_SCALE} grid spacings (h = {:.3e})",
            1.0 / tau,
            grid.spacing()
        )));
    }
    if tau * 2.0 * r_cut > wp.field.grid().r_max() {
        return Err(Error::Resolution(format!(
            "W_p is tabulated up to {} but τ·2R_τ = {:.3}",
            wp.field.grid().r_max(),
            tau * 2.0 * r_cut
        )));
    }
    let raw = RadialField::from_fn(grid.clone(), |r| cutoff(r / r_cut) * wp.eval(tau * r));
    let m2 = raw.mass2();
    if !(m2 > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(raw.scaled(c / m2.sqrt()))
}
