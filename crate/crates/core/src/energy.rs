//! Energy `I(u) = ½‖∇u‖₂² + (1/q)‖∇u‖_q^q − (1/p)‖u‖_p^p`, the Pohozaev
//! functional, multiplier estimates, the discrete gradient and the fiber map
//! `h(t) = I(u_t)` along the mass-preserving dilation.
//!
//! The gradient is the exact derivative of the quadrature sum used by
//! [`norms`](crate::radial_grid::norms), divided by the point weights so that
//! it represents the L² gradient. Consequently
//! `⟨gradient(u), φ⟩_w = d/ds E(u + sφ)|_{s=0}` up to roundoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::radial_grid::{norms, Norms, RadialField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kin2: f64,
    pub kinq: f64,
    pub pot: f64,
    pub total: f64,
    pub mass2: f64,
    pub pohozaev: f64,
    pub lambda_general: f64,
    pub lambda_pohozaev: f64,
}

pub const BREAKDOWN_HEADER: [&str; 8] = [
    "c",
    "I",
    "kin2",
    "kinq",
    "pot",
    "P",
    "lambda_general",
    "lambda_pohozaev",
];

impl EnergyBreakdown {
    pub fn from_norms(nm: &Norms, params: &ProblemParams) -> Self {
        let ex = params.exponents();
        let (q, p) = (params.q, params.p);
        let kin2 = 0.5 * nm.grad2;
        let kinq = nm.gradq / q;
        let pot = nm.lp / p;
        let pohozaev = nm.grad2 + (1.0 + ex.delta_q) * nm.gradq - ex.delta_p * nm.lp;
        let lambda_general = (nm.grad2 + nm.gradq - nm.lp) / nm.mass2;
        let lambda_pohozaev = ((1.0 - 1.0 / ex.delta_p) * nm.grad2
            + (1.0 - (1.0 + ex.delta_q) / ex.delta_p) * nm.gradq)
            / nm.mass2;
        EnergyBreakdown {
            kin2,
            kinq,
            pot,
            total: kin2 + kinq - pot,
            mass2: nm.mass2,
            pohozaev,
            lambda_general,
            lambda_pohozaev,
        }
    }

    /// Values in [`BREAKDOWN_HEADER`] order.
    pub fn csv_row(&self, c: f64) -> [f64; 8] {
        [
            c,
            self.total,
            self.kin2,
            self.kinq,
            self.pot,
            self.pohozaev,
            self.lambda_general,
            self.lambda_pohozaev,
        ]
    }
}

pub fn evaluate(u: &RadialField, params: &ProblemParams) -> EnergyBreakdown {
    EnergyBreakdown::from_norms(&norms(u, params.q, params.p), params)
}

/// Discrete energy with the q-term replaced by
/// `(1/q)Σ ((u′)² + ε²)^{q/2} − ε^q`, the functional whose exact derivative
/// [`gradient`] returns.
pub fn regularized_energy(u: &RadialField, params: &ProblemParams, eps_reg: f64) -> f64 {
    let grid = u.grid();
    let v = u.values();
    let h = grid.spacing();
    let q = params.q;
    let eq = eps_reg.powf(q);
    let mut kin = 0.0;
    for (k, &cw) in grid.cell_weights().iter().enumerate().skip(1) {
        let d = (v[k + 1] - v[k]) / h;
        kin += cw * (0.5 * d * d + ((d * d + eps_reg * eps_reg).powf(q / 2.0) - eq) / q);
    }
    let pot: f64 = grid
        .weights()
        .iter()
        .zip(v)
        .map(|(w, x)| w * x.abs().powf(params.p))
        .sum();
    kin - pot / params.p
}

/// The three contributions to the L² gradient.
#[derive(Debug, Clone)]
pub struct GradientParts {
    /// From `½‖∇u‖₂²` (discrete `−Δu`).
    pub kin2: Vec<f64>,
    /// From `(1/q)‖∇u‖_q^q` (discrete `−Δ_q u`, regularized).
    pub kinq: Vec<f64>,
    /// From `−(1/p)‖u‖_p^p`, i.e. `−|u|^{p−2}u`.
    pub pot: Vec<f64>,
}

impl GradientParts {
    pub fn total(&self) -> Vec<f64> {
        self.kin2
            .iter()
            .zip(&self.kinq)
            .zip(&self.pot)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

pub fn gradient_parts(u: &RadialField, params: &ProblemParams, eps_reg: f64) -> GradientParts {
    let grid = u.grid();
    let v = u.values();
    let m = v.len();
    let h = grid.spacing();
    let q = params.q;
    let e2 = eps_reg * eps_reg;
    let mut kin2 = vec![0.0; m];
    let mut kinq = vec![0.0; m];
    for (k, &cw) in grid.cell_weights().iter().enumerate().skip(1) {
        let d = (v[k + 1] - v[k]) / h;
        let f2 = cw * d / h;
        let s2 = d * d + e2;
        let fq = if s2 > 0.0 {
            cw * s2.powf((q - 2.0) / 2.0) * d / h
        } else {
            0.0
        };
        kin2[k + 1] += f2;
        kin2[k] -= f2;
        kinq[k + 1] += fq;
        kinq[k] -= fq;
    }
    let w = grid.weights();
    for i in 1..m {
        kin2[i] /= w[i];
        kinq[i] /= w[i];
    }
    kin2[0] = kin2[1];
    kinq[0] = kinq[1];
    let pot = v
        .iter()
        .map(|&x| -x.abs().powf(params.p - 2.0) * x)
        .collect();
    GradientParts { kin2, kinq, pot }
}

/// L² gradient of the (regularized) discrete energy.
pub fn gradient(u: &RadialField, params: &ProblemParams, eps_reg: f64) -> RadialField {
    let g = gradient_parts(u, params, eps_reg).total();
    RadialField::new(u.grid().clone(), g).expect("gradient has the grid length")
}

/// Default regularization, `10⁻⁸` times the largest difference quotient.
pub fn default_eps_reg(u: &RadialField) -> f64 {
    let h = u.grid().spacing();
    let scale = u
        .values()
        .windows(2)
        .map(|w| ((w[1] - w[0]) / h).abs())
        .fold(0.0, f64::max);
    1e-8 * scale.max(f64::MIN_POSITIVE.sqrt())
}

/// Coefficients of `h(t) = t²A/2 + t^{e2}B/q − t^{e3}C/p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub q: f64,
    pub p: f64,
    /// `q(1+δ_q)`
    pub e2: f64,
    /// `pδ_p`
    pub e3: f64,
}

impl FiberCoeffs {
    pub const E1: f64 = 2.0;

    pub fn new(a: f64, b: f64, c: f64, params: &ProblemParams) -> Self {
        let ex = params.exponents();
        FiberCoeffs {
            a,
            b,
            c,
            q: params.q,
            p: params.p,
            e2: ex.gradq_scaling(params.q),
            e3: ex.lp_scaling(params.p),
        }
    }

    pub fn from_norms(nm: &Norms, params: &ProblemParams) -> Self {
        FiberCoeffs::new(nm.grad2, nm.gradq, nm.lp, params)
    }

    pub fn delta_q(&self) -> f64 {
        self.e2 / self.q - 1.0
    }

    pub fn delta_p(&self) -> f64 {
        self.e3 / self.p
    }

    pub fn is_supercritical_ordering(&self) -> bool {
        self.e3 > Self::E1.max(self.e2)
    }

    pub fn is_subcritical_ordering(&self) -> bool {
        self.e3 < Self::E1.min(self.e2)
    }
}

pub fn fiber_coeffs(u: &RadialField, params: &ProblemParams) -> FiberCoeffs {
    FiberCoeffs::from_norms(&norms(u, params.q, params.p), params)
}

pub fn fiber_h(t: f64, k: &FiberCoeffs) -> f64 {
    0.5 * k.a * t * t + k.b * t.powf(k.e2) / k.q - k.c * t.powf(k.e3) / k.p
}

pub fn fiber_hprime(t: f64, k: &FiberCoeffs) -> f64 {
    (k.a * t * t + (1.0 + k.delta_q()) * k.b * t.powf(k.e2) - k.delta_p() * k.c * t.powf(k.e3)) / t
}

pub fn fiber_hsecond(t: f64, k: &FiberCoeffs) -> f64 {
    k.a + k.e2 * (k.e2 - 1.0) / k.q * k.b * t.powf(k.e2 - 2.0)
        - k.e3 * (k.e3 - 1.0) / k.p * k.c * t.powf(k.e3 - 2.0)
}

/// Scale of the three terms of `t·h′(t)`, used to judge `h′(t) ≈ 0`.
pub fn fiber_hprime_scale(t: f64, k: &FiberCoeffs) -> f64 {
    (k.a * t * t + (1.0 + k.delta_q()) * k.b * t.powf(k.e2) + k.delta_p() * k.c * t.powf(k.e3)) / t
}

const BRACKET_STEPS: usize = 2200;
const T0_REL_WIDTH: f64 = 1e-12;

/// Root of `h′` when `t·h′(t)/t^{e3}` is monotone, bracketed by doubling or
/// halving from `t = 1` and refined by bisection in `ln t`.
fn fiber_root(k: &FiberCoeffs) -> Result<f64> {
    let g = |t: f64| fiber_hprime(t, k);
    let g1 = g(1.0);
    if g1 == 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    let s1 = g1.signum();
    let mut found = false;
    for _ in 0..BRACKET_STEPS {
        // move away from t = 1 in the direction that changes the sign
        let step_up = (s1 > 0.0) == k.is_supercritical_ordering();
        if step_up {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                break;
            }
            if g(hi).signum() != s1 {
                found = true;
                break;
            }
        } else {
            hi = lo;
            lo *= 0.5;
            if lo == 0.0 {
                break;
            }
            if g(lo).signum() != s1 {
                found = true;
                break;
            }
        }
    }
    if !found {
        return Err(Error::DegenerateFiber(
            "h′ does not change sign on the representable range".into(),
        ));
    }
    let s_lo = g(lo).signum();
    let (mut a, mut b) = (lo.ln(), hi.ln());
    while (b - a) > T0_REL_WIDTH {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid.exp());
        if gm == 0.0 {
            return Ok(mid.exp());
        }
        if gm.signum() == s_lo {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut t = (0.5 * (a + b)).exp();
    // one guarded Newton step
    let hs = fiber_hsecond(t, k);
    if hs != 0.0 {
        let tn = t - g(t) / hs;
        if tn > a.exp() && tn < b.exp() && g(tn).abs() < g(t).abs() {
            t = tn;
        }
    }
    Ok(t)
}

fn check_fiber_degeneracy(k: &FiberCoeffs) -> Result<()> {
    if !(k.c > 0.0) {
        return Err(Error::DegenerateFiber(format!("C = ‖u‖_p^p must be positive (C = {})", k.c)));
    }
    if !(k.a + k.b > 0.0) {
        return Err(Error::DegenerateFiber(format!(
            "A + B must be positive (A = {}, B = {})",
            k.a, k.b
        )));
    }
    Ok(())
}

/// Unique maximizer of the fiber map in the supercritical ordering
/// `pδ_p > max(2, q(1+δ_q))`.
pub fn find_t0(k: &FiberCoeffs) -> Result<f64> {
    if !k.is_supercritical_ordering() {
        return Err(Error::Regime(format!(
            "fiber maximizer needs pδ_p > max(2, q(1+δ_q)) (exponents 2, {}, {})",
            k.e2, k.e3
        )));
    }
    check_fiber_degeneracy(k)?;
    fiber_root(k)
}

/// Unique minimizer of the fiber map in the subcritical ordering
/// `pδ_p < min(2, q(1+δ_q))`.
pub fn fiber_minimizer(k: &FiberCoeffs) -> Result<f64> {
    if !k.is_subcritical_ordering() {
        return Err(Error::Regime(format!(
            "fiber minimizer needs pδ_p < min(2, q(1+δ_q)) (exponents 2, {}, {})",
            k.e2, k.e3
        )));
    }
    check_fiber_degeneracy(k)?;
    fiber_root(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_grid::{make_grid, resample_dilation};
    use std::f64::consts::PI;

    fn sub() -> ProblemParams {
        ProblemParams::new(3, 2.5, 3.0, 1.0).unwrap()
    }

    fn sup() -> ProblemParams {
        ProblemParams::new(3, 2.5, 5.0, 1.0).unwrap()
    }

    fn gaussian(amp: f64) -> RadialField {
        let g = make_grid(3, 20.0, 2000).unwrap();
        RadialField::from_fn(g, |r| amp * PI.powf(-0.75) * (-r * r / 2.0).exp())
    }

    #[test]
    fn total_is_sum_of_terms() {
        let b = evaluate(&gaussian(1.0), &sub());
        assert_eq!(b.total, b.kin2 + b.kinq - b.pot);
    }

    #[test]
    fn unit_gaussian_kinetic_term() {
        let b = evaluate(&gaussian(1.0), &sub());
        assert!((b.kin2 - 0.75).abs() < 1e-4, "{}", b.kin2);
        let fine = {
            let g = make_grid(3, 20.0, 100_000).unwrap();
            let u = RadialField::from_fn(g, |r| PI.powf(-0.75) * (-r * r / 2.0).exp());
            evaluate(&u, &sub())
        };
        assert!((b.kinq / fine.kinq - 1.0).abs() < 1e-4);
        assert!((b.pot / fine.pot - 1.0).abs() < 1e-4);
    }

    #[test]
    fn tiny_amplitude_is_quadratic() {
        let params = sub();
        let e1 = evaluate(&gaussian(1e-6), &params);
        let e2 = evaluate(&gaussian(2e-6), &params);
        // q = 2.5 term scales as ε^{2.5}, potential as ε³
        assert!((e2.total / e1.total - 4.0).abs() < 0.01);
        assert!(e1.pot < 1e-3 * e1.total);
    }

    #[test]
    fn pohozaev_from_raw_norms() {
        let params = sup();
        let u = gaussian(1.3);
        let nm = norms(&u, params.q, params.p);
        let b = evaluate(&u, &params);
        let ex = params.exponents();
        let expect = nm.grad2 + (1.0 + ex.delta_q) * nm.gradq - ex.delta_p * nm.lp;
        assert_eq!(b.pohozaev, expect);
    }

    #[test]
    fn lambda_general_is_gradient_projection() {
        let params = sub();
        let u = gaussian(0.8);
        let g = gradient(&u, &params, 0.0);
        let grid = u.grid();
        let proj = grid.dot(g.values(), u.values()) / u.mass2();
        let b = evaluate(&u, &params);
        assert!((proj - b.lambda_general).abs() < 1e-12 * b.lambda_general.abs().max(1.0));
    }

    #[test]
    fn constant_field_has_no_kinetic_gradient() {
        let g = make_grid(3, 5.0, 200).unwrap();
        let u = RadialField::from_fn(g, |_| 0.7);
        let parts = gradient_parts(&u, &sub(), 1e-6);
        assert!(parts.kinq.iter().all(|&x| x == 0.0));
        assert!(parts.kin2.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn potential_part_is_local() {
        let u = gaussian(1.0);
        let parts = gradient_parts(&u, &sup(), 0.0);
        for (g, x) in parts.pot.iter().zip(u.values()) {
            assert!((g + x.powi(4)).abs() <= 1e-15 * x.powi(4));
        }
    }

    #[test]
    fn directional_derivative_matches_central_difference() {
        let g = make_grid(3, 12.0, 600).unwrap();
        let u = RadialField::from_fn(g.clone(), |r| (1.0 + 0.2 * r) * (-r * r / 4.0).exp());
        let phi = RadialField::from_fn(g.clone(), |r| (r * 0.7).cos() * (-r * r / 9.0).exp());
        for &(q, p) in &[(2.5, 3.0), (1.8, 3.5)] {
            let params = ProblemParams::new(3, q, p, 1.0).unwrap();
            let eps = 1e-6;
            let s = 1e-5;
            let plus = u.with_values(u.values().iter().zip(phi.values()).map(|(a, b)| a + s * b).collect()).unwrap();
            let minus = u.with_values(u.values().iter().zip(phi.values()).map(|(a, b)| a - s * b).collect()).unwrap();
            let fd = (regularized_energy(&plus, &params, eps) - regularized_energy(&minus, &params, eps)) / (2.0 * s);
            let an = g.dot(gradient(&u, &params, eps).values(), phi.values());
            assert!((fd - an).abs() <= 1e-6 * an.abs(), "q={q}: fd {fd} an {an}");
        }
    }

    #[test]
    fn fiber_identities_at_one() {
        let params = sup();
        let u = gaussian(1.0);
        let k = fiber_coeffs(&u, &params);
        let b = evaluate(&u, &params);
        assert!((fiber_h(1.0, &k) - b.total).abs() < 1e-14 * b.total.abs().max(1.0));
        assert!((fiber_hprime(1.0, &k) - b.pohozaev).abs() < 1e-13 * b.kin2.max(1.0));
    }

    #[test]
    fn fiber_matches_resampled_energy() {
        let params = sup();
        let u = gaussian(1.0);
        let k = fiber_coeffs(&u, &params);
        for &t in &[0.5, 0.8, 1.25, 2.0] {
            let e = evaluate(&resample_dilation(&u, t).unwrap(), &params).total;
            let h = fiber_h(t, &k);
            assert!((e / h - 1.0).abs() < 1e-2, "t={t}: {e} vs {h}");
        }
    }

    #[test]
    fn fiber_limit_shapes() {
        let params = sup();
        let only_c = FiberCoeffs::new(0.0, 0.0, 1.0, &params);
        let only_ab = FiberCoeffs::new(1.0, 1.0, 0.0, &params);
        let ts: Vec<f64> = (0..100).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 99.0)).collect();
        for w in ts.windows(2) {
            assert!(fiber_h(w[1], &only_c) < fiber_h(w[0], &only_c));
            assert!(fiber_h(w[1], &only_ab) > fiber_h(w[0], &only_ab));
        }
    }

    #[test]
    fn unit_triple_has_single_sign_change() {
        let k = FiberCoeffs::new(1.0, 1.0, 1.0, &sup());
        assert!((k.e2 - 3.25).abs() < 1e-14 && (k.e3 - 4.5).abs() < 1e-14);
        let n = 20_001;
        let ts: Vec<f64> = (0..n).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / (n - 1) as f64)).collect();
        let changes = ts
            .windows(2)
            .filter(|w| fiber_hprime(w[0], &k).signum() != fiber_hprime(w[1], &k).signum())
            .count();
        assert_eq!(changes, 1);
        let t0 = find_t0(&k).unwrap();
        let argmax = ts
            .iter()
            .copied()
            .filter(|t| (0.1..10.0).contains(t))
            .max_by(|a, b| fiber_h(*a, &k).total_cmp(&fiber_h(*b, &k)))
            .unwrap();
        // dense-grid oracle: log spacing 8/20000 decades
        assert!((t0 / argmax - 1.0).abs() < 1e-3);
        // refine the oracle around its bucket
        let fine = (0..20_001)
            .map(|i| argmax * (1.0 + 2e-3 * (i as f64 / 10_000.0 - 1.0)))
            .max_by(|a, b| fiber_h(*a, &k).total_cmp(&fiber_h(*b, &k)))
            .unwrap();
        assert!((t0 - fine).abs() < 1e-6);
    }

    #[test]
    fn t0_is_one_on_the_manifold() {
        let params = sup();
        let ex = params.exponents();
        // choose C so that P = A + (1+δ_q)B − δ_p C = 0
        let (a, b) = (1.3, 0.4);
        let c = (a + (1.0 + ex.delta_q) * b) / ex.delta_p;
        let k = FiberCoeffs::new(a, b, c, &params);
        assert!((find_t0(&k).unwrap() - 1.0).abs() < 1e-12);
        let k_neg = FiberCoeffs::new(a, b, 2.0 * c, &params);
        assert!(fiber_hprime(1.0, &k_neg) < 0.0);
        assert!(find_t0(&k_neg).unwrap() < 1.0);
    }

    #[test]
    fn t0_errors() {
        let params = sup();
        assert!(matches!(find_t0(&FiberCoeffs::new(1.0, 1.0, 0.0, &params)), Err(Error::DegenerateFiber(_))));
        assert!(matches!(find_t0(&FiberCoeffs::new(0.0, 0.0, 1.0, &params)), Err(Error::DegenerateFiber(_))));
        assert!(matches!(find_t0(&FiberCoeffs::new(1.0, 1.0, 1.0, &sub())), Err(Error::Regime(_))));
    }

    #[test]
    fn subcritical_minimizer() {
        let k = FiberCoeffs::new(1.0, 0.5, 2.0, &sub());
        let t = fiber_minimizer(&k).unwrap();
        assert!(fiber_hprime(t, &k).abs() < 1e-10 * fiber_hprime_scale(t, &k));
        assert!(fiber_hsecond(t, &k) > 0.0);
        assert!(fiber_h(t, &k) < 0.0);
    }
}
