//! Parameter algebra for `−Δu − Δ_q u = λu + |u|^{p−2}u`, `‖u‖₂ = c`.
//!
//! Everything here is closed form: the scaling exponents that govern how the
//! three energy terms react to the mass-preserving dilation
//! `u_t(x) = t^{N/2} u(tx)`, the classification of `(N, q, p)` into the
//! subcritical / critical / supercritical regimes, the sharp
//! Gagliardo–Nirenberg constants (given norms of the extremal profiles) and
//! the critical masses built from them.
//!
//! Under the dilation the energy terms scale as
//!
//! ```text
//! ‖∇u_t‖₂²    = t²            ‖∇u‖₂²
//! ‖∇u_t‖_q^q  = t^{q(1+δ_q)}  ‖∇u‖_q^q,     δ_q = N(q−2)/(2q)
//! ‖u_t‖_p^p   = t^{pδ_p}      ‖u‖_p^p,      δ_p = N(p−2)/(2p)
//! ```
//!
//! and the ordering of the three exponents `2`, `q(1+δ_q)`, `pδ_p` decides
//! whether the constrained energy is bounded below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial_grid::Norms;

/// Relative tolerance under which `p` is considered equal to a critical
/// exponent.
pub const CRITICAL_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Spatial dimension.
    pub n: usize,
    /// Quasilinear exponent.
    pub q: f64,
    /// Nonlinearity exponent.
    pub p: f64,
    /// Prescribed mass `‖u‖₂`.
    pub c: f64,
}

/// Sobolev exponent `sN/(N−s)`; `None` stands for `+∞` (`s ≥ N`, which for
/// `s = 2` means `N = 2`).
pub fn sobolev_exponent(n: usize, s: f64) -> Option<f64> {
    let nf = n as f64;
    if s >= nf {
        None
    } else {
        Some(s * nf / (nf - s))
    }
}

impl ProblemParams {
    /// Validated constructor: `N ≥ 2`, `1 < q < N`, `q ≠ 2`,
    /// `2 < p < min(2*, q*)`, `c > 0`.
    pub fn new(n: usize, q: f64, p: f64, c: f64) -> Result<Self> {
        let params = ProblemParams { n, q, p, c };
        params.validate()?;
        Ok(params)
    }

    /// Skips validation. The discrete functionals are well defined for any
    /// positive exponents, which the gradient checks rely on.
    pub fn unchecked(n: usize, q: f64, p: f64, c: f64) -> Self {
        ProblemParams { n, q, p, c }
    }

    pub fn with_mass(self, c: f64) -> Self {
        ProblemParams { c, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let nf = self.n as f64;
        if self.n < 2 {
            return Err(Error::ParamDomain(format!("N ≥ 2 violated (N = {})", self.n)));
        }
        if !(self.q.is_finite() && self.q > 1.0 && self.q < nf) {
            return Err(Error::ParamDomain(format!(
                "1 < q < N violated (q = {}, N = {})",
                self.q, self.n
            )));
        }
        if self.q == 2.0 {
            return Err(Error::ParamDomain("q ≠ 2 violated".into()));
        }
        if !(self.p.is_finite() && self.p > 2.0) {
            return Err(Error::ParamDomain(format!("p > 2 violated (p = {})", self.p)));
        }
        if let Some(two_star) = sobolev_exponent(self.n, 2.0) {
            if self.p >= two_star {
                return Err(Error::ParamDomain(format!(
                    "p < 2* = {two_star} violated (p = {})",
                    self.p
                )));
            }
        }
        if let Some(q_star) = sobolev_exponent(self.n, self.q) {
            if self.p >= q_star {
                return Err(Error::ParamDomain(format!(
                    "p < q* = {q_star} violated (p = {}, q = {})",
                    self.p, self.q
                )));
            }
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::ParamDomain(format!("c > 0 violated (c = {})", self.c)));
        }
        Ok(())
    }

    pub fn exponents(&self) -> DerivedExponents {
        DerivedExponents::new(self.n, self.q, self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    pub delta_p: f64,
    pub delta_q: f64,
    pub nu_pq: f64,
    /// L²-critical exponent `2(1 + 2/N)`.
    pub pbar: f64,
    /// L^q-critical exponent `q(1 + 2/N)`.
    pub phat: f64,
}

impl DerivedExponents {
    pub fn new(n: usize, q: f64, p: f64) -> Self {
        let nf = n as f64;
        DerivedExponents {
            delta_p: nf * (p - 2.0) / (2.0 * p),
            delta_q: nf * (q - 2.0) / (2.0 * q),
            nu_pq: nf * q * (p - 2.0) / (p * (nf * q - 2.0 * (nf - q))),
            pbar: 2.0 * (1.0 + 2.0 / nf),
            phat: q * (1.0 + 2.0 / nf),
        }
    }

    /// Dilation exponent of `‖∇u‖_q^q`, `q(1+δ_q)`.
    pub fn gradq_scaling(&self, q: f64) -> f64 {
        q * (1.0 + self.delta_q)
    }

    /// Dilation exponent of `‖u‖_p^p`, `pδ_p`.
    pub fn lp_scaling(&self, p: f64) -> f64 {
        p * self.delta_p
    }
}

pub fn derive_exponents(params: &ProblemParams) -> Result<DerivedExponents> {
    params.validate()?;
    Ok(params.exponents())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    L2Critical,
    LqCritical,
    Supercritical,
    OutsideTheory,
}

/// The four hypotheses entering the existence theorems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `2 < p < (1+2/N)·min{2,q}`.
    SubcriticalExponent,
    /// `2N/(N+2) < q < 2` (`N ≥ 2`) or `2 < q < N` (`N ≥ 3`).
    SubcriticalQRange,
    /// `(1+2/N)·max{2,q} < p < min{2*, q*}`.
    SupercriticalExponent,
    /// `2N(N+2)/(N²+2N+4) < q < 2` (`N ≥ 2`) or `2 < q < min{N, 2N²/(N²−4)}` (`N ≥ 3`).
    SupercriticalQRange,
}

/// Power-law exponents predicted for the maps `c ↦ m(c)`, `c ↦ σ(c)` and
/// `c ↦ λ_c`. Each entry `e` describes a behaviour `∝ c^{±e}`; the sign
/// convention is spelled out per field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictedExponents {
    /// `|m(c)| ≲ c^{e}`, `e = 2p(1−δ_p)/(2−pδ_p)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_of_c: Option<f64>,
    /// `|λ_c| ≲ c^{e}`, `e = 2(p−2)/(2−pδ_p)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_of_c_sub: Option<f64>,
    /// `σ(c) ≳ c^{−e}`, `e = 2p(1−δ_p)/(pδ_p−2)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_of_c_a: Option<f64>,
    /// `σ(c) ≳ c^{−e}`, `e = qp(1−ν)/(pν−q)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_of_c_b: Option<f64>,
    /// `−λ_c ≳ c^{−e}`, `e = 2(p−2)/(pδ_p−2)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_of_c_super_a: Option<f64>,
    /// `−λ_c ≳ c^{−e}`, `e = 2q(p−2)/(Np−Nq−2q)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_of_c_super_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub satisfied_conditions: Vec<Condition>,
    pub exponents: DerivedExponents,
    pub predicted_exponents: PredictedExponents,
}

fn approx_eq_rel(a: f64, b: f64) -> bool {
    (a - b).abs() <= CRITICAL_REL_TOL * b.abs()
}

pub fn condition_holds(cond: Condition, n: usize, q: f64, p: f64) -> bool {
    let nf = n as f64;
    let two_star = sobolev_exponent(n, 2.0).unwrap_or(f64::INFINITY);
    let q_star = sobolev_exponent(n, q).unwrap_or(f64::INFINITY);
    match cond {
        Condition::SubcriticalExponent => 2.0 < p && p < (1.0 + 2.0 / nf) * q.min(2.0),
        Condition::SubcriticalQRange => {
            (2.0 * nf / (nf + 2.0) < q && q < 2.0) || (n >= 3 && 2.0 < q && q < nf)
        }
        Condition::SupercriticalExponent => {
            (1.0 + 2.0 / nf) * q.max(2.0) < p && p < two_star.min(q_star)
        }
        Condition::SupercriticalQRange => {
            let lower = 2.0 * nf * (nf + 2.0) / (nf * nf + 2.0 * nf + 4.0);
            let upper = if n >= 3 {
                nf.min(2.0 * nf * nf / (nf * nf - 4.0))
            } else {
                nf
            };
            (lower < q && q < 2.0) || (n >= 3 && 2.0 < q && q < upper)
        }
    }
}

pub fn classify_regime(params: &ProblemParams) -> Result<RegimeReport> {
    params.validate()?;
    let (n, q, p) = (params.n, params.q, params.p);
    let ex = params.exponents();

    let satisfied_conditions: Vec<Condition> = [
        Condition::SubcriticalExponent,
        Condition::SubcriticalQRange,
        Condition::SupercriticalExponent,
        Condition::SupercriticalQRange,
    ]
    .into_iter()
    .filter(|&cond| condition_holds(cond, n, q, p))
    .collect();
    let has = |c| satisfied_conditions.contains(&c);

    let regime = if approx_eq_rel(p, ex.pbar) {
        Regime::L2Critical
    } else if approx_eq_rel(p, ex.phat) {
        Regime::LqCritical
    } else if has(Condition::SubcriticalExponent) && has(Condition::SubcriticalQRange) {
        Regime::Subcritical
    } else if has(Condition::SupercriticalExponent) && has(Condition::SupercriticalQRange) {
        Regime::Supercritical
    } else {
        Regime::OutsideTheory
    };

    let nf = n as f64;
    let pd = p * ex.delta_p;
    let mut predicted = PredictedExponents::default();
    match regime {
        Regime::Subcritical => {
            predicted.m_of_c = Some(2.0 * p * (1.0 - ex.delta_p) / (2.0 - pd));
            predicted.lambda_of_c_sub = Some(2.0 * (p - 2.0) / (2.0 - pd));
        }
        Regime::Supercritical => {
            let nu = ex.nu_pq;
            predicted.sigma_of_c_a = Some(2.0 * p * (1.0 - ex.delta_p) / (pd - 2.0));
            predicted.sigma_of_c_b = Some(q * p * (1.0 - nu) / (p * nu - q));
            predicted.lambda_of_c_super_a = Some(2.0 * (p - 2.0) / (pd - 2.0));
            predicted.lambda_of_c_super_b = Some(2.0 * q * (p - 2.0) / (nf * p - nf * q - 2.0 * q));
        }
        _ => {}
    }

    Ok(RegimeReport {
        regime,
        satisfied_conditions,
        exponents: ex,
        predicted_exponents: predicted,
    })
}

/// Norms of a computed extremal profile together with its convergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalNorms {
    pub norms: Norms,
    pub converged: bool,
}

fn require_converged(norms: &ExtremalNorms, what: &str) -> Result<()> {
    if norms.converged {
        Ok(())
    } else {
        Err(Error::Dependency(format!("{what} extremal did not converge")))
    }
}

/// Sharp constant of `‖u‖_p ≤ 𝒞 ‖∇u‖₂^{δ_p} ‖u‖₂^{1−δ_p}`:
/// `𝒞 = (p / (2‖W_p‖₂^{p−2}))^{1/p}`.
pub fn gn_constant_2(_n: usize, p: f64, w_norms: &ExtremalNorms) -> Result<f64> {
    require_converged(w_norms, "W_p")?;
    let w2 = w_norms.norms.mass2.sqrt();
    Ok((p / (2.0 * w2.powf(p - 2.0))).powf(1.0 / p))
}

/// Ratio `‖u‖_p / (‖∇u‖₂^{δ_p} ‖u‖₂^{1−δ_p})` for the given norms (without
/// the constant).
pub fn gn2_quotient(n: usize, p: f64, norms: &Norms) -> f64 {
    let dp = n as f64 * (p - 2.0) / (2.0 * p);
    norms.lp.powf(1.0 / p) / (norms.grad2.powf(dp / 2.0) * norms.mass2.powf((1.0 - dp) / 2.0))
}

/// Ratio `‖u‖_p / (‖∇u‖_q^{ν} ‖u‖₂^{1−ν})` for the given norms (without the
/// constant).
pub fn gnq_quotient(n: usize, p: f64, q: f64, norms: &Norms) -> f64 {
    let nu = DerivedExponents::new(n, q, p).nu_pq;
    norms.lp.powf(1.0 / p) / (norms.gradq.powf(nu / q) * norms.mass2.powf((1.0 - nu) / 2.0))
}

/// The scalar `K = (Nq+pq−2N)·[ (2(Nq−p(N−q)))^{p(N−q)−Nq} / (qN(p−2))^{N(p−2)} ]^{1/(Nq+pq−2N)}`.
pub fn closed_form_k(n: usize, p: f64, q: f64) -> f64 {
    let nf = n as f64;
    let s = nf * q + p * q - 2.0 * nf;
    let a = 2.0 * (nf * q - p * (nf - q));
    let b = q * nf * (p - 2.0);
    // log-domain to keep large powers finite
    let log_inner = (p * (nf - q) - nf * q) * a.ln() - nf * (p - 2.0) * b.ln();
    s * (log_inner / s).exp()
}

/// `K / ((1/q)‖DW‖_q^q + (1/2)‖W‖₂²)` with the ζ-normalised `W_{p,q}`.
///
/// Reported for reference only. It does not coincide with the quotient
/// `‖W‖_p/(‖DW‖_q^ν‖W‖₂^{1−ν})` attained by the extremal, so it is not used
/// as the sharp constant; see [`gn_constant_q`].
pub fn kappa_printed_form(n: usize, p: f64, q: f64, wpq_norms: &ExtremalNorms) -> Result<f64> {
    require_converged(wpq_norms, "W_{p,q}")?;
    let denom = wpq_norms.norms.gradq / q + 0.5 * wpq_norms.norms.mass2;
    Ok(closed_form_k(n, p, q) / denom)
}

/// Sharp constant of `‖u‖_p ≤ 𝒦 ‖∇u‖_q^{ν} ‖u‖₂^{1−ν}`, evaluated as the
/// quotient attained by the extremal `W_{p,q}`.
pub fn gn_constant_q(n: usize, p: f64, q: f64, wpq_norms: &ExtremalNorms) -> Result<f64> {
    require_converged(wpq_norms, "W_{p,q}")?;
    Ok(gnq_quotient(n, p, q, &wpq_norms.norms))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalMasses {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_2star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chat_2star: Option<f64>,
}

/// `c_* = ‖W_{p̄}‖₂`; requires `p = p̄`.
pub fn c_star(params: &ProblemParams, wp_norms: &ExtremalNorms) -> Result<f64> {
    let ex = params.exponents();
    if !approx_eq_rel(params.p, ex.pbar) {
        return Err(Error::Regime(format!(
            "c_* needs p = p̄ = {} (p = {})",
            ex.pbar, params.p
        )));
    }
    require_converged(wp_norms, "W_p̄")?;
    Ok(wp_norms.norms.mass2.sqrt())
}

/// `c_** = ((N+2) / (N 𝒦^{q(N+2)/N}))^{N/(2q)}`; requires `p = p̂`.
pub fn c_double_star(params: &ProblemParams, wpq_norms: &ExtremalNorms) -> Result<f64> {
    let ex = params.exponents();
    if !approx_eq_rel(params.p, ex.phat) {
        return Err(Error::Regime(format!(
            "c_** needs p = p̂ = {} (p = {})",
            ex.phat, params.p
        )));
    }
    let nf = params.n as f64;
    let q = params.q;
    let kappa = gn_constant_q(params.n, params.p, q, wpq_norms)?;
    Ok(((nf + 2.0) / (nf * kappa.powf(q * (nf + 2.0) / nf))).powf(nf / (2.0 * q)))
}

/// `ĉ_** = [2‖∇W_p‖_q^q / (q‖W_p‖₂^{2(N−q)/N})]^{N/(2q)}` with `W_p` the
/// semilinear extremal at `p = p̂` and its q-gradient norm; requires `p = p̂`.
pub fn c_double_star_hat(params: &ProblemParams, wp_norms: &ExtremalNorms) -> Result<f64> {
    let ex = params.exponents();
    if !approx_eq_rel(params.p, ex.phat) {
        return Err(Error::Regime(format!(
            "ĉ_** needs p = p̂ = {} (p = {})",
            ex.phat, params.p
        )));
    }
    require_converged(wp_norms, "W_p̂")?;
    let nf = params.n as f64;
    let q = params.q;
    let w2 = wp_norms.norms.mass2.sqrt();
    let inner = 2.0 * wp_norms.norms.gradq / (q * w2.powf(2.0 * (nf - q) / nf));
    Ok(inner.powf(nf / (2.0 * q)))
}

/// Thresholds applicable to the regime of `params`. `wp_norms` is the
/// semilinear extremal at the critical exponent (with `gradq` measured in the
/// problem's `q`), `wpq_norms` the q-Laplacian extremal.
pub fn critical_masses(
    params: &ProblemParams,
    wp_norms: Option<&ExtremalNorms>,
    wpq_norms: Option<&ExtremalNorms>,
) -> Result<CriticalMasses> {
    let report = classify_regime(params)?;
    let missing = |what: &str| Error::Dependency(format!("{what} norms not supplied"));
    match report.regime {
        Regime::L2Critical => Ok(CriticalMasses {
            c_star: Some(c_star(params, wp_norms.ok_or_else(|| missing("W_p̄"))?)?),
            ..Default::default()
        }),
        Regime::LqCritical => Ok(CriticalMasses {
            c_2star: Some(c_double_star(
                params,
                wpq_norms.ok_or_else(|| missing("W_{p,q}"))?,
            )?),
            chat_2star: Some(c_double_star_hat(
                params,
                wp_norms.ok_or_else(|| missing("W_p̂"))?,
            )?),
            ..Default::default()
        }),
        other => Err(Error::Regime(format!(
            "critical masses exist only at p = p̄ or p = p̂ (regime {other:?})"
        ))),
    }
}
