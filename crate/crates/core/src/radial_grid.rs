//! Radial discretization of ℝ^N.
//!
//! Nodes are uniform, `r_i = i·h`, `h = R/(M−1)`. Point values carry the
//! trapezoid weights `w_i = ω_N r_i^{N−1} h` (halved at `r = R`, zero at the
//! origin), which integrate functions of `|x|` against the surface measure.
//!
//! Gradient integrals are computed in flux form: the difference quotient
//! `(u_{i+1} − u_i)/h` lives on the cell midpoint `r_{i+½}` and is weighted by
//! `ω_N r_{i+½}^{N−1} h`. The innermost cell `[0, h]` is skipped, which is how
//! `u′(0) = 0` enters the discrete energy; its contribution for a smooth radial
//! profile is `O(h^{N+2})`.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 64;

/// Surface area of the unit sphere in ℝ^N, `2π^{N/2}/Γ(N/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    // Γ(N/2) by the half-integer recursion
    let mut gamma = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n: usize,
    r_max: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cell_weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64, m: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::ParamDomain(format!("grid dimension N ≥ 2 violated (N = {n})")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::ParamDomain(format!("grid radius R > 0 violated (R = {r_max})")));
        }
        if m < MIN_NODES {
            return Err(Error::ParamDomain(format!(
                "grid size M ≥ {MIN_NODES} violated (M = {m})"
            )));
        }
        let omega = unit_sphere_area(n);
        let h = r_max / (m - 1) as f64;
        let nodes: Vec<f64> = (0..m).map(|i| i as f64 * h).collect();
        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&r| omega * r.powi(n as i32 - 1) * h)
            .collect();
        weights[m - 1] *= 0.5;
        let mut cell_weights: Vec<f64> = (0..m - 1)
            .map(|i| omega * ((i as f64 + 0.5) * h).powi(n as i32 - 1) * h)
            .collect();
        cell_weights[0] = 0.0;
        Ok(RadialGrid {
            n,
            r_max,
            h,
            nodes,
            weights,
            cell_weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flux weights `ω_N r_{i+½}^{N−1} h` of the `M−1` cells (cell 0 is zero).
    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weights
    }

    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        Ok(self.weights.iter().zip(values).map(|(w, f)| w * f).sum())
    }

    /// Discrete L² inner product `Σ w_i a_i b_i`.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn volume(&self) -> f64 {
        unit_sphere_area(self.n) * self.r_max.powi(self.n as i32) / self.n as f64
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.nodes.len() {
            Err(Error::LengthMismatch {
                expected: self.nodes.len(),
                got,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(RadialField { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialField { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let m = grid.len();
        RadialField {
            grid,
            values: vec![0.0; m],
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        RadialField::new(self.grid.clone(), values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn mass2(&self) -> f64 {
        self.grid.dot(&self.values, &self.values)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RadialField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Piecewise-linear evaluation; zero beyond `R`.
    pub fn eval(&self, r: f64) -> f64 {
        interp_linear(self.grid.spacing(), &self.values, r)
    }
}

pub(crate) fn interp_linear(h: f64, values: &[f64], r: f64) -> f64 {
    if !(r >= 0.0) {
        return values[0];
    }
    let x = r / h;
    let i = x.floor() as usize;
    let m = values.len();
    if i >= m - 1 {
        return if i == m - 1 && x == (m - 1) as f64 {
            values[m - 1]
        } else {
            0.0
        };
    }
    let theta = x - i as f64;
    values[i] * (1.0 - theta) + values[i + 1] * theta
}

pub fn make_grid(n: usize, r_max: f64, m: usize) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(n, r_max, m).map(Arc::new)
}

pub fn integrate(values: &[f64], grid: &RadialGrid) -> Result<f64> {
    grid.integrate(values)
}

/// Central differences in the interior, `u′(0) = 0`, second-order one-sided
/// difference at `r = R`.
pub fn radial_derivative(u: &RadialField) -> RadialField {
    let h = u.grid.spacing();
    let v = &u.values;
    let m = v.len();
    let mut d = vec![0.0; m];
    for i in 1..m - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) / (2.0 * h);
    RadialField {
        grid: u.grid.clone(),
        values: d,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    /// `‖u‖₂²`
    pub mass2: f64,
    /// `‖∇u‖₂²`
    pub grad2: f64,
    /// `‖∇u‖_q^q`
    pub gradq: f64,
    /// `‖u‖_p^p`
    pub lp: f64,
}

/// The four integrals entering the energy, with gradients in flux form.
pub fn norms(u: &RadialField, q: f64, p: f64) -> Norms {
    let grid = &u.grid;
    let v = &u.values;
    let h = grid.spacing();
    let mut grad2 = 0.0;
    let mut gradq = 0.0;
    for (k, &cw) in grid.cell_weights().iter().enumerate().skip(1) {
        let s = ((v[k + 1] - v[k]) / h).abs();
        grad2 += cw * s * s;
        gradq += cw * s.powf(q);
    }
    let mut mass2 = 0.0;
    let mut lp = 0.0;
    for (&w, &x) in grid.weights().iter().zip(v) {
        mass2 += w * x * x;
        lp += w * x.abs().powf(p);
    }
    Norms {
        mass2,
        grad2,
        gradq,
        lp,
    }
}

/// `v(r) = t^{N/2} u(t r)` by linear interpolation (zero beyond `R`), then
/// rescaled to the input mass.
pub fn resample_dilation(u: &RadialField, t: f64) -> Result<RadialField> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::ParamDomain(format!(
            "dilation factor must be finite and positive (t = {t})"
        )));
    }
    let grid = &u.grid;
    let amp = t.powf(grid.dim() as f64 / 2.0);
    let h = grid.spacing();
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| amp * interp_linear(h, &u.values, t * r))
        .collect();
    let mut out = RadialField {
        grid: grid.clone(),
        values,
    };
    let target = u.mass2();
    let got = out.mass2();
    if got > 0.0 && target > 0.0 {
        let s = (target / got).sqrt();
        out.values.iter_mut().for_each(|x| *x *= s);
    }
    Ok(out)
}

/// Writes `(r, u)` with a header and 17 significant digits.
pub fn write_field_csv(path: &Path, field: &RadialField) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "r,u")?;
        for (r, u) in field.grid.nodes().iter().zip(&field.values) {
            writeln!(w, "{r:.16e},{u:.16e}")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a two-column `(r, u)` snapshot.
pub fn read_field_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rs = Vec::new();
    let mut us = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('r')) {
            continue;
        }
        let mut cols = line.split(',');
        let mut next = || -> Result<f64> {
            cols.next()
                .ok_or_else(|| Error::parse(path, format!("line {}: missing column", lineno + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))
        };
        rs.push(next()?);
        us.push(next()?);
    }
    if rs.len() < 2 {
        return Err(Error::parse(path, "fewer than two samples"));
    }
    Ok((rs, us))
}

/// Samples a tabulated profile onto `grid` by linear interpolation (zero
/// outside the table).
pub fn field_from_samples(grid: Arc<RadialGrid>, rs: &[f64], us: &[f64]) -> Result<RadialField> {
    if rs.len() != us.len() {
        return Err(Error::LengthMismatch {
            expected: rs.len(),
            got: us.len(),
        });
    }
    let values = grid
        .nodes()
        .iter()
        .map(|&r| {
            if r > rs[rs.len() - 1] {
                return 0.0;
            }
            let j = rs.partition_point(|&x| x <= r).max(1).min(rs.len() - 1);
            let (r0, r1) = (rs[j - 1], rs[j]);
            let theta = if r1 > r0 { (r - r0) / (r1 - r0) } else { 0.0 };
            us[j - 1] * (1.0 - theta) + us[j] * theta
        })
        .collect();
    RadialField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ball_volumes() {
        let g = RadialGrid::new(3, 1.0, 1001).unwrap();
        let vol = g.integrate(&vec![1.0; g.len()]).unwrap();
        assert!((vol / (4.0 * PI / 3.0) - 1.0).abs() < 1e-6);
        let g = RadialGrid::new(2, 2.0, 512).unwrap();
        let vol = g.integrate(&vec![1.0; g.len()]).unwrap();
        assert!((vol / (4.0 * PI) - 1.0).abs() < 1e-5);
        assert!((g.volume() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let g = RadialGrid::new(3, 20.0, 2000).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
        let val = g.integrate(&f).unwrap();
        assert!((val / PI.powf(1.5) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_integrand() {
        let g = RadialGrid::new(3, 5.0, 100).unwrap();
        assert_eq!(g.integrate(&vec![0.0; 100]).unwrap(), 0.0);
    }

    #[test]
    fn weights_nonnegative_origin_zero() {
        let g = RadialGrid::new(4, 3.0, 128).unwrap();
        assert_eq!(g.weights()[0], 0.0);
        assert!(g.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(RadialGrid::new(3, 1.0, 63).is_err());
        assert!(RadialGrid::new(1, 1.0, 100).is_err());
        assert!(RadialGrid::new(3, -1.0, 100).is_err());
        let g = RadialGrid::new(3, 1.0, 100).unwrap();
        assert!(matches!(
            g.integrate(&[1.0; 99]),
            Err(Error::LengthMismatch { expected: 100, got: 99 })
        ));
    }

    #[test]
    fn derivative_of_constant_and_quadratic() {
        let g = make_grid(3, 4.0, 401).unwrap();
        let c = RadialField::from_fn(g.clone(), |_| 2.5);
        assert!(radial_derivative(&c).values().iter().all(|&d| d.abs() < 1e-12));
        let sq = RadialField::from_fn(g.clone(), |r| r * r);
        let d = radial_derivative(&sq);
        for (i, &r) in g.nodes().iter().enumerate().skip(1) {
            assert!((d.values()[i] - 2.0 * r).abs() < 1e-9, "node {i}");
        }
    }

    #[test]
    fn derivative_of_gaussian_second_order() {
        let sup_err = |m: usize| {
            let g = make_grid(3, 10.0, m).unwrap();
            let u = RadialField::from_fn(g.clone(), |r| (-r * r / 2.0).exp());
            let d = radial_derivative(&u);
            g.nodes()
                .iter()
                .zip(d.values())
                .filter(|(r, _)| **r <= 5.0)
                .map(|(&r, &dv)| (dv + r * (-r * r / 2.0).exp()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (sup_err(501), sup_err(1001));
        assert!(e1 < 1e-3);
        assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
    }

    #[test]
    fn gaussian_norms_closed_form() {
        // u = π^{-3/4} e^{-r²/2}: ‖u‖₂ = 1, ‖∇u‖₂² = 3/2
        let g = make_grid(3, 20.0, 2000).unwrap();
        let u = RadialField::from_fn(g, |r| PI.powf(-0.75) * (-r * r / 2.0).exp());
        let nm = norms(&u, 2.5, 3.0);
        assert!((nm.mass2 - 1.0).abs() < 1e-6);
        assert!((nm.grad2 - 1.5).abs() < 1e-4, "{}", nm.grad2);
    }

    #[test]
    fn gradq_refinement() {
        let value = |m: usize| {
            let g = make_grid(3, 20.0, m).unwrap();
            let u = RadialField::from_fn(g, |r| PI.powf(-0.75) * (-r * r / 2.0).exp());
            norms(&u, 2.5, 3.0).gradq
        };
        let fine = value(100_000);
        let coarse = value(2000);
        assert!((coarse / fine - 1.0).abs() < 1e-4);
    }

    #[test]
    fn zero_field_norms() {
        let g = make_grid(3, 5.0, 100).unwrap();
        let nm = norms(&RadialField::zeros(g), 1.5, 3.0);
        assert_eq!(nm, Norms::default());
    }

    #[test]
    fn dilation_identity_and_mass() {
        let g = make_grid(3, 20.0, 2000).unwrap();
        let u = RadialField::from_fn(g, |r| (-r * r / 3.0).exp() * (1.0 + 0.3 * r));
        let same = resample_dilation(&u, 1.0).unwrap();
        for (a, b) in same.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        for &t in &[0.5, 2.0] {
            let v = resample_dilation(&u, t).unwrap();
            assert!((v.mass2() / u.mass2() - 1.0).abs() < 1e-12);
        }
        assert!(resample_dilation(&u, 0.0).is_err());
        assert!(resample_dilation(&u, f64::NAN).is_err());
    }

    #[test]
    fn dilation_scaling_laws() {
        let g = make_grid(3, 20.0, 2000).unwrap();
        let (q, p) = (2.5, 3.0);
        let u = RadialField::from_fn(g, |r| (-r * r / 2.0).exp());
        let base = norms(&u, q, p);
        let nf = 3.0;
        let eq = q * (1.0 + nf * (q - 2.0) / (2.0 * q));
        let ep = p * nf * (p - 2.0) / (2.0 * p);
        for &t in &[0.25, 0.5, 1.5, 2.0, 4.0] {
            let v = norms(&resample_dilation(&u, t).unwrap(), q, p);
            assert!((v.grad2 / (t * t * base.grad2) - 1.0).abs() < 1e-2, "t={t}");
            assert!((v.gradq / (t.powf(eq) * base.gradq) - 1.0).abs() < 1e-2, "t={t}");
            assert!((v.lp / (t.powf(ep) * base.lp) - 1.0).abs() < 1e-2, "t={t}");
        }
    }

    #[test]
    fn quadrature_converges_second_order() {
        // ∫_{B_1} r ω r² dr = π for N = 3
        let err = |m: usize| {
            let g = RadialGrid::new(3, 1.0, m).unwrap();
            let f: Vec<f64> = g.nodes().to_vec();
            (g.integrate(&f).unwrap() - PI).abs()
        };
        let ratio = err(201) / err(401);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let g = make_grid(2, 7.0, 300).unwrap();
        let u = RadialField::from_fn(g.clone(), |r| (r * 1.234567).sin() / (1.0 + r));
        write_field_csv(&path, &u).unwrap();
        let (rs, us) = read_field_csv(&path).unwrap();
        assert_eq!(rs, g.nodes());
        assert_eq!(us, u.values());
        let back = field_from_samples(g, &rs, &us).unwrap();
        assert_eq!(back.values(), u.values());
    }
}
