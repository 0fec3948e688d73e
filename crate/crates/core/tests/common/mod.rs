#![allow(dead_code)]

use std::sync::Arc;

use normsol::radial_grid::{RadialField, RadialGrid};
use rand::Rng;

/// Sum of one to three Gaussians with random centres, widths and weights,
/// vanishing at `R`.
pub fn random_gaussians<R: Rng>(rng: &mut R, grid: &Arc<RadialGrid>) -> RadialField {
    let k = rng.gen_range(1..=3);
    let bumps: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| (rng.gen_range(0.2..1.0), rng.gen_range(0.0..2.0), rng.gen_range(0.5..2.0)))
        .collect();
    let r_max = grid.r_max();
    RadialField::from_fn(grid.clone(), |r| {
        let s: f64 = bumps.iter().map(|(a, c, w)| a * (-((r - c) / w).powi(2)).exp()).sum();
        s * (1.0 - (r / r_max).powi(2))
    })
}

/// `(1 − (r/a)²)₊³` with a random support radius.
pub fn random_bump<R: Rng>(rng: &mut R, grid: &Arc<RadialGrid>) -> RadialField {
    let a = rng.gen_range(1.0..0.5 * grid.r_max());
    RadialField::from_fn(grid.clone(), |r| (1.0 - (r / a).powi(2)).max(0.0).powi(3))
}

/// Smooth direction vanishing at `R`.
pub fn random_direction<R: Rng>(rng: &mut R, grid: &Arc<RadialGrid>) -> RadialField {
    let (a, b, w) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..3.0), rng.gen_range(0.5..2.0));
    let r_max = grid.r_max();
    RadialField::from_fn(grid.clone(), |r| {
        (a + (r * b).cos()) * (-(r / w).powi(2)).exp() * (1.0 - (r / r_max).powi(2))
    })
}
