use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::pool::{default_workers, run_jobs};
use crate::analysis::{filter_bound_report, FilterBoundReport};
use crate::basis::{build_basis, SpatialKind};
use crate::error::Result;
use crate::net::{ConfigFile, Network, PerLayer};

/// Quadrature checks of a spatial basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisValidation {
    pub kind: SpatialKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub gram_grid: usize,
    /// Max `|G_ij - delta_ij|` of the spatial Gram matrix.
    pub gram_max_dev: f64,
    pub laplacian_grid: usize,
    /// Points with `|u| <= interior` (disk) or `|u|_inf <= interior` (square).
    pub interior: f64,
    /// Max over modes of `max |Delta_h psi + mu psi| / (mu max |psi|)`.
    pub laplacian_max_residual: f64,
    pub angular_max_dev: f64,
    pub scale_max_dev: f64,
}

pub const GRAM_GRID: usize = 201;
pub const LAPLACIAN_GRID: usize = 401;

/// Gram matrix on a `201 x 201` trapezoid grid, five-point Laplacian
/// residual on a `401 x 401` grid, plus the angular and scale factors.
pub fn basis_validate(kind: SpatialKind, k: usize) -> Result<BasisValidation> {
    let basis = build_basis(kind, k, 4, 4)?;

    let n = GRAM_GRID;
    let h = 2.0 / (n - 1) as f64;
    let axis: Vec<(f64, f64)> = (0..n)
        .map(|i| (-1.0 + i as f64 * h, if i == 0 || i == n - 1 { 0.5 } else { 1.0 }))
        .collect();
    let samples: Vec<Vec<f64>> = basis
        .spatial
        .iter()
        .map(|e| {
            axis.iter()
                .flat_map(|&(y, _)| axis.iter().map(move |&(x, _)| (x, y)))
                .map(|(x, y)| e.eval(x, y))
                .collect()
        })
        .collect();
    let weights: Vec<f64> = axis
        .iter()
        .flat_map(|&(_, wy)| axis.iter().map(move |&(_, wx)| wx * wy * h * h))
        .collect();
    let mut gram_max_dev: f64 = 0.0;
    for i in 0..k {
        for j in i..k {
            let g: f64 = samples[i]
                .iter()
                .zip(&samples[j])
                .zip(&weights)
                .map(|((a, b), w)| a * b * w)
                .sum();
            let want = if i == j { 1.0 } else { 0.0 };
            gram_max_dev = gram_max_dev.max((g - want).abs());
        }
    }

    let n = LAPLACIAN_GRID;
    let h = 2.0 / (n - 1) as f64;
    let interior = 0.9;
    let mut laplacian_max_residual: f64 = 0.0;
    for e in &basis.spatial {
        let grid: Vec<f64> = (0..n * n)
            .map(|p| e.eval(-1.0 + (p % n) as f64 * h, -1.0 + (p / n) as f64 * h))
            .collect();
        let peak = grid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        for iy in 1..n - 1 {
            for ix in 1..n - 1 {
                let (x, y) = (-1.0 + ix as f64 * h, -1.0 + iy as f64 * h);
                let inside = match kind {
                    SpatialKind::FbDisk => x.hypot(y) <= interior,
                    SpatialKind::SlSquare => x.abs().max(y.abs()) <= interior,
                };
                if !inside {
                    continue;
                }
                let c = grid[iy * n + ix];
                let lap = (grid[iy * n + ix + 1] + grid[iy * n + ix - 1] + grid[(iy + 1) * n + ix]
                    + grid[(iy - 1) * n + ix]
                    - 4.0 * c)
                    / (h * h);
                worst = worst.max((lap + e.eigenvalue * c).abs());
            }
        }
        laplacian_max_residual = laplacian_max_residual.max(worst / (e.eigenvalue * peak));
    }

    let nt = 720;
    let mut angular_max_dev: f64 = 0.0;
    for a in &basis.angular {
        for b in &basis.angular {
            let g: f64 = (0..nt)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / nt as f64;
                    a.eval(t) * b.eval(t)
                })
                .sum::<f64>()
                / nt as f64;
            let want = if a == b { 1.0 } else { 0.0 };
            angular_max_dev = angular_max_dev.max((g - want).abs());
        }
    }
    let na = 2000;
    let mut scale_max_dev: f64 = 0.0;
    for a in &basis.scale {
        for b in &basis.scale {
            let g: f64 = (0..na)
                .map(|i| {
                    let t = -1.0 + 2.0 * (i as f64 + 0.5) / na as f64;
                    a.eval(t) * b.eval(t)
                })
                .sum::<f64>()
                * 2.0
                / na as f64;
            let want = if a == b { 1.0 } else { 0.0 };
            scale_max_dev = scale_max_dev.max((g - want).abs());
        }
    }

    Ok(BasisValidation {
        kind,
        k,
        gram_grid: GRAM_GRID,
        gram_max_dev,
        laplacian_grid: LAPLACIAN_GRID,
        interior,
        laplacian_max_residual,
        angular_max_dev,
        scale_max_dev,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    pub network: ConfigFile,
    pub draws: Vec<u64>,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for BoundsConfig {
    /// A lifting layer and one joint layer with two scale modes, ten draws.
    fn default() -> Self {
        BoundsConfig {
            network: ConfigFile {
                layers: 2,
                channels: PerLayer::Same(2),
                in_channels: 2,
                k: 10,
                n_rot: 8,
                n_scale: 3,
                t: 1.0,
                stencil: 11,
                l_theta: 4,
                l_alpha: 2,
                j: PerLayer::Each(vec![0, 1]),
                seed: 0,
                max_angular: 4,
                scale_modes: None,
                basis: "fb".into(),
            },
            draws: (0..10).collect(),
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsDraw {
    pub seed: u64,
    pub layers: Vec<FilterBoundReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub config: BoundsConfig,
    pub draws: Vec<BoundsDraw>,
    /// Max over draws and layers of `max(B, C, 2^j D) / A`.
    pub worst_ratio: f64,
}

/// Filter integrals for A2-normalized random coefficients.
pub fn bounds_report(cfg: &BoundsConfig) -> Result<BoundsReport> {
    let network = Network::new(cfg.network.resolve()?)?;
    let workers = if cfg.workers == 0 {
        default_workers()
    } else {
        cfg.workers
    };
    let draws = run_jobs(cfg.draws.len(), workers, |i| -> Result<BoundsDraw> {
        let seed = cfg.draws[i];
        let coeffs = network.random_coeffs(seed)?;
        let layers = coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| filter_bound_report(c, &network.bases[l], &network.config.layers[l]))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundsDraw { seed, layers })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let worst_ratio = draws
        .iter()
        .flat_map(|d| &d.layers)
        .filter(|r| r.a > 0.0)
        .map(|r| r.b.max(r.c).max(r.scaled_d) / r.a)
        .fold(0.0, f64::max);
    Ok(BoundsReport {
        config: cfg.clone(),
        draws,
        worst_ratio,
    })
}
