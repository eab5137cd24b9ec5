//! Orthonormal bases used to expand the convolution filters: Dirichlet
//! Laplacian eigenfunctions on the unit disk (Fourier-Bessel) or on the
//! square `[-1, 1]^2` (Sturm-Liouville) for the spatial part, the real
//! Fourier basis on the circle for the rotation part, and Dirichlet sines
//! on `[-1, 1]` for the scale part.

pub mod bank;
pub mod bessel;

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bank::{sample_filter_bank, BankGrid, FilterBank};
pub use bessel::{bessel_j, bessel_zero};

/// Spatial basis family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialKind {
    /// Fourier-Bessel modes on the unit disk.
    FbDisk,
    /// Separable sine modes on `[-1, 1]^2`.
    SlSquare,
}

impl SpatialKind {
    pub fn code(self) -> u32 {
        match self {
            SpatialKind::FbDisk => 0,
            SpatialKind::SlSquare => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(SpatialKind::FbDisk),
            1 => Some(SpatialKind::SlSquare),
            _ => None,
        }
    }

    /// Radius of the smallest disk containing the support domain.
    pub fn support_radius(self) -> f64 {
        match self {
            SpatialKind::FbDisk => 1.0,
            SpatialKind::SlSquare => SQRT_2,
        }
    }
}

impl std::str::FromStr for SpatialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fb" | "fb-disk" | "fourier-bessel" => Ok(SpatialKind::FbDisk),
            "sl" | "sl-square" | "sturm-liouville" => Ok(SpatialKind::SlSquare),
            other => Err(Error::Config(format!("unknown spatial basis `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Cos,
    Sin,
}

/// Which eigenproblem an element solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    FbDisk,
    SlSquare,
    FourierCircle,
    DirichletInterval,
}

/// One spatial eigenfunction `psi_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialElement {
    pub mode: SpatialMode,
    /// `mu_k`, the Dirichlet Laplacian eigenvalue.
    pub eigenvalue: f64,
    /// Multiplicative constant giving unit L2 norm on the domain.
    pub normalization: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpatialMode {
    /// `J_order(zero * r) * {cos, sin}(order * theta)`.
    Bessel {
        order: u32,
        radial: u32,
        zero: f64,
        parity: Parity,
    },
    /// `sin(p pi (x+1)/2) * sin(q pi (y+1)/2)`.
    Sine { p: u32, q: u32 },
}

impl SpatialElement {
    pub fn kind(&self) -> ElementKind {
        match self.mode {
            SpatialMode::Bessel { .. } => ElementKind::FbDisk,
            SpatialMode::Sine { .. } => ElementKind::SlSquare,
        }
    }

    /// `(angular frequency, radial index)` for FB, `(p, q)` for SL.
    pub fn indices(&self) -> (u32, u32) {
        match self.mode {
            SpatialMode::Bessel { order, radial, .. } => (order, radial),
            SpatialMode::Sine { p, q } => (p, q),
        }
    }

    /// Evaluate at `(x, y)`; zero outside the support domain.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.mode {
            SpatialMode::Bessel {
                order,
                zero,
                parity,
                ..
            } => {
                let r2 = x * x + y * y;
                if r2 > 1.0 {
                    return 0.0;
                }
                let r = r2.sqrt();
                let radial = bessel::jn(order, zero * r);
                self.normalization * radial * angular_factor(order, parity, x, y, r)
            }
            SpatialMode::Sine { p, q } => {
                if x.abs() > 1.0 || y.abs() > 1.0 {
                    return 0.0;
                }
                self.normalization
                    * (p as f64 * FRAC_PI_2 * (x + 1.0)).sin()
                    * (q as f64 * FRAC_PI_2 * (y + 1.0)).sin()
            }
        }
    }

    /// Analytic gradient `(d/dx, d/dy)`; zero outside the support domain.
    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        match self.mode {
            SpatialMode::Bessel {
                order,
                zero,
                parity,
                ..
            } => {
                let r2 = x * x + y * y;
                if r2 > 1.0 {
                    return [0.0, 0.0];
                }
                let r = r2.sqrt();
                let n = self.normalization;
                let m = order as f64;
                if order == 0 {
                    // Radial only: d/dr = lambda J_0'(lambda r) = -lambda J_1(lambda r).
                    // With J_1(z)/z finite at the origin, grad = -lambda^2 (J_1(z)/z) (x, y).
                    let g = -n * zero * zero * bessel::jn_over_x(1, zero * r);
                    return [g * x, g * y];
                }
                let theta = y.atan2(x);
                let (s, c) = (m * theta).sin_cos();
                let (ang, dang) = match parity {
                    Parity::Cos => (c, -m * s),
                    Parity::Sin => (s, m * c),
                };
                let z = zero * r;
                let dr = n * zero * bessel::jn_prime(order, z) * ang;
                // (1/r) d/dtheta = n * J_m(z)/r * dang = n * zero * (J_m(z)/z) * dang
                let dt = n * zero * bessel::jn_over_x(order, z) * dang;
                if r == 0.0 {
                    // Only order 1 has a nonzero gradient at the origin; its
                    // value is direction-independent, take theta = 0.
                    if order == 1 {
                        let g = n * zero * 0.5;
                        return match parity {
                            Parity::Cos => [g, 0.0],
                            Parity::Sin => [0.0, g],
                        };
                    }
                    return [0.0, 0.0];
                }
                let (ct, st) = (x / r, y / r);
                [dr * ct - dt * st, dr * st + dt * ct]
            }
            SpatialMode::Sine { p, q } => {
                if x.abs() > 1.0 || y.abs() > 1.0 {
                    return [0.0, 0.0];
                }
                let kp = p as f64 * FRAC_PI_2;
                let kq = q as f64 * FRAC_PI_2;
                let (sx, cx) = (kp * (x + 1.0)).sin_cos();
                let (sy, cy) = (kq * (y + 1.0)).sin_cos();
                let n = self.normalization;
                [n * kp * cx * sy, n * kq * sx * cy]
            }
        }
    }
}

fn angular_factor(order: u32, parity: Parity, x: f64, y: f64, r: f64) -> f64 {
    if order == 0 {
        return 1.0;
    }
    if r == 0.0 {
        // J_m(0) = 0 for m >= 1, so the factor is irrelevant.
        return 0.0;
    }
    let theta = y.atan2(x);
    let a = order as f64 * theta;
    match parity {
        Parity::Cos => a.cos(),
        Parity::Sin => a.sin(),
    }
}

/// Real Fourier function on `S^1`, orthonormal under `dtheta / 2pi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularElement {
    pub frequency: u32,
    pub parity: Parity,
}

impl AngularElement {
    pub fn eval(&self, theta: f64) -> f64 {
        if self.frequency == 0 {
            return 1.0;
        }
        let a = self.frequency as f64 * theta;
        SQRT_2
            * match self.parity {
                Parity::Cos => a.cos(),
                Parity::Sin => a.sin(),
            }
    }
}

/// Dirichlet sine `xi_n(alpha) = sin(n pi (alpha + 1) / 2)` on `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleElement {
    pub n: u32,
}

impl ScaleElement {
    /// `nu_n = (n pi / 2)^2`.
    pub fn eigenvalue(&self) -> f64 {
        let k = self.n as f64 * FRAC_PI_2;
        k * k
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        if alpha.abs() > 1.0 {
            return 0.0;
        }
        (self.n as f64 * FRAC_PI_2 * (alpha + 1.0)).sin()
    }
}

/// The three factor bases for one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    pub spatial_kind: SpatialKind,
    /// Sorted by nondecreasing eigenvalue.
    pub spatial: Vec<SpatialElement>,
    pub angular: Vec<AngularElement>,
    pub scale: Vec<ScaleElement>,
}

impl BasisSet {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spatial.iter().map(|e| e.eigenvalue).collect()
    }

    pub fn k(&self) -> usize {
        self.spatial.len()
    }
}

/// Every FB mode with `zero <= FB_POOL_CUTOFF` is enumerated. Since the
/// first zero of `J_m` exceeds `m`, orders above the cutoff cannot contribute,
/// so the sorted pool is an exact prefix of the full spectrum.
const FB_POOL_CUTOFF: f64 = 16.0;
const SL_POOL_MAX: u32 = 24;

/// Build the first `k` spatial modes plus angular factors up to
/// `max_angular` and `n_scale` scale factors.
pub fn build_basis(
    spatial_kind: SpatialKind,
    k: usize,
    max_angular: usize,
    n_scale: usize,
) -> Result<BasisSet> {
    if k == 0 {
        return Err(Error::Config("number of spatial modes K must be >= 1".into()));
    }
    let pool = match spatial_kind {
        SpatialKind::FbDisk => fb_pool(),
        SpatialKind::SlSquare => sl_pool(),
    };
    if k > pool.len() {
        return Err(Error::PoolExhausted {
            requested: k,
            available: pool.len(),
        });
    }
    let spatial = pool.into_iter().take(k).collect();

    let mut angular = vec![AngularElement {
        frequency: 0,
        parity: Parity::Cos,
    }];
    for m in 1..=max_angular as u32 {
        angular.push(AngularElement {
            frequency: m,
            parity: Parity::Cos,
        });
        angular.push(AngularElement {
            frequency: m,
            parity: Parity::Sin,
        });
    }
    let scale = (1..=n_scale as u32).map(|n| ScaleElement { n }).collect();

    Ok(BasisSet {
        spatial_kind,
        spatial,
        angular,
        scale,
    })
}

fn fb_pool() -> Vec<SpatialElement> {
    let mut pool = Vec::new();
    for order in 0..=bessel::DEFAULT_MAX_ORDER {
        if order as f64 > FB_POOL_CUTOFF {
            break;
        }
        let mut radial = 1;
        loop {
            let zero = bessel::zero_unchecked(order, radial);
            if zero > FB_POOL_CUTOFF {
                break;
            }
            let edge = bessel::jn(order + 1, zero).abs();
            let parities: &[Parity] = if order == 0 {
                &[Parity::Cos]
            } else {
                &[Parity::Cos, Parity::Sin]
            };
            // int_disk J_m(z r)^2 r dr = J_{m+1}(z)^2 / 2; the angular factor
            // contributes 2pi for m = 0 and pi otherwise.
            let normalization = if order == 0 {
                1.0 / (PI.sqrt() * edge)
            } else {
                SQRT_2 / (PI.sqrt() * edge)
            };
            for &parity in parities {
                pool.push(SpatialElement {
                    mode: SpatialMode::Bessel {
                        order,
                        radial,
                        zero,
                        parity,
                    },
                    eigenvalue: zero * zero,
                    normalization,
                });
            }
            radial += 1;
        }
    }
    // Ties (cos/sin pairs) keep insertion order: by order, cos before sin.
    pool.sort_by(|a, b| {
        a.eigenvalue
            .partial_cmp(&b.eigenvalue)
            .unwrap()
            .then_with(|| a.indices().0.cmp(&b.indices().0))
    });
    pool
}

fn sl_pool() -> Vec<SpatialElement> {
    let mut pool = Vec::new();
    for p in 1..=SL_POOL_MAX {
        for q in 1..=SL_POOL_MAX {
            // Only keep modes whose eigenvalue is below the smallest one that
            // could be missing from the truncated enumeration.
            if p * p + q * q > SL_POOL_MAX * SL_POOL_MAX {
                continue;
            }
            pool.push(SpatialElement {
                mode: SpatialMode::Sine { p, q },
                eigenvalue: FRAC_PI_2 * FRAC_PI_2 * (p * p + q * q) as f64,
                normalization: 1.0,
            });
        }
    }
    pool.sort_by(|a, b| {
        a.eigenvalue
            .partial_cmp(&b.eigenvalue)
            .unwrap()
            .then_with(|| a.indices().cmp(&b.indices()))
    });
    pool
}
