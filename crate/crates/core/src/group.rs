//! The roto-scale-translation group, its composition law, and its actions on
//! sampled images and on group-indexed feature maps.
//!
//! Spatial coordinates are in pixels with the origin at the grid center
//! `((W-1)/2, (H-1)/2)`; `x` runs along columns and `y` along rows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// `(eta, beta, v)`: rotate by `eta`, scale by `2^beta`, translate by `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub eta: f64,
    pub beta: f64,
    pub v: [f64; 2],
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

fn rotate(angle: f64, p: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement {
        eta: 0.0,
        beta: 0.0,
        v: [0.0, 0.0],
    };

    /// Angles are reduced to `[0, 2pi)`.
    pub fn new(eta: f64, beta: f64, v: [f64; 2]) -> Self {
        GroupElement {
            eta: wrap_angle(eta),
            beta,
            v,
        }
    }

    pub fn translation(vx: f64, vy: f64) -> Self {
        GroupElement::new(0.0, 0.0, [vx, vy])
    }

    /// `(eta, beta, v) . (theta, alpha, u) = (theta + eta, alpha + beta, v + R_eta 2^beta u)`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let s = 2f64.powf(self.beta);
        let ru = rotate(self.eta, other.v);
        GroupElement::new(
            other.eta + self.eta,
            other.beta + self.beta,
            [self.v[0] + s * ru[0], self.v[1] + s * ru[1]],
        )
    }

    /// `(-eta, -beta, -R_{-eta} 2^{-beta} v)`.
    pub fn inverse(&self) -> GroupElement {
        let s = 2f64.powf(-self.beta);
        let rv = rotate(-self.eta, self.v);
        GroupElement::new(-self.eta, -self.beta, [-s * rv[0], -s * rv[1]])
    }

    pub fn is_identity(&self) -> bool {
        self.eta == 0.0 && self.beta == 0.0 && self.v == [0.0, 0.0]
    }

    /// Source point `R_{-eta} 2^{-beta} (u - v)` read by the action at `u`.
    #[inline]
    pub(crate) fn pullback(&self, cos_e: f64, sin_e: f64, shrink: f64, u: [f64; 2]) -> [f64; 2] {
        let dx = u[0] - self.v[0];
        let dy = u[1] - self.v[1];
        [
            shrink * (cos_e * dx + sin_e * dy),
            shrink * (-sin_e * dx + cos_e * dy),
        ]
    }
}

/// Image `[M, H, W]` with unit pixel spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl ImageTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        ImageTensor {
            channels,
            height,
            width,
            values: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != channels * height * width {
            return Err(Error::DimensionMismatch(format!(
                "image buffer holds {} values, shape [{channels}, {height}, {width}] needs {}",
                values.len(),
                channels * height * width
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("image contains non-finite values".into()));
        }
        Ok(ImageTensor {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.values[(c * self.height + row) * self.width + col]
    }

    /// Map a pixel to centered coordinates.
    pub fn coords(&self, row: usize, col: usize) -> [f64; 2] {
        centered(self.height, self.width, row, col)
    }
}

#[inline]
pub(crate) fn centered(height: usize, width: usize, row: usize, col: usize) -> [f64; 2] {
    [
        col as f64 - (width as f64 - 1.0) * 0.5,
        row as f64 - (height as f64 - 1.0) * 0.5,
    ]
}

/// Bilinear read of a plane at centered coordinates; outside reads are 0.
#[inline]
pub(crate) fn bilinear(plane: &[f64], height: usize, width: usize, p: [f64; 2]) -> f64 {
    let fx = p[0] + (width as f64 - 1.0) * 0.5;
    let fy = p[1] + (height as f64 - 1.0) * 0.5;
    if !(fx > -1.0 && fy > -1.0 && fx < width as f64 && fy < height as f64) {
        return 0.0;
    }
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= height as isize || c >= width as isize {
            0.0
        } else {
            plane[r as usize * width + c as usize]
        }
    };
    let mut v = 0.0;
    if (1.0 - tx) * (1.0 - ty) != 0.0 {
        v += (1.0 - tx) * (1.0 - ty) * at(y0, x0);
    }
    if tx * (1.0 - ty) != 0.0 {
        v += tx * (1.0 - ty) * at(y0, x0 + 1);
    }
    if (1.0 - tx) * ty != 0.0 {
        v += (1.0 - tx) * ty * at(y0 + 1, x0);
    }
    if tx * ty != 0.0 {
        v += tx * ty * at(y0 + 1, x0 + 1);
    }
    v
}

/// Resample every plane at `src(u)` for each output pixel `u`.
pub(crate) fn warp_planes<F>(
    src: &[f64],
    planes: usize,
    height: usize,
    width: usize,
    mut map: F,
) -> Vec<f64>
where
    F: FnMut([f64; 2]) -> [f64; 2],
{
    let n = height * width;
    let sources: Vec<[f64; 2]> = (0..height)
        .flat_map(|row| (0..width).map(move |col| (row, col)))
        .map(|(row, col)| map(centered(height, width, row, col)))
        .collect();
    let mut out = vec![0.0; planes * n];
    for p in 0..planes {
        let plane = &src[p * n..(p + 1) * n];
        let dst = &mut out[p * n..(p + 1) * n];
        for (d, &s) in dst.iter_mut().zip(&sources) {
            *d = bilinear(plane, height, width, s);
        }
    }
    out
}

/// `[D_g x](u, c) = x(R_{-eta} 2^{-beta} (u - v), c)`, bilinear, zero outside.
pub fn act_on_image(g: &GroupElement, x: &ImageTensor) -> ImageTensor {
    if g.is_identity() {
        return x.clone();
    }
    let (sin_e, cos_e) = g.eta.sin_cos();
    let shrink = 2f64.powf(-g.beta);
    let values = warp_planes(&x.values, x.channels, x.height, x.width, |u| {
        g.pullback(cos_e, sin_e, shrink, u)
    });
    ImageTensor {
        values,
        ..x.clone()
    }
}

/// Feature map `[M, N_r, N_s, H, W]` on the discretized group.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub n_rot: usize,
    pub n_scale: usize,
    pub height: usize,
    pub width: usize,
    /// Scale samples, uniform and strictly increasing.
    pub scale_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(
        channels: usize,
        n_rot: usize,
        scale_grid: Vec<f64>,
        height: usize,
        width: usize,
    ) -> Self {
        let n_scale = scale_grid.len();
        FeatureMap {
            channels,
            n_rot,
            n_scale,
            height,
            width,
            scale_grid,
            values: vec![0.0; channels * n_rot * n_scale * height * width],
        }
    }

    pub fn rotation_step(&self) -> f64 {
        TWO_PI / self.n_rot as f64
    }

    /// Spacing of the scale grid; `None` for a single scale sample.
    pub fn scale_step(&self) -> Option<f64> {
        (self.n_scale > 1).then(|| self.scale_grid[1] - self.scale_grid[0])
    }

    pub fn shape(&self) -> [usize; 5] {
        [self.channels, self.n_rot, self.n_scale, self.height, self.width]
    }

    #[inline]
    pub fn plane_index(&self, c: usize, r: usize, s: usize) -> usize {
        ((c * self.n_rot + r) * self.n_scale + s) * self.height * self.width
    }

    pub fn plane(&self, c: usize, r: usize, s: usize) -> &[f64] {
        let i = self.plane_index(c, r, s);
        &self.values[i..i + self.height * self.width]
    }

    pub fn plane_mut(&mut self, c: usize, r: usize, s: usize) -> &mut [f64] {
        let i = self.plane_index(c, r, s);
        let n = self.height * self.width;
        &mut self.values[i..i + n]
    }

    pub fn get(&self, c: usize, r: usize, s: usize, row: usize, col: usize) -> f64 {
        self.values[self.plane_index(c, r, s) + row * self.width + col]
    }

    /// Index of the scale sample at `alpha = 0`, if present.
    pub fn zero_scale_index(&self) -> Option<usize> {
        self.scale_grid.iter().position(|&a| a.abs() < 1e-12)
    }

    /// Consistency of the metadata with the buffer.
    pub fn check(&self) -> Result<()> {
        if self.scale_grid.len() != self.n_scale {
            return Err(Error::DimensionMismatch("scale grid length".into()));
        }
        if self.values.len() != self.channels * self.n_rot * self.n_scale * self.height * self.width {
            return Err(Error::DimensionMismatch("feature buffer length".into()));
        }
        if let Some(step) = self.scale_step() {
            for w in self.scale_grid.windows(2) {
                if !(w[1] > w[0]) || ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0) {
                    return Err(Error::DimensionMismatch("scale grid not uniform".into()));
                }
            }
        }
        Ok(())
    }
}

/// Integer number of channel steps covered by `value`, or an off-lattice error.
fn lattice_steps(what: &'static str, value: f64, step: f64) -> Result<isize> {
    let n = (value / step).round();
    if (value - n * step).abs() > 1e-9 * step.abs().max(1.0) {
        return Err(Error::OffLattice { what, value, step });
    }
    Ok(n as isize)
}

/// Regular representation:
/// `[D_g x](u, theta, alpha, c) = x(R_{-eta} 2^{-beta} (u - v), theta - eta, alpha - beta, c)`.
///
/// The rotation axis is shifted cyclically, the scale axis is shifted with
/// zero fill, and every plane is warped bilinearly.
pub fn act_on_feature(g: &GroupElement, x: &FeatureMap) -> Result<FeatureMap> {
    let rot_step = x.rotation_step();
    // eta lives in [0, 2pi); both ends map to whole turns.
    let mut r_shift = lattice_steps("eta", g.eta, rot_step)?;
    r_shift = r_shift.rem_euclid(x.n_rot as isize);
    let s_shift = match x.scale_step() {
        Some(step) => lattice_steps("beta", g.beta, step)?,
        None if g.beta == 0.0 => 0,
        None => {
            return Err(Error::OffLattice {
                what: "beta",
                value: g.beta,
                step: 0.0,
            })
        }
    };

    let (sin_e, cos_e) = g.eta.sin_cos();
    let shrink = 2f64.powf(-g.beta);
    let (h, w) = (x.height, x.width);
    let sources: Vec<[f64; 2]> = (0..h)
        .flat_map(|row| (0..w).map(move |col| (row, col)))
        .map(|(row, col)| g.pullback(cos_e, sin_e, shrink, centered(h, w, row, col)))
        .collect();
    let spatial_identity = g.v == [0.0, 0.0] && g.beta == 0.0 && r_shift == 0;

    let mut out = FeatureMap::zeros(x.channels, x.n_rot, x.scale_grid.clone(), h, w);
    for c in 0..x.channels {
        for r in 0..x.n_rot {
            let src_r = (r as isize - r_shift).rem_euclid(x.n_rot as isize) as usize;
            for s in 0..x.n_scale {
                let src_s = s as isize - s_shift;
                if src_s < 0 || src_s >= x.n_scale as isize {
                    continue;
                }
                let src = x.plane(c, src_r, src_s as usize);
                let dst = out.plane_mut(c, r, s);
                if spatial_identity {
                    dst.copy_from_slice(src);
                } else {
                    for (d, &p) in dst.iter_mut().zip(&sources) {
                        *d = bilinear(src, h, w, p);
                    }
                }
            }
        }
    }
    Ok(out)
}
