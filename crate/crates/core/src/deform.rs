//! Smooth displacement fields `tau` and the deformation
//! `[D_tau x](u) = x(u - tau(u))`.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::container::{self, Cursor, Section};
use crate::error::{Error, Result};
use crate::group::{centered, warp_planes, ImageTensor};

/// One Fourier component: `cos_coef cos(phi) + sin_coef sin(phi)` with
/// `phi = pi (p_x x + p_y y) / W_box`. Coefficients are 2-vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierTerm {
    pub freq: [i32; 2],
    pub cos_coef: [f64; 2],
    pub sin_coef: [f64; 2],
}

/// Truncated Fourier displacement field in pixel units on an `H x W` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField {
    pub height: usize,
    pub width: usize,
    pub box_width: f64,
    pub terms: Vec<FourierTerm>,
}

/// `(sup |tau|, sup ||grad tau||_2)` over the oversampled grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauNorms {
    pub sup_tau: f64,
    pub sup_grad_tau: f64,
}

impl FourierTerm {
    #[inline]
    fn phase_scale(&self, box_width: f64) -> [f64; 2] {
        [
            PI * self.freq[0] as f64 / box_width,
            PI * self.freq[1] as f64 / box_width,
        ]
    }

    /// Upper bound on `sup_u |term(u)|`.
    fn amplitude_bound(&self) -> f64 {
        let c = self.cos_coef;
        let s = self.sin_coef;
        (c[0] * c[0] + c[1] * c[1] + s[0] * s[0] + s[1] * s[1]).sqrt()
    }
}

impl DeformationField {
    pub fn zero(height: usize, width: usize) -> Self {
        DeformationField {
            height,
            width,
            box_width: width as f64,
            terms: Vec::new(),
        }
    }

    /// `tau(u) = c` everywhere.
    pub fn constant(height: usize, width: usize, c: [f64; 2]) -> Self {
        DeformationField {
            terms: vec![FourierTerm {
                freq: [0, 0],
                cos_coef: c,
                sin_coef: [0.0, 0.0],
            }],
            ..Self::zero(height, width)
        }
    }

    /// `tau(u)` at centered pixel coordinates.
    pub fn eval(&self, u: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0, 0.0];
        for t in &self.terms {
            let k = t.phase_scale(self.box_width);
            let (s, c) = (k[0] * u[0] + k[1] * u[1]).sin_cos();
            out[0] += t.cos_coef[0] * c + t.sin_coef[0] * s;
            out[1] += t.cos_coef[1] * c + t.sin_coef[1] * s;
        }
        out
    }

    /// Jacobian `J[c][d] = d tau_c / d u_d`.
    pub fn jacobian(&self, u: [f64; 2]) -> [[f64; 2]; 2] {
        let mut j = [[0.0; 2]; 2];
        for t in &self.terms {
            let k = t.phase_scale(self.box_width);
            let (s, c) = (k[0] * u[0] + k[1] * u[1]).sin_cos();
            for comp in 0..2 {
                let dphi = -t.cos_coef[comp] * s + t.sin_coef[comp] * c;
                j[comp][0] += dphi * k[0];
                j[comp][1] += dphi * k[1];
            }
        }
        j
    }

    /// Samples `[2, H, W]` on the pixel grid.
    pub fn samples(&self) -> Vec<f64> {
        let n = self.height * self.width;
        let mut out = vec![0.0; 2 * n];
        for r in 0..self.height {
            for c in 0..self.width {
                let v = self.eval(centered(self.height, self.width, r, c));
                out[r * self.width + c] = v[0];
                out[n + r * self.width + c] = v[1];
            }
        }
        out
    }

    /// Sum of the per-term amplitude bounds.
    pub fn amplitude_bound(&self) -> f64 {
        self.terms.iter().map(FourierTerm::amplitude_bound).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            for c in 0..2 {
                t.cos_coef[c] *= factor;
                t.sin_coef[c] *= factor;
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(container::MAGIC);
        buf.extend_from_slice(container::TAG_TAU);
        container::write_u32(&mut buf, self.height as u32)?;
        container::write_u32(&mut buf, self.width as u32)?;
        container::write_f64s(&mut buf, &[self.box_width])?;
        container::write_u32(&mut buf, self.terms.len() as u32)?;
        for t in &self.terms {
            container::write_i32(&mut buf, t.freq[0])?;
            container::write_i32(&mut buf, t.freq[1])?;
            container::write_f64s(&mut buf, &t.cos_coef)?;
            container::write_f64s(&mut buf, &t.sin_coef)?;
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut cur = Cursor::new(r);
        container::expect_section(&mut cur, Section::Deformation)?;
        let height = cur.u32("height")? as usize;
        let width = cur.u32("width")? as usize;
        let box_width = cur.f64("box width")?;
        if !(box_width.is_finite() && box_width > 0.0) {
            return Err(cur.fail("box width must be positive"));
        }
        let n = cur.u32("term count")? as usize;
        if n > 1 << 20 {
            return Err(cur.fail(format!("implausible term count {n}")));
        }
        let mut terms = Vec::with_capacity(n);
        for _ in 0..n {
            let freq = [cur.i32("frequency")?, cur.i32("frequency")?];
            let v = cur.f64_vec(4, "coefficients")?;
            terms.push(FourierTerm {
                freq,
                cos_coef: [v[0], v[1]],
                sin_coef: [v[2], v[3]],
            });
        }
        Ok(DeformationField {
            height,
            width,
            box_width,
            terms,
        })
    }
}

/// Random field with frequencies `|p_x|, |p_y| <= max_freq` (one per
/// antipodal pair, zero excluded), rescaled so the amplitude bound equals
/// `amplitude`. Deterministic in `seed`.
pub fn make_tau(seed: u64, amplitude: f64, max_freq: u32, height: usize, width: usize) -> DeformationField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = max_freq as i32;
    let mut terms = Vec::new();
    for px in 0..=p {
        for py in -p..=p {
            if px == 0 && py <= 0 {
                continue;
            }
            let mut draw = || [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            let cos_coef = draw();
            let sin_coef = draw();
            terms.push(FourierTerm {
                freq: [px, py],
                cos_coef,
                sin_coef,
            });
        }
    }
    let field = DeformationField {
        terms,
        ..DeformationField::zero(height, width)
    };
    let bound = field.amplitude_bound();
    if amplitude == 0.0 || bound == 0.0 {
        return DeformationField::zero(height, width);
    }
    field.scaled(amplitude / bound)
}

/// Random field rescaled so that `tau_norms` reports `sup_grad_tau`.
pub fn make_tau_with_grad(
    seed: u64,
    sup_grad_tau: f64,
    max_freq: u32,
    height: usize,
    width: usize,
) -> DeformationField {
    let unit = make_tau(seed, 1.0, max_freq, height, width);
    let g = tau_norms(&unit).sup_grad_tau;
    if sup_grad_tau == 0.0 || g == 0.0 {
        return DeformationField::zero(height, width);
    }
    unit.scaled(sup_grad_tau / g)
}

fn spectral_norm(j: [[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
    ((s + disc) * 0.5).sqrt()
}

/// Sup norms on a grid four times finer than the pixel grid, using the
/// analytic Jacobian.
pub fn tau_norms(tau: &DeformationField) -> TauNorms {
    let nx = 4 * tau.width.saturating_sub(1) + 1;
    let ny = 4 * tau.height.saturating_sub(1) + 1;
    let x0 = -(tau.width as f64 - 1.0) * 0.5;
    let y0 = -(tau.height as f64 - 1.0) * 0.5;
    let mut out = TauNorms {
        sup_tau: 0.0,
        sup_grad_tau: 0.0,
    };
    for iy in 0..ny {
        for ix in 0..nx {
            let u = [x0 + 0.25 * ix as f64, y0 + 0.25 * iy as f64];
            let v = tau.eval(u);
            out.sup_tau = out.sup_tau.max(v[0].hypot(v[1]));
            out.sup_grad_tau = out.sup_grad_tau.max(spectral_norm(tau.jacobian(u)));
        }
    }
    out
}

/// `out(u, c) = x(u - tau(u), c)` with the same bilinear reader as the
/// group action.
pub fn apply_deformation(tau: &DeformationField, x: &ImageTensor) -> Result<ImageTensor> {
    if tau.height != x.height || tau.width != x.width {
        return Err(Error::DimensionMismatch(format!(
            "field is {}x{}, image is {}x{}",
            tau.height, tau.width, x.height, x.width
        )));
    }
    if tau.terms.is_empty() {
        return Ok(x.clone());
    }
    let values = warp_planes(&x.values, x.channels, x.height, x.width, |u| {
        let t = tau.eval(u);
        [u[0] - t[0], u[1] - t[1]]
    });
    Ok(ImageTensor {
        values,
        ..x.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{act_on_image, GroupElement};

    #[test]
    fn zero_amplitude_is_zero() {
        let t = make_tau(1, 0.0, 3, 8, 8);
        assert!(t.samples().iter().all(|&v| v == 0.0));
        let n = tau_norms(&t);
        assert_eq!((n.sup_tau, n.sup_grad_tau), (0.0, 0.0));
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(make_tau(5, 0.7, 2, 9, 9), make_tau(5, 0.7, 2, 9, 9));
        assert_ne!(make_tau(5, 0.7, 2, 9, 9), make_tau(6, 0.7, 2, 9, 9));
    }

    #[test]
    fn amplitude_bound_holds() {
        let t = make_tau(9, 0.8, 2, 16, 16);
        assert!((t.amplitude_bound() - 0.8).abs() < 1e-12);
        assert!(tau_norms(&t).sup_tau <= 0.8 + 1e-12);
    }

    #[test]
    fn single_term_matches_hand_evaluation() {
        let t = DeformationField {
            height: 5,
            width: 7,
            box_width: 7.0,
            terms: vec![FourierTerm {
                freq: [1, 0],
                cos_coef: [0.0, 0.3],
                sin_coef: [0.5, 0.0],
            }],
        };
        let s = t.samples();
        for &(r, c) in &[(0, 0), (2, 3), (4, 6), (1, 5), (3, 1)] {
            let x = c as f64 - 3.0;
            let want_x = 0.5 * (PI * x / 7.0).sin();
            let want_y = 0.3 * (PI * x / 7.0).cos();
            assert!((s[r * 7 + c] - want_x).abs() < 1e-12);
            assert!((s[35 + r * 7 + c] - want_y).abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_gradient_norm() {
        let eps = 0.1;
        let w = 32;
        let t = DeformationField {
            height: w,
            width: w,
            box_width: w as f64,
            terms: vec![FourierTerm {
                freq: [1, 0],
                cos_coef: [0.0, 0.0],
                sin_coef: [eps, 0.0],
            }],
        };
        let n = tau_norms(&t);
        let want = eps * PI / w as f64;
        assert!((n.sup_grad_tau - want).abs() < 1e-3 * want);
    }

    #[test]
    fn constant_field_norms_and_translation() {
        let t = DeformationField::constant(6, 6, [2.0, 0.0]);
        let n = tau_norms(&t);
        assert_eq!((n.sup_tau, n.sup_grad_tau), (2.0, 0.0));
        let x = ImageTensor::from_vec(1, 6, 6, (0..36).map(|i| i as f64).collect()).unwrap();
        let a = apply_deformation(&t, &x).unwrap();
        let b = act_on_image(&GroupElement::translation(2.0, 0.0), &x);
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_is_homogeneous() {
        let t = make_tau(4, 1.0, 2, 12, 12);
        let g1 = tau_norms(&t).sup_grad_tau;
        let g3 = tau_norms(&t.scaled(3.0)).sup_grad_tau;
        assert!((g3 - 3.0 * g1).abs() < 1e-12 * g3);
    }

    #[test]
    fn targeted_gradient() {
        let t = make_tau_with_grad(2, 0.05, 2, 20, 20);
        assert!((tau_norms(&t).sup_grad_tau - 0.05).abs() < 1e-12);
    }

    #[test]
    fn container_roundtrip() {
        let t = make_tau(3, 0.4, 1, 10, 12);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tau.bin");
        t.save(&p).unwrap();
        assert_eq!(DeformationField::load(&p).unwrap(), t);
    }
}
