//! Rotated and rescaled spatial modes sampled on a fixed stencil.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use super::{BasisSet, SpatialKind};
use crate::container::{self, Cursor, Section};
use crate::error::{Error, Result};

/// Sampling lattice for a filter bank.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BankGrid {
    pub n_rot: usize,
    pub n_scale: usize,
    /// Half-width `T` of the scale interval `[-T, T]`.
    pub t: f64,
    /// Odd stencil width `L`.
    pub stencil: usize,
    /// Filters live on `2^j` times the unit domain.
    pub layer_scale: i32,
}

/// Fixed array `[K, N_r, N_s, L, L]` of sampled filter atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    pub spatial_kind: SpatialKind,
    pub k: usize,
    pub n_rot: usize,
    pub n_scale: usize,
    pub stencil: usize,
    pub scale_grid: Vec<f64>,
    pub rotation_step: f64,
    /// Stencil spacing in the basis' unit-domain coordinates.
    pub pixel_pitch: f64,
    pub layer_scale: i32,
    pub values: Vec<f64>,
}

/// `N_s` points uniform on `[-T, T]`, endpoints included. A single point
/// sits at zero.
pub fn uniform_scale_grid(n_scale: usize, t: f64) -> Vec<f64> {
    if n_scale <= 1 {
        return vec![0.0; n_scale];
    }
    let d = (n_scale - 1) as f64;
    (0..n_scale)
        .map(|s| t * (2.0 * s as f64 - d) / d)
        .collect()
}

/// Stencil spacing such that the support at the largest sampled scale
/// `2^(j + T)` exactly fills the stencil.
pub fn pixel_pitch(kind: SpatialKind, grid: &BankGrid) -> f64 {
    let t = if grid.n_scale > 1 { grid.t } else { 0.0 };
    2.0 * kind.support_radius() * 2f64.powf(grid.layer_scale as f64 + t)
        / (grid.stencil - 1) as f64
}

impl FilterBank {
    #[inline]
    pub fn index(&self, k: usize, r: usize, s: usize) -> usize {
        ((k * self.n_rot + r) * self.n_scale + s) * self.stencil * self.stencil
    }

    /// The `L x L` slice for atom `k` at rotation `r` and scale `s`.
    pub fn slice(&self, k: usize, r: usize, s: usize) -> &[f64] {
        let i = self.index(k, r, s);
        &self.values[i..i + self.stencil * self.stencil]
    }

    pub fn shape(&self) -> [usize; 5] {
        [self.k, self.n_rot, self.n_scale, self.stencil, self.stencil]
    }

    /// Stencil offsets in unit-domain coordinates for row `i`, column `j`.
    pub fn grid_point(&self, i: usize, j: usize) -> (f64, f64) {
        let c = (self.stencil / 2) as f64;
        (
            (j as f64 - c) * self.pixel_pitch,
            (i as f64 - c) * self.pixel_pitch,
        )
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(container::MAGIC)?;
        for v in [
            self.k as u32,
            self.n_rot as u32,
            self.n_scale as u32,
            self.stencil as u32,
            self.spatial_kind.code(),
        ] {
            container::write_u32(w, v)?;
        }
        container::write_f64s(w, &self.scale_grid)?;
        container::write_f64s(w, &self.values)?;
        // Trailer: grid metadata not recoverable from the header.
        container::write_f64s(w, &[self.pixel_pitch])?;
        container::write_i32(w, self.layer_scale)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut cur = Cursor::new(r);
        let k = container::expect_section(&mut cur, Section::Bank)?.unwrap() as usize;
        let n_rot = cur.u32("N_r")? as usize;
        let n_scale = cur.u32("N_s")? as usize;
        let stencil = cur.u32("L")? as usize;
        let code = cur.u32("spatial kind")?;
        let spatial_kind = SpatialKind::from_code(code)
            .ok_or_else(|| cur.fail(format!("unknown spatial kind code {code}")))?;
        if n_rot == 0 || stencil.is_multiple_of(2) {
            return Err(cur.fail("invalid bank header"));
        }
        let scale_grid = cur.f64_vec(n_scale, "scale grid")?;
        let n = k
            .checked_mul(n_rot)
            .and_then(|v| v.checked_mul(n_scale))
            .and_then(|v| v.checked_mul(stencil * stencil))
            .ok_or_else(|| cur.fail("bank dimensions overflow"))?;
        let values = cur.f64_vec(n, "bank values")?;
        let pixel_pitch = cur.f64("pixel pitch")?;
        let layer_scale = cur.i32("layer scale")?;
        Ok(FilterBank {
            spatial_kind,
            k,
            n_rot,
            n_scale,
            stencil,
            scale_grid,
            rotation_step: 2.0 * PI / n_rot as f64,
            pixel_pitch,
            layer_scale,
            values,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(f)
    }
}

/// Sample `2^{-2(a+j)} psi_k(2^{-(a+j)} R_{-theta} u)` for every mode, every
/// rotation `theta_r = r 2pi/N_r` and every scale `a_s` on the stencil.
/// Evaluation is analytic at each grid point.
pub fn sample_filter_bank(basis: &BasisSet, grid: &BankGrid) -> Result<FilterBank> {
    if grid.stencil.is_multiple_of(2) {
        return Err(Error::EvenStencil(grid.stencil));
    }
    if grid.stencil < 3 {
        return Err(Error::Config("stencil width must be at least 3".into()));
    }
    if grid.n_rot == 0 || grid.n_scale == 0 {
        return Err(Error::Config("N_r and N_s must be positive".into()));
    }
    if !(grid.t >= 0.0) {
        return Err(Error::Config("scale half-width T must be nonnegative".into()));
    }
    let kind = basis.spatial_kind;
    let pitch = pixel_pitch(kind, grid);
    let scale_grid = uniform_scale_grid(grid.n_scale, grid.t);
    let rotation_step = 2.0 * PI / grid.n_rot as f64;
    let l = grid.stencil;
    let c = (l / 2) as f64;
    let k = basis.spatial.len();

    let mut values = Vec::with_capacity(k * grid.n_rot * grid.n_scale * l * l);
    for elem in &basis.spatial {
        for r in 0..grid.n_rot {
            let (sin_t, cos_t) = (r as f64 * rotation_step).sin_cos();
            for &alpha in &scale_grid {
                let shrink = 2f64.powf(-(alpha + grid.layer_scale as f64));
                let amp = shrink * shrink;
                for i in 0..l {
                    let y = (i as f64 - c) * pitch;
                    for j in 0..l {
                        let x = (j as f64 - c) * pitch;
                        let rx = cos_t * x + sin_t * y;
                        let ry = -sin_t * x + cos_t * y;
                        values.push(amp * elem.eval(shrink * rx, shrink * ry));
                    }
                }
            }
        }
    }

    Ok(FilterBank {
        spatial_kind: kind,
        k,
        n_rot: grid.n_rot,
        n_scale: grid.n_scale,
        stencil: l,
        scale_grid,
        rotation_step,
        pixel_pitch: pitch,
        layer_scale: grid.layer_scale,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, SpatialMode};
    use rand::{Rng, SeedableRng};

    fn grid() -> BankGrid {
        BankGrid {
            n_rot: 8,
            n_scale: 9,
            t: 1.0,
            stencil: 11,
            layer_scale: 0,
        }
    }

    #[test]
    fn scale_grid_is_uniform_with_exact_center() {
        let g = uniform_scale_grid(9, 1.0);
        assert_eq!(g[4], 0.0);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[8], 1.0);
        for w in g.windows(2) {
            assert!((w[1] - w[0] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn even_stencil_rejected() {
        let b = build_basis(SpatialKind::FbDisk, 2, 0, 1).unwrap();
        let g = BankGrid { stencil: 10, ..grid() };
        assert!(matches!(sample_filter_bank(&b, &g), Err(Error::EvenStencil(10))));
    }

    #[test]
    fn identity_slice_is_direct_sampling() {
        let b = build_basis(SpatialKind::FbDisk, 5, 0, 1).unwrap();
        let bank = sample_filter_bank(&b, &grid()).unwrap();
        let s0 = 4; // alpha = 0
        for (k, e) in b.spatial.iter().enumerate() {
            let sl = bank.slice(k, 0, s0);
            for i in 0..bank.stencil {
                for j in 0..bank.stencil {
                    let (x, y) = bank.grid_point(i, j);
                    assert_eq!(sl[i * bank.stencil + j], e.eval(x, y));
                }
            }
        }
    }

    #[test]
    fn outside_support_is_exactly_zero() {
        let b = build_basis(SpatialKind::FbDisk, 4, 0, 1).unwrap();
        let bank = sample_filter_bank(&b, &grid()).unwrap();
        for k in 0..bank.k {
            for r in 0..bank.n_rot {
                for s in 0..bank.n_scale {
                    let shrink = 2f64.powf(-bank.scale_grid[s]);
                    let sl = bank.slice(k, r, s);
                    for i in 0..bank.stencil {
                        for j in 0..bank.stencil {
                            let (x, y) = bank.grid_point(i, j);
                            if shrink * (x * x + y * y).sqrt() > 1.0 + 1e-12 {
                                assert_eq!(sl[i * bank.stencil + j], 0.0);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn full_turn_reproduces_first_slice() {
        let b = build_basis(SpatialKind::FbDisk, 6, 0, 1).unwrap();
        let bank = sample_filter_bank(&b, &grid()).unwrap();
        // Sampling at r = N_r is the same as r = 0 up to the rounding of 2pi.
        let two_pi = bank.n_rot as f64 * bank.rotation_step;
        let (s, c) = two_pi.sin_cos();
        for (k, e) in b.spatial.iter().enumerate() {
            let sl = bank.slice(k, 0, 4);
            for i in 0..bank.stencil {
                for j in 0..bank.stencil {
                    let (x, y) = bank.grid_point(i, j);
                    let v = e.eval(c * x + s * y, -s * x + c * y);
                    assert!((v - sl[i * bank.stencil + j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rotated_slices_match_independent_evaluation() {
        let b = build_basis(SpatialKind::FbDisk, 8, 0, 1).unwrap();
        let g = grid();
        let bank = sample_filter_bank(&b, &g).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (k, e) in b.spatial.iter().enumerate() {
            let SpatialMode::Bessel { order, zero, parity, .. } = e.mode else {
                unreachable!()
            };
            for _ in 0..16 {
                let r = rng.gen_range(0..bank.n_rot);
                let s = rng.gen_range(0..bank.n_scale);
                let i = rng.gen_range(0..bank.stencil);
                let j = rng.gen_range(0..bank.stencil);
                let (x, y) = bank.grid_point(i, j);
                // Rotating the argument by -theta shifts the polar angle.
                let alpha = bank.scale_grid[s];
                let shrink = 2f64.powf(-alpha);
                let rad = shrink * (x * x + y * y).sqrt();
                let phi = y.atan2(x) - r as f64 * 2.0 * PI / g.n_rot as f64;
                let want = if rad > 1.0 {
                    0.0
                } else {
                    let ang = match (order, parity) {
                        (0, _) => 1.0,
                        (_, crate::basis::Parity::Cos) => (order as f64 * phi).cos(),
                        (_, crate::basis::Parity::Sin) => (order as f64 * phi).sin(),
                    };
                    shrink * shrink
                        * e.normalization
                        * crate::basis::bessel::jn(order, zero * rad)
                        * ang
                };
                let got = bank.slice(k, r, s)[i * bank.stencil + j];
                assert!((got - want).abs() < 1e-10, "k={k} r={r} s={s}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn quarter_turn_is_a_pixel_permutation() {
        let b = build_basis(SpatialKind::FbDisk, 6, 0, 1).unwrap();
        let bank = sample_filter_bank(&b, &grid()).unwrap();
        let l = bank.stencil;
        for k in 0..bank.k {
            for s in 0..bank.n_scale {
                let a = bank.slice(k, 0, s);
                let q = bank.slice(k, 2, s);
                for i in 0..l {
                    for j in 0..l {
                        // value at u under rotation by pi/2 equals value at R_{-pi/2} u.
                        let (x, y) = (j as isize - 5, i as isize - 5);
                        let (sx, sy) = (y, -x);
                        let src = a[(sy + 5) as usize * l + (sx + 5) as usize];
                        assert!((q[i * l + j] - src).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn save_load_roundtrip_is_bit_exact() {
        let b = build_basis(SpatialKind::SlSquare, 3, 0, 1).unwrap();
        let bank = sample_filter_bank(&b, &BankGrid { layer_scale: 1, ..grid() }).unwrap();
        let mut buf = Vec::new();
        bank.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"RSTBANK1");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[24..28].try_into().unwrap()), 1);
        let back = FilterBank::read_from(&buf[..]).unwrap();
        assert_eq!(back, bank);
        for (a, b) in back.values.iter().zip(&bank.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn truncated_bank_is_rejected() {
        let b = build_basis(SpatialKind::FbDisk, 2, 0, 1).unwrap();
        let bank = sample_filter_bank(&b, &grid()).unwrap();
        let mut buf = Vec::new();
        bank.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 20);
        assert!(matches!(FilterBank::read_from(&buf[..]), Err(Error::Parse { .. })));
    }
}
