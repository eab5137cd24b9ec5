use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use super::LayerSpec;
use crate::container::{self, Cursor, Section};
use crate::error::{Error, Result};

/// Expansion coefficients and biases of one layer.
///
/// `a` is `[M_in, M_out, K]` for the lifting layer and
/// `[M_in, M_out, K, 2 max_angular + 1, n_scale]` for joint layers.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffTensor {
    pub dims: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CoeffTensor {
    pub fn zeros_lifting(m_in: usize, m_out: usize, k: usize) -> Self {
        CoeffTensor {
            dims: vec![m_in, m_out, k],
            a: vec![0.0; m_in * m_out * k],
            b: vec![0.0; m_out],
        }
    }

    pub fn zeros_joint(m_in: usize, m_out: usize, k: usize, n_ang: usize, n_scale: usize) -> Self {
        CoeffTensor {
            dims: vec![m_in, m_out, k, n_ang, n_scale],
            a: vec![0.0; m_in * m_out * k * n_ang * n_scale],
            b: vec![0.0; m_out],
        }
    }

    /// Zero tensor shaped for `spec`, as layer `index` (0-based).
    pub fn zeros_for(spec: &LayerSpec, index: usize) -> Self {
        if index == 0 {
            Self::zeros_lifting(spec.in_channels, spec.out_channels, spec.k)
        } else {
            Self::zeros_joint(
                spec.in_channels,
                spec.out_channels,
                spec.k,
                spec.angular_modes(),
                spec.n_scale,
            )
        }
    }

    /// Entries i.i.d. uniform on `[-1, 1]`, zero biases.
    pub fn random_for<R: Rng>(spec: &LayerSpec, index: usize, rng: &mut R) -> Self {
        let mut c = Self::zeros_for(spec, index);
        for v in &mut c.a {
            *v = rng.gen_range(-1.0..=1.0);
        }
        c
    }

    pub fn is_lifting(&self) -> bool {
        self.dims.len() == 3
    }

    pub fn m_in(&self) -> usize {
        self.dims[0]
    }

    pub fn m_out(&self) -> usize {
        self.dims[1]
    }

    pub fn k(&self) -> usize {
        self.dims[2]
    }

    /// `(angular modes, scale modes)`, `(1, 1)` for the lifting layer.
    pub fn mode_counts(&self) -> (usize, usize) {
        if self.is_lifting() {
            (1, 1)
        } else {
            (self.dims[3], self.dims[4])
        }
    }

    /// Offset of the `(k, m, n)` block for the channel pair.
    #[inline]
    pub fn index(&self, li: usize, lo: usize, k: usize, m: usize, n: usize) -> usize {
        let (na, ns) = self.mode_counts();
        ((((li * self.m_out() + lo) * self.k() + k) * na + m) * ns) + n
    }

    /// All coefficients of the `(li, lo)` pair, laid out `[K, n_ang, n_scale]`.
    pub fn pair(&self, li: usize, lo: usize) -> &[f64] {
        let (na, ns) = self.mode_counts();
        let len = self.k() * na * ns;
        let start = (li * self.m_out() + lo) * len;
        &self.a[start..start + len]
    }

    pub fn scale(&mut self, factor: f64) {
        self.a.iter_mut().for_each(|v| *v *= factor);
        self.b.iter_mut().for_each(|v| *v *= factor);
    }

    /// Check the shape against `spec` for layer `index`.
    pub fn check(&self, spec: &LayerSpec, index: usize) -> Result<()> {
        let want = Self::zeros_for(spec, index).dims;
        if self.dims != want {
            return Err(Error::DimensionMismatch(format!(
                "layer {}: coefficients {:?}, expected {:?}",
                index + 1,
                self.dims,
                want
            )));
        }
        let n: usize = self.dims.iter().product();
        if self.a.len() != n || self.b.len() != self.m_out() {
            return Err(Error::DimensionMismatch(format!(
                "layer {}: coefficient buffers do not match dims",
                index + 1
            )));
        }
        if self.a.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("layer {}: non-finite coefficient", index + 1)));
        }
        Ok(())
    }

    fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        container::write_u32(w, self.dims.len() as u32)?;
        for &d in &self.dims {
            container::write_u32(w, d as u32)?;
        }
        container::write_f64s(w, &self.a)?;
        container::write_u32(w, self.b.len() as u32)?;
        container::write_f64s(w, &self.b)
    }

    fn read_from<R: Read>(cur: &mut Cursor<R>) -> Result<Self> {
        let rank = cur.u32("rank")? as usize;
        if rank != 3 && rank != 5 {
            return Err(cur.fail(format!("coefficient rank must be 3 or 5, got {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32("dimension")? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(|| cur.fail("coefficient tensor too large"))?;
        let a = cur.f64_vec(n, "coefficients")?;
        let nb = cur.u32("bias count")? as usize;
        if nb != dims[1] {
            return Err(cur.fail(format!("bias count {nb} does not match M_out {}", dims[1])));
        }
        let b = cur.f64_vec(nb, "biases")?;
        Ok(CoeffTensor { dims, a, b })
    }
}

/// Write every layer's coefficients into one container.
pub fn save_coeffs(path: impl AsRef<Path>, layers: &[CoeffTensor]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(container::MAGIC);
    buf.extend_from_slice(container::TAG_COEF);
    container::write_u32(&mut buf, layers.len() as u32)?;
    for l in layers {
        l.write_to(&mut buf)?;
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_coeffs(path: impl AsRef<Path>) -> Result<Vec<CoeffTensor>> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor::new(bytes.as_slice());
    container::expect_section(&mut cur, Section::Coefficients)?;
    let n = cur.u32("layer count")? as usize;
    if n > 1024 {
        return Err(cur.fail(format!("implausible layer count {n}")));
    }
    (0..n).map(|_| CoeffTensor::read_from(&mut cur)).collect()
}

/// `sqrt(sum_k mu_k sum_m b(k, m)^2)` for a `[K, n_m]` row-major array.
pub fn fb_norm(coeffs: &[f64], eigenvalues: &[f64]) -> Result<f64> {
    let k = eigenvalues.len();
    if k == 0 || !coeffs.len().is_multiple_of(k) {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {k} eigenvalues",
            coeffs.len()
        )));
    }
    let per = coeffs.len() / k;
    Ok(coeffs
        .chunks(per)
        .zip(eigenvalues)
        .map(|(row, mu)| mu * row.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt())
}

/// `||a_{li,lo}(., n)||_FB` for every pair, shaped `[M_in, M_out, n_scale]`.
fn pair_norms(c: &CoeffTensor, eigenvalues: &[f64]) -> Result<Vec<f64>> {
    if eigenvalues.len() != c.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} eigenvalues for K = {}",
            eigenvalues.len(),
            c.k()
        )));
    }
    let (na, ns) = c.mode_counts();
    let mut out = Vec::with_capacity(c.m_in() * c.m_out() * ns);
    let mut scratch = vec![0.0; c.k() * na];
    for li in 0..c.m_in() {
        for lo in 0..c.m_out() {
            let block = c.pair(li, lo);
            for n in 0..ns {
                for k in 0..c.k() {
                    for m in 0..na {
                        scratch[k * na + m] = block[(k * na + m) * ns + n];
                    }
                }
                out.push(fb_norm(&scratch, eigenvalues)?);
            }
        }
    }
    Ok(out)
}

/// Aggregate per-pair quantities `q[li, lo, n]` the way the filter bound
/// combines them: `max{sup_lo sum_li sum_n q, f * sum_n sup_li sum_lo q}`
/// with `f = M_in / M_out` on the lifting layer and `2 M_in / M_out` after.
pub fn aggregate_pairs(q: &[f64], m_in: usize, m_out: usize, ns: usize, lifting: bool) -> f64 {
    let at = |li: usize, lo: usize, n: usize| q[(li * m_out + lo) * ns + n];
    let mut first: f64 = 0.0;
    for lo in 0..m_out {
        let s: f64 = (0..m_in)
            .flat_map(|li| (0..ns).map(move |n| (li, n)))
            .map(|(li, n)| at(li, lo, n))
            .sum();
        first = first.max(s);
    }
    let factor = if lifting { 1.0 } else { 2.0 } * m_in as f64 / m_out as f64;
    let mut second = 0.0;
    for n in 0..ns {
        let mut sup: f64 = 0.0;
        for li in 0..m_in {
            sup = sup.max((0..m_out).map(|lo| at(li, lo, n)).sum());
        }
        second += sup;
    }
    first.max(factor * second)
}

/// The bound `A_l` on a layer's filters.
pub fn filter_bound_a(c: &CoeffTensor, eigenvalues: &[f64]) -> Result<f64> {
    let norms = pair_norms(c, eigenvalues)?;
    let (_, ns) = c.mode_counts();
    Ok(PI * aggregate_pairs(&norms, c.m_in(), c.m_out(), ns, c.is_lifting()))
}

/// Rescale coefficients and biases by `1 / max(A_l, 1)`; returns the
/// normalized tensor and its `A_l`.
pub fn normalize_coeffs_a2(c: &CoeffTensor, eigenvalues: &[f64]) -> Result<(CoeffTensor, f64)> {
    let a = filter_bound_a(c, eigenvalues)?;
    let mut out = c.clone();
    if a > 1.0 {
        out.scale(1.0 / a);
        return Ok((out.clone(), filter_bound_a(&out, eigenvalues)?));
    }
    Ok((out, a))
}
