use std::f64::consts::PI;

use super::{CoeffTensor, LayerSpec};
use crate::basis::{BasisSet, FilterBank};
use crate::error::{Error, Result};
use crate::group::{FeatureMap, ImageTensor};

/// Synthesized filters of one layer.
///
/// Lifting: `[M_in, M_out, N_r, N_s, L, L]`.
/// Joint: `[M_in, M_out, N_r, L_theta, N_s, L_alpha, L, L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerFilters {
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
    pub scale_grid: Vec<f64>,
    /// Stencil spacing in unit-domain coordinates.
    pub pixel_pitch: f64,
}

impl LayerFilters {
    pub fn is_lifting(&self) -> bool {
        self.dims.len() == 6
    }

    pub fn stencil(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// The `L x L` lifting filter for `(li, lo, r, s)`.
    pub fn lifting(&self, li: usize, lo: usize, r: usize, s: usize) -> &[f64] {
        let d = &self.dims;
        let ll = d[4] * d[5];
        let i = (((li * d[1] + lo) * d[2] + r) * d[3] + s) * ll;
        &self.values[i..i + ll]
    }

    /// The `L x L` joint filter for `(li, lo, r, lt, s, la)`.
    pub fn joint(&self, li: usize, lo: usize, r: usize, lt: usize, s: usize, la: usize) -> &[f64] {
        let d = &self.dims;
        let ll = d[6] * d[7];
        let i = (((((li * d[1] + lo) * d[2] + r) * d[3] + lt) * d[4] + s) * d[5] + la) * ll;
        &self.values[i..i + ll]
    }
}

/// Nodes of the inter-rotation taps, `theta'_i = 2 pi i / L_theta`; each
/// carries weight `1 / L_theta` under the normalized circle measure.
pub fn theta_taps(l_theta: usize) -> Vec<f64> {
    (0..l_theta)
        .map(|i| 2.0 * PI * i as f64 / l_theta as f64)
        .collect()
}

/// `(node, weight)` of the inter-scale taps on `[-1, 1]`: midpoints of
/// `L_alpha` equal cells with weight `2 / L_alpha`, or the single node 0 with
/// weight 1.
pub fn alpha_taps(l_alpha: usize) -> Vec<(f64, f64)> {
    if l_alpha == 1 {
        return vec![(0.0, 1.0)];
    }
    let h = 2.0 / l_alpha as f64;
    (0..l_alpha)
        .map(|i| (-1.0 + (i as f64 + 0.5) * h, h))
        .collect()
}

fn check_bank(bank: &FilterBank, coeffs: &CoeffTensor, spec: &LayerSpec) -> Result<()> {
    if bank.k != coeffs.k() {
        return Err(Error::DimensionMismatch(format!(
            "bank has K = {}, coefficients K = {}",
            bank.k,
            coeffs.k()
        )));
    }
    if bank.stencil != spec.stencil {
        return Err(Error::DimensionMismatch(format!(
            "bank stencil {} differs from layer stencil {}",
            bank.stencil, spec.stencil
        )));
    }
    Ok(())
}

/// `W = sum_k a(k) bank[k]` for the lifting layer and
/// `W(., theta', alpha') = sum_{k,m,n} a(k,m,n) bank[k] phi_m(theta') xi_n(alpha')`
/// on the tap grids for joint layers.
pub fn synthesize_filters(
    coeffs: &CoeffTensor,
    bank: &FilterBank,
    basis: &BasisSet,
    spec: &LayerSpec,
) -> Result<LayerFilters> {
    check_bank(bank, coeffs, spec)?;
    let (m_in, m_out, k) = (coeffs.m_in(), coeffs.m_out(), coeffs.k());
    let (nr, ns, l) = (bank.n_rot, bank.n_scale, bank.stencil);
    let ll = l * l;

    if coeffs.is_lifting() {
        let mut values = vec![0.0; m_in * m_out * nr * ns * ll];
        for (pair, out) in values.chunks_mut(nr * ns * ll).enumerate() {
            let a = &coeffs.a[pair * k..(pair + 1) * k];
            for r in 0..nr {
                for s in 0..ns {
                    let dst = &mut out[(r * ns + s) * ll..(r * ns + s + 1) * ll];
                    for (kk, &ak) in a.iter().enumerate() {
                        if ak == 0.0 {
                            continue;
                        }
                        for (d, &b) in dst.iter_mut().zip(bank.slice(kk, r, s)) {
                            *d += ak * b;
                        }
                    }
                }
            }
        }
        return Ok(LayerFilters {
            dims: vec![m_in, m_out, nr, ns, l, l],
            values,
            scale_grid: bank.scale_grid.clone(),
            pixel_pitch: bank.pixel_pitch,
        });
    }

    let (na, nsm) = coeffs.mode_counts();
    if basis.angular.len() != na || basis.scale.len() != nsm {
        return Err(Error::DimensionMismatch(format!(
            "coefficients carry {na} angular and {nsm} scale modes, basis has {} and {}",
            basis.angular.len(),
            basis.scale.len()
        )));
    }
    let (lt, la) = (spec.l_theta, spec.l_alpha);
    let phi: Vec<Vec<f64>> = theta_taps(lt)
        .iter()
        .map(|&t| basis.angular.iter().map(|e| e.eval(t)).collect())
        .collect();
    let xi: Vec<Vec<f64>> = alpha_taps(la)
        .iter()
        .map(|&(a, _)| basis.scale.iter().map(|e| e.eval(a)).collect())
        .collect();

    let block = nr * lt * ns * la * ll;
    let mut values = vec![0.0; m_in * m_out * block];
    let mut c = vec![0.0; k * lt * la];
    for (pair, out) in values.chunks_mut(block).enumerate() {
        let a = &coeffs.a[pair * k * na * nsm..(pair + 1) * k * na * nsm];
        // Contract the angular and scale modes first.
        for kk in 0..k {
            for it in 0..lt {
                for ia in 0..la {
                    let mut acc = 0.0;
                    for m in 0..na {
                        for n in 0..nsm {
                            acc += a[(kk * na + m) * nsm + n] * phi[it][m] * xi[ia][n];
                        }
                    }
                    c[(kk * lt + it) * la + ia] = acc;
                }
            }
        }
        for r in 0..nr {
            for it in 0..lt {
                for s in 0..ns {
                    for ia in 0..la {
                        let o = (((r * lt + it) * ns + s) * la + ia) * ll;
                        let dst = &mut out[o..o + ll];
                        for kk in 0..k {
                            let ck = c[(kk * lt + it) * la + ia];
                            if ck == 0.0 {
                                continue;
                            }
                            for (d, &b) in dst.iter_mut().zip(bank.slice(kk, r, s)) {
                                *d += ck * b;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(LayerFilters {
        dims: vec![m_in, m_out, nr, lt, ns, la, l, l],
        values,
        scale_grid: bank.scale_grid.clone(),
        pixel_pitch: bank.pixel_pitch,
    })
}

/// `out(i, j) += weight * sum_{a,b} kernel(a, b) input(i + a - c, j + b - c)`
/// with zero padding, `c = L / 2`. Zero taps are skipped.
pub fn correlate_add(
    out: &mut [f64],
    input: &[f64],
    height: usize,
    width: usize,
    kernel: &[f64],
    stencil: usize,
    weight: f64,
) {
    let c = (stencil / 2) as isize;
    let (h, w) = (height as isize, width as isize);
    for a in 0..stencil {
        let dy = a as isize - c;
        let (i0, i1) = ((-dy).max(0), (h - dy).min(h));
        if i0 >= i1 {
            continue;
        }
        for b in 0..stencil {
            let kv = kernel[a * stencil + b];
            if kv == 0.0 {
                continue;
            }
            let kv = kv * weight;
            let dx = b as isize - c;
            let (j0, j1) = ((-dx).max(0), (w - dx).min(w));
            if j0 >= j1 {
                continue;
            }
            for i in i0..i1 {
                let s0 = ((i + dy) * w + j0 + dx) as usize;
                let d0 = (i * w + j0) as usize;
                let n = (j1 - j0) as usize;
                let src = &input[s0..s0 + n];
                let dst = &mut out[d0..d0 + n];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += kv * s;
                }
            }
        }
    }
}

fn finish(plane: &mut [f64], bias: f64, spec: &LayerSpec) {
    for v in plane {
        *v = spec.nonlinearity.apply(*v + bias);
    }
}

/// First layer: `N_r N_s` planar cross-correlations per channel pair,
/// weighted by the squared pixel pitch, then bias and nonlinearity.
pub fn lifting_conv(
    x: &ImageTensor,
    filters: &LayerFilters,
    bias: &[f64],
    spec: &LayerSpec,
) -> Result<FeatureMap> {
    if !filters.is_lifting() {
        return Err(Error::DimensionMismatch("lifting layer needs rank-6 filters".into()));
    }
    let d = &filters.dims;
    let (m_in, m_out, nr, ns, l) = (d[0], d[1], d[2], d[3], d[4]);
    if x.channels != m_in || bias.len() != m_out {
        return Err(Error::DimensionMismatch(format!(
            "lifting layer expects {m_in} input channels and {m_out} biases, got {} and {}",
            x.channels,
            bias.len()
        )));
    }
    let (h, w) = (x.height, x.width);
    let weight = filters.pixel_pitch * filters.pixel_pitch;
    let mut out = FeatureMap::zeros(m_out, nr, filters.scale_grid.clone(), h, w);
    for lo in 0..m_out {
        for r in 0..nr {
            for s in 0..ns {
                let i = out.plane_index(lo, r, s);
                let plane = &mut out.values[i..i + h * w];
                for li in 0..m_in {
                    correlate_add(plane, x.plane(li), h, w, filters.lifting(li, lo, r, s), l, weight);
                }
                finish(plane, bias[lo], spec);
            }
        }
    }
    Ok(out)
}

/// Joint layer over space, rotation and scale. For every tap `(l_theta,
/// l_alpha)` the input is read at rotation `r + l_theta N_r / L_theta`
/// (cyclic) and scale `s + l_alpha` (zero beyond the last sample).
pub fn joint_conv(
    x: &FeatureMap,
    filters: &LayerFilters,
    bias: &[f64],
    spec: &LayerSpec,
) -> Result<FeatureMap> {
    if filters.is_lifting() {
        return Err(Error::DimensionMismatch("joint layer needs rank-8 filters".into()));
    }
    let d = &filters.dims;
    let (m_in, m_out, nr, lt, ns, la, l) = (d[0], d[1], d[2], d[3], d[4], d[5], d[6]);
    if nr % lt != 0 {
        return Err(Error::Config(format!("L_theta={lt} does not divide N_r={nr}")));
    }
    if x.channels != m_in || x.n_rot != nr || x.n_scale != ns || bias.len() != m_out {
        return Err(Error::DimensionMismatch(format!(
            "joint layer expects [{m_in}, {nr}, {ns}, H, W] input and {m_out} biases, got {:?} and {}",
            x.shape(),
            bias.len()
        )));
    }
    let (h, w) = (x.height, x.width);
    let pitch2 = filters.pixel_pitch * filters.pixel_pitch;
    let taps = alpha_taps(la);
    let stride = nr / lt;
    let mut out = FeatureMap::zeros(m_out, nr, x.scale_grid.clone(), h, w);
    for lo in 0..m_out {
        for r in 0..nr {
            for s in 0..ns {
                let i = out.plane_index(lo, r, s);
                let plane = &mut out.values[i..i + h * w];
                for li in 0..m_in {
                    for it in 0..lt {
                        let rr = (r + it * stride) % nr;
                        for (ia, &(_, wa)) in taps.iter().enumerate() {
                            let ss = s + ia;
                            if ss >= ns {
                                break;
                            }
                            let weight = pitch2 * wa / lt as f64;
                            let kernel = filters.joint(li, lo, r, it, s, ia);
                            correlate_add(plane, x.plane(li, rr, ss), h, w, kernel, l, weight);
                        }
                    }
                }
                finish(plane, bias[lo], spec);
            }
        }
    }
    Ok(out)
}

/// Max over `(u, theta, alpha)` per channel.
pub fn group_pool(x: &FeatureMap) -> Vec<f64> {
    let per = x.n_rot * x.n_scale * x.height * x.width;
    x.values
        .chunks(per)
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_taps_cover_the_interval() {
        assert_eq!(alpha_taps(1), vec![(0.0, 1.0)]);
        let t = alpha_taps(3);
        assert!((t[0].0 + 2.0 / 3.0).abs() < 1e-15 && t[1].0.abs() < 1e-15);
        assert!((t.iter().map(|p| p.1).sum::<f64>() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn correlate_matches_direct_sum() {
        let (h, w, l) = (5, 6, 3);
        let input: Vec<f64> = (0..h * w).map(|i| (i as f64 * 0.7).cos()).collect();
        let kernel: Vec<f64> = (0..l * l).map(|i| i as f64 - 4.0).collect();
        let mut out = vec![0.0; h * w];
        correlate_add(&mut out, &input, h, w, &kernel, l, 0.5);
        for i in 0..h as isize {
            for j in 0..w as isize {
                let mut want = 0.0;
                for a in 0..3isize {
                    for b in 0..3isize {
                        let (y, x) = (i + a - 1, j + b - 1);
                        if y >= 0 && x >= 0 && y < h as isize && x < w as isize {
                            want += kernel[(a * 3 + b) as usize] * input[(y * w as isize + x) as usize];
                        }
                    }
                }
                assert!((out[(i * w as isize + j) as usize] - 0.5 * want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pool_picks_spike() {
        let mut f = FeatureMap::zeros(3, 2, vec![0.0], 4, 4);
        let i = f.plane_index(2, 1, 0) + 5;
        f.values[i] = 9.0;
        assert_eq!(group_pool(&f), vec![0.0, 0.0, 9.0]);
    }
}
