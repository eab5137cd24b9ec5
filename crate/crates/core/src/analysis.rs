//! Norms, equivariance error, the deformation-stability certificate and the
//! numerical checks of non-expansiveness, norm scaling and filter integrals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::deform::{apply_deformation, tau_norms, DeformationField};
use crate::error::{Error, Result};
use crate::group::{act_on_feature, act_on_image, FeatureMap, GroupElement, ImageTensor};
use crate::net::{CoeffTensor, LayerSpec, Model};

pub use crate::net::fb_norm;

/// `sqrt((1/M) sum_c sum_u |x|^2)` in pixel units.
pub fn image_norm(x: &ImageTensor) -> f64 {
    (x.values.iter().map(|v| v * v).sum::<f64>() / x.channels as f64).sqrt()
}

/// Max over scale samples of `sqrt((1/M) sum_c (1/N_r) sum_r sum_u |x|^2)`.
pub fn feature_norm(x: &FeatureMap) -> f64 {
    scale_norms(x).into_iter().fold(0.0, f64::max)
}

/// The per-scale-sample quantity whose maximum is [`feature_norm`].
pub fn scale_norms(x: &FeatureMap) -> Vec<f64> {
    let hw = x.height * x.width;
    let mut acc = vec![0.0; x.n_scale];
    for c in 0..x.channels {
        for r in 0..x.n_rot {
            for (s, a) in acc.iter_mut().enumerate() {
                let i = x.plane_index(c, r, s);
                *a += x.values[i..i + hw].iter().map(|v| v * v).sum::<f64>();
            }
        }
    }
    let denom = (x.channels * x.n_rot) as f64;
    acc.into_iter().map(|a| (a / denom).sqrt()).collect()
}

fn difference(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "feature shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut d = a.clone();
    d.values.iter_mut().zip(&b.values).for_each(|(x, y)| *x -= y);
    Ok(d)
}

fn image_difference(a: &ImageTensor, b: &ImageTensor) -> ImageTensor {
    let mut d = a.clone();
    d.values.iter_mut().zip(&b.values).for_each(|(x, y)| *x -= y);
    d
}

/// Per-layer relative errors with the configuration they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceCurve {
    pub errors: Vec<f64>,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L_alpha")]
    pub l_alpha: usize,
    #[serde(rename = "L_theta")]
    pub l_theta: usize,
    pub g: GroupElement,
}

/// Default interior margin excluded from the equivariance error, in pixels.
pub const DEFAULT_MARGIN: usize = 4;

fn slice_error(lhs: &FeatureMap, rhs: &FeatureMap, s0: usize, margin: usize) -> Result<f64> {
    let (h, w) = (lhs.height, lhs.width);
    if 2 * margin >= h || 2 * margin >= w {
        return Err(Error::Config(format!("margin {margin} leaves no interior in {h}x{w}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..lhs.channels {
        let a = lhs.plane(c, 0, s0);
        let b = rhs.plane(c, 0, s0);
        for row in margin..h - margin {
            for col in margin..w - margin {
                let i = row * w + col;
                num += (a[i] - b[i]).powi(2);
                den += b[i] * b[i];
            }
        }
    }
    if den == 0.0 {
        return if num == 0.0 && lhs.values == rhs.values {
            Ok(0.0)
        } else {
            Err(Error::UndefinedError)
        };
    }
    Ok((num / den).sqrt())
}

/// Relative L2 error between `x^(l)[D_g x]` and `D_g x^(l)[x]` on the
/// `(theta = 0, alpha = 0)` slice, every layer.
pub fn equivariance_errors(
    model: &Model,
    x: &ImageTensor,
    g: &GroupElement,
    margin: usize,
) -> Result<Vec<f64>> {
    let plain = model.forward_layers(x)?;
    let moved = model.forward_layers(&act_on_image(g, x))?;
    plain
        .iter()
        .zip(&moved)
        .map(|(p, m)| {
            let s0 = p.zero_scale_index().ok_or_else(|| {
                Error::Config("scale grid has no alpha = 0 sample; use an odd N_s".into())
            })?;
            let acted = act_on_feature(g, p)?;
            if g.is_identity() && m.values == acted.values {
                return Ok(0.0);
            }
            slice_error(m, &acted, s0, margin)
        })
        .collect()
}

/// Error at a single layer (1-based).
pub fn equivariance_error(
    model: &Model,
    x: &ImageTensor,
    g: &GroupElement,
    layer: usize,
    margin: usize,
) -> Result<f64> {
    if layer == 0 || layer > model.depth() {
        return Err(Error::Config(format!(
            "layer {layer} outside 1..={}",
            model.depth()
        )));
    }
    Ok(equivariance_errors(model, x, g, margin)?[layer - 1])
}

pub fn equivariance_curve(
    model: &Model,
    x: &ImageTensor,
    g: &GroupElement,
    margin: usize,
) -> Result<EquivarianceCurve> {
    let last = model.network.config.layers.last().unwrap();
    Ok(EquivarianceCurve {
        errors: equivariance_errors(model, x, g, margin)?,
        k: last.k,
        l_alpha: last.l_alpha,
        l_theta: last.l_theta,
        g: *g,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateStatus {
    Holds,
    /// The bound is zero, so only discretization error is measured.
    ContinuumVacuous,
    Violation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub beta: f64,
    #[serde(rename = "L")]
    pub depth: usize,
    #[serde(rename = "j_L")]
    pub j_last: i32,
    /// In pixels.
    pub sup_tau: f64,
    pub sup_grad_tau: f64,
    pub per_layer_errors: Vec<f64>,
    pub allowance: f64,
    pub status: CertificateStatus,
    /// Converts pixel lengths to the filters' unit-domain coordinates.
    pub pixel_pitch: f64,
    pub input_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allowance {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for Allowance {
    fn default() -> Self {
        Allowance {
            relative: 0.1,
            absolute: 1e-3,
        }
    }
}

/// Threshold on `sup |grad tau|`.
pub const A3_LIMIT: f64 = 0.2;

/// Check `A_l <= 1` for every layer.
pub fn check_a2(model: &Model) -> Result<Vec<f64>> {
    let bounds = model.network.filter_bounds(&model.coeffs)?;
    for (i, &a) in bounds.iter().enumerate() {
        if a > 1.0 + 1e-9 {
            return Err(Error::Precondition {
                assumption: "A2",
                detail: format!("A_{} = {a} exceeds 1", i + 1),
            });
        }
    }
    Ok(bounds)
}

/// Measure `||x^(L)[D_g D_tau x] - D_g x^(L)[x]||` and compare it with
/// `2^(beta+1) (4 L |grad tau| + 2^(-j_L) |tau|) ||x||`.
///
/// The measured norm ranges over the scale samples where `D_g x^(l)[x]` is
/// determined by the truncated scale grid, i.e. those whose source sample
/// `alpha - beta` exists.
pub fn stability_certificate(
    model: &Model,
    x: &ImageTensor,
    g: &GroupElement,
    tau: &DeformationField,
    allowance: Allowance,
) -> Result<StabilityReport> {
    check_a2(model)?;
    let norms = tau_norms(tau);
    if norms.sup_grad_tau >= A3_LIMIT {
        return Err(Error::Precondition {
            assumption: "A3",
            detail: format!(
                "sup |grad tau| = {} is not below the threshold 1/5",
                norms.sup_grad_tau
            ),
        });
    }
    let cfg = &model.network.config;
    let pitch = model.network.pixel_pitch();
    let depth = model.depth();
    let j_last = cfg.layers[depth - 1].layer_scale;

    let deformed = act_on_image(g, &apply_deformation(tau, x)?);
    let moved = model.forward_layers(&deformed)?;
    let plain = model.forward_layers(x)?;
    let mut per_layer = Vec::with_capacity(depth);
    for (m, p) in moved.iter().zip(&plain) {
        let d = difference(m, &act_on_feature(g, p)?)?;
        per_layer.push(defined_scale_norm(&d, g.beta));
    }
    let lhs = *per_layer.last().unwrap();
    let input_norm = image_norm(x);
    let rhs = 2f64.powf(g.beta + 1.0)
        * (4.0 * depth as f64 * norms.sup_grad_tau
            + 2f64.powi(-j_last) * norms.sup_tau * pitch)
        * input_norm;
    let allow = allowance.relative * rhs + allowance.absolute;
    let status = if rhs == 0.0 {
        CertificateStatus::ContinuumVacuous
    } else if lhs > rhs + allow {
        CertificateStatus::Violation
    } else {
        CertificateStatus::Holds
    };
    Ok(StabilityReport {
        lhs,
        rhs,
        margin: rhs - lhs,
        beta: g.beta,
        depth,
        j_last,
        sup_tau: norms.sup_tau,
        sup_grad_tau: norms.sup_grad_tau,
        per_layer_errors: per_layer,
        allowance: allow,
        status,
        pixel_pitch: pitch,
        input_norm,
    })
}

/// Max of [`scale_norms`] over samples `s` whose preimage `s - beta/step`
/// lies on the grid.
fn defined_scale_norm(d: &FeatureMap, beta: f64) -> f64 {
    let shift = d.scale_step().map_or(0, |st| (beta / st).round() as isize);
    scale_norms(d)
        .into_iter()
        .enumerate()
        .filter(|&(s, _)| {
            let src = s as isize - shift;
            src >= 0 && src < d.n_scale as isize
        })
        .map(|(_, v)| v)
        .fold(0.0, f64::max)
}

/// Outcome of the non-expansiveness checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonexpansivenessReport {
    /// Worst `||x^(l)[x1] - x^(l)[x2]|| / ||x1 - x2||` per layer.
    pub worst_ratio: Vec<f64>,
    /// Worst `||x^(l)[x1] - x^(l)[x2]|| / ||x^(l-1)[x1] - x^(l-1)[x2]||` per layer.
    pub worst_step_ratio: Vec<f64>,
    /// Per layer, the largest per-channel spread `max - min` of the
    /// zero-input response over `(u, theta, alpha)`.
    pub zero_input_spread: Vec<f64>,
    /// Worst `||x_c^(l)|| / ||x_c^(l-1)||` per layer.
    pub worst_centered_ratio: Vec<f64>,
    pub skipped_pairs: usize,
}

impl NonexpansivenessReport {
    pub fn worst(&self) -> f64 {
        self.worst_ratio
            .iter()
            .chain(&self.worst_step_ratio)
            .chain(&self.worst_centered_ratio)
            .copied()
            .fold(0.0, f64::max)
    }
}

fn channel_spread(x: &FeatureMap) -> f64 {
    let per = x.n_rot * x.n_scale * x.height * x.width;
    x.values
        .chunks(per)
        .map(|c| {
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Run every pair through the model and record contraction ratios, the
/// zero-input constancy and the centered-feature contraction.
pub fn nonexpansiveness_report(
    model: &Model,
    pairs: &[(ImageTensor, ImageTensor)],
) -> Result<NonexpansivenessReport> {
    let depth = model.depth();
    let (h, w, m0) = match pairs.first() {
        Some((a, _)) => (a.height, a.width, a.channels),
        None => return Err(Error::Config("no input pairs".into())),
    };
    let zero = model.forward_layers(&ImageTensor::zeros(m0, h, w))?;
    let mut rep = NonexpansivenessReport {
        worst_ratio: vec![0.0; depth],
        worst_step_ratio: vec![0.0; depth],
        zero_input_spread: zero.iter().map(channel_spread).collect(),
        worst_centered_ratio: vec![0.0; depth],
        skipped_pairs: 0,
    };
    for (x1, x2) in pairs {
        let d0 = image_norm(&image_difference(x1, x2));
        let o1 = model.forward_layers(x1)?;
        let o2 = model.forward_layers(x2)?;
        if d0 > 0.0 {
            let mut prev = d0;
            for l in 0..depth {
                let dl = feature_norm(&difference(&o1[l], &o2[l])?);
                rep.worst_ratio[l] = rep.worst_ratio[l].max(dl / d0);
                if prev > 0.0 {
                    rep.worst_step_ratio[l] = rep.worst_step_ratio[l].max(dl / prev);
                }
                prev = dl;
            }
        } else {
            rep.skipped_pairs += 1;
        }
        for (x, o) in [(x1, &o1), (x2, &o2)] {
            let mut prev = image_norm(x);
            for l in 0..depth {
                let c = feature_norm(&difference(&o[l], &zero[l])?);
                if prev > 0.0 {
                    rep.worst_centered_ratio[l] = rep.worst_centered_ratio[l].max(c / prev);
                }
                prev = c;
            }
        }
    }
    Ok(rep)
}

/// Quadrature values of the filter integrals and the bound they obey.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBoundReport {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// `2^(j_l) D_l`, comparable with `A_l`.
    pub scaled_d: f64,
    pub a: f64,
}

/// Quadrature grid size per axis.
pub const BOUND_GRID: usize = 301;
/// Rotation samples for the circle integral of joint filters.
pub const BOUND_THETA: usize = 24;

/// Integrate `|W|`, `|u| |grad W|` and `|grad W|` for every channel pair
/// (and scale mode) with the trapezoid rule on a `301 x 301` grid over the
/// unit domain and aggregate them like `A_l`.
pub fn filter_bound_report(
    coeffs: &CoeffTensor,
    basis: &BasisSet,
    spec: &LayerSpec,
) -> Result<FilterBoundReport> {
    let a = crate::net::filter_bound_a(coeffs, &basis.eigenvalues())?;
    let k = coeffs.k();
    if basis.k() != k {
        return Err(Error::DimensionMismatch(format!(
            "basis has K = {}, coefficients K = {k}",
            basis.k()
        )));
    }
    let (na, ns) = coeffs.mode_counts();
    if !coeffs.is_lifting() && (basis.angular.len() != na || basis.scale.len() != ns) {
        return Err(Error::DimensionMismatch("basis mode counts differ from coefficients".into()));
    }

    let n = BOUND_GRID;
    // Both the disk and the square sit inside [-1, 1]^2.
    let half = 1.0;
    let h = 2.0 * half / (n - 1) as f64;
    // Sample values and gradients once: [K][point].
    let mut pts = Vec::new();
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = (-half + ix as f64 * h, -half + iy as f64 * h);
            let wx = if ix == 0 || ix == n - 1 { 0.5 } else { 1.0 };
            let wy = if iy == 0 || iy == n - 1 { 0.5 } else { 1.0 };
            pts.push((x, y, wx * wy * h * h));
        }
    }
    let psi: Vec<Vec<f64>> = basis
        .spatial
        .iter()
        .map(|e| pts.iter().map(|&(x, y, _)| e.eval(x, y)).collect())
        .collect();
    let grad: Vec<Vec<[f64; 2]>> = basis
        .spatial
        .iter()
        .map(|e| pts.iter().map(|&(x, y, _)| e.grad(x, y)).collect())
        .collect();

    let integrate = |ck: &[f64]| -> [f64; 3] {
        let mut out = [0.0; 3];
        for (p, &(x, y, wq)) in pts.iter().enumerate() {
            let mut v = 0.0;
            let mut gx = 0.0;
            let mut gy = 0.0;
            for kk in 0..k {
                let c = ck[kk];
                if c == 0.0 {
                    continue;
                }
                v += c * psi[kk][p];
                gx += c * grad[kk][p][0];
                gy += c * grad[kk][p][1];
            }
            let g = gx.hypot(gy);
            out[0] += wq * v.abs();
            out[1] += wq * x.hypot(y) * g;
            out[2] += wq * g;
        }
        out
    };

    let (m_in, m_out) = (coeffs.m_in(), coeffs.m_out());
    let mut qb = vec![0.0; m_in * m_out * ns];
    let mut qc = qb.clone();
    let mut qd = qb.clone();
    let thetas: Vec<f64> = (0..BOUND_THETA)
        .map(|i| 2.0 * PI * i as f64 / BOUND_THETA as f64)
        .collect();
    let mut ck = vec![0.0; k];
    for li in 0..m_in {
        for lo in 0..m_out {
            let block = coeffs.pair(li, lo);
            for nn in 0..ns {
                let idx = (li * m_out + lo) * ns + nn;
                if coeffs.is_lifting() {
                    ck.copy_from_slice(block);
                    let r = integrate(&ck);
                    qb[idx] = r[0];
                    qc[idx] = r[1];
                    qd[idx] = r[2];
                    continue;
                }
                let mut acc = [0.0; 3];
                for &t in &thetas {
                    for (kk, c) in ck.iter_mut().enumerate() {
                        *c = (0..na)
                            .map(|m| block[(kk * na + m) * ns + nn] * basis.angular[m].eval(t))
                            .sum();
                    }
                    let r = integrate(&ck);
                    for i in 0..3 {
                        acc[i] += r[i] / BOUND_THETA as f64;
                    }
                }
                qb[idx] = acc[0];
                qc[idx] = acc[1];
                qd[idx] = acc[2];
            }
        }
    }
    let lifting = coeffs.is_lifting();
    let agg = |q: &[f64]| crate::net::aggregate_pairs(q, m_in, m_out, ns, lifting);
    let d_unit = agg(&qd);
    Ok(FilterBoundReport {
        b: agg(&qb),
        c: agg(&qc),
        d: d_unit * 2f64.powi(-spec.layer_scale),
        scaled_d: d_unit,
        a,
    })
}
