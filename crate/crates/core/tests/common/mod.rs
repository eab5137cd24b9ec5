#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstcnn::group::{FeatureMap, ImageTensor};
use rstcnn::net::{Model, NetworkConfig};

pub const ORACLE_CONFIG: &str = r#"
layers = 2
channels = [2, 3]
in_channels = 2
K = 4
N_r = 4
N_s = 3
T = 1.0
L = 5
L_theta = 2
L_alpha = 2
max_angular = 1
seed = 11
"#;

/// Small two-layer model with random biases so the bias path is exercised.
pub fn oracle_model(seed: u64) -> Model {
    let cfg = NetworkConfig::from_toml_str(ORACLE_CONFIG).unwrap();
    let mut m = Model::random(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for c in &mut m.coeffs {
        for b in &mut c.b {
            *b = rng.gen_range(-1e-5..1e-5);
        }
    }
    m
}

pub fn random_image(seed: u64, channels: usize, h: usize, w: usize) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..channels * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ImageTensor::from_vec(channels, h, w, v).unwrap()
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// `2^{-2(a+j)} psi_k(2^{-(a+j)} R_{-theta} u)` at stencil offset `(p, q)`,
/// straight from the analytic element.
fn atom(model: &Model, layer: usize, k: usize, r: usize, s: usize, p: isize, q: isize) -> f64 {
    let cfg = &model.network.config;
    let pitch = model.network.pixel_pitch();
    let theta = 2.0 * PI * r as f64 / cfg.n_rot as f64;
    let alpha = model.filters[layer].scale_grid[s] + cfg.layers[layer].layer_scale as f64;
    let (x, y) = (q as f64 * pitch, p as f64 * pitch);
    let rx = theta.cos() * x + theta.sin() * y;
    let ry = -theta.sin() * x + theta.cos() * y;
    let f = 2f64.powf(-alpha);
    f * f * model.network.bases[layer].spatial[k].eval(f * rx, f * ry)
}

/// Direct sum of the lifting layer at one output sample.
pub fn naive_lifting(model: &Model, x: &ImageTensor, lo: usize, r: usize, s: usize, i: usize, j: usize) -> f64 {
    let spec = &model.network.config.layers[0];
    let c = &model.coeffs[0];
    let half = (spec.stencil / 2) as isize;
    let pitch = model.network.pixel_pitch();
    let mut acc = 0.0;
    for li in 0..spec.in_channels {
        for p in -half..=half {
            for q in -half..=half {
                let (yi, xj) = (i as isize + p, j as isize + q);
                if yi < 0 || xj < 0 || yi >= x.height as isize || xj >= x.width as isize {
                    continue;
                }
                let w: f64 = (0..spec.k)
                    .map(|k| c.a[c.index(li, lo, k, 0, 0)] * atom(model, 0, k, r, s, p, q))
                    .sum();
                acc += pitch * pitch * w * x.get(li, yi as usize, xj as usize);
            }
        }
    }
    relu(acc + c.b[lo])
}

/// Direct sum of joint layer `layer` at one output sample, integrating
/// `theta'` over `L_theta` equispaced nodes (normalized measure) and
/// `alpha'` over `L_alpha` midpoint cells of `[-1, 1]`.
pub fn naive_joint(
    model: &Model,
    layer: usize,
    x: &FeatureMap,
    lo: usize,
    r: usize,
    s: usize,
    i: usize,
    j: usize,
) -> f64 {
    let spec = &model.network.config.layers[layer];
    let basis = &model.network.bases[layer];
    let c = &model.coeffs[layer];
    let (nr, ns) = (x.n_rot, x.n_scale);
    let half = (spec.stencil / 2) as isize;
    let pitch = model.network.pixel_pitch();
    let (lt, la) = (spec.l_theta, spec.l_alpha);
    let mut acc = 0.0;
    for li in 0..spec.in_channels {
        for it in 0..lt {
            let theta = 2.0 * PI * it as f64 / lt as f64;
            let rr = (r + it * nr / lt) % nr;
            for ia in 0..la {
                let ss = s + ia;
                if ss >= ns {
                    continue;
                }
                let (alpha, wa) = if la == 1 {
                    (0.0, 1.0)
                } else {
                    (-1.0 + (2 * ia + 1) as f64 / la as f64, 2.0 / la as f64)
                };
                for p in -half..=half {
                    for q in -half..=half {
                        let (yi, xj) = (i as isize + p, j as isize + q);
                        if yi < 0 || xj < 0 || yi >= x.height as isize || xj >= x.width as isize {
                            continue;
                        }
                        let mut w = 0.0;
                        for k in 0..spec.k {
                            let psi = atom(model, layer, k, r, s, p, q);
                            for (m, phi) in basis.angular.iter().enumerate() {
                                for (n, xi) in basis.scale.iter().enumerate() {
                                    w += c.a[c.index(li, lo, k, m, n)] * psi * phi.eval(theta) * xi.eval(alpha);
                                }
                            }
                        }
                        acc += pitch * pitch * wa / lt as f64 * w * x.get(li, rr, ss, yi as usize, xj as usize);
                    }
                }
            }
        }
    }
    relu(acc + c.b[lo])
}

/// Plain spatial relative L2 distance between two planes.
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
