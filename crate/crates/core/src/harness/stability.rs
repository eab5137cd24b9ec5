use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::pool::{default_workers, run_jobs};
use crate::analysis::{stability_certificate, Allowance, StabilityReport, A3_LIMIT};
use crate::data::synthetic_image;
use crate::deform::{make_tau_with_grad, DeformationField};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::net::{ConfigFile, Model, PerLayer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub network: ConfigFile,
    pub seeds: Vec<u64>,
    /// Requested `sup |grad tau|` levels; every seed runs every level.
    pub grad_levels: Vec<f64>,
    pub g: GroupElement,
    pub max_freq: u32,
    pub image_size: usize,
    pub allowance: Allowance,
    #[serde(skip)]
    pub workers: usize,
}

/// One trial's inputs and report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityTrial {
    pub seed: u64,
    pub requested_grad: f64,
    pub report: StabilityReport,
}

impl StabilityConfig {
    /// Three layers, `beta = -0.5`, twenty seeds at `|grad tau|` of 0.02,
    /// 0.05 and 0.1.
    pub fn default_trials() -> Self {
        StabilityConfig {
            network: ConfigFile {
                layers: 3,
                channels: PerLayer::Same(4),
                in_channels: 1,
                k: 5,
                n_rot: 8,
                n_scale: 9,
                t: 1.0,
                stencil: 11,
                l_theta: 4,
                l_alpha: 1,
                j: PerLayer::Same(0),
                seed: 0,
                max_angular: 4,
                scale_modes: None,
                basis: "fb".into(),
            },
            seeds: (0..20).collect(),
            grad_levels: vec![0.02, 0.05, 0.1],
            g: GroupElement::new(-FRAC_PI_2, -0.5, [0.0, 0.0]),
            max_freq: 2,
            image_size: 32,
            allowance: Allowance::default(),
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() || self.grad_levels.is_empty() {
            return Err(Error::Config("seeds and grad levels must be non-empty".into()));
        }
        for &g in &self.grad_levels {
            if !(g >= 0.0) {
                return Err(Error::Config(format!("grad level {g} must be >= 0")));
            }
            if g >= A3_LIMIT {
                return Err(Error::Precondition {
                    assumption: "A3",
                    detail: format!("requested sup |grad tau| = {g} is not below the threshold 1/5"),
                });
            }
        }
        Ok(())
    }
}

/// Run every `(seed, level)` trial. Trials that violate the certificate are
/// reported, not turned into errors.
pub fn run_stability_trials(cfg: &StabilityConfig) -> Result<Vec<StabilityTrial>> {
    cfg.validate()?;
    let workers = if cfg.workers == 0 {
        default_workers()
    } else {
        cfg.workers
    };
    let per_seed = run_jobs(cfg.seeds.len(), workers, |i| -> Result<Vec<StabilityTrial>> {
        let seed = cfg.seeds[i];
        let mut file = cfg.network.clone();
        file.seed = seed;
        let model = Model::random(file.resolve()?, seed)?;
        let n = cfg.image_size;
        let x = synthetic_image(seed, 0, model.network.config.layers[0].in_channels, n, n);
        cfg.grad_levels
            .iter()
            .enumerate()
            .map(|(li, &level)| {
                let tau = if level == 0.0 {
                    DeformationField::zero(n, n)
                } else {
                    make_tau_with_grad(seed.wrapping_mul(31).wrapping_add(li as u64), level, cfg.max_freq, n, n)
                };
                Ok(StabilityTrial {
                    seed,
                    requested_grad: level,
                    report: stability_certificate(&model, &x, &cfg.g, &tau, cfg.allowance)?,
                })
            })
            .collect()
    });
    let mut out = Vec::new();
    for r in per_seed {
        out.extend(r?);
    }
    Ok(out)
}
