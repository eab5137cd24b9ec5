use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::pool::{default_workers, run_jobs};
use crate::analysis::{equivariance_errors, DEFAULT_MARGIN};
use crate::data::{read_idx, resize, synthetic_image};
use crate::error::{Error, Result};
use crate::group::{GroupElement, ImageTensor};
use crate::net::{ConfigFile, Model, NetworkConfig};

/// Where sweep inputs come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// Sums of random Gaussian blobs.
    Synthetic,
    /// An IDX image file; images are resized to the sweep's image size.
    Idx { images: PathBuf },
}

/// A grid of `(K, L_alpha, seed)` cells over one network template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// `K` and `L_alpha` are overridden per cell, and the number of scale
    /// modes follows `L_alpha` unless set explicitly.
    pub network: ConfigFile,
    pub ks: Vec<usize>,
    pub l_alphas: Vec<usize>,
    pub seeds: Vec<u64>,
    pub g: GroupElement,
    pub image_size: usize,
    pub inputs_per_seed: usize,
    pub margin: usize,
    pub data: DataSource,
    /// Threads; 0 picks the machine's parallelism. Does not affect results.
    #[serde(skip)]
    pub workers: usize,
}

/// One output row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L_alpha")]
    pub l_alpha: usize,
    pub seed: u64,
    pub layer: usize,
    pub error: f64,
}

impl SweepConfig {
    /// Five layers, `N_r = 8`, `N_s = 9`, `T = 1`, `L_theta = 4`,
    /// `g = (-pi/2, -0.5, 0)`, `K in {5, 10}`, `L_alpha in {1, 2, 3}`, five
    /// seeds on synthetic 56x56 inputs.
    pub fn fig3() -> Self {
        SweepConfig {
            network: ConfigFile {
                layers: 5,
                channels: crate::net::PerLayer::Same(4),
                in_channels: 1,
                k: 5,
                n_rot: 8,
                n_scale: 9,
                t: 1.0,
                stencil: 11,
                l_theta: 4,
                l_alpha: 1,
                j: crate::net::PerLayer::Same(0),
                seed: 0,
                max_angular: 4,
                scale_modes: None,
                basis: "fb".into(),
            },
            ks: vec![5, 10],
            l_alphas: vec![1, 2, 3],
            seeds: vec![0, 1, 2, 3, 4],
            g: GroupElement::new(-FRAC_PI_2, -0.5, [0.0, 0.0]),
            image_size: 56,
            inputs_per_seed: 1,
            margin: DEFAULT_MARGIN,
            data: DataSource::Synthetic,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.l_alphas.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("sweep lists must be non-empty".into()));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(Error::Config("sweep seeds must be distinct".into()));
        }
        if self.inputs_per_seed == 0 {
            return Err(Error::Config("inputs_per_seed must be >= 1".into()));
        }
        if self.image_size <= 2 * self.margin {
            return Err(Error::Config(format!(
                "image size {} leaves no interior with margin {}",
                self.image_size, self.margin
            )));
        }
        Ok(())
    }

    /// Resolved network for one cell.
    pub fn cell_network(&self, k: usize, l_alpha: usize, seed: u64) -> Result<NetworkConfig> {
        let mut file = self.network.clone();
        file.k = k;
        file.l_alpha = l_alpha;
        file.seed = seed;
        file.resolve()
    }
}

fn load_inputs(cfg: &SweepConfig) -> Result<Option<Vec<ImageTensor>>> {
    match &cfg.data {
        DataSource::Synthetic => Ok(None),
        DataSource::Idx { images } => {
            let set = read_idx(images, None)?;
            if set.is_empty() {
                return Err(Error::Config(format!("{} holds no images", images.display())));
            }
            Ok(Some(
                set.images
                    .iter()
                    .map(|x| {
                        if x.height == cfg.image_size && x.width == cfg.image_size {
                            x.clone()
                        } else {
                            resize(x, cfg.image_size)
                        }
                    })
                    .collect(),
            ))
        }
    }
}

fn input_for(cfg: &SweepConfig, pool: &Option<Vec<ImageTensor>>, seed: u64, i: usize) -> ImageTensor {
    match pool {
        None => synthetic_image(seed, i as u64, 1, cfg.image_size, cfg.image_size),
        Some(imgs) => {
            let idx = (seed as usize)
                .wrapping_mul(cfg.inputs_per_seed)
                .wrapping_add(i)
                % imgs.len();
            imgs[idx].clone()
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-layer median over the rows of one `(K, L_alpha)` pair, across seeds.
pub fn layer_medians(rows: &[SweepRow], k: usize, l_alpha: usize) -> Vec<f64> {
    let depth = rows.iter().map(|r| r.layer).max().unwrap_or(0);
    (1..=depth)
        .map(|l| {
            median(
                rows.iter()
                    .filter(|r| r.k == k && r.l_alpha == l_alpha && r.layer == l)
                    .map(|r| r.error)
                    .collect(),
            )
        })
        .collect()
}

/// Run every cell and return rows ordered by `(K, L_alpha, seed, layer)`.
/// With several inputs per seed the row holds the median over inputs.
pub fn run_equivariance_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let pool = load_inputs(cfg)?;
    let cells: Vec<(usize, usize, u64)> = cfg
        .ks
        .iter()
        .flat_map(|&k| {
            cfg.l_alphas
                .iter()
                .flat_map(move |&la| cfg.seeds.iter().map(move |&s| (k, la, s)))
        })
        .collect();
    let workers = if cfg.workers == 0 {
        default_workers()
    } else {
        cfg.workers
    };
    let results = run_jobs(cells.len(), workers, |i| {
        let (k, la, seed) = cells[i];
        let run = || -> Result<Vec<f64>> {
            let model = Model::random(cfg.cell_network(k, la, seed)?, seed)?;
            let per_input = (0..cfg.inputs_per_seed)
                .map(|j| equivariance_errors(&model, &input_for(cfg, &pool, seed, j), &cfg.g, cfg.margin))
                .collect::<Result<Vec<_>>>()?;
            let depth = model.depth();
            Ok((0..depth)
                .map(|l| median(per_input.iter().map(|e| e[l]).collect()))
                .collect())
        };
        run().map_err(|e| Error::Cell {
            k,
            l_alpha: la,
            seed,
            source: Box::new(e),
        })
    });
    let mut rows = Vec::new();
    for (&(k, la, seed), r) in cells.iter().zip(results) {
        for (l, error) in r?.into_iter().enumerate() {
            rows.push(SweepRow {
                k,
                l_alpha: la,
                seed,
                layer: l + 1,
                error,
            });
        }
    }
    Ok(rows)
}

/// CSV text: a `# config:` comment line with the resolved configuration as
/// JSON, the header, then one row per `(K, L_alpha, seed, layer)`.
pub fn sweep_csv(cfg: &SweepConfig, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let json = serde_json::to_string(cfg).expect("config serializes");
    writeln!(out, "# config: {json}").unwrap();
    out.push_str("K,L_alpha,seed,layer,error\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{:e}", r.k, r.l_alpha, r.seed, r.layer, r.error).unwrap();
    }
    out
}
