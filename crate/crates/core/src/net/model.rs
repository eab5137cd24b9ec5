use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    filter_bound_a, joint_conv, lifting_conv, normalize_coeffs_a2, synthesize_filters,
    CoeffTensor, LayerFilters, NetworkConfig,
};
use crate::basis::{build_basis, sample_filter_bank, BankGrid, BasisSet, FilterBank};
use crate::error::{Error, Result};
use crate::group::{FeatureMap, ImageTensor};

/// A configuration together with the fixed bases and filter banks of every
/// layer. Independent of the trainable coefficients.
#[derive(Clone, Debug)]
pub struct Network {
    pub config: NetworkConfig,
    pub bases: Vec<BasisSet>,
    pub banks: Vec<FilterBank>,
}

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut bases = Vec::with_capacity(config.depth());
        let mut banks = Vec::with_capacity(config.depth());
        for spec in &config.layers {
            let basis = build_basis(config.spatial_kind, spec.k, spec.max_angular, spec.n_scale.max(1))?;
            let grid = BankGrid {
                n_rot: config.n_rot,
                n_scale: config.n_scale,
                t: config.t,
                stencil: spec.stencil,
                layer_scale: spec.layer_scale,
            };
            banks.push(sample_filter_bank(&basis, &grid)?);
            bases.push(basis);
        }
        let p0 = banks[0].pixel_pitch;
        for (i, b) in banks.iter().enumerate() {
            if (b.pixel_pitch - p0).abs() > 1e-12 * p0 {
                return Err(Error::Config(format!(
                    "layer {} stencil gives pixel pitch {} but layer 1 uses {}; use L_l = (L_1 - 1) 2^(j_l - j_1) + 1",
                    i + 1,
                    b.pixel_pitch,
                    p0
                )));
            }
        }
        Ok(Network {
            config,
            bases,
            banks,
        })
    }

    pub fn depth(&self) -> usize {
        self.config.depth()
    }

    /// Spacing of one image pixel in unit-domain coordinates.
    pub fn pixel_pitch(&self) -> f64 {
        self.banks[0].pixel_pitch
    }

    /// Coefficients drawn uniform on `[-1, 1]` with one ChaCha stream per
    /// layer, then rescaled so that every `A_l <= 1`.
    pub fn random_coeffs(&self, seed: u64) -> Result<Vec<CoeffTensor>> {
        self.config
            .layers
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let raw = CoeffTensor::random_for(spec, i, &mut rng);
                Ok(normalize_coeffs_a2(&raw, &self.bases[i].eigenvalues())?.0)
            })
            .collect()
    }

    /// `A_l` for each layer.
    pub fn filter_bounds(&self, coeffs: &[CoeffTensor]) -> Result<Vec<f64>> {
        self.check_coeffs(coeffs)?;
        coeffs
            .iter()
            .zip(&self.bases)
            .map(|(c, b)| filter_bound_a(c, &b.eigenvalues()))
            .collect()
    }

    pub fn check_coeffs(&self, coeffs: &[CoeffTensor]) -> Result<()> {
        if coeffs.len() != self.depth() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient tensors for {} layers",
                coeffs.len(),
                self.depth()
            )));
        }
        for (i, (c, spec)) in coeffs.iter().zip(&self.config.layers).enumerate() {
            c.check(spec, i)?;
        }
        Ok(())
    }
}

/// A network with its coefficients and synthesized filters.
#[derive(Clone, Debug)]
pub struct Model {
    pub network: Network,
    pub coeffs: Vec<CoeffTensor>,
    pub filters: Vec<LayerFilters>,
}

impl Model {
    pub fn new(network: Network, coeffs: Vec<CoeffTensor>) -> Result<Self> {
        network.check_coeffs(&coeffs)?;
        let filters = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                synthesize_filters(c, &network.banks[i], &network.bases[i], &network.config.layers[i])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Model {
            network,
            coeffs,
            filters,
        })
    }

    /// Randomly initialized, A2-normalized model.
    pub fn random(config: NetworkConfig, seed: u64) -> Result<Self> {
        let network = Network::new(config)?;
        let coeffs = network.random_coeffs(seed)?;
        Self::new(network, coeffs)
    }

    pub fn depth(&self) -> usize {
        self.network.depth()
    }

    /// Every layer's output, first to last.
    pub fn forward_layers(&self, x: &ImageTensor) -> Result<Vec<FeatureMap>> {
        let layers = &self.network.config.layers;
        let mut outs = Vec::with_capacity(self.depth());
        outs.push(lifting_conv(x, &self.filters[0], &self.coeffs[0].b, &layers[0])?);
        for i in 1..self.depth() {
            let next = joint_conv(&outs[i - 1], &self.filters[i], &self.coeffs[i].b, &layers[i])?;
            outs.push(next);
        }
        Ok(outs)
    }

    pub fn forward(&self, x: &ImageTensor) -> Result<FeatureMap> {
        Ok(self.forward_layers(x)?.pop().expect("at least one layer"))
    }
}

/// Run the whole network on `x` and return the last feature map.
pub fn forward(network: &Network, coeffs: &[CoeffTensor], x: &ImageTensor) -> Result<FeatureMap> {
    Model::new(network.clone(), coeffs.to_vec())?.forward(x)
}
