use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::SpatialKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Relu,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Nonlinearity::Relu => v.max(0.0),
        }
    }
}

/// Shape parameters of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Spatial modes `K`.
    pub k: usize,
    /// Highest angular frequency of `phi_m`; `2 * max_angular + 1` functions.
    pub max_angular: usize,
    /// Number of scale modes `xi_n`.
    pub n_scale: usize,
    /// Odd stencil width.
    pub stencil: usize,
    /// `j_l`: the filter lives on `2^j` times the unit domain.
    pub layer_scale: i32,
    pub l_theta: usize,
    pub l_alpha: usize,
    pub nonlinearity: Nonlinearity,
}

impl LayerSpec {
    pub fn angular_modes(&self) -> usize {
        2 * self.max_angular + 1
    }
}

/// All layers plus the shared group discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub spatial_kind: SpatialKind,
    pub layers: Vec<LayerSpec>,
    pub n_rot: usize,
    pub n_scale: usize,
    /// Scale samples cover `[-T, T]`.
    pub t: f64,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.layers.is_empty() {
            return fail("a network needs at least one layer".into());
        }
        if self.n_rot == 0 || self.n_scale == 0 {
            return fail("N_r and N_s must be positive".into());
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return fail(format!("T must be finite and >= 0, got {}", self.t));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let n = i + 1;
            if l.in_channels == 0 || l.out_channels == 0 {
                return fail(format!("layer {n}: channel counts must be positive"));
            }
            if l.stencil < 3 || l.stencil % 2 == 0 {
                return fail(format!("layer {n}: stencil L={} must be odd and >= 3", l.stencil));
            }
            if l.k == 0 {
                return fail(format!("layer {n}: K must be >= 1"));
            }
            if i > 0 {
                let prev = &self.layers[i - 1];
                if l.in_channels != prev.out_channels {
                    return fail(format!("layer {n}: in_channels does not match layer {i}"));
                }
                if l.layer_scale < prev.layer_scale {
                    return fail(format!("layer {n}: j must be nondecreasing"));
                }
                if l.l_theta == 0 || !self.n_rot.is_multiple_of(l.l_theta) {
                    return fail(format!(
                        "layer {n}: L_theta={} must divide N_r={}",
                        l.l_theta, self.n_rot
                    ));
                }
                if l.l_alpha == 0 {
                    return fail(format!("layer {n}: L_alpha must be >= 1"));
                }
                if l.n_scale == 0 {
                    return fail(format!("layer {n}: at least one scale mode is required"));
                }
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        file.resolve()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerLayer<T> {
    Same(T),
    Each(Vec<T>),
}

impl<T: Clone> PerLayer<T> {
    fn expand(&self, n: usize, key: &str) -> Result<Vec<T>> {
        match self {
            PerLayer::Same(v) => Ok(vec![v.clone(); n]),
            PerLayer::Each(v) if v.len() == n => Ok(v.clone()),
            PerLayer::Each(v) => Err(Error::Config(format!(
                "{key}: expected {n} entries, got {}",
                v.len()
            ))),
        }
    }
}

/// On-disk key-value form. `channels` and `j` take a single value or one
/// value per layer; `L` is the first layer's stencil and later stencils grow
/// with `2^(j_l - j_1)` so the pixel pitch stays fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub layers: usize,
    pub channels: PerLayer<usize>,
    #[serde(default = "one")]
    pub in_channels: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_r")]
    pub n_rot: usize,
    #[serde(rename = "N_s")]
    pub n_scale: usize,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "L")]
    pub stencil: usize,
    #[serde(rename = "L_theta", default = "one")]
    pub l_theta: usize,
    #[serde(rename = "L_alpha", default = "one")]
    pub l_alpha: usize,
    #[serde(default = "zero_j")]
    pub j: PerLayer<i32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_angular")]
    pub max_angular: usize,
    /// Defaults to `L_alpha`.
    #[serde(default)]
    pub scale_modes: Option<usize>,
    #[serde(default = "default_basis")]
    pub basis: String,
}

fn one() -> usize {
    1
}

fn zero_j() -> PerLayer<i32> {
    PerLayer::Same(0)
}

fn default_angular() -> usize {
    4
}

fn default_basis() -> String {
    "fb".into()
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<NetworkConfig> {
        let n = self.layers;
        if n == 0 {
            return Err(Error::Config("layers must be >= 1".into()));
        }
        let channels = self.channels.expand(n, "channels")?;
        let js = self.j.expand(n, "j")?;
        let spatial_kind: SpatialKind = self.basis.parse()?;
        if self.stencil < 3 || self.stencil.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "L={} must be odd and >= 3",
                self.stencil
            )));
        }
        let mut layers = Vec::with_capacity(n);
        for i in 0..n {
            let growth = js[i] - js[0];
            if !(0..=8).contains(&growth) {
                return Err(Error::Config("j must be nondecreasing (and grow by at most 8)".into()));
            }
            layers.push(LayerSpec {
                in_channels: if i == 0 { self.in_channels } else { channels[i - 1] },
                out_channels: channels[i],
                k: self.k,
                max_angular: self.max_angular,
                n_scale: self.scale_modes.unwrap_or(self.l_alpha),
                stencil: (self.stencil - 1) * (1usize << growth) + 1,
                layer_scale: js[i],
                l_theta: self.l_theta,
                l_alpha: self.l_alpha,
                nonlinearity: Nonlinearity::Relu,
            });
        }
        let cfg = NetworkConfig {
            spatial_kind,
            layers,
            n_rot: self.n_rot,
            n_scale: self.n_scale,
            t: self.t,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
layers = 3
channels = [2, 3, 4]
K = 5
N_r = 8
N_s = 9
T = 1.0
L = 9
L_theta = 4
L_alpha = 2
j = [0, 1, 1]
seed = 7
"#;

    #[test]
    fn resolves_documented_keys() {
        let cfg = NetworkConfig::from_toml_str(TEXT).unwrap();
        assert_eq!(cfg.depth(), 3);
        assert_eq!(cfg.layers[0].in_channels, 1);
        assert_eq!(cfg.layers[2].in_channels, 3);
        assert_eq!(cfg.layers[1].stencil, 17);
        assert_eq!(cfg.layers[2].n_scale, 2);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn rejects_bad_l_theta() {
        let text = TEXT.replace("L_theta = 4", "L_theta = 3");
        assert!(matches!(NetworkConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_key_and_decreasing_j() {
        assert!(NetworkConfig::from_toml_str(&format!("{TEXT}\nbogus = 1")).is_err());
        let text = TEXT.replace("j = [0, 1, 1]", "j = [1, 0, 0]");
        assert!(NetworkConfig::from_toml_str(&text).is_err());
    }
}
