//! Input images: IDX ingestion, the rotated-and-rescaled dataset recipe and
//! synthetic blob images.

use std::f64::consts::PI;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group::{act_on_image, bilinear, centered, GroupElement, ImageTensor};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Grayscale images `[N, 1, H, W]` in `[0, 1]` with integer labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImageSet {
    pub height: usize,
    pub width: usize,
    pub images: Vec<ImageTensor>,
    pub labels: Vec<u8>,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(BigEndian::read_u32)
        .ok_or_else(|| Error::Parse {
            offset: offset as u64,
            message: format!("truncated while reading {what}"),
        })
}

fn check_magic(bytes: &[u8], want: u32) -> Result<()> {
    let got = be_u32(bytes, 0, "magic")?;
    if got != want {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad magic {got:#010x}, expected {want:#010x}"),
        });
    }
    Ok(())
}

fn payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    bytes.get(start..start + len).ok_or_else(|| Error::Parse {
        offset: bytes.len() as u64,
        message: format!(
            "truncated payload: need {len} bytes from offset {start}, file has {}",
            bytes.len()
        ),
    })
}

/// Parse an IDX image file (`0x00000803`) from memory.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<ImageTensor>)> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let n = be_u32(bytes, 4, "image count")? as usize;
    let h = be_u32(bytes, 8, "row count")? as usize;
    let w = be_u32(bytes, 12, "column count")? as usize;
    let data = payload(bytes, 16, n * h * w)?;
    let images = if h * w == 0 {
        vec![ImageTensor::zeros(1, h, w); n]
    } else {
        data.chunks(h * w)
            .map(|c| ImageTensor {
                channels: 1,
                height: h,
                width: w,
                values: c.iter().map(|&b| b as f64 / 255.0).collect(),
            })
            .collect()
    };
    Ok((h, w, images))
}

/// Parse an IDX label file (`0x00000801`) from memory.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let n = be_u32(bytes, 4, "label count")? as usize;
    Ok(payload(bytes, 8, n)?.to_vec())
}

/// Read an image file and, optionally, its label file.
pub fn read_idx(images: impl AsRef<Path>, labels: Option<&Path>) -> Result<LabeledImageSet> {
    let (height, width, imgs) = parse_idx_images(&std::fs::read(images)?)?;
    let labels = match labels {
        Some(p) => {
            let l = parse_idx_labels(&std::fs::read(p)?)?;
            if l.len() != imgs.len() {
                return Err(Error::CountMismatch {
                    images: imgs.len(),
                    labels: l.len(),
                });
            }
            l
        }
        None => vec![0; imgs.len()],
    };
    Ok(LabeledImageSet {
        height,
        width,
        images: imgs,
        labels,
    })
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encode images as an unsigned-byte IDX file.
pub fn encode_idx_images(set: &LabeledImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.len() * set.height * set.width);
    for v in [
        IDX_IMAGES_MAGIC,
        set.len() as u32,
        set.height as u32,
        set.width as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in &set.images {
        out.extend(img.values.iter().map(|&v| to_byte(v)));
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx(set: &LabeledImageSet, images: impl AsRef<Path>, labels: Option<&Path>) -> Result<()> {
    std::fs::write(images, encode_idx_images(set))?;
    if let Some(p) = labels {
        std::fs::write(p, encode_idx_labels(&set.labels))?;
    }
    Ok(())
}

/// Random rotation and rescaling applied to one image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RsParams {
    pub angle: f64,
    /// Linear factor in `[0.3, 1]`.
    pub scale: f64,
}

impl RsParams {
    pub fn draw(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        RsParams {
            angle: rng.gen_range(0.0..2.0 * PI),
            scale: rng.gen_range(0.3..=1.0),
        }
    }
}

/// Bilinear resize of every channel to `size x size`, aligning pixel
/// centers of the two grids.
pub fn resize(x: &ImageTensor, size: usize) -> ImageTensor {
    let mut out = ImageTensor::zeros(x.channels, size, size);
    let fy = x.height as f64 / size as f64;
    let fx = x.width as f64 / size as f64;
    for c in 0..x.channels {
        let src = x.plane(c);
        let dst = out.plane_mut(c);
        for r in 0..size {
            for col in 0..size {
                let [u, v] = centered(size, size, r, col);
                dst[r * size + col] = bilinear(src, x.height, x.width, [u * fx, v * fy]);
            }
        }
    }
    out
}

/// Rotate by `params.angle`, rescale by `params.scale` on the original grid,
/// then resize to `upsize x upsize`.
pub fn rs_transform(x: &ImageTensor, params: RsParams, upsize: usize) -> ImageTensor {
    let g = GroupElement::new(params.angle, params.scale.log2(), [0.0, 0.0]);
    let moved = act_on_image(&g, x);
    if upsize == x.height && upsize == x.width {
        moved
    } else {
        resize(&moved, upsize)
    }
}

/// Apply [`rs_transform`] with parameters drawn per `(seed, index)`.
pub fn make_rs_dataset(set: &LabeledImageSet, seed: u64, upsize: usize) -> LabeledImageSet {
    let images = set
        .images
        .iter()
        .enumerate()
        .map(|(i, img)| rs_transform(img, RsParams::draw(seed, i as u64), upsize))
        .collect();
    LabeledImageSet {
        height: upsize,
        width: upsize,
        images,
        labels: set.labels.clone(),
    }
}

/// Sum of 3 to 6 Gaussian blobs, kept at least `4 sigma + margin` pixels
/// away from the border. Deterministic per `(seed, index)`.
pub fn synthetic_image(seed: u64, index: u64, channels: usize, height: usize, width: usize) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b10b);
    rng.set_stream(index);
    let mut x = ImageTensor::zeros(channels, height, width);
    let half = 0.5 * height.min(width) as f64;
    for c in 0..channels {
        let blobs = rng.gen_range(3..=6);
        for _ in 0..blobs {
            let sigma = rng.gen_range(1.5..=2.5);
            let amp = rng.gen_range(0.5..=1.0);
            let reach = (half - 4.0 * sigma - 4.0).max(0.0) * 0.5;
            let rad = reach * rng.gen_range(0.0f64..=1.0).sqrt();
            let ang = rng.gen_range(0.0..2.0 * PI);
            let (cx, cy) = (rad * ang.cos(), rad * ang.sin());
            let plane = x.plane_mut(c);
            for r in 0..height {
                for col in 0..width {
                    let [u, v] = centered(height, width, r, col);
                    let d2 = (u - cx).powi(2) + (v - cy).powi(2);
                    plane[r * width + col] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                }
            }
        }
    }
    x
}
