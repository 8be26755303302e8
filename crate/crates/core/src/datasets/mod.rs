//! Unpaired image domains: PNG directories, synthetic domain pairs with a
//! known ground-truth map, and sampling.

mod png;
mod synthetic;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use png::{
    byte_to_unit, image_to_tensor, load_domain, read_png_dir, save_png, tensor_to_image,
    unit_to_byte, LoadedImage,
};
pub use synthetic::{
    draw_scene, make_synthetic_pair, SyntheticKind, SyntheticOracle, SCENE_MEAN, SCENE_SPREAD,
};

/// Snaps a value in [−1, 1] onto a grid of 1/128 steps.
///
/// Synthetic scenes live on this grid so that the oracle maps with
/// power-of-two parameters are exact in binary floating point.
pub(crate) fn quantize(v: f32) -> f32 {
    let k = ((v.clamp(-1.0, 1.0) + 1.0) * 128.0).round();
    k / 128.0 - 1.0
}

/// An unpaired image collection; every sample is `1×C×R×R` in [−1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct DomainDataset {
    samples: Vec<Tensor<f32>>,
    names: Vec<String>,
    pub source: String,
    pub resolution: usize,
    /// Files that could not be decoded while loading.
    pub skipped: usize,
}

impl DomainDataset {
    pub fn new(
        samples: Vec<Tensor<f32>>,
        names: Vec<String>,
        source: String,
        resolution: usize,
    ) -> Result<Self> {
        if samples.len() != names.len() {
            return Err(Error::Dataset(format!(
                "{} samples but {} names",
                samples.len(),
                names.len()
            )));
        }
        if let Some(first) = samples.first() {
            let [n, _, h, w] = first.dims4()?;
            if n != 1 || h != resolution || w != resolution {
                return Err(Error::Dataset(format!(
                    "samples must be 1×C×{resolution}×{resolution}, got {:?}",
                    first.shape()
                )));
            }
            if let Some(bad) = samples.iter().find(|s| s.shape() != first.shape()) {
                return Err(Error::Dataset(format!(
                    "mixed sample shapes {:?} and {:?}",
                    first.shape(),
                    bad.shape()
                )));
            }
            if samples
                .iter()
                .any(|s| s.data().iter().any(|v| !(-1.0..=1.0).contains(v)))
            {
                return Err(Error::Dataset("sample values outside [-1, 1]".into()));
            }
        }
        Ok(DomainDataset {
            samples,
            names,
            source,
            resolution,
            skipped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Tensor<f32>] {
        &self.samples
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, index: usize) -> &Tensor<f32> {
        &self.samples[index]
    }

    /// First `n` samples (or all of them).
    pub fn take(&self, n: usize) -> DomainDataset {
        let n = n.min(self.len());
        DomainDataset {
            samples: self.samples[..n].to_vec(),
            names: self.names[..n].to_vec(),
            source: self.source.clone(),
            resolution: self.resolution,
            skipped: self.skipped,
        }
    }
}

/// Independent uniform draws from the two domains.
pub fn sample_pair<'a>(
    dx: &'a DomainDataset,
    dy: &'a DomainDataset,
    rng: &mut ChaCha8Rng,
) -> Result<(&'a Tensor<f32>, &'a Tensor<f32>)> {
    if dx.is_empty() || dy.is_empty() {
        return Err(Error::Dataset("cannot sample from an empty domain".into()));
    }
    let i = rng.random_range(0..dx.len());
    let j = rng.random_range(0..dy.len());
    Ok((dx.get(i), dy.get(j)))
}

/// Index pairs for one epoch: each domain is shuffled independently and
/// the shorter length sets the epoch size, so every sample of the smaller
/// domain is visited exactly once.
pub fn epoch_pairs(len_x: usize, len_y: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut xs: Vec<usize> = (0..len_x).collect();
    let mut ys: Vec<usize> = (0..len_y).collect();
    xs.shuffle(rng);
    ys.shuffle(rng);
    xs.into_iter().zip(ys).collect()
}

/// A uniformly placed `crop×crop` window of a `1×C×H×W` image.
pub fn random_square_crop(
    image: &Tensor<f32>,
    crop: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor<f32>> {
    let [n, c, h, w] = image.dims4()?;
    if crop == 0 || crop > h.min(w) {
        return Err(Error::invalid(format!(
            "crop {crop} does not fit a {h}×{w} image"
        )));
    }
    let top = rng.random_range(0..=h - crop);
    let left = rng.random_range(0..=w - crop);
    crop_at(image, [n, c, h, w], crop, top, left)
}

fn crop_at(
    image: &Tensor<f32>,
    [n, c, h, w]: [usize; 4],
    crop: usize,
    top: usize,
    left: usize,
) -> Result<Tensor<f32>> {
    let mut out = Vec::with_capacity(n * c * crop * crop);
    for plane in image.data().chunks(h * w) {
        for y in top..top + crop {
            out.extend_from_slice(&plane[y * w + left..y * w + left + crop]);
        }
    }
    Tensor::new(vec![n, c, crop, crop], out)
}

/// Seeded RNG used for data order.
pub fn data_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
