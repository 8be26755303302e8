use std::io::Cursor;
use std::path::Path;

use image::imageops::FilterType;
use image::{ImageFormat, RgbImage};
use rand::seq::SliceRandom;

use super::{data_rng, DomainDataset};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::tensor::Tensor;

/// `[0, 255] → [−1, 1]`
pub fn byte_to_unit(b: u8) -> f32 {
    b as f32 / 127.5 - 1.0
}

/// Inverse of [`byte_to_unit`], clamping out-of-range values.
pub fn unit_to_byte(v: f32) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

pub fn image_to_tensor(img: &RgbImage) -> Tensor<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0f32; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for ch in 0..3 {
            data[(ch * h + y as usize) * w + x as usize] = byte_to_unit(px[ch]);
        }
    }
    Tensor::new(vec![1, 3, h, w], data).expect("image tensor shape")
}

/// Converts a `1×3×H×W` tensor back to 8-bit RGB.
pub fn tensor_to_image(t: &Tensor<f32>) -> Result<RgbImage> {
    let [n, c, h, w] = t.dims4()?;
    if n != 1 || c != 3 {
        return Err(Error::shape(format!("expected a 1×3×H×W image, got {:?}", t.shape())));
    }
    let d = t.data();
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let at = |ch: usize| unit_to_byte(d[(ch * h + y as usize) * w + x as usize]);
        image::Rgb([at(0), at(1), at(2)])
    }))
}

pub fn save_png(path: &Path, t: &Tensor<f32>) -> Result<()> {
    let img = tensor_to_image(t)?;
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_atomic(path, buf.get_ref())
}

#[derive(Clone, Debug)]
pub struct LoadedImage {
    pub name: String,
    pub image: RgbImage,
}

/// Decodes every file of `dir` in lexicographic order. Undecodable files
/// are logged and counted, not fatal.
pub fn read_png_dir(dir: &Path) -> Result<(Vec<LoadedImage>, usize)> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    let mut images = Vec::with_capacity(paths.len());
    let mut skipped = 0;
    for path in paths {
        match image::open(&path) {
            Ok(img) => images.push(LoadedImage {
                name: path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                image: img.to_rgb8(),
            }),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped += 1;
            }
        }
    }
    Ok((images, skipped))
}

/// Loads a directory as one domain, scaled to `resolution`² and shuffled
/// with `seed` after sorting by file name.
pub fn load_domain(dir: &Path, resolution: usize, seed: u64) -> Result<DomainDataset> {
    if resolution == 0 {
        return Err(Error::invalid("resolution must be positive"));
    }
    let (mut images, skipped) = read_png_dir(dir)?;
    if images.is_empty() {
        return Err(Error::Dataset(format!(
            "{}: no decodable images ({skipped} skipped)",
            dir.display()
        )));
    }
    images.shuffle(&mut data_rng(seed));
    let r = resolution as u32;
    let (samples, names) = images
        .into_iter()
        .map(|li| {
            let img = if li.image.dimensions() == (r, r) {
                li.image
            } else {
                image::imageops::resize(&li.image, r, r, FilterType::Triangle)
            };
            (image_to_tensor(&img), li.name)
        })
        .unzip();
    let mut ds = DomainDataset::new(samples, names, dir.display().to_string(), resolution)?;
    ds.skipped = skipped;
    Ok(ds)
}
