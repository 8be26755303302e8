use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quantize, DomainDataset};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A known bijection between two synthetic domains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticKind {
    /// `T(x) = −x`
    Invert,
    /// `(r, g, b) → (g, b, r)`
    ChannelPerm,
    /// `T(x) = scale·x + offset`
    AffineIntensity { scale: f32, offset: f32 },
    /// Horizontal translation by `pixels` with wraparound.
    Shift { pixels: usize },
}

impl SyntheticKind {
    pub const DEFAULT_AFFINE: SyntheticKind = SyntheticKind::AffineIntensity {
        scale: 0.5,
        offset: 0.2,
    };

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::Invert => "invert",
            SyntheticKind::ChannelPerm => "channel_perm",
            SyntheticKind::AffineIntensity { .. } => "affine_intensity",
            SyntheticKind::Shift { .. } => "shift",
        }
    }

    /// True for maps acting on each pixel independently.
    pub fn is_pixelwise(&self) -> bool {
        !matches!(self, SyntheticKind::Shift { .. })
    }

    fn validate(&self) -> Result<()> {
        if let SyntheticKind::AffineIntensity { scale, offset } = *self {
            if scale == 0.0 || scale.abs() + offset.abs() > 1.0 || !scale.is_finite() {
                return Err(Error::invalid(format!(
                    "affine_intensity needs scale ≠ 0 and |scale| + |offset| ≤ 1, got {scale}, {offset}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticKind::AffineIntensity { scale, offset } => {
                write!(f, "affine_intensity:{scale}:{offset}")
            }
            SyntheticKind::Shift { pixels } => write!(f, "shift:{pixels}"),
            other => f.write_str(other.name()),
        }
    }
}

/// Parses `invert`, `channel_perm`, `affine_intensity[:a:b]` or `shift[:k]`.
impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let bad = || Error::invalid(format!("unknown synthetic kind `{s}`"));
        let kind = match (head, args.as_slice()) {
            ("invert", []) => SyntheticKind::Invert,
            ("channel_perm", []) => SyntheticKind::ChannelPerm,
            ("affine_intensity", []) => SyntheticKind::DEFAULT_AFFINE,
            ("affine_intensity", [a, b]) => SyntheticKind::AffineIntensity {
                scale: a.parse().map_err(|_| bad())?,
                offset: b.parse().map_err(|_| bad())?,
            },
            ("shift", []) => SyntheticKind::Shift { pixels: 4 },
            ("shift", [k]) => SyntheticKind::Shift {
                pixels: k.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Ground-truth forward and inverse maps, for scoring only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticOracle {
    pub kind: SyntheticKind,
}

impl SyntheticOracle {
    pub fn new(kind: SyntheticKind) -> Result<Self> {
        kind.validate()?;
        Ok(SyntheticOracle { kind })
    }

    /// `T: X → Y`
    pub fn forward(&self, image: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.apply(image, false)
    }

    /// `T⁻¹: Y → X`
    pub fn inverse(&self, image: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.apply(image, true)
    }

    fn apply(&self, image: &Tensor<f32>, inverse: bool) -> Result<Tensor<f32>> {
        let [n, c, h, w] = image.dims4()?;
        match self.kind {
            SyntheticKind::Invert => Ok(image.map(|v| -v)),
            SyntheticKind::AffineIntensity { scale, offset } => Ok(if inverse {
                image.map(|v| (v - offset) / scale)
            } else {
                image.map(|v| scale * v + offset)
            }),
            SyntheticKind::ChannelPerm => {
                if c != 3 {
                    return Err(Error::shape(format!("channel_perm needs 3 channels, got {c}")));
                }
                let plane = h * w;
                // forward: out[c] = in[(c + 1) % 3]; inverse: out[c] = in[(c + 2) % 3]
                let step = if inverse { 2 } else { 1 };
                let src = image.data();
                let mut out = vec![0.0; src.len()];
                for b in 0..n {
                    for ch in 0..3 {
                        let from = (b * 3 + (ch + step) % 3) * plane;
                        let to = (b * 3 + ch) * plane;
                        out[to..to + plane].copy_from_slice(&src[from..from + plane]);
                    }
                }
                Tensor::new(image.shape().to_vec(), out)
            }
            SyntheticKind::Shift { pixels } => {
                let k = pixels % w;
                let k = if inverse { (w - k) % w } else { k };
                let src = image.data();
                let mut out = vec![0.0; src.len()];
                for (dst_row, src_row) in out.chunks_mut(w).zip(src.chunks(w)) {
                    for (x, &v) in src_row.iter().enumerate() {
                        dst_row[(x + k) % w] = v;
                    }
                }
                Tensor::new(image.shape().to_vec(), out)
            }
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> f32 {
    rng.random_range(lo..hi)
}

/// Per-channel mean every scene is shifted to.
pub const SCENE_MEAN: [f32; 3] = [0.3, 0.0, -0.3];
/// Per-channel standard deviation of every scene.
pub const SCENE_SPREAD: f32 = 0.3;

/// One procedurally drawn scene: a tinted, vertically graded background
/// with one to three rectangles or ellipses, each lighter than the
/// background in every channel.
///
/// Each channel is then shifted to [`SCENE_MEAN`] and scaled to
/// [`SCENE_SPREAD`], clamped to [−1, 1] and snapped to the 1/128 grid.
/// Instance-normalized generators cannot see a per-image offset or
/// rescaling of a feature map, so the absolute colors of a scene must
/// follow from its visible structure for a pixel-wise map to be learnable.
pub fn draw_scene(rng: &mut ChaCha8Rng, resolution: usize) -> Tensor<f32> {
    let r = resolution;
    let rf = r as f32;
    let bg = [
        uniform(rng, 0.2, 0.9),
        uniform(rng, -0.1, 0.5),
        uniform(rng, -0.6, 0.0),
    ];
    let grad = uniform(rng, -0.2, 0.2);
    let mut img = vec![0.0f32; 3 * r * r];
    for ch in 0..3 {
        for y in 0..r {
            let v = bg[ch] + grad * (y as f32 / rf - 0.5);
            img[(ch * r + y) * r..(ch * r + y + 1) * r].fill(v);
        }
    }
    let shapes = rng.random_range(1..=3);
    for _ in 0..shapes {
        let ellipse = rng.random_bool(0.5);
        let color = [
            bg[0] + uniform(rng, 0.3, 1.0),
            bg[1] + uniform(rng, 0.3, 1.0),
            bg[2] + uniform(rng, 0.3, 1.0),
        ];
        let half_w = uniform(rng, rf / 12.0, rf / 4.0);
        let half_h = uniform(rng, rf / 12.0, rf / 4.0);
        let cx = uniform(rng, 0.0, rf);
        let cy = uniform(rng, 0.0, rf);
        for y in 0..r {
            for x in 0..r {
                let dx = (x as f32 + 0.5 - cx) / half_w;
                let dy = (y as f32 + 0.5 - cy) / half_h;
                let inside = if ellipse {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    for (ch, &col) in color.iter().enumerate() {
                        img[(ch * r + y) * r + x] = col;
                    }
                }
            }
        }
    }
    pin_statistics(&mut img);
    let img = img.into_iter().map(quantize).collect();
    Tensor::new(vec![1, 3, r, r], img).expect("scene shape")
}

fn pin_statistics(img: &mut [f32]) {
    let plane = img.len() / 3;
    for (ch, p) in img.chunks_mut(plane).enumerate() {
        let n = plane as f64;
        let mean = p.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = p.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let gain = if var > 1e-12 { SCENE_SPREAD as f64 / var.sqrt() } else { 0.0 };
        for v in p.iter_mut() {
            *v = (((*v as f64 - mean) * gain) as f32 + SCENE_MEAN[ch]).clamp(-1.0, 1.0);
        }
    }
}

/// Two unpaired domains: `X` is fresh scenes, `Y` is `T` applied to a
/// separately drawn set of scenes. Only the oracle links them.
pub fn make_synthetic_pair(
    kind: SyntheticKind,
    n_per_domain: usize,
    resolution: usize,
    seed: u64,
) -> Result<(DomainDataset, DomainDataset, SyntheticOracle)> {
    if n_per_domain == 0 {
        return Err(Error::invalid("synthetic domains need at least one image"));
    }
    if resolution == 0 {
        return Err(Error::invalid("synthetic resolution must be positive"));
    }
    let oracle = SyntheticOracle::new(kind)?;
    let mut rng_x = ChaCha8Rng::seed_from_u64(seed);
    rng_x.set_stream(0);
    let mut rng_y = ChaCha8Rng::seed_from_u64(seed);
    rng_y.set_stream(1);
    let xs: Vec<_> = (0..n_per_domain)
        .map(|_| draw_scene(&mut rng_x, resolution))
        .collect();
    let ys = (0..n_per_domain)
        .map(|_| oracle.forward(&draw_scene(&mut rng_y, resolution)))
        .collect::<Result<Vec<_>>>()?;
    let names = |p: &str| (0..n_per_domain).map(|i| format!("{p}{i:05}")).collect();
    let dx = DomainDataset::new(xs, names("x"), format!("synthetic:{kind}:X:{seed}"), resolution)?;
    let dy = DomainDataset::new(ys, names("y"), format!("synthetic:{kind}:Y:{seed}"), resolution)?;
    Ok((dx, dy, oracle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Graph;

    fn l1(a: &Tensor<f32>, b: &Tensor<f32>) -> f32 {
        let mut g = Graph::<f32>::new();
        let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
        let l = g.l1_mean(va, vb).unwrap();
        g.value(l).item()
    }

    fn scene(seed: u64) -> Tensor<f32> {
        draw_scene(&mut ChaCha8Rng::seed_from_u64(seed), 16)
    }

    #[test]
    fn invert_negates() {
        let o = SyntheticOracle::new(SyntheticKind::Invert).unwrap();
        let t = Tensor::new(vec![1, 3, 1, 1], vec![0.2, -0.5, 1.0]).unwrap();
        assert_eq!(o.forward(&t).unwrap().data(), &[-0.2, 0.5, -1.0]);
    }

    #[test]
    fn channel_perm_has_order_three() {
        let o = SyntheticOracle::new(SyntheticKind::ChannelPerm).unwrap();
        let x = scene(1);
        let t1 = o.forward(&x).unwrap();
        assert_ne!(t1, x);
        let t3 = o.forward(&o.forward(&t1).unwrap()).unwrap();
        assert_eq!(t3, x);
        let px = Tensor::new(vec![1, 3, 1, 1], vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(o.forward(&px).unwrap().data(), &[0.2, 0.3, 0.1]);
    }

    #[test]
    fn affine_inverse_is_algebraic() {
        let o = SyntheticOracle::new(SyntheticKind::DEFAULT_AFFINE).unwrap();
        let x = Tensor::new(vec![1, 1, 1, 3], vec![-1.0, 0.0, 0.6]).unwrap();
        let y = o.forward(&x).unwrap();
        assert!((y.data()[0] - -0.3).abs() < 1e-7);
        assert!((y.data()[1] - 0.2).abs() < 1e-7);
        assert!((y.data()[2] - 0.5).abs() < 1e-7);
        // 0.2 has no exact binary form, so the round trip is exact only up
        // to one rounding of the offset.
        let back = o.inverse(&y).unwrap();
        assert!(back.max_abs_diff(&x).unwrap() <= 2.0 * f32::EPSILON as f64);
    }

    #[test]
    fn exact_roundtrip_for_pixelwise_kinds() {
        let kinds = [
            SyntheticKind::Invert,
            SyntheticKind::ChannelPerm,
            // binary-exact parameters
            SyntheticKind::AffineIntensity { scale: 0.5, offset: 0.25 },
            SyntheticKind::Shift { pixels: 5 },
        ];
        for kind in kinds {
            let o = SyntheticOracle::new(kind).unwrap();
            for seed in 0..5 {
                let x = scene(seed);
                let back = o.inverse(&o.forward(&x).unwrap()).unwrap();
                assert_eq!(l1(&back, &x), 0.0, "{kind}");
            }
        }
    }

    #[test]
    fn shift_wraps_columns() {
        let o = SyntheticOracle::new(SyntheticKind::Shift { pixels: 1 }).unwrap();
        let x = Tensor::new(vec![1, 1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(o.forward(&x).unwrap().data(), &[3.0, 1.0, 2.0]);
        assert!(!SyntheticKind::Shift { pixels: 1 }.is_pixelwise());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("invert".parse::<SyntheticKind>().unwrap(), SyntheticKind::Invert);
        assert_eq!(
            "affine_intensity:0.5:0.2".parse::<SyntheticKind>().unwrap(),
            SyntheticKind::DEFAULT_AFFINE
        );
        assert_eq!(
            "shift:3".parse::<SyntheticKind>().unwrap(),
            SyntheticKind::Shift { pixels: 3 }
        );
        assert!("blur".parse::<SyntheticKind>().is_err());
        assert!("affine_intensity:0:0.2".parse::<SyntheticKind>().is_err());
        for k in ["invert", "channel_perm", "affine_intensity:0.5:0.2", "shift:4"] {
            assert_eq!(k.parse::<SyntheticKind>().unwrap().to_string(), k);
        }
    }

    #[test]
    fn pairs_are_in_range_and_disjoint() {
        for kind in [SyntheticKind::Invert, SyntheticKind::ChannelPerm, SyntheticKind::DEFAULT_AFFINE] {
            let (dx, dy, oracle) = make_synthetic_pair(kind, 12, 16, 7).unwrap();
            assert_eq!((dx.len(), dy.len()), (12, 12));
            for s in dx.samples().iter().chain(dy.samples()) {
                assert_eq!(s.shape(), &[1, 3, 16, 16]);
                assert!(s.data().iter().all(|v| (-1.0..=1.0).contains(v)));
            }
            for x in dx.samples() {
                let tx = oracle.forward(x).unwrap();
                assert!(dy.samples().iter().all(|y| *y != tx));
            }
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = make_synthetic_pair(SyntheticKind::Invert, 3, 8, 1).unwrap();
        let b = make_synthetic_pair(SyntheticKind::Invert, 3, 8, 1).unwrap();
        let c = make_synthetic_pair(SyntheticKind::Invert, 3, 8, 2).unwrap();
        assert_eq!(a.0.samples(), b.0.samples());
        assert_ne!(a.0.samples(), c.0.samples());
        assert!(make_synthetic_pair(SyntheticKind::Invert, 0, 8, 1).is_err());
    }
}
