use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layer::{LayerKind, Norm, Padding};
use super::spec::{NetworkSpec, ParamKind, ParamShape};
use crate::error::{Error, Result};
use crate::tensor::{Element, Graph, Tensor, Var, INSTANCE_NORM_EPS};

/// Standard deviation of the Gaussian used for convolution kernels.
pub const INIT_STD: f64 = 0.02;

/// A network spec together with its parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: Vec<Tensor<f32>>,
}

impl Network {
    /// Kernels ~ N(0, 0.02²), biases 0, norm scale 1, norm shift 0.
    pub fn initialized(spec: NetworkSpec, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0f32, INIT_STD as f32).expect("valid std");
        let params = spec
            .param_shapes()
            .into_iter()
            .map(|p| match p.kind {
                ParamKind::Kernel => Tensor::from_fn(p.shape, |_| normal.sample(rng)),
                ParamKind::Bias | ParamKind::NormShift => Tensor::zeros(p.shape),
                ParamKind::NormScale => Tensor::full(p.shape, 1.0),
            })
            .collect();
        Network { spec, params }
    }

    /// Wraps existing tensors after checking them against the spec.
    pub fn from_parts(spec: NetworkSpec, params: Vec<Tensor<f32>>) -> Result<Self> {
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::shape(format!(
                "network expects {} parameter tensors, got {}",
                shapes.len(),
                params.len()
            )));
        }
        for (s, p) in shapes.iter().zip(&params) {
            if s.shape != p.shape() {
                return Err(Error::shape(format!(
                    "parameter {} should be {:?}, got {:?}",
                    s.name,
                    s.shape,
                    p.shape()
                )));
            }
        }
        Ok(Network { spec, params })
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        self.spec.param_shapes()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Places the parameters on `g` as trainable leaves or constants.
    pub fn bind<E: Element>(&self, g: &mut Graph<E>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| g.leaf(p.cast::<E>(), trainable))
            .collect()
    }

    pub fn forward<E: Element>(&self, g: &mut Graph<E>, params: &[Var], input: Var) -> Result<Var> {
        forward(&self.spec, g, params, input)
    }

    /// Forward pass without keeping a graph around.
    pub fn infer(&self, input: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut g = Graph::<f32>::new();
        let params = self.bind(&mut g, false);
        let x = g.constant(input.clone());
        let y = self.forward(&mut g, &params, x)?;
        Ok(g.value(y).clone())
    }
}

struct Cursor<'a> {
    params: &'a [Var],
    pos: usize,
}

impl Cursor<'_> {
    fn next(&mut self) -> Result<Var> {
        let v = self
            .params
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::shape("network ran out of parameter tensors"))?;
        self.pos += 1;
        Ok(v)
    }
}

fn conv_unit<E: Element>(
    g: &mut Graph<E>,
    cursor: &mut Cursor<'_>,
    x: Var,
    kind: LayerKind,
    stride: usize,
    pad: usize,
    padding: Padding,
    norm: Norm,
) -> Result<Var> {
    let weight = cursor.next()?;
    let bias = cursor.next()?;
    let mut y = match (kind, padding) {
        (LayerKind::UpConv, _) => g.conv_transpose2d(x, weight, Some(bias), stride, pad, 1)?,
        (_, Padding::Reflect) => {
            let padded = g.reflection_pad(x, pad)?;
            g.conv2d(padded, weight, Some(bias), stride, 0)?
        }
        (_, Padding::Zero) => g.conv2d(x, weight, Some(bias), stride, pad)?,
    };
    if norm == Norm::Instance {
        let gamma = cursor.next()?;
        let beta = cursor.next()?;
        y = g.instance_norm(y, gamma, beta, INSTANCE_NORM_EPS)?;
    }
    Ok(y)
}

/// Runs `spec` on `input` inside `g`. Residual blocks add their input back.
pub fn forward<E: Element>(
    spec: &NetworkSpec,
    g: &mut Graph<E>,
    params: &[Var],
    input: Var,
) -> Result<Var> {
    let [_, c, _, _] = g.value(input).dims4()?;
    if c != spec.input_channels {
        return Err(Error::shape(format!(
            "{} expects {} input channels, got {c}",
            spec.role, spec.input_channels
        )));
    }
    let mut cursor = Cursor { params, pos: 0 };
    let mut x = input;
    for layer in &spec.layers {
        let pad = layer.pad_width();
        x = match layer.kind {
            LayerKind::ResidualBlock => {
                let h = conv_unit(g, &mut cursor, x, layer.kind, 1, pad, layer.padding, layer.norm)?;
                let h = g.relu(h)?;
                let h = conv_unit(g, &mut cursor, h, layer.kind, 1, pad, layer.padding, layer.norm)?;
                g.add(x, h)?
            }
            _ => {
                let y = conv_unit(
                    g,
                    &mut cursor,
                    x,
                    layer.kind,
                    layer.stride,
                    pad,
                    layer.padding,
                    layer.norm,
                )?;
                match layer.activation {
                    Some(act) => g.activation(y, act)?,
                    None => y,
                }
            }
        };
    }
    if cursor.pos != params.len() {
        return Err(Error::shape(format!(
            "network consumed {} of {} parameter tensors",
            cursor.pos,
            params.len()
        )));
    }
    Ok(x)
}

/// The two translators and two discriminators trained together.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    /// X → Y.
    pub g: Network,
    /// Y → X.
    pub f: Network,
    /// Judges domain X.
    pub d_x: Network,
    /// Judges domain Y.
    pub d_y: Network,
    pub seed: u64,
}

impl ModelState {
    pub fn new(generator: NetworkSpec, discriminator: NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelState {
            g: Network::initialized(generator.clone(), &mut rng),
            f: Network::initialized(generator, &mut rng),
            d_x: Network::initialized(discriminator.clone(), &mut rng),
            d_y: Network::initialized(discriminator, &mut rng),
            seed,
        }
    }

    pub fn networks(&self) -> [(&'static str, &Network); 4] {
        [("G", &self.g), ("F", &self.f), ("D_X", &self.d_x), ("D_Y", &self.d_y)]
    }

    pub fn networks_mut(&mut self) -> [(&'static str, &mut Network); 4] {
        [
            ("G", &mut self.g),
            ("F", &mut self.f),
            ("D_X", &mut self.d_x),
            ("D_Y", &mut self.d_y),
        ]
    }
}

/// Re-draws every parameter of `model` from `seed`.
pub fn init_weights(model: ModelState, seed: u64) -> ModelState {
    ModelState::new(model.g.spec, model.d_x.spec, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::spec::{build_discriminator_with, build_generator_with, GeneratorOptions};
    use crate::networks::parse_layer_spec;
    use crate::networks::spec::Role;

    fn small_gen(res: usize, blocks: usize) -> NetworkSpec {
        build_generator_with(
            res,
            GeneratorOptions {
                base_filters: 4,
                residual_blocks: Some(blocks),
                channels: 3,
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_zero_image() {
        let spec = small_gen(16, 1);
        let mut net = Network::initialized(spec, &mut ChaCha8Rng::seed_from_u64(0));
        for p in &mut net.params {
            p.data_mut().fill(0.0);
        }
        let x = Tensor::from_fn(vec![1, 3, 16, 16], |i| ((i % 7) as f32 - 3.0) / 3.0);
        let y = net.infer(&x).unwrap();
        assert_eq!(y.shape(), &[1, 3, 16, 16]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zeroed_residual_block_is_identity() {
        let spec = NetworkSpec {
            role: Role::Generator,
            input_channels: 4,
            layers: vec![parse_layer_spec("R4").unwrap()],
        };
        let mut net = Network::initialized(spec, &mut ChaCha8Rng::seed_from_u64(1));
        for (shape, p) in net.param_shapes().iter().zip(&mut net.params) {
            if shape.name.contains(".conv") {
                p.data_mut().fill(0.0);
            }
        }
        let x = Tensor::from_fn(vec![1, 4, 5, 5], |i| (i as f32 * 0.37).sin());
        let y = net.infer(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn generator_keeps_shape_and_range() {
        let net = Network::initialized(small_gen(64, 2), &mut ChaCha8Rng::seed_from_u64(3));
        let x = Tensor::from_fn(vec![2, 3, 64, 64], |i| ((i * 31 % 17) as f32 / 8.0) - 1.0);
        let y = net.infer(&x).unwrap();
        assert_eq!(y.shape(), &[2, 3, 64, 64]);
        assert!(y.data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn discriminator_outputs_patch_map() {
        let d = build_discriminator_with(4, 3).unwrap();
        let net = Network::initialized(d, &mut ChaCha8Rng::seed_from_u64(4));
        let y = net.infer(&Tensor::zeros(vec![1, 3, 70, 70])).unwrap();
        assert_eq!(y.shape(), &[1, 1, 6, 6]);
        let y = net.infer(&Tensor::zeros(vec![1, 3, 128, 128])).unwrap();
        assert_eq!(y.shape(), &[1, 1, 14, 14]);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let net = Network::initialized(small_gen(16, 1), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(
            net.infer(&Tensor::zeros(vec![1, 1, 16, 16])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let a = ModelState::new(small_gen(16, 1), build_discriminator_with(4, 3).unwrap(), 9);
        let b = init_weights(a.clone(), 9);
        assert_eq!(a, b);
        let c = init_weights(a.clone(), 10);
        assert_ne!(a.g.params[0], c.g.params[0]);
        for (_, net) in a.networks() {
            for (s, p) in net.param_shapes().iter().zip(&net.params) {
                match s.kind {
                    ParamKind::Bias | ParamKind::NormShift => {
                        assert!(p.data().iter().all(|&v| v == 0.0))
                    }
                    ParamKind::NormScale => assert!(p.data().iter().all(|&v| v == 1.0)),
                    ParamKind::Kernel => {}
                }
            }
        }
    }

    #[test]
    fn from_parts_checks_shapes() {
        let net = Network::initialized(small_gen(16, 1), &mut ChaCha8Rng::seed_from_u64(0));
        let mut params = net.params.clone();
        assert!(Network::from_parts(net.spec.clone(), params.clone()).is_ok());
        params[0] = Tensor::zeros(vec![1]);
        assert!(Network::from_parts(net.spec.clone(), params).is_err());
    }
}
