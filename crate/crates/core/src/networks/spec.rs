use std::fmt;
use std::str::FromStr;

use super::layer::{parse_layer_spec, LayerKind, LayerSpec, Norm};
use crate::error::{Error, Result};
use crate::tensor::Activation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Generator,
    Discriminator,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Generator => "generator",
            Role::Discriminator => "discriminator",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generator" => Ok(Role::Generator),
            "discriminator" => Ok(Role::Discriminator),
            _ => Err(Error::invalid(format!("unknown network role `{s}`"))),
        }
    }
}

/// Ordered layer chain plus the conventions implied by its role.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub role: Role,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

/// Shape of one learnable tensor of a layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamShape {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Kernel,
    Bias,
    NormScale,
    NormShift,
}

/// Desk-scale knobs for the generator; the defaults give the full-size network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorOptions {
    pub base_filters: usize,
    /// `None` picks 6 blocks below 256×256 and 9 from 256×256 up.
    pub residual_blocks: Option<usize>,
    pub channels: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            base_filters: 64,
            residual_blocks: None,
            channels: 3,
        }
    }
}

pub fn default_residual_blocks(resolution: usize) -> usize {
    if resolution >= 256 {
        9
    } else {
        6
    }
}

/// Full-width generator for `resolution`×`resolution` images.
pub fn build_generator(resolution: usize) -> Result<NetworkSpec> {
    build_generator_with(resolution, GeneratorOptions::default())
}

pub fn build_generator_with(resolution: usize, opts: GeneratorOptions) -> Result<NetworkSpec> {
    if !resolution.is_multiple_of(4) || resolution < 8 {
        return Err(Error::invalid(format!(
            "generator resolution {resolution} must be a multiple of 4 and at least 8"
        )));
    }
    if opts.base_filters == 0 || opts.channels == 0 {
        return Err(Error::invalid("generator widths must be positive"));
    }
    let k = opts.base_filters;
    let blocks = opts
        .residual_blocks
        .unwrap_or_else(|| default_residual_blocks(resolution));
    let mut tokens = vec![format!("c7s1-{k}"), format!("d{}", 2 * k), format!("d{}", 4 * k)];
    tokens.extend((0..blocks).map(|_| format!("R{}", 4 * k)));
    tokens.extend([format!("u{}", 2 * k), format!("u{k}"), format!("c7s1-{}", opts.channels)]);
    NetworkSpec::from_tokens(Role::Generator, opts.channels, &tokens)
}

/// The 70×70 PatchGAN: `C64-C128-C256-C512` plus a 1-channel output conv.
pub fn build_discriminator() -> NetworkSpec {
    build_discriminator_with(64, 3).expect("default discriminator is valid")
}

pub fn build_discriminator_with(base_filters: usize, channels: usize) -> Result<NetworkSpec> {
    let k = base_filters;
    let tokens = [k, 2 * k, 4 * k, 8 * k].map(|f| format!("C{f}"));
    NetworkSpec::from_tokens(Role::Discriminator, channels, &tokens)
}

impl NetworkSpec {
    /// Builds a network from grammar tokens, applying role conventions:
    /// a generator's last `c7s1` layer has no norm and a tanh output; a
    /// discriminator's first `Ck` has no norm, its last `Ck` has stride 1,
    /// and a final 1-channel conv is appended.
    pub fn from_tokens<S: AsRef<str>>(
        role: Role,
        input_channels: usize,
        tokens: &[S],
    ) -> Result<Self> {
        let mut layers = tokens
            .iter()
            .map(|t| parse_layer_spec(t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        if layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        if input_channels == 0 {
            return Err(Error::invalid("network needs at least one input channel"));
        }
        match role {
            Role::Generator => {
                if layers.iter().any(|l| l.kind == LayerKind::DiscConv) {
                    return Err(Error::invalid("generator cannot contain C layers"));
                }
                let last = layers.last_mut().unwrap();
                if last.kind != LayerKind::Conv7s1 {
                    return Err(Error::invalid("generator must end with a c7s1 layer"));
                }
                last.norm = Norm::None;
                last.activation = Some(Activation::Tanh);
            }
            Role::Discriminator => {
                if layers.iter().any(|l| l.kind != LayerKind::DiscConv) {
                    return Err(Error::invalid("discriminator accepts only C layers"));
                }
                layers[0].norm = Norm::None;
                layers.last_mut().unwrap().stride = 1;
                layers.push(LayerSpec::final_conv());
            }
        }
        Ok(NetworkSpec {
            role,
            input_channels,
            layers,
        })
    }

    /// Comma-separated layer notation, e.g. `c7s1-64,d128,...`.
    pub fn notation(&self) -> String {
        self.layers
            .iter()
            .filter_map(LayerSpec::token)
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses layer notation. Commas separate tokens; `C64-C128-...` style
    /// hyphen chains are also accepted.
    pub fn parse(role: Role, input_channels: usize, notation: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for chunk in notation.split(',').map(str::trim) {
            if chunk.starts_with("c7s1-") {
                tokens.push(chunk.to_string());
            } else {
                tokens.extend(chunk.split('-').map(|t| t.trim().to_string()));
            }
        }
        Self::from_tokens(role, input_channels, &tokens)
    }

    /// `role:channels:notation`, as stored in checkpoints.
    pub fn descriptor(&self) -> String {
        format!("{}:{}:{}", self.role, self.input_channels, self.notation())
    }

    pub fn from_descriptor(text: &str) -> Result<Self> {
        let mut parts = text.splitn(3, ':');
        let (Some(role), Some(ch), Some(notation)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::invalid(format!("malformed network descriptor `{text}`")));
        };
        let ch = ch
            .parse()
            .map_err(|_| Error::invalid(format!("bad channel count in `{text}`")))?;
        Self::parse(role.parse()?, ch, notation)
    }

    pub fn output_channels(&self) -> usize {
        self.layers.last().map_or(self.input_channels, |l| l.filters)
    }

    pub fn residual_blocks(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.kind == LayerKind::ResidualBlock)
            .count()
    }

    /// Learnable tensors in the order `forward` consumes them.
    pub fn param_shapes(&self) -> Vec<ParamShape> {
        let mut out = Vec::new();
        let mut in_ch = self.input_channels;
        let push = |out: &mut Vec<ParamShape>, name: String, shape: Vec<usize>, kind| {
            out.push(ParamShape { name, shape, kind })
        };
        for (i, layer) in self.layers.iter().enumerate() {
            let k = layer.kernel_size();
            let f = layer.filters;
            let conv = |out: &mut Vec<ParamShape>, tag: &str, shape: Vec<usize>, norm: bool| {
                push(out, format!("{i}.{tag}.weight"), shape, ParamKind::Kernel);
                push(out, format!("{i}.{tag}.bias"), vec![f], ParamKind::Bias);
                if norm {
                    let n = tag.replace("conv", "norm");
                    push(out, format!("{i}.{n}.gamma"), vec![f], ParamKind::NormScale);
                    push(out, format!("{i}.{n}.beta"), vec![f], ParamKind::NormShift);
                }
            };
            let norm = layer.norm == Norm::Instance;
            match layer.kind {
                LayerKind::ResidualBlock => {
                    conv(&mut out, "conv1", vec![f, in_ch, k, k], norm);
                    conv(&mut out, "conv2", vec![f, f, k, k], norm);
                }
                LayerKind::UpConv => conv(&mut out, "conv", vec![in_ch, f, k, k], norm),
                _ => conv(&mut out, "conv", vec![f, in_ch, k, k], norm),
            }
            in_ch = f;
        }
        out
    }

    /// Output spatial size for a square input, if every layer fits.
    pub fn output_size(&self, input: usize) -> Result<usize> {
        use crate::tensor::{conv2d_output_size, conv_transpose2d_output_size};
        let mut size = input;
        for layer in &self.layers {
            let k = layer.kernel_size();
            let p = layer.pad_width();
            if layer.padding == super::layer::Padding::Reflect && p >= size {
                return Err(Error::shape(format!(
                    "{layer}: reflection pad {p} does not fit a {size}×{size} map"
                )));
            }
            let next = match layer.kind {
                LayerKind::UpConv => conv_transpose2d_output_size(size, k, layer.stride, p, 1),
                LayerKind::ResidualBlock => Some(size),
                _ => conv2d_output_size(size, k, layer.stride, p),
            };
            size = next.ok_or_else(|| {
                Error::shape(format!("{layer}: input {size}×{size} too small"))
            })?;
        }
        Ok(size)
    }
}

/// Input extent seen by one output element of a pure convolution chain.
pub fn receptive_field(spec: &NetworkSpec) -> Result<usize> {
    if let Some(l) = spec
        .layers
        .iter()
        .find(|l| matches!(l.kind, LayerKind::ResidualBlock | LayerKind::UpConv))
    {
        return Err(Error::invalid(format!(
            "receptive field needs a plain convolution chain; `{l}` is not one"
        )));
    }
    Ok(spec
        .layers
        .iter()
        .rev()
        .fold(1, |r, l| (r - 1) * l.stride + l.kernel_size()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::layer::Padding;

    #[test]
    fn generator_128_has_six_blocks() {
        let g = build_generator(128).unwrap();
        assert_eq!(g.residual_blocks(), 6);
        assert_eq!(
            g.notation(),
            "c7s1-64,d128,d256,R256,R256,R256,R256,R256,R256,u128,u64,c7s1-3"
        );
        let last = g.layers.last().unwrap();
        assert_eq!(last.activation, Some(Activation::Tanh));
        assert_eq!(last.norm, Norm::None);
    }

    #[test]
    fn generator_256_has_nine_blocks() {
        assert_eq!(build_generator(256).unwrap().residual_blocks(), 9);
        assert_eq!(build_generator(512).unwrap().residual_blocks(), 9);
    }

    #[test]
    fn generator_rejects_odd_resolution() {
        assert!(build_generator(130).is_err());
        assert!(build_generator(4).is_err());
    }

    #[test]
    fn generator_preserves_size() {
        for r in [8, 32, 64, 128, 256] {
            assert_eq!(build_generator(r).unwrap().output_size(r).unwrap(), r);
        }
    }

    #[test]
    fn discriminator_layout() {
        let d = build_discriminator();
        assert_eq!(d.layers.len(), 5);
        assert_eq!(d.layers[0].norm, Norm::None);
        for l in &d.layers[..4] {
            assert_eq!(l.activation, Some(Activation::LeakyRelu(0.2)));
            assert_eq!(l.kernel_size(), 4);
        }
        for l in &d.layers[1..4] {
            assert_eq!(l.norm, Norm::Instance);
        }
        assert_eq!(
            d.layers.iter().map(|l| l.stride).collect::<Vec<_>>(),
            vec![2, 2, 2, 1, 1]
        );
        let last = d.layers[4];
        assert_eq!((last.filters, last.activation, last.norm), (1, None, Norm::None));
        assert_eq!(d.output_channels(), 1);
        assert_eq!(d.notation(), "C64,C128,C256,C512");
    }

    #[test]
    fn discriminator_patch_map_sizes() {
        let d = build_discriminator();
        assert_eq!(d.output_size(70).unwrap(), 6);
        assert_eq!(d.output_size(128).unwrap(), 14);
        assert_eq!(d.output_size(32).unwrap(), 2);
    }

    #[test]
    fn receptive_fields() {
        assert_eq!(receptive_field(&build_discriminator()).unwrap(), 70);
        let one = NetworkSpec {
            role: Role::Discriminator,
            input_channels: 3,
            layers: vec![parse_layer_spec("C8").unwrap()],
        };
        assert_eq!(receptive_field(&one).unwrap(), 4);
        let two = NetworkSpec {
            layers: vec![parse_layer_spec("C8").unwrap(), parse_layer_spec("C8").unwrap()],
            ..one
        };
        assert_eq!(receptive_field(&two).unwrap(), 10);
        assert!(receptive_field(&build_generator(128).unwrap()).is_err());
    }

    #[test]
    fn notation_and_descriptor_roundtrip() {
        let g = build_generator_with(
            32,
            GeneratorOptions {
                base_filters: 8,
                residual_blocks: Some(2),
                channels: 3,
            },
        )
        .unwrap();
        assert_eq!(NetworkSpec::from_descriptor(&g.descriptor()).unwrap(), g);
        let d = build_discriminator_with(16, 3).unwrap();
        assert_eq!(NetworkSpec::from_descriptor(&d.descriptor()).unwrap(), d);
        let hyphen = NetworkSpec::parse(Role::Discriminator, 3, "C64-C128-C256-C512").unwrap();
        assert_eq!(hyphen, build_discriminator());
    }

    #[test]
    fn param_shapes_follow_layers() {
        let g = build_generator_with(
            16,
            GeneratorOptions {
                base_filters: 4,
                residual_blocks: Some(1),
                channels: 3,
            },
        )
        .unwrap();
        let shapes = g.param_shapes();
        assert_eq!(shapes[0].name, "0.conv.weight");
        assert_eq!(shapes[0].shape, vec![4, 3, 7, 7]);
        let up = shapes.iter().find(|p| p.name == "4.conv.weight").unwrap();
        assert_eq!(up.shape, vec![16, 8, 3, 3]);
        // last layer: no norm tensors
        assert_eq!(shapes.last().unwrap().name, "6.conv.bias");
        assert_eq!(g.layers[3].padding, Padding::Reflect);
        assert!(shapes.iter().any(|p| p.name == "3.norm2.beta"));
    }

    #[test]
    fn role_rules_are_enforced() {
        assert!(NetworkSpec::parse(Role::Generator, 3, "c7s1-8,d16,C4").is_err());
        assert!(NetworkSpec::parse(Role::Generator, 3, "c7s1-8,d16").is_err());
        assert!(NetworkSpec::parse(Role::Discriminator, 3, "C8,d16").is_err());
        assert!(matches!(
            NetworkSpec::parse(Role::Generator, 3, "c7s1-8,q3,c7s1-3"),
            Err(Error::LayerToken(t)) if t == "q3"
        ));
    }
}
