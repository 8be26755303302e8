use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Activation;

/// Slope of the discriminator's leaky ReLUs.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// `c7s1-k`: 7×7 stride-1 convolution behind reflection padding.
    Conv7s1,
    /// `dk`: 3×3 stride-2 convolution.
    DownConv,
    /// `Rk`: two 3×3 convolutions with a skip connection.
    ResidualBlock,
    /// `uk`: 3×3 transposed convolution doubling the resolution.
    UpConv,
    /// `Ck`: 4×4 convolution with leaky ReLU.
    DiscConv,
    /// 4×4 convolution to one raw-valued channel closing a discriminator.
    FinalConv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    Instance,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Reflect,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub filters: usize,
    pub stride: usize,
    pub norm: Norm,
    pub activation: Option<Activation>,
    pub padding: Padding,
}

impl LayerSpec {
    pub fn kernel_size(&self) -> usize {
        match self.kind {
            LayerKind::Conv7s1 => 7,
            LayerKind::DownConv | LayerKind::ResidualBlock | LayerKind::UpConv => 3,
            LayerKind::DiscConv | LayerKind::FinalConv => 4,
        }
    }

    /// Padding width applied on every side (reflection or zero).
    pub fn pad_width(&self) -> usize {
        match self.kind {
            LayerKind::Conv7s1 => 3,
            _ => 1,
        }
    }

    pub fn final_conv() -> Self {
        LayerSpec {
            kind: LayerKind::FinalConv,
            filters: 1,
            stride: 1,
            norm: Norm::None,
            activation: None,
            padding: Padding::Zero,
        }
    }

    /// Grammar token for this layer. The implicit final discriminator conv
    /// has none.
    pub fn token(&self) -> Option<String> {
        let k = self.filters;
        match self.kind {
            LayerKind::Conv7s1 => Some(format!("c7s1-{k}")),
            LayerKind::DownConv => Some(format!("d{k}")),
            LayerKind::ResidualBlock => Some(format!("R{k}")),
            LayerKind::UpConv => Some(format!("u{k}")),
            LayerKind::DiscConv => Some(format!("C{k}")),
            LayerKind::FinalConv => None,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.token() {
            Some(t) => f.write_str(&t),
            None => f.write_str("final"),
        }
    }
}

fn filters(token: &str, digits: &str) -> Result<usize> {
    let ok = !digits.is_empty()
        && !digits.starts_with('0')
        && digits.bytes().all(|b| b.is_ascii_digit());
    match digits.parse::<usize>() {
        Ok(k) if ok && k > 0 => Ok(k),
        _ => Err(Error::LayerToken(token.to_string())),
    }
}

/// Parses one token of the `c7s1-k | dk | Rk | uk | Ck` layer grammar.
pub fn parse_layer_spec(token: &str) -> Result<LayerSpec> {
    let relu = Some(Activation::Relu);
    let spec = |kind, filters, stride, activation, padding| LayerSpec {
        kind,
        filters,
        stride,
        norm: Norm::Instance,
        activation,
        padding,
    };
    if let Some(rest) = token.strip_prefix("c7s1-") {
        return Ok(spec(LayerKind::Conv7s1, filters(token, rest)?, 1, relu, Padding::Reflect));
    }
    let mut chars = token.chars();
    let head = chars.next().ok_or_else(|| Error::LayerToken(token.to_string()))?;
    let rest = chars.as_str();
    match head {
        'd' => Ok(spec(LayerKind::DownConv, filters(token, rest)?, 2, relu, Padding::Zero)),
        'R' => Ok(spec(
            LayerKind::ResidualBlock,
            filters(token, rest)?,
            1,
            relu,
            Padding::Reflect,
        )),
        'u' => Ok(spec(LayerKind::UpConv, filters(token, rest)?, 2, relu, Padding::Zero)),
        'C' => Ok(spec(
            LayerKind::DiscConv,
            filters(token, rest)?,
            2,
            Some(Activation::LeakyRelu(LEAKY_SLOPE)),
            Padding::Zero,
        )),
        _ => Err(Error::LayerToken(token.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn c7s1_token() {
        let l = parse_layer_spec("c7s1-64").unwrap();
        assert_eq!(l.kind, LayerKind::Conv7s1);
        assert_eq!((l.filters, l.stride, l.kernel_size()), (64, 1, 7));
        assert_eq!(l.padding, Padding::Reflect);
        assert_eq!(l.norm, Norm::Instance);
        assert_eq!(l.activation, Some(Activation::Relu));
    }

    #[test]
    fn residual_token() {
        let l = parse_layer_spec("R256").unwrap();
        assert_eq!(l.kind, LayerKind::ResidualBlock);
        assert_eq!((l.filters, l.kernel_size()), (256, 3));
    }

    #[test]
    fn up_and_down_tokens() {
        let u = parse_layer_spec("u128").unwrap();
        assert_eq!(u.kind, LayerKind::UpConv);
        assert_eq!((u.filters, u.stride, u.norm), (128, 2, Norm::Instance));
        assert_eq!(u.activation, Some(Activation::Relu));
        let d = parse_layer_spec("d128").unwrap();
        assert_eq!((d.kind, d.stride, d.kernel_size()), (LayerKind::DownConv, 2, 3));
    }

    #[test]
    fn disc_token_is_leaky() {
        let c = parse_layer_spec("C64").unwrap();
        assert_eq!(c.activation, Some(Activation::LeakyRelu(0.2)));
        assert_eq!(c.kernel_size(), 4);
    }

    #[test]
    fn rejects_garbage_naming_token() {
        for bad in ["", "x64", "c7s1-", "c7s2-64", "d", "R0", "u-3", "C64x", "d+5", "c7s1-64 "] {
            match parse_layer_spec(bad) {
                Err(Error::LayerToken(t)) => assert_eq!(t, bad),
                other => panic!("{bad:?} parsed as {other:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn token_roundtrip(kind in 0usize..5, k in 1usize..4096) {
            let token = match kind {
                0 => format!("c7s1-{k}"),
                1 => format!("d{k}"),
                2 => format!("R{k}"),
                3 => format!("u{k}"),
                _ => format!("C{k}"),
            };
            let spec = parse_layer_spec(&token).unwrap();
            prop_assert_eq!(spec.filters, k);
            prop_assert_eq!(spec.token().unwrap(), token);
        }

        #[test]
        fn arbitrary_strings_never_panic(s in "\\PC{0,8}") {
            if let Ok(spec) = parse_layer_spec(&s) {
                prop_assert_eq!(spec.token().unwrap(), s);
            }
        }
    }
}
