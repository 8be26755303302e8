use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Values kept from the forward pass of instance normalization.
#[derive(Clone, Debug)]
pub(crate) struct InstanceNormCache<E> {
    pub xhat: Vec<E>,
    /// One `1/sqrt(σ² + eps)` per (sample, channel).
    pub inv_std: Vec<E>,
}

pub(crate) fn instance_norm_forward<E: Element>(
    input: &Tensor<E>,
    gamma: &Tensor<E>,
    beta: &Tensor<E>,
    eps: E,
) -> Result<(Tensor<E>, InstanceNormCache<E>)> {
    let [n, c, h, w] = input.dims4()?;
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::shape(format!(
            "instance_norm: gamma {:?} / beta {:?} must both be [{c}]",
            gamma.shape(),
            beta.shape()
        )));
    }
    let m = h * w;
    if m == 0 {
        return Err(Error::shape("instance_norm: empty spatial extent"));
    }
    let inv_m = E::one() / E::from_usize(m).unwrap();
    let mut out = vec![E::zero(); input.numel()];
    let mut xhat = vec![E::zero(); input.numel()];
    let mut inv_std = Vec::with_capacity(n * c);
    for (idx, plane) in input.data().chunks(m).enumerate() {
        let ch = idx % c;
        let mean = plane.iter().copied().sum::<E>() * inv_m;
        let var = plane
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<E>()
            * inv_m;
        let istd = E::one() / (var + eps).sqrt();
        inv_std.push(istd);
        let (g, b) = (gamma.data()[ch], beta.data()[ch]);
        let range = idx * m..(idx + 1) * m;
        for ((o, xh), &v) in out[range.clone()]
            .iter_mut()
            .zip(&mut xhat[range])
            .zip(plane)
        {
            *xh = (v - mean) * istd;
            *o = g * *xh + b;
        }
    }
    Ok((
        Tensor::new(input.shape().to_vec(), out)?,
        InstanceNormCache { xhat, inv_std },
    ))
}

pub(crate) struct InstanceNormGrads<E> {
    pub input: Option<Tensor<E>>,
    pub gamma: Option<Tensor<E>>,
    pub beta: Option<Tensor<E>>,
}

pub(crate) fn instance_norm_backward<E: Element>(
    input_shape: &[usize],
    gamma: &Tensor<E>,
    cache: &InstanceNormCache<E>,
    grad_out: &Tensor<E>,
    need: [bool; 3],
) -> InstanceNormGrads<E> {
    let c = input_shape[1];
    let m = input_shape[2] * input_shape[3];
    let m_e = E::from_usize(m).unwrap();
    let mut d_input = need[0].then(|| vec![E::zero(); grad_out.numel()]);
    let mut d_gamma = need[1].then(|| vec![E::zero(); c]);
    let mut d_beta = need[2].then(|| vec![E::zero(); c]);
    for (idx, dy) in grad_out.data().chunks(m).enumerate() {
        let ch = idx % c;
        let xhat = &cache.xhat[idx * m..(idx + 1) * m];
        let sum_dy: E = dy.iter().copied().sum();
        let sum_dy_xhat: E = dy.iter().zip(xhat).map(|(&a, &b)| a * b).sum();
        if let Some(db) = d_beta.as_mut() {
            db[ch] = db[ch] + sum_dy;
        }
        if let Some(dg) = d_gamma.as_mut() {
            dg[ch] = dg[ch] + sum_dy_xhat;
        }
        if let Some(dx) = d_input.as_mut() {
            // dx = γ/σ · (dy − mean(dy) − x̂·mean(dy·x̂))
            let scale = gamma.data()[ch] * cache.inv_std[idx] / m_e;
            for ((o, &g), &xh) in dx[idx * m..(idx + 1) * m].iter_mut().zip(dy).zip(xhat) {
                *o = scale * (m_e * g - sum_dy - xh * sum_dy_xhat);
            }
        }
    }
    InstanceNormGrads {
        input: d_input.map(|d| Tensor::new(input_shape.to_vec(), d).unwrap()),
        gamma: d_gamma.map(|d| Tensor::new(vec![c], d).unwrap()),
        beta: d_beta.map(|d| Tensor::new(vec![c], d).unwrap()),
    }
}
