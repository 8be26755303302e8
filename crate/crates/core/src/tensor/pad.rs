use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Mirror index without repeating the edge element: `-1 → 1`, `n → n-2`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

pub(crate) fn check_reflection_pad(shape: [usize; 4], pad: usize) -> Result<()> {
    let [_, _, h, w] = shape;
    if pad >= h.min(w) {
        return Err(Error::invalid(format!(
            "reflection pad {pad} must be smaller than the {h}×{w} spatial extent"
        )));
    }
    Ok(())
}

pub(crate) fn reflection_pad_forward<E: Element>(input: &Tensor<E>, pad: usize) -> Result<Tensor<E>> {
    let dims = input.dims4()?;
    check_reflection_pad(dims, pad)?;
    let [n, c, h, w] = dims;
    let (oh, ow) = (h + 2 * pad, w + 2 * pad);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in input.data().chunks(h * w) {
        for y in 0..oh {
            let sy = reflect(y as isize - pad as isize, h);
            let row = &plane[sy * w..(sy + 1) * w];
            for x in 0..ow {
                out.push(row[reflect(x as isize - pad as isize, w)]);
            }
        }
    }
    Tensor::new(vec![n, c, oh, ow], out)
}

pub(crate) fn reflection_pad_backward<E: Element>(
    input_shape: [usize; 4],
    grad_out: &Tensor<E>,
    pad: usize,
) -> Tensor<E> {
    let [n, c, h, w] = input_shape;
    let (oh, ow) = (h + 2 * pad, w + 2 * pad);
    let mut grad = vec![E::zero(); n * c * h * w];
    for (dst, src) in grad.chunks_mut(h * w).zip(grad_out.data().chunks(oh * ow)) {
        for y in 0..oh {
            let sy = reflect(y as isize - pad as isize, h);
            for x in 0..ow {
                let sx = reflect(x as isize - pad as isize, w);
                dst[sy * w + sx] = dst[sy * w + sx] + src[y * ow + x];
            }
        }
    }
    Tensor::new(vec![n, c, h, w], grad).expect("pad grad shape")
}
