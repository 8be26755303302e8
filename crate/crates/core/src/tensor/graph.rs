use super::conv::{
    conv2d_backward, conv2d_forward, conv_transpose2d_backward, conv_transpose2d_forward,
    plan_conv2d, plan_conv_transpose2d, ConvPlan,
};
use super::norm::{instance_norm_backward, instance_norm_forward, InstanceNormCache};
use super::pad::{reflection_pad_backward, reflection_pad_forward};
use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    fn apply<E: Element>(self, v: E) -> E {
        match self {
            Activation::Relu => {
                if v > E::zero() || v.is_nan() {
                    v
                } else {
                    E::zero()
                }
            }
            Activation::LeakyRelu(slope) => {
                if v > E::zero() {
                    v
                } else {
                    v * E::from_f64_lossy(slope)
                }
            }
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative given the input `x` and output `y`. ReLU kinks take slope 0.
    fn derivative<E: Element>(self, x: E, y: E) -> E {
        match self {
            Activation::Relu => {
                if x > E::zero() {
                    E::one()
                } else {
                    E::zero()
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > E::zero() {
                    E::one()
                } else {
                    E::from_f64_lossy(slope)
                }
            }
            Activation::Tanh => E::one() - y * y,
        }
    }
}

enum Op<E> {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        plan: ConvPlan,
    },
    ConvTranspose2d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        plan: ConvPlan,
    },
    InstanceNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        cache: InstanceNormCache<E>,
    },
    Activation {
        input: Var,
        kind: Activation,
    },
    ReflectionPad {
        input: Var,
        pad: usize,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, E),
    AddScalar(Var),
    Square(Var),
    Abs(Var),
    Mean(Var),
    Sum(Var),
    L1Mean(Var, Var),
    Map {
        input: Var,
        derivative: fn(E) -> E,
    },
}

struct Node<E> {
    value: Tensor<E>,
    grad: Option<Tensor<E>>,
    requires_grad: bool,
    op: Op<E>,
}

/// Append-only differentiation tape.
///
/// Nodes are stored in creation order, which is a topological order, so the
/// backward sweep is a single reverse pass visiting every node once.
pub struct Graph<E: Element = f32> {
    nodes: Vec<Node<E>>,
}

impl<E: Element> Default for Graph<E> {
    fn default() -> Self {
        Self::new()
    }
}

fn sign<E: Element>(v: E) -> E {
    if v > E::zero() {
        E::one()
    } else if v < E::zero() {
        -E::one()
    } else {
        E::zero()
    }
}

impl<E: Element> Graph<E> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf: receives a gradient on backward.
    pub fn param(&mut self, value: Tensor<E>) -> Var {
        self.leaf(value, true)
    }

    /// Constant leaf: no gradient flows into it.
    pub fn constant(&mut self, value: Tensor<E>) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor<E>, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn value(&self, var: Var) -> &Tensor<E> {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Gradient of the last `backward` target w.r.t. a leaf, if populated.
    pub fn grad(&self, var: Var) -> Option<&Tensor<E>> {
        self.nodes[var.0].grad.as_ref()
    }

    fn push(&mut self, value: Tensor<E>, requires_grad: bool, op: Op<E>) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn check(&self, var: Var) -> Result<()> {
        if var.0 >= self.nodes.len() {
            return Err(Error::Graph(format!("node {} does not belong to this graph", var.0)));
        }
        Ok(())
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        self.check(input)?;
        self.check(kernel)?;
        if let Some(b) = bias {
            self.check(b)?;
        }
        let (x, k) = (self.value(input), self.value(kernel));
        let b = bias.map(|b| self.value(b));
        let plan = plan_conv2d(x, k, b, stride, pad)?;
        let out = conv2d_forward(x, k, b, &plan);
        let mut deps = vec![input, kernel];
        deps.extend(bias);
        let rg = self.any_grad(&deps);
        Ok(self.push(
            out,
            rg,
            Op::Conv2d {
                input,
                kernel,
                bias,
                plan,
            },
        ))
    }

    /// Fractionally strided convolution; `kernel` is `[in, out, kh, kw]`.
    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
        output_pad: usize,
    ) -> Result<Var> {
        self.check(input)?;
        self.check(kernel)?;
        if let Some(b) = bias {
            self.check(b)?;
        }
        let (x, k) = (self.value(input), self.value(kernel));
        let b = bias.map(|b| self.value(b));
        let plan = plan_conv_transpose2d(x, k, b, stride, pad, output_pad)?;
        let out = conv_transpose2d_forward(x, k, b, &plan);
        let mut deps = vec![input, kernel];
        deps.extend(bias);
        let rg = self.any_grad(&deps);
        Ok(self.push(
            out,
            rg,
            Op::ConvTranspose2d {
                input,
                kernel,
                bias,
                plan,
            },
        ))
    }

    pub fn instance_norm(&mut self, input: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        for v in [input, gamma, beta] {
            self.check(v)?;
        }
        let (out, cache) = instance_norm_forward(
            self.value(input),
            self.value(gamma),
            self.value(beta),
            E::from_f64_lossy(eps),
        )?;
        let rg = self.any_grad(&[input, gamma, beta]);
        Ok(self.push(
            out,
            rg,
            Op::InstanceNorm {
                input,
                gamma,
                beta,
                cache,
            },
        ))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Result<Var> {
        self.check(input)?;
        if let Activation::LeakyRelu(slope) = kind {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(Error::invalid(format!("leaky relu slope {slope} not in (0, 1)")));
            }
        }
        let out = self.value(input).map(|v| kind.apply(v));
        let rg = self.any_grad(&[input]);
        Ok(self.push(out, rg, Op::Activation { input, kind }))
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        self.activation(input, Activation::Relu)
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Result<Var> {
        self.activation(input, Activation::LeakyRelu(slope))
    }

    pub fn tanh(&mut self, input: Var) -> Result<Var> {
        self.activation(input, Activation::Tanh)
    }

    pub fn reflection_pad(&mut self, input: Var, pad: usize) -> Result<Var> {
        self.check(input)?;
        let out = reflection_pad_forward(self.value(input), pad)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(out, rg, Op::ReflectionPad { input, pad }))
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(E, E) -> E) -> Result<Tensor<E>> {
        self.check(a)?;
        self.check(b)?;
        let (va, vb) = (self.value(a), self.value(b));
        va.ensure_same_shape(vb, name)?;
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(va.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, rg, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, rg, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, rg, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.check(a)?;
        let s = E::from_f64_lossy(factor);
        let out = self.value(a).map(|v| v * s);
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, rg, Op::Scale(a, s)))
    }

    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Result<Var> {
        self.check(a)?;
        let s = E::from_f64_lossy(offset);
        let out = self.value(a).map(|v| v + s);
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, rg, Op::AddScalar(a)))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).map(|v| v * v);
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, rg, Op::Square(a)))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).map(|v| v.abs());
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, rg, Op::Abs(a)))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let out = Tensor::scalar(self.value(a).mean());
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, rg, Op::Mean(a)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, rg, Op::Sum(a)))
    }

    /// Mean absolute difference over all elements.
    pub fn l1_mean(&mut self, a: Var, b: Var) -> Result<Var> {
        let diff = self.binary(a, b, "l1_mean", |x, y| (x - y).abs())?;
        let out = Tensor::scalar(diff.mean());
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, rg, Op::L1Mean(a, b)))
    }

    /// Elementwise map with a caller-supplied derivative.
    pub fn map(&mut self, a: Var, f: fn(E) -> E, derivative: fn(E) -> E) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).map(f);
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, rg, Op::Map { input: a, derivative }))
    }

    /// Reverse sweep from a scalar. Gradients of leaves accumulate; leaves
    /// that need a gradient but are unreachable from `loss` get zeros.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.check(loss)?;
        if !self.value(loss).is_scalar() {
            return Err(Error::Graph(format!(
                "backward needs a scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let seed = Tensor::full(self.value(loss).shape().to_vec(), E::one());
        accumulate(&mut self.nodes[loss.0].grad, seed);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(grad) = self.nodes[idx].grad.take() else {
                continue;
            };
            let contributions = self.local_grads(idx, &grad);
            for (var, g) in contributions {
                if self.nodes[var.0].requires_grad {
                    accumulate(&mut self.nodes[var.0].grad, g);
                }
            }
        }

        for node in &mut self.nodes {
            if node.requires_grad && matches!(node.op, Op::Leaf) && node.grad.is_none() {
                node.grad = Some(Tensor::zeros(node.value.shape().to_vec()));
            }
        }
        Ok(())
    }

    fn local_grads(&self, idx: usize, grad: &Tensor<E>) -> Vec<(Var, Tensor<E>)> {
        let node = &self.nodes[idx];
        let rg = |v: Var| self.nodes[v.0].requires_grad;
        let unary = |v: Var, f: &dyn Fn(usize, E) -> E| {
            let data = grad.data().iter().enumerate().map(|(i, &g)| f(i, g)).collect();
            (v, Tensor::new(grad.shape().to_vec(), data).unwrap())
        };
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::Conv2d {
                input,
                kernel,
                bias,
                plan,
            } => {
                let need = [rg(*input), rg(*kernel), bias.is_some_and(rg)];
                let g = conv2d_backward(self.value(*input), self.value(*kernel), grad, plan, need);
                collect_conv(*input, *kernel, *bias, g.input, g.kernel, g.bias)
            }
            Op::ConvTranspose2d {
                input,
                kernel,
                bias,
                plan,
            } => {
                let need = [rg(*input), rg(*kernel), bias.is_some_and(rg)];
                let g = conv_transpose2d_backward(
                    self.value(*input),
                    self.value(*kernel),
                    grad,
                    plan,
                    need,
                );
                collect_conv(*input, *kernel, *bias, g.input, g.kernel, g.bias)
            }
            Op::InstanceNorm {
                input,
                gamma,
                beta,
                cache,
            } => {
                let need = [rg(*input), rg(*gamma), rg(*beta)];
                let g = instance_norm_backward(
                    self.value(*input).shape(),
                    self.value(*gamma),
                    cache,
                    grad,
                    need,
                );
                [(*input, g.input), (*gamma, g.gamma), (*beta, g.beta)]
                    .into_iter()
                    .filter_map(|(v, t)| t.map(|t| (v, t)))
                    .collect()
            }
            Op::Activation { input, kind } => {
                let x = self.value(*input).data();
                let y = node.value.data();
                vec![unary(*input, &|i, g| g * kind.derivative(x[i], y[i]))]
            }
            Op::ReflectionPad { input, pad } => {
                let shape = self.value(*input).dims4().expect("padded input is 4-d");
                vec![(*input, reflection_pad_backward(shape, grad, *pad))]
            }
            Op::Add(a, b) => vec![(*a, grad.clone()), (*b, grad.clone())],
            Op::Sub(a, b) => vec![(*a, grad.clone()), (*b, grad.map(|g| -g))],
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                vec![unary(*a, &|i, g| g * vb[i]), unary(*b, &|i, g| g * va[i])]
            }
            Op::Scale(a, s) => vec![(*a, grad.map(|g| g * *s))],
            Op::AddScalar(a) => vec![(*a, grad.clone())],
            Op::Square(a) => {
                let x = self.value(*a).data();
                let two = E::one() + E::one();
                vec![unary(*a, &|i, g| g * two * x[i])]
            }
            Op::Abs(a) => {
                let x = self.value(*a).data();
                vec![unary(*a, &|i, g| g * sign(x[i]))]
            }
            Op::Mean(a) | Op::Sum(a) => {
                let va = self.value(*a);
                let scale = if matches!(node.op, Op::Mean(_)) {
                    E::one() / E::from_usize(va.numel()).unwrap()
                } else {
                    E::one()
                };
                vec![(*a, Tensor::full(va.shape().to_vec(), grad.item() * scale))]
            }
            Op::L1Mean(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let scale = grad.item() / E::from_usize(va.numel()).unwrap();
                let da: Vec<E> = va
                    .data()
                    .iter()
                    .zip(vb.data())
                    .map(|(&x, &y)| scale * sign(x - y))
                    .collect();
                let db: Vec<E> = da.iter().map(|&v| -v).collect();
                vec![
                    (*a, Tensor::new(va.shape().to_vec(), da).unwrap()),
                    (*b, Tensor::new(vb.shape().to_vec(), db).unwrap()),
                ]
            }
            Op::Map { input, derivative } => {
                let x = self.value(*input).data();
                vec![unary(*input, &|i, g| g * derivative(x[i]))]
            }
        }
    }
}

fn collect_conv<E>(
    input: Var,
    kernel: Var,
    bias: Option<Var>,
    gi: Option<Tensor<E>>,
    gk: Option<Tensor<E>>,
    gb: Option<Tensor<E>>,
) -> Vec<(Var, Tensor<E>)> {
    let mut out = Vec::with_capacity(3);
    if let Some(g) = gi {
        out.push((input, g));
    }
    if let Some(g) = gk {
        out.push((kernel, g));
    }
    if let (Some(b), Some(g)) = (bias, gb) {
        out.push((b, g));
    }
    out
}

fn accumulate<E: Element>(slot: &mut Option<Tensor<E>>, g: Tensor<E>) {
    match slot {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a = *a + *b;
            }
        }
        None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn conv2d_sums_window() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]));
        let k = g.constant(Tensor::full(vec![1, 1, 3, 3], 1.0));
        let b = g.constant(Tensor::zeros(vec![1]));
        let y = g.conv2d(x, k, Some(b), 1, 0).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 1, 1]);
        assert_eq!(g.value(y).item(), 45.0);
    }

    #[test]
    fn conv2d_delta_kernel_is_identity() {
        let mut g = Graph::<f64>::new();
        let data: Vec<f64> = (0..20).map(|v| v as f64 * 0.3 - 1.0).collect();
        let x = g.constant(t(&[1, 1, 4, 5], &data));
        let mut kd = vec![0.0; 9];
        kd[4] = 1.0;
        let k = g.constant(t(&[1, 1, 3, 3], &kd));
        let y = g.conv2d(x, k, None, 1, 1).unwrap();
        assert_eq!(g.value(y), g.value(x));
    }

    #[test]
    fn conv2d_stride_two_halves_resolution() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros(vec![1, 1, 128, 128]));
        let k = g.constant(Tensor::zeros(vec![1, 1, 3, 3]));
        let y = g.conv2d(x, k, None, 2, 1).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 64, 64]);
    }

    #[test]
    fn conv2d_rejects_channel_mismatch() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros(vec![1, 2, 4, 4]));
        let k = g.constant(Tensor::zeros(vec![1, 3, 3, 3]));
        assert!(matches!(g.conv2d(x, k, None, 1, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn transposed_conv_scatters_ones() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::full(vec![1, 1, 2, 2], 1.0));
        let k = g.constant(Tensor::full(vec![1, 1, 2, 2], 1.0));
        let y = g.conv_transpose2d(x, k, None, 2, 0, 0).unwrap();
        assert_eq!(g.value(y), &Tensor::full(vec![1, 1, 4, 4], 1.0));
    }

    #[test]
    fn transposed_conv_zero_input_gives_bias() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::zeros(vec![1, 2, 3, 3]));
        let k = g.constant(Tensor::full(vec![2, 2, 3, 3], 0.7));
        let b = g.constant(t(&[2], &[0.25, -1.5]));
        let y = g.conv_transpose2d(x, k, Some(b), 2, 1, 1).unwrap();
        let out = g.value(y);
        assert_eq!(out.shape(), &[1, 2, 6, 6]);
        assert!(out.data()[..36].iter().all(|&v| v == 0.25));
        assert!(out.data()[36..].iter().all(|&v| v == -1.5));
    }

    #[test]
    fn transposed_conv_rejects_bad_output_padding() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros(vec![1, 1, 4, 4]));
        let k = g.constant(Tensor::zeros(vec![1, 1, 3, 3]));
        assert!(g.conv_transpose2d(x, k, None, 2, 1, 2).is_err());
        assert!(g.conv_transpose2d(x, k, None, 2, 1, 1).is_ok());
    }

    #[test]
    fn instance_norm_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::full(vec![1, 1, 2, 2], 3.0));
        let gamma = g.constant(t(&[1], &[1.0]));
        let beta = g.constant(t(&[1], &[0.5]));
        let y = g.instance_norm(x, gamma, beta, 1e-5).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.5));

        let x = g.constant(t(&[1, 1, 1, 2], &[1.0, 3.0]));
        let beta0 = g.constant(t(&[1], &[0.0]));
        let y = g.instance_norm(x, gamma, beta0, 0.0).unwrap();
        assert_eq!(g.value(y).data(), &[-1.0, 1.0]);

        let gamma0 = g.constant(t(&[1], &[0.0]));
        let x = g.constant(t(&[1, 1, 1, 3], &[4.0, -2.0, 9.0]));
        let y = g.instance_norm(x, gamma0, beta, 1e-5).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn activation_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[3], &[-1.0, 5.0, 0.0]));
        let lr = g.leaky_relu(x, 0.2).unwrap();
        let r = g.relu(x).unwrap();
        let th = g.tanh(x).unwrap();
        assert_eq!(g.value(lr).data()[0], -0.2);
        assert_eq!(g.value(r).data()[1], 5.0);
        assert_eq!(g.value(th).data()[2], 0.0);
        assert!(g.leaky_relu(x, 1.5).is_err());
    }

    #[test]
    fn reflection_pad_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]));
        let p = g.reflection_pad(x, 1).unwrap();
        let v = g.value(p);
        assert_eq!(v.shape(), &[1, 1, 5, 5]);
        // the row holding the original first row
        assert_eq!(&v.data()[5..10], &[2., 1., 2., 3., 2.]);

        let p0 = g.reflection_pad(x, 0).unwrap();
        assert_eq!(g.value(p0), g.value(x));

        let c = g.constant(Tensor::full(vec![1, 1, 2, 2], 4.0));
        let pc = g.reflection_pad(c, 1).unwrap();
        assert_eq!(g.value(pc), &Tensor::full(vec![1, 1, 4, 4], 4.0));

        assert!(g.reflection_pad(x, 3).is_err());
    }

    #[test]
    fn l1_mean_examples() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(t(&[2], &[0.0, 1.0]));
        let b = g.constant(t(&[2], &[0.3, 0.9]));
        let l = g.l1_mean(a, b).unwrap();
        assert!((g.value(l).item() - 0.2).abs() < 1e-15);
        let l2 = g.l1_mean(b, a).unwrap();
        assert_eq!(g.value(l).item(), g.value(l2).item());
        let same = g.l1_mean(a, a).unwrap();
        assert_eq!(g.value(same).item(), 0.0);
        let c = g.constant(t(&[3], &[0.0; 3]));
        assert!(g.l1_mean(a, c).is_err());
    }

    #[test]
    fn backward_examples() {
        let mut g = Graph::<f64>::new();
        let w = g.param(t(&[3], &[0.5, -1.0, 2.0]));
        let x = g.constant(t(&[3], &[3.0, 4.0, -5.0]));
        let unused = g.param(t(&[2], &[1.0, 1.0]));
        let wx = g.mul(w, x).unwrap();
        let loss = g.sum(wx).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(w).unwrap().data(), &[3.0, 4.0, -5.0]);
        assert_eq!(g.grad(unused).unwrap().data(), &[0.0, 0.0]);
        assert!(g.grad(x).is_none());

        let mut g = Graph::<f64>::new();
        let w = g.param(t(&[2], &[2.0, -2.0]));
        let z = g.constant(Tensor::zeros(vec![2]));
        let loss = g.l1_mean(w, z).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(w).unwrap().data(), &[0.5, -0.5]);

        assert!(g.backward(w).is_err());
    }

    #[test]
    fn shared_node_gradients_add() {
        // loss = sum(w*w + w) → d/dw = 2w + 1
        let mut g = Graph::<f64>::new();
        let w = g.param(t(&[2], &[1.5, -0.25]));
        let sq = g.mul(w, w).unwrap();
        let s = g.add(sq, w).unwrap();
        let loss = g.sum(s).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(w).unwrap().data(), &[4.0, 0.5]);
    }
}
