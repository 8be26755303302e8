//! Central finite-difference verification of backward passes.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Gradients smaller than this are compared in absolute rather than
/// relative terms.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over all probed coordinates.
    pub max_rel_error: f64,
    /// Largest relative error per input tensor.
    pub per_input: Vec<f64>,
    pub probes: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares backward gradients of a scalar closure against central
/// differences at every coordinate of every input.
pub fn gradient_check<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let coords = inputs.iter().map(|t| (0..t.numel()).collect()).collect();
    check_coords(&f, inputs, eps, coords)
}

/// Like [`gradient_check`] but probes at most `probes_per_input` randomly
/// chosen coordinates of each input.
pub fn gradient_check_sampled<F>(
    f: F,
    inputs: &[Tensor<f64>],
    eps: f64,
    probes_per_input: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = inputs
        .iter()
        .map(|t| {
            if t.numel() <= probes_per_input {
                (0..t.numel()).collect()
            } else {
                let mut idx = sample(&mut rng, t.numel(), probes_per_input).into_vec();
                idx.sort_unstable();
                idx
            }
        })
        .collect();
    check_coords(&f, inputs, eps, coords)
}

fn evaluate<F>(f: &F, inputs: &[Tensor<f64>]) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    scalar_of(&g, out)
}

fn scalar_of(g: &Graph<f64>, out: Var) -> Result<f64> {
    let v = g.value(out);
    if !v.is_scalar() {
        return Err(Error::Graph(format!(
            "gradient check closure must return a scalar, got {:?}",
            v.shape()
        )));
    }
    Ok(v.item())
}

fn check_coords<F>(
    f: &F,
    inputs: &[Tensor<f64>],
    eps: f64,
    coords: Vec<Vec<usize>>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    scalar_of(&g, out)?;
    g.backward(out)?;
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .map(|&v| g.grad(v).cloned().expect("leaf grads are populated"))
        .collect();
    drop(g);

    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut per_input = vec![0.0f64; inputs.len()];
    let mut probes = 0;
    for (i, idxs) in coords.iter().enumerate() {
        for &j in idxs {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + eps;
            let plus = evaluate(f, &work)?;
            work[i].data_mut()[j] = orig - eps;
            let minus = evaluate(f, &work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(analytic[i].data()[j], numeric);
            per_input[i] = per_input[i].max(if err.is_nan() { f64::INFINITY } else { err });
            probes += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: per_input.iter().copied().fold(0.0, f64::max),
        per_input,
        probes,
    })
}
