use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::networks::{ModelState, NetworkSpec, Role};
use crate::objectives::{
    cycle_loss, identity_loss, lsgan_discriminator_term, lsgan_generator_term,
};
use crate::tensor::{gradient_check_sampled, Graph, Tensor, Var, INSTANCE_NORM_EPS};

/// Finite-difference step used by every registered check.
pub const GRADCHECK_EPS: f64 = 1e-5;
/// Largest accepted relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const PROBES: usize = 24;

type CheckFn = fn(u64) -> Result<f64>;

/// Values in ±[0.2, 1], away from the kinks of relu and abs.
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| {
        let m = rng.random_range(0.2..1.0);
        if rng.random_bool(0.5) { m } else { -m }
    })
}

/// Uniform values in `[−half_width, half_width]`.
fn spread(shape: &[usize], half_width: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-half_width..=half_width))
}

/// Reduces a tensor to a scalar with fixed random weights so that every
/// output coordinate carries a distinct gradient.
fn weighted_sum(g: &mut Graph<f64>, v: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let shape = g.value(v).shape().to_vec();
    let w = g.constant(Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)));
    let p = g.mul(v, w)?;
    g.sum(p)
}

fn check(
    seed: u64,
    inputs: Vec<Tensor<f64>>,
    f: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
) -> Result<f64> {
    let r = gradient_check_sampled(
        |g, v| {
            let out = f(g, v)?;
            if g.value(out).is_scalar() {
                Ok(out)
            } else {
                weighted_sum(g, out, seed)
            }
        },
        &inputs,
        GRADCHECK_EPS,
        PROBES,
        seed,
    )?;
    Ok(r.max_rel_error)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn conv2d(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let ins = vec![
        away_from_zero(&[2, 3, 6, 5], &mut r),
        away_from_zero(&[4, 3, 3, 3], &mut r),
        away_from_zero(&[4], &mut r),
    ];
    check(seed, ins, |g, v| g.conv2d(v[0], v[1], Some(v[2]), 1, 1))
}

fn conv2d_strided(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let ins = vec![away_from_zero(&[1, 2, 7, 7], &mut r), away_from_zero(&[3, 2, 4, 4], &mut r)];
    check(seed, ins, |g, v| g.conv2d(v[0], v[1], None, 2, 1))
}

fn conv_transpose2d(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let ins = vec![
        away_from_zero(&[1, 3, 4, 4], &mut r),
        away_from_zero(&[3, 2, 3, 3], &mut r),
        away_from_zero(&[2], &mut r),
    ];
    check(seed, ins, |g, v| g.conv_transpose2d(v[0], v[1], Some(v[2]), 2, 1, 1))
}

fn instance_norm(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let ins = vec![
        away_from_zero(&[2, 3, 4, 4], &mut r),
        away_from_zero(&[3], &mut r),
        away_from_zero(&[3], &mut r),
    ];
    check(seed, ins, |g, v| g.instance_norm(v[0], v[1], v[2], INSTANCE_NORM_EPS))
}

fn unary(seed: u64, f: fn(&mut Graph<f64>, Var) -> Result<Var>) -> Result<f64> {
    let ins = vec![away_from_zero(&[2, 2, 4, 4], &mut rng(seed))];
    check(seed, ins, move |g, v| f(g, v[0]))
}

fn binary(seed: u64, f: fn(&mut Graph<f64>, Var, Var) -> Result<Var>) -> Result<f64> {
    let mut r = rng(seed);
    let ins = vec![away_from_zero(&[2, 4, 4], &mut r), away_from_zero(&[2, 4, 4], &mut r)];
    check(seed, ins, move |g, v| f(g, v[0], v[1]))
}

fn l1_mean(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let a = away_from_zero(&[2, 4, 4], &mut r);
    // keep every difference clear of zero
    let b = a.map(|v| v + if v > 0.0 { -1.5 } else { 1.5 });
    check(seed, vec![a, b], |g, v| g.l1_mean(v[0], v[1]))
}

fn lsgan_generator(seed: u64) -> Result<f64> {
    check(seed, vec![away_from_zero(&[1, 1, 3, 3], &mut rng(seed))], |g, v| {
        lsgan_generator_term(g, v[0])
    })
}

fn lsgan_discriminator(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let ins = vec![away_from_zero(&[1, 1, 3, 3], &mut r), away_from_zero(&[1, 1, 3, 3], &mut r)];
    check(seed, ins, |g, v| lsgan_discriminator_term(g, v[0], v[1]))
}

fn shifted_pair(seed: u64) -> Vec<Tensor<f64>> {
    let mut r = rng(seed);
    let x = away_from_zero(&[1, 3, 4, 4], &mut r);
    let y = away_from_zero(&[1, 3, 4, 4], &mut r);
    let xr = x.map(|v| v + 0.5);
    let yr = y.map(|v| v - 0.5);
    vec![x, xr, y, yr]
}

fn cycle(seed: u64) -> Result<f64> {
    check(seed, shifted_pair(seed), |g, v| cycle_loss(g, v[0], v[1], v[2], v[3]))
}

fn identity(seed: u64) -> Result<f64> {
    check(seed, shifted_pair(seed), |g, v| identity_loss(g, v[1], v[0], v[3], v[2]))
}

/// True for a conv bias that feeds an instance norm of the same layer. Its
/// gradient is identically zero, so a finite difference only measures
/// rounding noise.
fn normalized_bias(name: &str, names: &[String]) -> bool {
    let Some(stem) = name.strip_suffix(".bias") else { return false };
    let Some((layer, conv)) = stem.rsplit_once('.') else { return false };
    let norm = conv.replacen("conv", "norm", 1);
    names.iter().any(|n| *n == format!("{layer}.{norm}.gamma"))
}

/// A reduced generator feeding a reduced discriminator at 24×24,
/// differentiated with respect to the input and every parameter whose
/// gradient is not structurally zero.
fn generator_discriminator(seed: u64) -> Result<f64> {
    let gen = NetworkSpec::parse(Role::Generator, 3, "c7s1-2,d4,R4,u2,c7s1-3")?;
    let disc = NetworkSpec::parse(Role::Discriminator, 3, "C2,C4")?;
    let model = ModelState::new(gen, disc, seed);
    let mut r = rng(seed);
    let input = spread(&[1, 3, 24, 24], 0.9, &mut r);
    let g_names: Vec<String> = model.g.param_shapes().into_iter().map(|s| s.name).collect();
    let d_names: Vec<String> = model.d_x.param_shapes().into_iter().map(|s| s.name).collect();
    let names: Vec<&String> = g_names.iter().chain(&d_names).collect();
    let mut all = Vec::new();
    // larger weights than the training init keep pre-activations well
    // away from the relu kinks relative to the probe step
    for p in model.g.params.iter().chain(&model.d_x.params) {
        let jitter = spread(p.shape(), 0.1, &mut r);
        let w = p.cast::<f64>().map(|w| w * 10.0);
        let data = w.data().iter().zip(jitter.data()).map(|(a, b)| a + b).collect();
        all.push(Tensor::new(p.shape().to_vec(), data)?);
    }
    let held: Vec<bool> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let group = if i < g_names.len() { &g_names } else { &d_names };
            normalized_bias(n, group)
        })
        .collect();
    let mut inputs = vec![input];
    inputs.extend(all.iter().zip(&held).filter(|(_, h)| !**h).map(|(t, _)| t.clone()));
    let ng = model.g.params.len();
    check(seed, inputs, |g, v| {
        let mut probed = v[1..].iter();
        let params: Vec<Var> = all
            .iter()
            .zip(&held)
            .map(|(t, &h)| if h { g.constant(t.clone()) } else { *probed.next().expect("probed") })
            .collect();
        let fake = crate::networks::forward(&model.g.spec, g, &params[..ng], v[0])?;
        let judged = crate::networks::forward(&model.d_x.spec, g, &params[ng..], fake)?;
        lsgan_generator_term(g, judged)
    })
}

/// Every op checked by `gradcheck`, each listed once.
pub const REGISTRY: &[(&str, CheckFn)] = &[
    ("conv2d", conv2d),
    ("conv2d_stride2", conv2d_strided),
    ("conv_transpose2d", conv_transpose2d),
    ("instance_norm", instance_norm),
    ("reflection_pad", |s| unary(s, |g, x| g.reflection_pad(x, 2))),
    ("relu", |s| unary(s, |g, x| g.relu(x))),
    ("leaky_relu", |s| unary(s, |g, x| g.leaky_relu(x, 0.2))),
    ("tanh", |s| unary(s, |g, x| g.tanh(x))),
    ("scale", |s| unary(s, |g, x| g.scale(x, -2.5))),
    ("add_scalar", |s| unary(s, |g, x| g.add_scalar(x, 0.75))),
    ("square", |s| unary(s, |g, x| g.square(x))),
    ("abs", |s| unary(s, |g, x| g.abs(x))),
    ("mean", |s| unary(s, |g, x| g.mean(x))),
    ("sum", |s| unary(s, |g, x| g.sum(x))),
    ("add", |s| binary(s, |g, a, b| g.add(a, b))),
    ("sub", |s| binary(s, |g, a, b| g.sub(a, b))),
    ("mul", |s| binary(s, |g, a, b| g.mul(a, b))),
    ("shared_node", |s| binary(s, |g, a, b| {
        let p = g.mul(a, b)?;
        let q = g.square(a)?;
        g.add(p, q)
    })),
    ("l1_mean", l1_mean),
    ("lsgan_generator", lsgan_generator),
    ("lsgan_discriminator", lsgan_discriminator),
    ("cycle_loss", cycle),
    ("identity_loss", identity),
    ("generator_discriminator", generator_discriminator),
];

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckRow {
    pub op: &'static str,
    pub max_rel_error: f64,
    pub seeds: usize,
}

impl GradCheckRow {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE
    }
}

/// Runs every registered check for each seed and keeps the worst error.
pub fn run_gradchecks(seeds: impl IntoIterator<Item = u64> + Clone) -> Result<Vec<GradCheckRow>> {
    REGISTRY
        .iter()
        .map(|&(op, f)| {
            let mut worst = 0.0f64;
            let mut n = 0;
            for s in seeds.clone() {
                worst = worst.max(f(s)?);
                n += 1;
            }
            Ok(GradCheckRow { op, max_rel_error: worst, seeds: n })
        })
        .collect()
}

/// A deliberately wrong backward (`d/dx x² = x`), used as a negative control.
pub fn corrupted_backward_check(seed: u64) -> Result<f64> {
    let ins = vec![away_from_zero(&[3, 4], &mut rng(seed))];
    check(seed, ins, |g, v| g.map(v[0], |x| x * x, |x| x))
}

pub fn render_gradchecks(rows: &[GradCheckRow]) -> String {
    let mut s = format!("{:<26} {:>14}  result\n", "op", "max rel error");
    for r in rows {
        s.push_str(&format!(
            "{:<26} {:>14.3e}  {}\n",
            r.op,
            r.max_rel_error,
            if r.passed() { "pass" } else { "FAIL" }
        ));
    }
    s
}
