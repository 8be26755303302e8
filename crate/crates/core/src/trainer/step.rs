use super::{AdamParams, AdamState, ReplayBuffer};
use crate::error::{Error, Result};
use crate::networks::{ModelState, Network};
use crate::objectives::{
    backward_cycle_loss, forward_cycle_loss, identity_loss, lsgan_discriminator_term,
    lsgan_generator_term, total_generator_objective, GeneratorTerms, LossBreakdown, Variant,
};
use crate::tensor::{Graph, Tensor, Var};

/// One Adam state per network.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizers {
    pub g: AdamState,
    pub f: AdamState,
    pub d_x: AdamState,
    pub d_y: AdamState,
}

impl Optimizers {
    pub fn new(model: &ModelState) -> Self {
        Optimizers {
            g: AdamState::new(&model.g.params),
            f: AdamState::new(&model.f.params),
            d_x: AdamState::new(&model.d_x.params),
            d_y: AdamState::new(&model.d_y.params),
        }
    }
}

/// Replay buffers: `x` holds generated X images `F(y)`, `y` holds `G(x)`.
#[derive(Clone, Debug)]
pub struct Buffers {
    pub x: ReplayBuffer,
    pub y: ReplayBuffer,
}

/// Settings that stay fixed across steps.
#[derive(Clone, Copy, Debug)]
pub struct StepSettings {
    pub variant: Variant,
    pub lambda: f64,
    pub lambda_identity: f64,
    pub adam: AdamParams,
}

/// Where the step sits in the run, for diagnostics.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepPosition {
    pub step: usize,
    pub epoch: usize,
}

fn finite(g: &Graph<f32>, v: Option<Var>, term: &'static str, at: StepPosition) -> Result<f64> {
    let Some(v) = v else { return Ok(0.0) };
    let value = g.value(v).item() as f64;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { term, value, step: at.step, epoch: at.epoch })
    }
}

fn update(
    net: &mut Network,
    adam: &mut AdamState,
    g: &Graph<f32>,
    vars: &[Var],
    lr: f64,
    hp: AdamParams,
) -> Result<()> {
    let grads: Vec<_> = vars.iter().map(|&v| g.grad(v)).collect();
    adam.step(&mut net.params, &grads, lr, hp)
}

/// One alternating update: both generators on the combined objective,
/// then `D_X`, then `D_Y` on half their least-squares objectives against
/// buffered fakes. Discriminators are untouched when the variant has no
/// adversarial terms.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    model: &mut ModelState,
    x: &Tensor<f32>,
    y: &Tensor<f32>,
    buffers: &mut Buffers,
    opt: &mut Optimizers,
    lr: f64,
    settings: StepSettings,
    at: StepPosition,
) -> Result<LossBreakdown> {
    let v = settings.variant;
    let mut out = LossBreakdown {
        lambda: settings.lambda,
        lambda_identity: settings.lambda_identity,
        ..Default::default()
    };

    let mut g = Graph::<f32>::new();
    let gp = model.g.bind(&mut g, true);
    let fp = model.f.bind(&mut g, true);
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let fake_y = if v.uses_gan() || v.forward_cycle() {
        Some(model.g.forward(&mut g, &gp, xv)?)
    } else {
        None
    };
    let fake_x = if v.uses_gan() || v.backward_cycle() {
        Some(model.f.forward(&mut g, &fp, yv)?)
    } else {
        None
    };

    let mut terms = GeneratorTerms::default();
    if v.uses_gan() {
        let dyp = model.d_y.bind(&mut g, false);
        let judged = model.d_y.forward(&mut g, &dyp, fake_y.unwrap())?;
        terms.gan_g = Some(lsgan_generator_term(&mut g, judged)?);
        let dxp = model.d_x.bind(&mut g, false);
        let judged = model.d_x.forward(&mut g, &dxp, fake_x.unwrap())?;
        terms.gan_f = Some(lsgan_generator_term(&mut g, judged)?);
    }
    let mut cyc = None;
    if v.forward_cycle() {
        let rec = model.f.forward(&mut g, &fp, fake_y.unwrap())?;
        cyc = Some(forward_cycle_loss(&mut g, xv, rec)?);
    }
    if v.backward_cycle() {
        let rec = model.g.forward(&mut g, &gp, fake_x.unwrap())?;
        let bwd = backward_cycle_loss(&mut g, yv, rec)?;
        cyc = Some(match cyc {
            Some(fwd) => g.add(fwd, bwd)?,
            None => bwd,
        });
    }
    terms.cyc = cyc;
    if settings.lambda_identity > 0.0 {
        let gy = model.g.forward(&mut g, &gp, yv)?;
        let fx = model.f.forward(&mut g, &fp, xv)?;
        terms.idt = Some(identity_loss(&mut g, gy, yv, fx, xv)?);
    }
    let total = total_generator_objective(&mut g, &terms, settings.lambda, settings.lambda_identity)?;

    out.gan_g = finite(&g, terms.gan_g, "gan_g", at)?;
    out.gan_f = finite(&g, terms.gan_f, "gan_f", at)?;
    out.cyc = finite(&g, terms.cyc, "cyc", at)?;
    out.idt = finite(&g, terms.idt, "idt", at)?;
    out.total_gen = finite(&g, Some(total), "total_gen", at)?;

    g.backward(total)?;
    update(&mut model.g, &mut opt.g, &g, &gp, lr, settings.adam)?;
    update(&mut model.f, &mut opt.f, &g, &fp, lr, settings.adam)?;
    if !v.uses_gan() {
        return Ok(out);
    }
    let fake_x = g.value(fake_x.unwrap()).clone();
    let fake_y = g.value(fake_y.unwrap()).clone();
    drop(g);

    let shown = buffers.x.exchange(fake_x);
    out.disc_x = discriminator_update(&mut model.d_x, &mut opt.d_x, x, shown, lr, settings.adam, "disc_x", at)?;
    let shown = buffers.y.exchange(fake_y);
    out.disc_y = discriminator_update(&mut model.d_y, &mut opt.d_y, y, shown, lr, settings.adam, "disc_y", at)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn discriminator_update(
    net: &mut Network,
    adam: &mut AdamState,
    real: &Tensor<f32>,
    fake: Tensor<f32>,
    lr: f64,
    hp: AdamParams,
    term: &'static str,
    at: StepPosition,
) -> Result<f64> {
    let mut g = Graph::<f32>::new();
    let p = net.bind(&mut g, true);
    let real = g.constant(real.clone());
    let fake = g.constant(fake);
    let on_real = net.forward(&mut g, &p, real)?;
    let on_fake = net.forward(&mut g, &p, fake)?;
    let full = lsgan_discriminator_term(&mut g, on_real, on_fake)?;
    let loss = g.scale(full, 0.5)?;
    let value = finite(&g, Some(loss), term, at)?;
    g.backward(loss)?;
    update(net, adam, &g, &p, lr, hp)?;
    Ok(value)
}
