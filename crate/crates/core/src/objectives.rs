//! Least-squares adversarial terms, cycle-consistency and identity losses,
//! and their weighted combination into the generator objective.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::{Element, Graph, Var};

/// Which loss terms a training run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    GanOnly,
    CycleOnly,
    GanForward,
    GanBackward,
}

impl Variant {
    /// Ablation order used for reports.
    pub const ALL: [Variant; 5] = [
        Variant::CycleOnly,
        Variant::GanOnly,
        Variant::GanForward,
        Variant::GanBackward,
        Variant::Full,
    ];

    pub fn uses_gan(self) -> bool {
        self != Variant::CycleOnly
    }

    /// `F(G(x)) ≈ x`
    pub fn forward_cycle(self) -> bool {
        matches!(self, Variant::Full | Variant::CycleOnly | Variant::GanForward)
    }

    /// `G(F(y)) ≈ y`
    pub fn backward_cycle(self) -> bool {
        matches!(self, Variant::Full | Variant::CycleOnly | Variant::GanBackward)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::GanOnly => "gan_only",
            Variant::CycleOnly => "cycle_only",
            Variant::GanForward => "gan_forward",
            Variant::GanBackward => "gan_backward",
        }
    }

    /// Row label of the loss ablation table.
    pub fn label(self) -> &'static str {
        match self {
            Variant::CycleOnly => "Cycle alone",
            Variant::GanOnly => "GAN alone",
            Variant::GanForward => "GAN + forward cycle",
            Variant::GanBackward => "GAN + backward cycle",
            Variant::Full => "CycleGAN",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown variant `{s}` (expected full, gan_only, cycle_only, gan_forward or gan_backward)"
                ))
            })
    }
}

/// Per-step loss values. Inactive terms are exactly 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    /// `G` against `D_Y`.
    pub gan_g: f64,
    /// `F` against `D_X`.
    pub gan_f: f64,
    /// Halved least-squares objective optimized by `D_X`.
    pub disc_x: f64,
    /// Halved least-squares objective optimized by `D_Y`.
    pub disc_y: f64,
    pub cyc: f64,
    pub idt: f64,
    pub total_gen: f64,
    pub lambda: f64,
    pub lambda_identity: f64,
}

impl LossBreakdown {
    /// `gan_g + gan_f + λ·cyc + λ_idt·idt`
    pub fn weighted_total(&self) -> f64 {
        self.gan_g + self.gan_f + self.lambda * self.cyc + self.lambda_identity * self.idt
    }

    pub fn components(&self) -> [(&'static str, f64); 7] {
        [
            ("gan_g", self.gan_g),
            ("gan_f", self.gan_f),
            ("disc_x", self.disc_x),
            ("disc_y", self.disc_y),
            ("cyc", self.cyc),
            ("idt", self.idt),
            ("total_gen", self.total_gen),
        ]
    }
}

/// `mean((D(G(x)) − 1)²)`
pub fn lsgan_generator_term<E: Element>(g: &mut Graph<E>, d_on_fake: Var) -> Result<Var> {
    let shifted = g.add_scalar(d_on_fake, -1.0)?;
    let sq = g.square(shifted)?;
    g.mean(sq)
}

/// `mean((D(y) − 1)²) + mean(D(G(x))²)`, without the ½ the trainer applies.
pub fn lsgan_discriminator_term<E: Element>(
    g: &mut Graph<E>,
    d_on_real: Var,
    d_on_fake: Var,
) -> Result<Var> {
    let real = lsgan_generator_term(g, d_on_real)?;
    let fake_sq = g.square(d_on_fake)?;
    let fake = g.mean(fake_sq)?;
    g.add(real, fake)
}

/// `|F(G(x)) − x|` mean.
pub fn forward_cycle_loss<E: Element>(g: &mut Graph<E>, x: Var, x_rec: Var) -> Result<Var> {
    g.l1_mean(x_rec, x)
}

/// `|G(F(y)) − y|` mean.
pub fn backward_cycle_loss<E: Element>(g: &mut Graph<E>, y: Var, y_rec: Var) -> Result<Var> {
    g.l1_mean(y_rec, y)
}

/// Forward plus backward cycle terms.
pub fn cycle_loss<E: Element>(
    g: &mut Graph<E>,
    x: Var,
    x_rec: Var,
    y: Var,
    y_rec: Var,
) -> Result<Var> {
    let fwd = forward_cycle_loss(g, x, x_rec)?;
    let bwd = backward_cycle_loss(g, y, y_rec)?;
    g.add(fwd, bwd)
}

/// `|G(y) − y|` mean plus `|F(x) − x|` mean.
pub fn identity_loss<E: Element>(
    g: &mut Graph<E>,
    g_of_y: Var,
    y: Var,
    f_of_x: Var,
    x: Var,
) -> Result<Var> {
    let a = g.l1_mean(g_of_y, y)?;
    let b = g.l1_mean(f_of_x, x)?;
    g.add(a, b)
}

/// The generator-side terms of one step; `None` marks an inactive term.
#[derive(Clone, Copy, Debug, Default)]
pub struct GeneratorTerms {
    pub gan_g: Option<Var>,
    pub gan_f: Option<Var>,
    pub cyc: Option<Var>,
    pub idt: Option<Var>,
}

/// `gan_g + gan_f + λ·cyc + λ_idt·idt` over the active terms.
pub fn total_generator_objective<E: Element>(
    g: &mut Graph<E>,
    terms: &GeneratorTerms,
    lambda: f64,
    lambda_identity: f64,
) -> Result<Var> {
    if !(lambda >= 0.0 && lambda_identity >= 0.0) {
        return Err(Error::invalid(format!(
            "loss weights must be non-negative (λ = {lambda}, λ_idt = {lambda_identity})"
        )));
    }
    let mut parts = Vec::with_capacity(4);
    parts.extend(terms.gan_g);
    parts.extend(terms.gan_f);
    if let Some(c) = terms.cyc {
        parts.push(g.scale(c, lambda)?);
    }
    if let Some(i) = terms.idt {
        parts.push(g.scale(i, lambda_identity)?);
    }
    let mut iter = parts.into_iter();
    let Some(mut total) = iter.next() else {
        return Err(Error::invalid("generator objective has no active terms"));
    };
    for p in iter {
        total = g.add(total, p)?;
    }
    Ok(total)
}
