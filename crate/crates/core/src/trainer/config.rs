use crate::error::{Error, Result};
use crate::networks::{
    build_discriminator_with, build_generator_with, GeneratorOptions, NetworkSpec, Role,
};
use crate::objectives::Variant;

/// Every hyperparameter of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    /// Weight of the cycle-consistency term.
    pub lambda: f64,
    /// Weight of the identity term; 0 disables it.
    pub lambda_identity: f64,
    pub lr0: f64,
    pub epochs_constant: usize,
    pub epochs_decay: usize,
    pub buffer_capacity: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub variant: Variant,
    pub resolution: usize,
    /// `None` uses the resolution default (6 below 256², 9 from 256² up).
    pub residual_blocks: Option<usize>,
    pub base_filters: usize,
    pub disc_filters: usize,
    /// Checkpoint cadence in epochs; 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
    /// Custom generator layer notation overriding the built-in layout.
    pub generator: Option<String>,
    /// Custom discriminator layer notation.
    pub discriminator: Option<String>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            lambda: 10.0,
            lambda_identity: 0.0,
            lr0: 2e-4,
            epochs_constant: 100,
            epochs_decay: 100,
            buffer_capacity: 50,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            variant: Variant::Full,
            resolution: 128,
            residual_blocks: None,
            base_filters: 64,
            disc_filters: 64,
            checkpoint_every: 0,
            generator: None,
            discriminator: None,
        }
    }
}

impl TrainingConfig {
    pub fn total_epochs(&self) -> usize {
        self.epochs_constant + self.epochs_decay
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return fail(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.lambda >= 0.0 && self.lambda_identity >= 0.0) {
            return fail("loss weights must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return fail("adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            return fail("adam_eps must be positive".into());
        }
        if self.total_epochs() == 0 {
            return fail("at least one epoch is required".into());
        }
        if self.base_filters == 0 || self.disc_filters == 0 {
            return fail("filter widths must be positive".into());
        }
        let active = self.variant.uses_gan()
            || (self.lambda > 0.0)
            || (self.lambda_identity > 0.0);
        if !active {
            return fail(format!("variant {} with λ = 0 has no loss terms", self.variant));
        }
        self.generator_spec()?;
        self.discriminator_spec()?;
        Ok(())
    }

    pub fn generator_spec(&self) -> Result<NetworkSpec> {
        let spec = match &self.generator {
            Some(notation) => NetworkSpec::parse(Role::Generator, 3, notation)?,
            None => build_generator_with(
                self.resolution,
                GeneratorOptions {
                    base_filters: self.base_filters,
                    residual_blocks: self.residual_blocks,
                    channels: 3,
                },
            )?,
        };
        let out = spec.output_size(self.resolution)?;
        if out != self.resolution {
            return Err(Error::invalid(format!(
                "generator maps {0}×{0} to {out}×{out}",
                self.resolution
            )));
        }
        Ok(spec)
    }

    pub fn discriminator_spec(&self) -> Result<NetworkSpec> {
        let spec = match &self.discriminator {
            Some(notation) => NetworkSpec::parse(Role::Discriminator, 3, notation)?,
            None => build_discriminator_with(self.disc_filters, 3)?,
        };
        spec.output_size(self.resolution)?;
        Ok(spec)
    }

    pub fn adam(&self) -> super::AdamParams {
        super::AdamParams {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}
