//! Alternating optimization of the two generators and two discriminators.

mod adam;
mod buffer;
mod config;
mod rngstate;
mod schedule;
mod step;

use rand_chacha::ChaCha8Rng;

use crate::datasets::{epoch_pairs, DomainDataset};
use crate::error::{Error, Result};
use crate::networks::ModelState;
use crate::objectives::LossBreakdown;

pub use adam::{AdamParams, AdamState};
pub use buffer::ReplayBuffer;
pub use config::TrainingConfig;
pub use rngstate::{stream_rng, RngState};
pub use schedule::lr_at_epoch;
pub use step::{train_step, Buffers, Optimizers, StepPosition, StepSettings};

/// Stream ids carved out of the run seed.
const STREAM_DATA: u64 = 2;
const STREAM_BUFFER_X: u64 = 3;
const STREAM_BUFFER_Y: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub losses: LossBreakdown,
}

/// Receives the trainer at checkpoint boundaries.
pub trait CheckpointSink {
    fn save(&mut self, trainer: &Trainer) -> Result<()>;
}

/// A sink that discards checkpoints.
pub struct NoCheckpoints;

impl CheckpointSink for NoCheckpoints {
    fn save(&mut self, _: &Trainer) -> Result<()> {
        Ok(())
    }
}

/// Full resumable training state.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainingConfig,
    pub model: ModelState,
    pub optimizers: Optimizers,
    pub buffers: Buffers,
    pub data_rng: ChaCha8Rng,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed steps.
    pub step: usize,
    pub history: Vec<StepRecord>,
}

impl Trainer {
    pub fn new(config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        let model = ModelState::new(config.generator_spec()?, config.discriminator_spec()?, config.seed);
        let cap = config.buffer_capacity;
        Ok(Trainer {
            optimizers: Optimizers::new(&model),
            buffers: Buffers {
                x: ReplayBuffer::new(cap, stream_rng(config.seed, STREAM_BUFFER_X)),
                y: ReplayBuffer::new(cap, stream_rng(config.seed, STREAM_BUFFER_Y)),
            },
            data_rng: stream_rng(config.seed, STREAM_DATA),
            model,
            config,
            epoch: 0,
            step: 0,
            history: Vec::new(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.total_epochs()
    }

    pub fn settings(&self) -> StepSettings {
        StepSettings {
            variant: self.config.variant,
            lambda: self.config.lambda,
            lambda_identity: self.config.lambda_identity,
            adam: self.config.adam(),
        }
    }

    fn check_data(&self, dx: &DomainDataset, dy: &DomainDataset) -> Result<()> {
        if dx.is_empty() || dy.is_empty() {
            return Err(Error::Dataset("both domains need at least one image".into()));
        }
        let r = self.config.resolution;
        if dx.resolution != r || dy.resolution != r {
            return Err(Error::Dataset(format!(
                "domains are {}² and {}² but training expects {r}²",
                dx.resolution, dy.resolution
            )));
        }
        Ok(())
    }

    /// Runs one epoch of `min(|X|, |Y|)` steps.
    pub fn run_epoch(&mut self, dx: &DomainDataset, dy: &DomainDataset) -> Result<()> {
        self.check_data(dx, dy)?;
        if self.is_finished() {
            return Err(Error::invalid("training schedule already complete"));
        }
        let c = &self.config;
        let lr = lr_at_epoch(self.epoch, c.lr0, c.epochs_constant, c.epochs_decay)?;
        let settings = self.settings();
        for (i, j) in epoch_pairs(dx.len(), dy.len(), &mut self.data_rng) {
            let at = StepPosition { step: self.step, epoch: self.epoch };
            let losses = train_step(
                &mut self.model,
                dx.get(i),
                dy.get(j),
                &mut self.buffers,
                &mut self.optimizers,
                lr,
                settings,
                at,
            )?;
            log::debug!("step {} epoch {} total_gen {:.5}", self.step, self.epoch, losses.total_gen);
            self.history.push(StepRecord { step: self.step, epoch: self.epoch, lr, losses });
            self.step += 1;
        }
        self.epoch += 1;
        Ok(())
    }

    /// Trains until `stop_epoch` epochs are complete, handing the state to
    /// `sink` at each checkpoint boundary and at the end of the schedule.
    pub fn train_until(
        &mut self,
        dx: &DomainDataset,
        dy: &DomainDataset,
        stop_epoch: usize,
        sink: &mut dyn CheckpointSink,
    ) -> Result<()> {
        let stop = stop_epoch.min(self.config.total_epochs());
        while self.epoch < stop {
            self.run_epoch(dx, dy)?;
            let every = self.config.checkpoint_every;
            if (every > 0 && self.epoch % every == 0) || self.is_finished() {
                sink.save(self)?;
            }
        }
        Ok(())
    }

    pub fn train(
        &mut self,
        dx: &DomainDataset,
        dy: &DomainDataset,
        sink: &mut dyn CheckpointSink,
    ) -> Result<()> {
        self.train_until(dx, dy, self.config.total_epochs(), sink)
    }
}

/// Trains a fresh model on `config` and returns the finished trainer.
pub fn train(config: TrainingConfig, dx: &DomainDataset, dy: &DomainDataset) -> Result<Trainer> {
    let mut t = Trainer::new(config)?;
    t.train(dx, dy, &mut NoCheckpoints)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{make_synthetic_pair, SyntheticKind};
    use crate::objectives::Variant;

    pub(crate) fn tiny_config(variant: Variant) -> TrainingConfig {
        TrainingConfig {
            resolution: 32,
            base_filters: 4,
            disc_filters: 4,
            residual_blocks: Some(1),
            epochs_constant: 1,
            epochs_decay: 1,
            buffer_capacity: 2,
            variant,
            seed: 5,
            ..Default::default()
        }
    }

    fn data(n: usize) -> (DomainDataset, DomainDataset) {
        let (dx, dy, _) = make_synthetic_pair(SyntheticKind::Invert, n, 32, 1).unwrap();
        (dx, dy)
    }

    #[test]
    fn runs_min_len_steps_per_epoch() {
        let (dx, dy) = data(4);
        let cfg = TrainingConfig { epochs_constant: 0, epochs_decay: 2, ..tiny_config(Variant::Full) };
        let t = train(cfg, &dx, &dy.take(3)).unwrap();
        assert_eq!(t.step, 6);
        assert_eq!(t.history.len(), 6);
        assert!(t.history.iter().all(|r| r.losses.total_gen.is_finite()));
        assert_eq!(t.history[0].lr, 2e-4);
        assert_eq!(t.history[3].lr, 1e-4);
    }

    #[test]
    fn total_matches_weighted_sum_and_inactive_terms_are_zero() {
        let (dx, dy) = data(2);
        for variant in Variant::ALL {
            let mut cfg = tiny_config(variant);
            cfg.lambda_identity = 0.5;
            let t = train(cfg, &dx, &dy).unwrap();
            for r in &t.history {
                let l = r.losses;
                assert!((l.total_gen - l.weighted_total()).abs() < 1e-4 * l.total_gen.abs().max(1.0));
                if !variant.uses_gan() {
                    assert_eq!((l.gan_g, l.gan_f, l.disc_x, l.disc_y), (0.0, 0.0, 0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn cycle_only_leaves_discriminators_untouched() {
        let (dx, dy) = data(2);
        let cfg = tiny_config(Variant::CycleOnly);
        let before = Trainer::new(cfg.clone()).unwrap().model;
        let after = train(cfg, &dx, &dy).unwrap().model;
        assert_eq!(before.d_x, after.d_x);
        assert_eq!(before.d_y, after.d_y);
        assert_ne!(before.g, after.g);
    }

    #[test]
    fn gan_variants_update_everything() {
        let (dx, dy) = data(2);
        let cfg = tiny_config(Variant::GanOnly);
        let before = Trainer::new(cfg.clone()).unwrap().model;
        let after = train(cfg, &dx, &dy).unwrap().model;
        for ((_, a), (_, b)) in before.networks().into_iter().zip(after.networks()) {
            assert_ne!(a, b);
        }
    }

    #[test]
    fn deterministic_and_resumable() {
        let (dx, dy) = data(3);
        let cfg = tiny_config(Variant::Full);
        let a = train(cfg.clone(), &dx, &dy).unwrap();
        let mut b = Trainer::new(cfg).unwrap();
        b.train_until(&dx, &dy, 1, &mut NoCheckpoints).unwrap();
        let mut resumed = b.clone();
        resumed.train(&dx, &dy, &mut NoCheckpoints).unwrap();
        assert_eq!(a.history, resumed.history);
        assert_eq!(a.model, resumed.model);
    }

    #[test]
    fn non_finite_loss_aborts_with_context() {
        let (dx, dy) = data(2);
        let mut t = Trainer::new(tiny_config(Variant::Full)).unwrap();
        t.model.g.params[0].data_mut()[0] = f32::NAN;
        let err = t.run_epoch(&dx, &dy).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 0, epoch: 0, .. }), "{err}");
    }

    struct Recorder(Vec<usize>);
    impl CheckpointSink for Recorder {
        fn save(&mut self, t: &Trainer) -> Result<()> {
            self.0.push(t.epoch);
            Ok(())
        }
    }

    #[test]
    fn checkpoint_cadence() {
        let (dx, dy) = data(1);
        let mut cfg = tiny_config(Variant::CycleOnly);
        cfg.epochs_constant = 3;
        cfg.epochs_decay = 2;
        cfg.checkpoint_every = 2;
        let mut t = Trainer::new(cfg).unwrap();
        let mut rec = Recorder(vec![]);
        t.train(&dx, &dy, &mut rec).unwrap();
        assert_eq!(rec.0, vec![2, 4, 5]);
    }
}
