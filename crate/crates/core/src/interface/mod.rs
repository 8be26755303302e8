//! Configuration files, checkpoints and the command implementations behind
//! the `cyclegan` binary.

mod checkpoint;
mod commands;
mod config;
mod gradcheck;

pub use checkpoint::{
    load_checkpoint, load_model, model_record, read_record, save_checkpoint, trainer_from_record,
    trainer_record, CheckpointRecord, MAGIC, VERSION,
};
pub use commands::{
    cmd_ablate, cmd_eval, cmd_gradcheck, cmd_train, cmd_translate, load_splits, loss_csv,
    Direction, DirectorySink, GradCheckOutcome, Splits, LOSS_CSV_HEADER,
};
pub use config::{keys_help, training_from_text, training_to_text, DataSource, RunConfig, KEYS};
pub use gradcheck::{
    corrupted_backward_check, render_gradchecks, run_gradchecks, GradCheckRow, GRADCHECK_EPS,
    GRADCHECK_TOLERANCE, REGISTRY,
};
