use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cyclegan::interface::{
    cmd_ablate, cmd_eval, cmd_gradcheck, cmd_train, cmd_translate, keys_help, Direction,
};
use cyclegan::Result;

/// Environment variable read for the log filter, e.g. `CYCLEGAN_LOG=debug`.
const LOG_ENV: &str = "CYCLEGAN_LOG";

#[derive(Parser)]
#[command(name = "cyclegan", version, about = "Unpaired image-to-image translation with cycle-consistent adversarial networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or resume) a model described by a config file.
    #[command(after_long_help = keys_help())]
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Translate every PNG of a directory with a trained checkpoint.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input_dir: PathBuf,
        #[arg(long, value_parser = ["x2y", "y2x"])]
        direction: String,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Score a checkpoint on the held-out images and export triptychs.
    #[command(after_long_help = keys_help())]
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train and score every loss variant on the same data and seed.
    #[command(after_long_help = keys_help())]
    Ablate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Finite-difference check of every differentiable op.
    Gradcheck,
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Train { config } => {
            let t = cmd_train(&config)?;
            println!("trained {} epochs, {} steps", t.epoch, t.step);
        }
        Command::Translate { checkpoint, input_dir, direction, output_dir } => {
            let dir: Direction = direction.parse()?;
            let written = cmd_translate(&checkpoint, &input_dir, dir, &output_dir)?;
            println!("wrote {} images to {}", written.len(), output_dir.display());
        }
        Command::Eval { config } => print!("{}", cmd_eval(&config)?.to_text()),
        Command::Ablate { config } => print!("{}", cmd_ablate(&config)?.to_text()),
        Command::Gradcheck => {
            let outcome = cmd_gradcheck()?;
            print!("{}", outcome.table);
            return Ok(outcome.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: gradient check above tolerance");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
