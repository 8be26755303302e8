use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::datasets::{
    image_to_tensor, load_domain, make_synthetic_pair, read_png_dir, save_png, DomainDataset,
    SyntheticOracle,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, export_triptychs, run_ablation_with, AblationTable, EvalSet, MetricsReport};
use crate::fsutil::write_atomic;
use crate::trainer::{CheckpointSink, StepRecord, Trainer};

use super::checkpoint::{load_checkpoint, load_model, save_checkpoint};
use super::config::{DataSource, RunConfig};
use super::gradcheck::{render_gradchecks, run_gradchecks, GradCheckRow};

pub const LOSS_CSV_HEADER: &str = "step,epoch,lr,gan_g,gan_f,disc_x,disc_y,cyc,idt,total_gen";

/// Train and held-out splits of both domains.
pub struct Splits {
    pub train_x: DomainDataset,
    pub train_y: DomainDataset,
    pub eval: Option<(DomainDataset, DomainDataset)>,
    pub oracle: Option<SyntheticOracle>,
}

fn split(ds: &DomainDataset, at: usize) -> Result<(DomainDataset, DomainDataset)> {
    let part = |r: std::ops::Range<usize>| {
        DomainDataset::new(
            ds.samples()[r.clone()].to_vec(),
            ds.names()[r].to_vec(),
            ds.source.clone(),
            ds.resolution,
        )
    };
    Ok((part(0..at)?, part(at..ds.len())?))
}

/// Materializes the configured data. Synthetic eval images are drawn after
/// the training images, so the two sets never overlap.
pub fn load_splits(cfg: &RunConfig) -> Result<Splits> {
    let res = cfg.training.resolution;
    match &cfg.data {
        DataSource::Synthetic { kind, n_train, n_eval, seed } => {
            let (x, y, oracle) = make_synthetic_pair(*kind, n_train + n_eval, res, *seed)?;
            let (train_x, eval_x) = split(&x, *n_train)?;
            let (train_y, eval_y) = split(&y, *n_train)?;
            Ok(Splits { train_x, train_y, eval: Some((eval_x, eval_y)), oracle: Some(oracle) })
        }
        DataSource::Directories { train_x, train_y, eval_x, eval_y } => {
            let seed = cfg.training.seed;
            let eval = match (eval_x, eval_y) {
                (Some(ex), Some(ey)) => Some((load_domain(ex, res, seed)?, load_domain(ey, res, seed)?)),
                _ => None,
            };
            Ok(Splits {
                train_x: load_domain(train_x, res, seed)?,
                train_y: load_domain(train_y, res, seed)?,
                eval,
                oracle: None,
            })
        }
    }
}

pub fn loss_csv(history: &[StepRecord]) -> String {
    let mut s = String::with_capacity(64 * (history.len() + 1));
    s.push_str(LOSS_CSV_HEADER);
    s.push('\n');
    for r in history {
        let l = &r.losses;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.step, r.epoch, r.lr, l.gan_g, l.gan_f, l.disc_x, l.disc_y, l.cyc, l.idt, l.total_gen
        );
    }
    s
}

/// Writes `checkpoints/epoch_NNNN.cgck`, `checkpoints/latest.cgck` and the
/// loss CSV at each checkpoint boundary.
pub struct DirectorySink {
    pub dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl DirectorySink {
    pub fn new(dir: &Path) -> Self {
        DirectorySink { dir: dir.to_path_buf(), written: Vec::new() }
    }

    pub fn latest(dir: &Path) -> PathBuf {
        dir.join("checkpoints").join("latest.cgck")
    }
}

impl CheckpointSink for DirectorySink {
    fn save(&mut self, t: &Trainer) -> Result<()> {
        let path = self.dir.join("checkpoints").join(format!("epoch_{:04}.cgck", t.epoch));
        save_checkpoint(&path, t)?;
        save_checkpoint(&Self::latest(&self.dir), t)?;
        write_atomic(&self.dir.join("losses.csv"), loss_csv(&t.history).as_bytes())?;
        log::info!("checkpoint {}", path.display());
        self.written.push(path);
        Ok(())
    }
}

/// Trains per the config, resuming from `checkpoint` when one is set.
pub fn cmd_train(config_path: &Path) -> Result<Trainer> {
    let cfg = RunConfig::load(config_path)?;
    let data = load_splits(&cfg)?;
    let mut trainer = match &cfg.checkpoint {
        Some(path) => {
            let t = load_checkpoint(path)?;
            if t.config != cfg.training {
                return Err(Error::Config {
                    line: 0,
                    message: format!("{} was trained with a different configuration", path.display()),
                });
            }
            log::info!("resuming from {} at epoch {}", path.display(), t.epoch);
            t
        }
        None => Trainer::new(cfg.training.clone())?,
    };
    let mut sink = DirectorySink::new(&cfg.output_dir);
    let result = trainer.train(&data.train_x, &data.train_y, &mut sink);
    // keep whatever history exists, also when training aborted
    write_atomic(&cfg.output_dir.join("losses.csv"), loss_csv(&trainer.history).as_bytes())?;
    result?;
    Ok(trainer)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    X2Y,
    Y2X,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x2y" => Ok(Direction::X2Y),
            "y2x" => Ok(Direction::Y2X),
            _ => Err(Error::invalid(format!("direction must be x2y or y2x, got `{s}`"))),
        }
    }
}

impl Direction {
    pub fn suffix(self) -> &'static str {
        match self {
            Direction::X2Y => "x2y",
            Direction::Y2X => "y2x",
        }
    }
}

/// Applies `G` (x2y) or `F` (y2x) to every decodable image of `input_dir`
/// and returns the written paths.
pub fn cmd_translate(
    checkpoint: &Path,
    input_dir: &Path,
    direction: Direction,
    output_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let (model, resolution) = load_model(checkpoint)?;
    let (images, _) = read_png_dir(input_dir)?;
    if images.is_empty() {
        return Err(Error::Dataset(format!("no inputs: {} has no decodable images", input_dir.display())));
    }
    let net = match direction {
        Direction::X2Y => &model.g,
        Direction::Y2X => &model.f,
    };
    let mut written = Vec::with_capacity(images.len());
    for li in images {
        let (w, h) = li.image.dimensions();
        if let Some(r) = resolution {
            if (w as usize, h as usize) != (r, r) {
                return Err(Error::Shape(format!(
                    "{} is {w}×{h} but the checkpoint was trained on {r}×{r}",
                    li.name
                )));
            }
        }
        let out = net.infer(&image_to_tensor(&li.image))?;
        let stem = Path::new(&li.name)
            .file_stem()
            .map_or_else(|| li.name.clone(), |s| s.to_string_lossy().into_owned());
        let path = output_dir.join(format!("{stem}_{}.png", direction.suffix()));
        save_png(&path, &out)?;
        written.push(path);
    }
    Ok(written)
}

fn eval_sets(data: &Splits) -> Result<(DomainDataset, DomainDataset)> {
    match &data.eval {
        Some((x, y)) => Ok((x.clone(), y.clone())),
        None => {
            log::warn!("no held-out directories configured; evaluating on the training images");
            Ok((data.train_x.clone(), data.train_y.clone()))
        }
    }
}

/// Evaluates the configured checkpoint and writes `eval/metrics.txt`,
/// `eval/metrics.csv` and triptychs.
pub fn cmd_eval(config_path: &Path) -> Result<MetricsReport> {
    let cfg = RunConfig::load(config_path)?;
    let data = load_splits(&cfg)?;
    let ckpt = cfg.checkpoint.clone().unwrap_or_else(|| DirectorySink::latest(&cfg.output_dir));
    let (model, _) = load_model(&ckpt)?;
    let (ex, ey) = eval_sets(&data)?;
    let report = evaluate(&model, &ex, &ey, data.oracle.as_ref(), cfg.training.variant.name())?;
    let dir = cfg.output_dir.join("eval");
    write_atomic(&dir.join("metrics.txt"), report.to_text().as_bytes())?;
    write_atomic(&dir.join("metrics.csv"), report.to_csv().as_bytes())?;
    if cfg.triptychs > 0 {
        export_triptychs(&model, &ex, cfg.triptychs, &dir.join("triptychs"))?;
    }
    Ok(report)
}

/// Trains all five loss variants and writes `ablation/ablation.csv`,
/// `ablation/ablation.txt` and per-variant triptychs.
pub fn cmd_ablate(config_path: &Path) -> Result<AblationTable> {
    let cfg = RunConfig::load(config_path)?;
    let data = load_splits(&cfg)?;
    let (ex, ey) = eval_sets(&data)?;
    let dir = cfg.output_dir.join("ablation");
    let eval = EvalSet { x: &ex, y: &ey, oracle: data.oracle.as_ref() };
    let table = run_ablation_with(&cfg.training, &data.train_x, &data.train_y, &eval, &mut |variant, model| {
        if cfg.triptychs > 0 {
            export_triptychs(model, &ex, cfg.triptychs, &dir.join("triptychs").join(variant.name()))?;
        }
        Ok(())
    })?;
    write_atomic(&dir.join("ablation.csv"), table.to_csv().as_bytes())?;
    write_atomic(&dir.join("ablation.txt"), table.to_text().as_bytes())?;
    Ok(table)
}

pub struct GradCheckOutcome {
    pub rows: Vec<GradCheckRow>,
    pub table: String,
}

impl GradCheckOutcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(GradCheckRow::passed)
    }
}

/// Finite-difference checks of every registered op over ten seeds.
pub fn cmd_gradcheck() -> Result<GradCheckOutcome> {
    let rows = run_gradchecks(0..10)?;
    let table = render_gradchecks(&rows);
    Ok(GradCheckOutcome { rows, table })
}
