use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::datasets::SyntheticKind;
use crate::error::{Error, Result};
use crate::objectives::Variant;
use crate::trainer::TrainingConfig;

/// Where the two domains come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Generated domains with a known oracle; the eval split is drawn from
    /// the same generator after the training images.
    Synthetic {
        kind: SyntheticKind,
        n_train: usize,
        n_eval: usize,
        seed: u64,
    },
    /// PNG directories; eval directories are optional.
    Directories {
        train_x: PathBuf,
        train_y: PathBuf,
        eval_x: Option<PathBuf>,
        eval_y: Option<PathBuf>,
    },
}

/// A parsed run configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub training: TrainingConfig,
    pub data: DataSource,
    pub output_dir: PathBuf,
    /// Checkpoint evaluated by `eval`, or resumed from by `train`.
    pub checkpoint: Option<PathBuf>,
    pub triptychs: usize,
}

/// `(key, default, meaning)` for every accepted configuration key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("output_dir", "(required)", "directory for checkpoints, CSVs and reports"),
    ("variant", "full", "full | gan_only | cycle_only | gan_forward | gan_backward"),
    ("lambda", "10", "cycle-consistency weight"),
    ("lambda_identity", "0", "identity-loss weight (0 disables)"),
    ("lr", "0.0002", "initial Adam learning rate"),
    ("epochs_constant", "100", "epochs at the initial learning rate"),
    ("epochs_decay", "100", "epochs of linear decay to zero"),
    ("buffer_size", "50", "replay buffer capacity (0 disables)"),
    ("adam_beta1", "0.5", "Adam first-moment decay"),
    ("adam_beta2", "0.999", "Adam second-moment decay"),
    ("adam_eps", "1e-8", "Adam denominator epsilon"),
    ("seed", "0", "initialization, data-order and buffer seed"),
    ("resolution", "128", "square image size"),
    ("residual_blocks", "auto", "generator residual blocks (auto: 6 below 256, else 9)"),
    ("base_filters", "64", "generator base width"),
    ("disc_filters", "64", "discriminator base width"),
    ("generator", "(built-in)", "custom generator layer notation"),
    ("discriminator", "(built-in)", "custom discriminator layer notation"),
    ("checkpoint_every", "0", "checkpoint cadence in epochs (0: final only)"),
    ("checkpoint", "(none)", "checkpoint to evaluate, or to resume training from"),
    ("synthetic", "(none)", "invert | channel_perm | affine_intensity[:a:b] | shift[:k]"),
    ("synthetic_train", "64", "synthetic training images per domain"),
    ("synthetic_eval", "16", "synthetic held-out images per domain"),
    ("data_seed", "0", "seed of the synthetic scene generator"),
    ("train_x", "(none)", "PNG directory of domain X"),
    ("train_y", "(none)", "PNG directory of domain Y"),
    ("eval_x", "(none)", "held-out PNG directory of domain X"),
    ("eval_y", "(none)", "held-out PNG directory of domain Y"),
    ("triptychs", "4", "number of [x | G(x) | F(G(x))] strips to export"),
];

/// Help text listing every key with its default.
pub fn keys_help() -> String {
    let mut s = String::from("Configuration keys (`key = value`, `#` starts a comment):\n");
    for (k, d, m) in KEYS {
        let _ = writeln!(s, "  {k:<18} {d:<12} {m}");
    }
    s
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| cfg_err(line, format!("`{key}` expects a number, got `{v}`")))
}

fn positive_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(line, key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(cfg_err(line, format!("`{key}` must be positive, got {v}")));
    }
    Ok(x)
}

fn non_negative_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(line, key, v)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(cfg_err(line, format!("`{key}` must be non-negative, got {v}")));
    }
    Ok(x)
}

fn unit_interval(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(line, key, v)?;
    if !(0.0..1.0).contains(&x) {
        return Err(cfg_err(line, format!("`{key}` must lie in [0, 1), got {v}")));
    }
    Ok(x)
}

fn positive_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    let x: usize = num(line, key, v)?;
    if x == 0 {
        return Err(cfg_err(line, format!("`{key}` must be at least 1")));
    }
    Ok(x)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // relative paths resolve against the config file's directory
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(c) = &mut self.checkpoint {
            fix(c);
        }
        if let DataSource::Directories { train_x, train_y, eval_x, eval_y } = &mut self.data {
            fix(train_x);
            fix(train_y);
            eval_x.iter_mut().for_each(fix);
            eval_y.iter_mut().for_each(fix);
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut t = TrainingConfig::default();
        let mut seen = HashSet::new();
        let mut output_dir = None;
        let mut checkpoint = None;
        let mut triptychs = 4;
        let mut synthetic: Option<(SyntheticKind, usize)> = None;
        let (mut n_train, mut n_eval, mut data_seed) = (64, 16, 0u64);
        let mut dirs: [Option<(PathBuf, usize)>; 4] = Default::default();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(cfg_err(line, format!("expected `key = value`, got `{content}`")));
            };
            let (key, v) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(cfg_err(line, format!("unknown key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(cfg_err(line, format!("duplicate key `{key}`")));
            }
            if v.is_empty() {
                return Err(cfg_err(line, format!("`{key}` has no value")));
            }
            match key {
                "output_dir" => output_dir = Some(PathBuf::from(v)),
                "variant" => {
                    t.variant = v.parse::<Variant>().map_err(|e| cfg_err(line, e.to_string()))?
                }
                "lambda" => t.lambda = non_negative_f64(line, key, v)?,
                "lambda_identity" => t.lambda_identity = non_negative_f64(line, key, v)?,
                "lr" => t.lr0 = positive_f64(line, key, v)?,
                "epochs_constant" => t.epochs_constant = num(line, key, v)?,
                "epochs_decay" => t.epochs_decay = num(line, key, v)?,
                "buffer_size" => t.buffer_capacity = num(line, key, v)?,
                "adam_beta1" => t.adam_beta1 = unit_interval(line, key, v)?,
                "adam_beta2" => t.adam_beta2 = unit_interval(line, key, v)?,
                "adam_eps" => t.adam_eps = positive_f64(line, key, v)?,
                "seed" => t.seed = num(line, key, v)?,
                "resolution" => {
                    let r = positive_usize(line, key, v)?;
                    if !r.is_multiple_of(4) || !(8..=256).contains(&r) {
                        return Err(cfg_err(
                            line,
                            format!("`resolution` must be a multiple of 4 in [8, 256], got {r}"),
                        ));
                    }
                    t.resolution = r;
                }
                "residual_blocks" => {
                    t.residual_blocks = if v == "auto" { None } else { Some(num(line, key, v)?) }
                }
                "base_filters" => t.base_filters = positive_usize(line, key, v)?,
                "disc_filters" => t.disc_filters = positive_usize(line, key, v)?,
                "generator" => t.generator = Some(v.to_string()),
                "discriminator" => t.discriminator = Some(v.to_string()),
                "checkpoint_every" => t.checkpoint_every = num(line, key, v)?,
                "checkpoint" => checkpoint = Some(PathBuf::from(v)),
                "synthetic" => {
                    let kind = v.parse().map_err(|e: Error| cfg_err(line, e.to_string()))?;
                    synthetic = Some((kind, line));
                }
                "synthetic_train" => n_train = positive_usize(line, key, v)?,
                "synthetic_eval" => n_eval = positive_usize(line, key, v)?,
                "data_seed" => data_seed = num(line, key, v)?,
                "train_x" => dirs[0] = Some((PathBuf::from(v), line)),
                "train_y" => dirs[1] = Some((PathBuf::from(v), line)),
                "eval_x" => dirs[2] = Some((PathBuf::from(v), line)),
                "eval_y" => dirs[3] = Some((PathBuf::from(v), line)),
                "triptychs" => triptychs = num(line, key, v)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }

        let output_dir = output_dir.ok_or_else(|| cfg_err(0, "missing required key `output_dir`"))?;
        let [train_x, train_y, eval_x, eval_y] = dirs;
        let data = match (synthetic, train_x, train_y) {
            (Some((kind, _)), None, None) => {
                if eval_x.is_some() || eval_y.is_some() {
                    let line = eval_x.as_ref().or(eval_y.as_ref()).unwrap().1;
                    return Err(cfg_err(line, "eval directories cannot be combined with `synthetic`"));
                }
                DataSource::Synthetic { kind, n_train, n_eval, seed: data_seed }
            }
            (Some((_, line)), _, _) => {
                return Err(cfg_err(line, "`synthetic` cannot be combined with `train_x`/`train_y`"))
            }
            (None, Some((x, _)), Some((y, _))) => {
                if eval_x.is_some() != eval_y.is_some() {
                    let line = eval_x.as_ref().or(eval_y.as_ref()).unwrap().1;
                    return Err(cfg_err(line, "`eval_x` and `eval_y` must be given together"));
                }
                DataSource::Directories {
                    train_x: x,
                    train_y: y,
                    eval_x: eval_x.map(|p| p.0),
                    eval_y: eval_y.map(|p| p.0),
                }
            }
            (None, Some((_, line)), None) | (None, None, Some((_, line))) => {
                return Err(cfg_err(line, "`train_x` and `train_y` must be given together"))
            }
            (None, None, None) => {
                return Err(cfg_err(0, "no data: set `synthetic` or `train_x` and `train_y`"))
            }
        };
        t.validate().map_err(|e| cfg_err(0, e.to_string()))?;
        Ok(RunConfig { training: t, data, output_dir, checkpoint, triptychs })
    }
}

/// Serializes the training hyperparameters as `key = value` lines that
/// [`training_from_text`] reads back exactly.
pub fn training_to_text(t: &TrainingConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("variant", t.variant.name().to_string());
    kv("lambda", format!("{:?}", t.lambda));
    kv("lambda_identity", format!("{:?}", t.lambda_identity));
    kv("lr", format!("{:?}", t.lr0));
    kv("epochs_constant", t.epochs_constant.to_string());
    kv("epochs_decay", t.epochs_decay.to_string());
    kv("buffer_size", t.buffer_capacity.to_string());
    kv("adam_beta1", format!("{:?}", t.adam_beta1));
    kv("adam_beta2", format!("{:?}", t.adam_beta2));
    kv("adam_eps", format!("{:?}", t.adam_eps));
    kv("seed", t.seed.to_string());
    kv("resolution", t.resolution.to_string());
    kv(
        "residual_blocks",
        t.residual_blocks.map_or("auto".to_string(), |r| r.to_string()),
    );
    kv("base_filters", t.base_filters.to_string());
    kv("disc_filters", t.disc_filters.to_string());
    if let Some(g) = &t.generator {
        kv("generator", g.clone());
    }
    if let Some(d) = &t.discriminator {
        kv("discriminator", d.clone());
    }
    kv("checkpoint_every", t.checkpoint_every.to_string());
    s
}

/// Reads [`training_to_text`] output.
pub fn training_from_text(text: &str) -> Result<TrainingConfig> {
    let with_data = format!("{text}output_dir = .\nsynthetic = invert\n");
    Ok(RunConfig::parse(&with_data)?.training)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "output_dir = out\nsynthetic = invert\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.training, TrainingConfig::default());
        assert_eq!(
            c.data,
            DataSource::Synthetic { kind: SyntheticKind::Invert, n_train: 64, n_eval: 16, seed: 0 }
        );
    }

    #[test]
    fn full_config_parses() {
        let text = "\
# desk run
output_dir = runs/a
variant = gan_only   # no cycle
lambda = 5
lambda_identity = 2.5
lr = 1e-3
epochs_constant = 2
epochs_decay = 3
buffer_size = 10
seed = 9
resolution = 32
residual_blocks = 2
base_filters = 8
disc_filters = 8
checkpoint_every = 1
synthetic = affine_intensity:0.5:0.25
synthetic_train = 8
synthetic_eval = 4
data_seed = 3
triptychs = 2
";
        let c = RunConfig::parse(text).unwrap();
        let t = &c.training;
        assert_eq!(t.variant, Variant::GanOnly);
        assert_eq!((t.lambda, t.lambda_identity, t.lr0), (5.0, 2.5, 1e-3));
        assert_eq!((t.epochs_constant, t.epochs_decay, t.buffer_capacity), (2, 3, 10));
        assert_eq!((t.resolution, t.residual_blocks, t.base_filters), (32, Some(2), 8));
        assert_eq!(c.triptychs, 2);
        assert_eq!(
            c.data,
            DataSource::Synthetic {
                kind: SyntheticKind::AffineIntensity { scale: 0.5, offset: 0.25 },
                n_train: 8,
                n_eval: 4,
                seed: 3
            }
        );
    }

    fn line_of(text: &str) -> usize {
        match RunConfig::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_offending_line() {
        assert_eq!(line_of("output_dir = o\nsynthetic = invert\nlamda = 3\n"), 3);
        assert_eq!(line_of("output_dir = o\nlr = -1\nsynthetic = invert\n"), 2);
        assert_eq!(line_of("output_dir = o\nsynthetic = invert\nresolution = 30\n"), 3);
        assert_eq!(line_of("synthetic = invert\nadam_beta1 = 1.5\noutput_dir = o\n"), 2);
        assert_eq!(line_of("output_dir = o\nsynthetic = invert\nseed = 1\nseed = 2\n"), 4);
        assert_eq!(line_of("output_dir = o\nsynthetic = mirror\n"), 2);
        assert_eq!(line_of("output_dir = o\njust words\n"), 2);
        assert_eq!(line_of("output_dir = o\ntrain_x = a\n"), 2);
        assert_eq!(line_of("output_dir = o\n"), 0);
    }

    #[test]
    fn training_text_round_trips_exactly() {
        let t = TrainingConfig {
            lambda: 0.1 + 0.2,
            lr0: 3.3e-4,
            residual_blocks: Some(2),
            resolution: 32,
            generator: Some("c7s1-8,d16,R16,u8,c7s1-3".into()),
            variant: Variant::GanBackward,
            ..Default::default()
        };
        assert_eq!(training_from_text(&training_to_text(&t)).unwrap(), t);
    }

    #[test]
    fn every_key_is_documented() {
        let help = keys_help();
        for (k, _, _) in KEYS {
            assert!(help.contains(k));
        }
    }
}
