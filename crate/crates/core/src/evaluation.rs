//! Oracle-based translation metrics, the loss-variant ablation harness and
//! triptych export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::datasets::{save_png, DomainDataset, SyntheticOracle};
use crate::error::{Error, Result};
use crate::networks::ModelState;
use crate::objectives::Variant;
use crate::tensor::Tensor;
use crate::trainer::{train, TrainingConfig};

/// Held-out metrics of one trained model. Translation errors and the
/// identity baseline need a ground-truth oracle and are `None` without one.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub variant: String,
    pub n_eval: usize,
    /// Mean `|G(x) − T(x)|`.
    pub translation_error_xy: Option<f64>,
    /// Mean `|F(y) − T⁻¹(y)|`.
    pub translation_error_yx: Option<f64>,
    /// Mean `|F(G(x)) − x|`.
    pub cycle_error_x: f64,
    /// Mean `|G(F(y)) − y|`.
    pub cycle_error_y: f64,
    /// Mean `|x − T(x)|`, the error of doing nothing.
    pub identity_baseline: Option<f64>,
}

fn l1(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    a.ensure_same_shape(b, "l1")?;
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .sum();
    Ok(s / a.numel() as f64)
}

/// Evaluates `model` on the paired-by-index prefix of the held-out
/// domains, up to the shorter one's length.
pub fn evaluate(
    model: &ModelState,
    eval_x: &DomainDataset,
    eval_y: &DomainDataset,
    oracle: Option<&SyntheticOracle>,
    variant: &str,
) -> Result<MetricsReport> {
    evaluate_maps(|x| model.g.infer(x), |y| model.f.infer(y), eval_x, eval_y, oracle, variant)
}

/// [`evaluate`] for arbitrary `G` and `F`.
pub fn evaluate_maps<G, F>(
    g: G,
    f: F,
    eval_x: &DomainDataset,
    eval_y: &DomainDataset,
    oracle: Option<&SyntheticOracle>,
    variant: &str,
) -> Result<MetricsReport>
where
    G: Fn(&Tensor<f32>) -> Result<Tensor<f32>>,
    F: Fn(&Tensor<f32>) -> Result<Tensor<f32>>,
{
    let n = eval_x.len().min(eval_y.len());
    if n == 0 {
        return Err(Error::Dataset("evaluation needs at least one image per domain".into()));
    }
    let (mut t_xy, mut t_yx, mut c_x, mut c_y, mut base) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (x, y) = (eval_x.get(i), eval_y.get(i));
        let gx = g(x)?;
        let fy = f(y)?;
        c_x += l1(&f(&gx)?, x)?;
        c_y += l1(&g(&fy)?, y)?;
        if let Some(o) = oracle {
            let tx = o.forward(x)?;
            t_xy += l1(&gx, &tx)?;
            t_yx += l1(&fy, &o.inverse(y)?)?;
            base += l1(x, &tx)?;
        }
    }
    let m = n as f64;
    let with_oracle = |v: f64| oracle.map(|_| v / m);
    Ok(MetricsReport {
        variant: variant.to_string(),
        n_eval: n,
        translation_error_xy: with_oracle(t_xy),
        translation_error_yx: with_oracle(t_yx),
        cycle_error_x: c_x / m,
        cycle_error_y: c_y / m,
        identity_baseline: with_oracle(base),
    })
}

/// Mean over images and channels of `|mean(G(x)) − mean(T(x))|` per channel.
pub fn tint_shift(model: &ModelState, eval_x: &DomainDataset, oracle: &SyntheticOracle) -> Result<f64> {
    if eval_x.is_empty() {
        return Err(Error::Dataset("tint shift needs at least one image".into()));
    }
    let channel_means = |t: &Tensor<f32>| -> Result<Vec<f64>> {
        let [_, c, h, w] = t.dims4()?;
        Ok(t.data()
            .chunks(h * w)
            .take(c)
            .map(|p| p.iter().map(|&v| v as f64).sum::<f64>() / (h * w) as f64)
            .collect())
    };
    let mut total = 0.0;
    let mut count = 0usize;
    for x in eval_x.samples() {
        let a = channel_means(&model.g.infer(x)?)?;
        let b = channel_means(&oracle.forward(x)?)?;
        total += a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum::<f64>();
        count += a.len();
    }
    Ok(total / count as f64)
}

fn fmt_metric(v: f64) -> String {
    format!("{v:.6}")
}

impl MetricsReport {
    fn fields(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("variant", self.variant.clone()),
            ("n_eval", self.n_eval.to_string()),
        ];
        let optional = [
            ("translation_error_xy", self.translation_error_xy),
            ("translation_error_yx", self.translation_error_yx),
        ];
        out.extend(optional.iter().filter_map(|(k, v)| v.map(|v| (*k, fmt_metric(v)))));
        out.push(("cycle_error_x", fmt_metric(self.cycle_error_x)));
        out.push(("cycle_error_y", fmt_metric(self.cycle_error_y)));
        if let Some(b) = self.identity_baseline {
            out.push(("identity_baseline", fmt_metric(b)));
        }
        out
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        self.fields()
            .into_iter()
            .fold(String::new(), |mut s, (k, v)| {
                let _ = writeln!(s, "{k} = {v}");
                s
            })
    }

    pub fn csv_header(&self) -> String {
        self.fields().iter().map(|(k, _)| *k).collect::<Vec<_>>().join(",")
    }

    pub fn csv_row(&self) -> String {
        self.fields().into_iter().map(|(_, v)| v).collect::<Vec<_>>().join(",")
    }

    /// Header plus one row.
    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", self.csv_header(), self.csv_row())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    /// Metrics, or the reason the run aborted.
    pub outcome: std::result::Result<MetricsReport, String>,
}

/// One row per loss variant, in table order.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn report(&self, variant: Variant) -> Option<&MetricsReport> {
        self.rows
            .iter()
            .find(|r| r.variant == variant)
            .and_then(|r| r.outcome.as_ref().ok())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "variant,label,status,translation_error_xy,translation_error_yx,cycle_error_x,cycle_error_y,identity_baseline,n_eval\n",
        );
        let opt = |v: Option<f64>| v.map(fmt_metric).unwrap_or_default();
        for row in &self.rows {
            let v = row.variant;
            match &row.outcome {
                Ok(r) => {
                    let _ = writeln!(
                        s,
                        "{},{},ok,{},{},{},{},{},{}",
                        v.name(),
                        v.label(),
                        opt(r.translation_error_xy),
                        opt(r.translation_error_yx),
                        fmt_metric(r.cycle_error_x),
                        fmt_metric(r.cycle_error_y),
                        opt(r.identity_baseline),
                        r.n_eval
                    );
                }
                Err(_) => {
                    let _ = writeln!(s, "{},{},failed,,,,,,", v.name(), v.label());
                }
            }
        }
        s
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<22} {:>10} {:>10} {:>10} {:>10}\n",
            "variant", "trans_xy", "trans_yx", "cycle_x", "cycle_y"
        );
        let opt = |v: Option<f64>| v.map(fmt_metric).unwrap_or_else(|| "-".into());
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => {
                    let _ = writeln!(
                        s,
                        "{:<22} {:>10} {:>10} {:>10} {:>10}",
                        row.variant.label(),
                        opt(r.translation_error_xy),
                        opt(r.translation_error_yx),
                        fmt_metric(r.cycle_error_x),
                        fmt_metric(r.cycle_error_y)
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "{:<22} failed: {e}", row.variant.label());
                }
            }
        }
        s
    }
}

/// Held-out evaluation data shared by every ablation row.
pub struct EvalSet<'a> {
    pub x: &'a DomainDataset,
    pub y: &'a DomainDataset,
    pub oracle: Option<&'a SyntheticOracle>,
}

/// Trains every loss variant from the same seed and data order and
/// evaluates each on `eval`. A run that aborts becomes a failed row.
pub fn run_ablation(
    base: &TrainingConfig,
    train_x: &DomainDataset,
    train_y: &DomainDataset,
    eval: &EvalSet<'_>,
) -> Result<AblationTable> {
    run_ablation_with(base, train_x, train_y, eval, &mut |_, _| Ok(()))
}

/// [`run_ablation`], handing each successfully trained model to `on_trained`.
pub fn run_ablation_with(
    base: &TrainingConfig,
    train_x: &DomainDataset,
    train_y: &DomainDataset,
    eval: &EvalSet<'_>,
    on_trained: &mut dyn FnMut(Variant, &ModelState) -> Result<()>,
) -> Result<AblationTable> {
    base.validate()?;
    let mut rows = Vec::with_capacity(Variant::ALL.len());
    for variant in Variant::ALL {
        let cfg = TrainingConfig { variant, ..base.clone() };
        log::info!("ablation: training {variant}");
        let outcome = match train(cfg, train_x, train_y) {
            Ok(t) => {
                on_trained(variant, &t.model)?;
                Ok(evaluate(&t.model, eval.x, eval.y, eval.oracle, variant.name())?)
            }
            Err(e @ Error::NonFinite { .. }) => {
                log::warn!("ablation: {variant} aborted: {e}");
                Err(e.to_string())
            }
            Err(e) => return Err(e),
        };
        rows.push(AblationRow { variant, outcome });
    }
    Ok(AblationTable { rows })
}

/// Places `parts` (all `1×C×H×W`) side by side.
fn hconcat(parts: &[Tensor<f32>]) -> Result<Tensor<f32>> {
    let [_, c, h, w] = parts[0].dims4()?;
    for p in parts {
        parts[0].ensure_same_shape(p, "hconcat")?;
    }
    let k = parts.len();
    let mut out = vec![0.0; c * h * w * k];
    for (j, p) in parts.iter().enumerate() {
        for (r, row) in p.data().chunks(w).enumerate() {
            let start = r * w * k + j * w;
            out[start..start + w].copy_from_slice(row);
        }
    }
    Tensor::new(vec![1, c, h, w * k], out)
}

/// Stacks `1×C×H×W` images vertically.
fn vconcat(parts: &[Tensor<f32>]) -> Result<Tensor<f32>> {
    let [_, c, h, w] = parts[0].dims4()?;
    let mut out = vec![0.0; c * h * w * parts.len()];
    for (i, p) in parts.iter().enumerate() {
        parts[0].ensure_same_shape(p, "vconcat")?;
        for (ch, plane) in p.data().chunks(h * w).enumerate() {
            let start = (ch * parts.len() + i) * h * w;
            out[start..start + h * w].copy_from_slice(plane);
        }
    }
    Tensor::new(vec![1, c, h * parts.len(), w], out)
}

/// The strip `[x | G(x) | F(G(x))]`.
pub fn triptych(model: &ModelState, x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let gx = model.g.infer(x)?;
    let fgx = model.f.infer(&gx)?;
    hconcat(&[x.clone(), gx, fgx])
}

/// Writes one triptych PNG per sample plus `grid.png` stacking them, and
/// returns the written paths.
pub fn export_triptychs(
    model: &ModelState,
    samples: &DomainDataset,
    n: usize,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let n = n.min(samples.len());
    if n == 0 {
        return Err(Error::invalid("triptych export needs at least one sample"));
    }
    let mut strips = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n + 1);
    for (i, (x, name)) in samples.samples().iter().zip(samples.names()).take(n).enumerate() {
        let strip = triptych(model, x)?;
        let stem = Path::new(name).file_stem().map_or_else(|| i.to_string(), |s| s.to_string_lossy().into_owned());
        let path = dir.join(format!("{i:03}_{stem}_triptych.png"));
        save_png(&path, &strip)?;
        paths.push(path);
        strips.push(strip);
    }
    let grid = dir.join("grid.png");
    save_png(&grid, &vconcat(&strips)?)?;
    paths.push(grid);
    Ok(paths)
}
