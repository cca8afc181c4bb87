//! Dropout-rate sweep: train with stochastic unit dropout at each rate, then
//! measure the FIM norm and test accuracy of the final model.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fim::{fim_norm, kfac_fim, kfac_fim_dropout, NormKind, FIM_CHUNK};
use crate::models::{train_dropout, Architecture, Dataset, MlpModel, TrainConfig};
use crate::numerics::Rng;

pub const CSV_HEADER: &str = "rate,trial,fim_norm,test_accuracy,train_loss,wall_seconds,status";
pub const SUMMARY_HEADER: &str =
    "rate,trials,ok,fim_norm_mean,fim_norm_std,test_accuracy_mean,test_accuracy_std,train_loss_mean";

/// Where the FIM of a trained model is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FimMeasurement {
    /// Final model with every unit active.
    #[default]
    MasksOff,
    /// Averaged over fresh dropout patterns at the training rate.
    UnderDropout,
}

impl std::str::FromStr for FimMeasurement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "masks_off" => Ok(FimMeasurement::MasksOff),
            "under_dropout" => Ok(FimMeasurement::UnderDropout),
            other => Err(Error::Config(format!("unknown FIM measurement '{other}'"))),
        }
    }
}

impl std::fmt::Display for FimMeasurement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FimMeasurement::MasksOff => "masks_off",
            FimMeasurement::UnderDropout => "under_dropout",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub arch: Architecture,
    pub rates: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Learning rate, batch size and epochs; seed and dropout rate are set
    /// per trial.
    pub train: TrainConfig,
    pub norm: NormKind,
    /// Number of leading training inputs on which the FIM is measured.
    pub fim_inputs: usize,
    pub fim_measurement: FimMeasurement,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(Error::Config("no dropout rates given".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::Config(format!("dropout rate {r} outside [0, 1)")));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.fim_inputs == 0 {
            return Err(Error::Config("fim_inputs must be at least 1".into()));
        }
        self.train.validate()
    }
}

/// One (rate, trial) cell. Diverged runs carry NaN metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub trial: usize,
    pub fim_norm: f64,
    pub test_accuracy: f64,
    pub train_loss: f64,
    pub wall_seconds: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Diverged,
}

impl SweepRow {
    pub fn to_csv(&self, with_time: bool) -> String {
        let status = match self.status {
            RowStatus::Ok => "ok",
            RowStatus::Diverged => "diverged",
        };
        let wall = if with_time { format!("{:.3}", self.wall_seconds) } else { String::new() };
        format!(
            "{},{},{},{},{},{},{}",
            self.rate, self.trial, self.fim_norm, self.test_accuracy, self.train_loss, wall, status
        )
    }
}

/// Per-rate aggregate over finished trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub rate: f64,
    pub trials: usize,
    pub ok: usize,
    pub fim_norm_mean: f64,
    pub fim_norm_std: f64,
    pub test_accuracy_mean: f64,
    pub test_accuracy_std: f64,
    pub train_loss_mean: f64,
}

/// Training seed of trial `t`. It does not depend on the rate, so every rate
/// starts from the same initialization and batch order.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    Rng::stream(seed, trial as u64).next_u64()
}

/// Trains one model at `rate` and measures it.
pub fn run_trial(cfg: &SweepConfig, train: &Dataset, test: &Dataset, rate: f64, trial: usize) -> Result<SweepRow> {
    Ok(run_trial_with_model(cfg, train, test, rate, trial)?.0)
}

/// [`run_trial`] that also returns the trained model (absent on divergence).
pub fn run_trial_with_model(
    cfg: &SweepConfig,
    train: &Dataset,
    test: &Dataset,
    rate: f64,
    trial: usize,
) -> Result<(SweepRow, Option<MlpModel>)> {
    let start = Instant::now();
    let seed = trial_seed(cfg.seed, trial);
    let tc = TrainConfig {
        seed,
        dropout_rate: rate,
        ..cfg.train.clone()
    };
    let model = match train_dropout(&cfg.arch, train, &tc) {
        Ok(out) => out.model,
        Err(Error::Diverged { .. }) => {
            let row = SweepRow {
                rate,
                trial,
                fim_norm: f64::NAN,
                test_accuracy: f64::NAN,
                train_loss: f64::NAN,
                wall_seconds: start.elapsed().as_secs_f64(),
                status: RowStatus::Diverged,
            };
            return Ok((row, None));
        }
        Err(e) => return Err(e),
    };
    let fim_rows = train.head(cfg.fim_inputs);
    let est = match cfg.fim_measurement {
        FimMeasurement::MasksOff => kfac_fim(&model, fim_rows.features())?,
        FimMeasurement::UnderDropout => kfac_fim_dropout(&model, fim_rows.features(), rate, seed)?,
    };
    let (train_loss, _) = model.evaluate(train)?;
    let (_, test_accuracy) = model.evaluate(test)?;
    let row = SweepRow {
        rate,
        trial,
        fim_norm: fim_norm(&est, cfg.norm)?,
        test_accuracy,
        train_loss,
        wall_seconds: start.elapsed().as_secs_f64(),
        status: RowStatus::Ok,
    };
    Ok((row, Some(model)))
}

/// All (rate, trial) cells in rate-major order, run in parallel.
pub fn run_sweep(cfg: &SweepConfig, train: &Dataset, test: &Dataset) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let cells: Vec<(f64, usize)> = cfg
        .rates
        .iter()
        .flat_map(|&r| (0..cfg.trials).map(move |t| (r, t)))
        .collect();
    cells
        .par_iter()
        .map(|&(r, t)| run_trial(cfg, train, test, r, t))
        .collect()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Aggregates rows per rate (sample standard deviation), skipping diverged
/// trials.
pub fn summarize(rows: &[SweepRow]) -> Vec<RateSummary> {
    let mut rates: Vec<f64> = Vec::new();
    for r in rows {
        if !rates.contains(&r.rate) {
            rates.push(r.rate);
        }
    }
    rates
        .into_iter()
        .map(|rate| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.rate == rate).collect();
            let ok: Vec<&&SweepRow> = cell.iter().filter(|r| r.status == RowStatus::Ok).collect();
            let (fm, fs) = mean_std(&ok.iter().map(|r| r.fim_norm).collect::<Vec<_>>());
            let (am, as_) = mean_std(&ok.iter().map(|r| r.test_accuracy).collect::<Vec<_>>());
            let (lm, _) = mean_std(&ok.iter().map(|r| r.train_loss).collect::<Vec<_>>());
            RateSummary {
                rate,
                trials: cell.len(),
                ok: ok.len(),
                fim_norm_mean: fm,
                fim_norm_std: fs,
                test_accuracy_mean: am,
                test_accuracy_std: as_,
                train_loss_mean: lm,
            }
        })
        .collect()
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv(true));
        s.push('\n');
    }
    s
}

pub fn summary_to_csv(summary: &[RateSummary]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in summary {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.rate,
            r.trials,
            r.ok,
            r.fim_norm_mean,
            r.fim_norm_std,
            r.test_accuracy_mean,
            r.test_accuracy_std,
            r.train_loss_mean
        );
    }
    s
}

/// Parses a sweep CSV back into rows, checking the header.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config("sweep CSV header does not match the schema".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(Error::Config(format!("expected 7 fields in '{l}'")));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{s}' in '{l}'")))
            };
            Ok(SweepRow {
                rate: num(f[0])?,
                trial: f[1].parse().map_err(|_| Error::Config(format!("bad trial in '{l}'")))?,
                fim_norm: num(f[2])?,
                test_accuracy: num(f[3])?,
                train_loss: num(f[4])?,
                wall_seconds: num(f[5])?,
                status: match f[6] {
                    "ok" => RowStatus::Ok,
                    "diverged" => RowStatus::Diverged,
                    other => return Err(Error::Config(format!("unknown status '{other}'"))),
                },
            })
        })
        .collect()
}

/// Line plot of mean FIM norm against rate with ±1 std error bars.
pub fn render_svg(summary: &[RateSummary], norm: NormKind) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 30.0, 50.0);
    let pts: Vec<&RateSummary> = summary.iter().filter(|s| s.fim_norm_mean.is_finite()).collect();
    let x_max = summary.iter().map(|s| s.rate).fold(0.0_f64, f64::max).max(1e-9);
    let mut y_lo = pts
        .iter()
        .map(|s| s.fim_norm_mean - s.fim_norm_std)
        .fold(f64::INFINITY, f64::min);
    let mut y_hi = pts
        .iter()
        .map(|s| s.fim_norm_mean + s.fim_norm_std)
        .fold(f64::NEG_INFINITY, f64::max);
    if !y_lo.is_finite() || !y_hi.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    let pad = ((y_hi - y_lo) * 0.08).max(1e-9);
    y_lo -= pad;
    y_hi += pad;
    let sx = |x: f64| left + (x / x_max) * (w - left - right);
    let sy = |y: f64| top + (y_hi - y) / (y_hi - y_lo) * (h - top - bottom);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (left, w - right, top, h - bottom);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for r in summary {
        let x = sx(r.rate);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 18.0,
            r.rate
        );
    }
    for i in 0..=5 {
        let v = y_lo + (y_hi - y_lo) * f64::from(i) / 5.0;
        let y = sy(v);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            x0 - 8.0,
            y + 4.0
        );
    }
    let line: Vec<String> = pts
        .iter()
        .map(|p| format!("{:.2},{:.2}", sx(p.rate), sy(p.fim_norm_mean)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        line.join(" ")
    );
    for p in &pts {
        let x = sx(p.rate);
        let (a, b) = (sy(p.fim_norm_mean - p.fim_norm_std), sy(p.fim_norm_mean + p.fim_norm_std));
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{a:.2}" x2="{x:.2}" y2="{b:.2}" stroke="steelblue"/>"#);
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            sy(p.fim_norm_mean)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">dropout rate</text>"#,
        (x0 + x1) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">FIM norm ({norm})</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub svg: PathBuf,
    pub metadata: PathBuf,
}

/// Writes `sweep.csv`, `sweep_summary.csv`, `sweep.svg` and `sweep_meta.txt`.
/// `extra_meta` lines (`key=value`) are appended to the metadata.
pub fn write_outputs(dir: &Path, cfg: &SweepConfig, rows: &[SweepRow], extra_meta: &[(String, String)]) -> Result<SweepPaths> {
    fs::create_dir_all(dir)?;
    let summary = summarize(rows);
    let paths = SweepPaths {
        csv: dir.join("sweep.csv"),
        summary: dir.join("sweep_summary.csv"),
        svg: dir.join("sweep.svg"),
        metadata: dir.join("sweep_meta.txt"),
    };
    fs::write(&paths.csv, rows_to_csv(rows))?;
    fs::write(&paths.summary, summary_to_csv(&summary))?;
    fs::write(&paths.svg, render_svg(&summary, cfg.norm))?;
    let mut meta = String::new();
    let sizes: Vec<String> = cfg.arch.sizes().iter().map(usize::to_string).collect();
    let rates: Vec<String> = cfg.rates.iter().map(f64::to_string).collect();
    for (k, v) in [
        ("layer_sizes", sizes.join("-")),
        ("activation", cfg.arch.activation().to_string()),
        ("rates", rates.join(",")),
        ("trials", cfg.trials.to_string()),
        ("seed", cfg.seed.to_string()),
        ("learning_rate", cfg.train.learning_rate.to_string()),
        ("batch_size", cfg.train.batch_size.to_string()),
        ("epochs", cfg.train.epochs.to_string()),
        ("dropout", "per-example hidden-unit, inverted scaling".to_string()),
        ("norm", cfg.norm.to_string()),
        ("fim_estimator", "kfac (exact class expectation)".to_string()),
        ("fim_measurement", cfg.fim_measurement.to_string()),
        ("fim_inputs", cfg.fim_inputs.to_string()),
        ("fim_chunk", FIM_CHUNK.to_string()),
        ("threads", rayon::current_num_threads().to_string()),
    ] {
        let _ = writeln!(meta, "{k}={v}");
    }
    for (k, v) in extra_meta {
        let _ = writeln!(meta, "{k}={v}");
    }
    fs::write(&paths.metadata, meta)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{synth_blobs, Activation};

    fn cfg() -> SweepConfig {
        SweepConfig {
            arch: Architecture::new(vec![4, 16, 3], Activation::Relu).unwrap(),
            rates: vec![0.0, 0.2],
            trials: 2,
            seed: 7,
            train: TrainConfig {
                epochs: 2,
                batch_size: 16,
                ..TrainConfig::default()
            },
            norm: NormKind::Frobenius,
            fim_inputs: 50,
            fim_measurement: FimMeasurement::MasksOff,
        }
    }

    #[test]
    fn sweep_plumbing() {
        let data = synth_blobs(3, 40, 4, 3.0, 1).unwrap();
        let (train, test) = data.split_at(90);
        let c = cfg();
        let rows = run_sweep(&c, &train, &test).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(
            rows.iter().map(|r| (r.rate, r.trial)).collect::<Vec<_>>(),
            vec![(0.0, 0), (0.0, 1), (0.2, 0), (0.2, 1)]
        );
        let dir = tempfile::tempdir().unwrap();
        let p = write_outputs(dir.path(), &c, &rows, &[]).unwrap();
        let text = fs::read_to_string(&p.csv).unwrap();
        assert_eq!(text.lines().count(), 5);
        let back = parse_csv(&text).unwrap();
        for (a, b) in back.iter().zip(&rows) {
            assert_eq!((a.rate, a.trial, a.fim_norm, a.test_accuracy), (b.rate, b.trial, b.fim_norm, b.test_accuracy));
        }
        assert!(fs::read_to_string(&p.svg).unwrap().starts_with("<svg"));
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 2);
        assert!(summary.iter().all(|s| s.ok == 2 && s.fim_norm_std.is_finite()));
    }

    #[test]
    fn trial_seeds_ignore_rate() {
        let data = synth_blobs(3, 30, 4, 3.0, 2).unwrap();
        let c = cfg();
        let a = run_trial(&c, &data, &data, 0.0, 1).unwrap();
        let rows = run_sweep(&c, &data, &data).unwrap();
        assert_eq!(a.fim_norm, rows[1].fim_norm);
    }

    #[test]
    fn under_dropout_measurement_differs() {
        let data = synth_blobs(3, 30, 4, 3.0, 2).unwrap();
        let mut c = cfg();
        let off = run_trial(&c, &data, &data, 0.2, 0).unwrap();
        c.fim_measurement = FimMeasurement::UnderDropout;
        let on = run_trial(&c, &data, &data, 0.2, 0).unwrap();
        assert_eq!(off.test_accuracy, on.test_accuracy);
        assert_ne!(off.fim_norm, on.fim_norm);
    }

    #[test]
    fn bad_config_is_rejected() {
        let data = synth_blobs(2, 5, 4, 1.0, 0).unwrap();
        let mut c = cfg();
        c.rates = vec![1.0];
        assert!(matches!(run_sweep(&c, &data, &data), Err(Error::Config(_))));
    }

    #[test]
    fn csv_header_is_checked() {
        assert!(parse_csv("a,b\n").is_err());
    }
}
