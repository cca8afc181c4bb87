//! Settings merged from an optional `key = value` file and command-line
//! flags (flags win).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use geodrop::fim::NormKind;
use geodrop::experiment::FimMeasurement;
use geodrop::models::{load_mnist, synth_blobs, Activation, Dataset};
use geodrop::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    pub mnist_test_images: Option<PathBuf>,
    pub mnist_test_labels: Option<PathBuf>,
    pub limit: usize,
    pub test_limit: usize,
    pub synth_classes: usize,
    pub synth_per_class: usize,
    pub synth_dim: usize,
    pub synth_separation: f64,
    pub test_fraction: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rates: Vec<f64>,
    pub trials: usize,
    pub norm: NormKind,
    pub fim_inputs: usize,
    pub fim_measurement: FimMeasurement,
    pub alpha: f64,
    pub out: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            mnist_images: None,
            mnist_labels: None,
            mnist_test_images: None,
            mnist_test_labels: None,
            limit: 5000,
            test_limit: 1000,
            synth_classes: 3,
            synth_per_class: 200,
            synth_dim: 10,
            synth_separation: 4.0,
            test_fraction: 0.2,
            hidden: vec![100],
            activation: Activation::Relu,
            epochs: 3,
            batch_size: 64,
            learning_rate: 0.1,
            rates: (0..8).map(|i| f64::from(i) / 10.0).collect(),
            trials: 10,
            norm: NormKind::Frobenius,
            fim_inputs: 1000,
            fim_measurement: FimMeasurement::MasksOff,
            alpha: 1.0,
            out: PathBuf::from("geodrop-out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
}

pub fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

impl Settings {
    /// Sets one key. Hyphens and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "seed" => self.seed = parse(&key, v)?,
            "mnist_images" => self.mnist_images = Some(v.into()),
            "mnist_labels" => self.mnist_labels = Some(v.into()),
            "mnist_test_images" => self.mnist_test_images = Some(v.into()),
            "mnist_test_labels" => self.mnist_test_labels = Some(v.into()),
            "limit" => self.limit = parse(&key, v)?,
            "test_limit" => self.test_limit = parse(&key, v)?,
            "synth_classes" => self.synth_classes = parse(&key, v)?,
            "synth_per_class" => self.synth_per_class = parse(&key, v)?,
            "synth_dim" => self.synth_dim = parse(&key, v)?,
            "synth_separation" => self.synth_separation = parse(&key, v)?,
            "test_fraction" => self.test_fraction = parse(&key, v)?,
            "hidden" => self.hidden = parse_list(&key, v)?,
            "activation" => self.activation = v.parse()?,
            "epochs" => self.epochs = parse(&key, v)?,
            "batch_size" => self.batch_size = parse(&key, v)?,
            "learning_rate" => self.learning_rate = parse(&key, v)?,
            "rates" => self.rates = parse_list(&key, v)?,
            "trials" => self.trials = parse(&key, v)?,
            "norm" => self.norm = v.parse()?,
            "fim_inputs" => self.fim_inputs = parse(&key, v)?,
            "fim_measurement" => self.fim_measurement = v.parse()?,
            "alpha" => self.alpha = parse(&key, v)?,
            "out" => self.out = v.into(),
            _ => return Err(Error::Config(format!("unknown setting '{key}'"))),
        }
        Ok(())
    }

    /// Applies a config file: `key = value` lines, `#` comments.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, overrides: &BTreeMap<&'static str, String>) -> Result<()> {
        for (k, v) in overrides {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::Config(format!("dropout rate {r} outside [0, 1)")));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config("test_fraction must lie in [0, 1)".into()));
        }
        for p in [&self.mnist_images, &self.mnist_labels, &self.mnist_test_images, &self.mnist_test_labels]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Error::Config(format!("file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    /// Train and test splits plus a one-line description of the source.
    pub fn load_data(&self) -> Result<(Dataset, Dataset, String)> {
        match (&self.mnist_images, &self.mnist_labels) {
            (Some(img), Some(lab)) => {
                if let (Some(ti), Some(tl)) = (&self.mnist_test_images, &self.mnist_test_labels) {
                    let train = load_mnist(img, lab, Some(self.limit))?;
                    let test = load_mnist(ti, tl, Some(self.test_limit))?;
                    let desc = format!(
                        "mnist train={} ({} rows) test={} ({} rows)",
                        img.display(),
                        train.len(),
                        ti.display(),
                        test.len()
                    );
                    return Ok((train, test, desc));
                }
                let all = load_mnist(img, lab, Some(self.limit + self.test_limit))?;
                if all.len() <= self.limit {
                    return Err(Error::Config(format!(
                        "{} has {} examples, too few for {} training rows plus a test split",
                        img.display(),
                        all.len(),
                        self.limit
                    )));
                }
                let (train, test) = all.split_at(self.limit);
                let desc = format!(
                    "mnist {} split {}/{} in file order",
                    img.display(),
                    train.len(),
                    test.len()
                );
                Ok((train, test, desc))
            }
            (None, None) => {
                let all = synth_blobs(
                    self.synth_classes,
                    self.synth_per_class,
                    self.synth_dim,
                    self.synth_separation,
                    self.seed,
                )?;
                let n_test = ((all.len() as f64) * self.test_fraction).round() as usize;
                let (train, test) = all.split_at(all.len() - n_test);
                let desc = format!(
                    "synthetic blobs K={} per_class={} d={} separation={} train={} test={}",
                    self.synth_classes,
                    self.synth_per_class,
                    self.synth_dim,
                    self.synth_separation,
                    train.len(),
                    test.len()
                );
                Ok((train, test, desc))
            }
            _ => Err(Error::Config("--mnist-images and --mnist-labels must be given together".into())),
        }
    }
}
