//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::netgraph::{NetworkSchedule, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Gaussians,
    Mnist,
}

/// Every key with a one-line description; each is also a CLI flag.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("dataset", "gaussians or mnist"),
    ("m", "number of nodes (one input measure per node)"),
    ("d", "support size; for mnist it must equal grid²"),
    ("family", "cycle, star, complete, erdos_renyi or mst_of_er"),
    ("edge_prob", "edge probability for the random families"),
    ("epoch_len", "iterations per graph; 0 or inf for a static graph"),
    ("seed", "seed for data draws and graph schedule"),
    ("gamma", "entropic regularization γ"),
    ("r", "dual regularization r"),
    ("n_iters", "solver iterations"),
    ("record_every", "metrics interval in iterations"),
    ("delta", "histogram floor δ"),
    ("output", "output directory"),
    ("mean_min", "lower end of the Gaussian mean range"),
    ("mean_max", "upper end of the Gaussian mean range"),
    ("std_min", "lower end of the Gaussian std range"),
    ("std_max", "upper end of the Gaussian std range"),
    ("mnist_images", "IDX3 image file"),
    ("mnist_labels", "IDX1 label file"),
    ("digit", "MNIST digit to average"),
    ("grid", "MNIST downsampled side length (divides 28)"),
    ("timing", "record wall-clock seconds (makes the CSV non-reproducible)"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub m: usize,
    pub d: usize,
    pub family: String,
    pub edge_prob: f64,
    /// `None` for a static graph.
    pub epoch_len: Option<usize>,
    pub seed: u64,
    pub gamma: f64,
    pub r: f64,
    pub n_iters: usize,
    pub record_every: usize,
    pub delta: f64,
    pub output: PathBuf,
    pub mean_min: f64,
    pub mean_max: f64,
    pub std_min: f64,
    pub std_max: f64,
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    pub digit: u8,
    pub grid: usize,
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Gaussians,
            m: 10,
            d: 100,
            family: "cycle".into(),
            edge_prob: 0.9,
            epoch_len: None,
            seed: 0,
            gamma: 0.01,
            r: 0.001,
            n_iters: 5000,
            record_every: 50,
            delta: 1e-6,
            output: PathBuf::from("runs/default"),
            mean_min: 0.4,
            mean_max: 0.6,
            std_min: 0.15,
            std_max: 0.25,
            mnist_images: None,
            mnist_labels: None,
            digit: 4,
            grid: 28,
            timing: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| HarnessError::invalid(key, value, &e.to_string()))
}

impl ExperimentConfig {
    /// Defaults overridden by the `key = value` lines of `text`; `#` starts a comment.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::ConfigSyntax {
                path: origin.to_string(),
                line: k + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| HarnessError::ConfigSyntax {
                path: origin.to_string(),
                line: k + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => {
                self.dataset = match value {
                    "gaussians" | "gaussian" => DatasetKind::Gaussians,
                    "mnist" => DatasetKind::Mnist,
                    _ => return Err(HarnessError::invalid(key, value, "expected gaussians or mnist")),
                }
            }
            "m" => self.m = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "family" => {
                Topology::from_name(value, self.edge_prob).map_err(|e| HarnessError::invalid(key, value, &e.to_string()))?;
                self.family = value.to_string();
            }
            "edge_prob" => self.edge_prob = parse(key, value)?,
            "epoch_len" => {
                self.epoch_len = match value {
                    "0" | "inf" | "static" | "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "n_iters" => self.n_iters = parse(key, value)?,
            "record_every" => self.record_every = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "mean_min" => self.mean_min = parse(key, value)?,
            "mean_max" => self.mean_max = parse(key, value)?,
            "std_min" => self.std_min = parse(key, value)?,
            "std_max" => self.std_max = parse(key, value)?,
            "mnist_images" => self.mnist_images = Some(PathBuf::from(value)),
            "mnist_labels" => self.mnist_labels = Some(PathBuf::from(value)),
            "digit" => self.digit = parse(key, value)?,
            "grid" => self.grid = parse(key, value)?,
            "timing" => self.timing = parse(key, value)?,
            _ => return Err(HarnessError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// The `key = value` text that [`Self::parse_str`] reads back.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
        put("dataset", match self.dataset {
            DatasetKind::Gaussians => "gaussians".into(),
            DatasetKind::Mnist => "mnist".into(),
        });
        put("m", self.m.to_string());
        put("d", self.d.to_string());
        put("family", self.family.clone());
        put("edge_prob", self.edge_prob.to_string());
        put("epoch_len", self.epoch_len.map_or("inf".into(), |e| e.to_string()));
        put("seed", self.seed.to_string());
        put("gamma", self.gamma.to_string());
        put("r", self.r.to_string());
        put("n_iters", self.n_iters.to_string());
        put("record_every", self.record_every.to_string());
        put("delta", self.delta.to_string());
        put("output", self.output.display().to_string());
        put("mean_min", self.mean_min.to_string());
        put("mean_max", self.mean_max.to_string());
        put("std_min", self.std_min.to_string());
        put("std_max", self.std_max.to_string());
        if let Some(p) = &self.mnist_images {
            put("mnist_images", p.display().to_string());
        }
        if let Some(p) = &self.mnist_labels {
            put("mnist_labels", p.display().to_string());
        }
        put("digit", self.digit.to_string());
        put("grid", self.grid.to_string());
        put("timing", self.timing.to_string());
        s
    }

    pub fn topology(&self) -> Result<Topology> {
        Topology::from_name(&self.family, self.edge_prob).map_err(|e| HarnessError::invalid("family", &self.family, &e.to_string()))
    }

    pub fn schedule(&self) -> Result<NetworkSchedule> {
        Ok(NetworkSchedule::new(self.topology()?, self.m, self.epoch_len, self.seed)?)
    }

    /// Range and consistency checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(HarnessError::invalid(key, v, "must be positive"))
            }
        };
        positive("gamma", self.gamma)?;
        positive("r", self.r)?;
        positive("delta", self.delta)?;
        if self.m < 2 {
            return Err(HarnessError::invalid("m", self.m, "at least 2 nodes are needed"));
        }
        if self.d < 2 {
            return Err(HarnessError::invalid("d", self.d, "at least 2 support points are needed"));
        }
        if self.n_iters == 0 {
            return Err(HarnessError::invalid("n_iters", 0, "must be positive"));
        }
        if self.record_every == 0 {
            return Err(HarnessError::invalid("record_every", 0, "must be positive"));
        }
        if self.delta * self.d as f64 >= 1.0 {
            return Err(HarnessError::invalid("delta", self.delta, "delta·d must be below 1"));
        }
        self.topology()?;
        match self.dataset {
            DatasetKind::Gaussians => {
                positive("std_min", self.std_min)?;
                if self.mean_min > self.mean_max || self.std_min > self.std_max {
                    return Err(HarnessError::invalid("mean_min/std_min", self.mean_min, "range is reversed"));
                }
            }
            DatasetKind::Mnist => {
                if self.grid * self.grid != self.d {
                    return Err(HarnessError::invalid("d", self.d, &format!("must equal grid² = {}", self.grid * self.grid)));
                }
                if self.mnist_images.is_none() || self.mnist_labels.is_none() {
                    return Err(HarnessError::invalid("mnist_images", "", "mnist_images and mnist_labels are required"));
                }
            }
        }
        Ok(())
    }
}
