//! Experiment configuration: flat `key = value` files, overridable per key.

use std::path::{Path, PathBuf};

use crate::branch_prune::RhoSchedule;
use crate::error::{Error, Result};
use crate::models::Activation;
use crate::solvers::SolverKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Optimize,
    Train,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Optimize => "optimize",
            Mode::Train => "train",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimize" => Ok(Mode::Optimize),
            "train" => Ok(Mode::Train),
            other => Err(Error::Config(format!("unknown mode `{other}` (optimize | train)"))),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Benchmark name (optimize) or dataset name (train: `blobs` or `idx`).
    pub target: String,
    pub solver: SolverKind,
    /// Lipschitz constant; optimize runs default to the benchmark's declared one.
    pub lipschitz: Option<f64>,
    pub mu: f64,
    pub rho_schedule: RhoSchedule,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Baseline learning rate; `None` keeps the solver's default.
    pub learning_rate: Option<f64>,
    /// Number of `rho` phases for the training solver.
    pub phases: usize,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub classes: usize,
    pub per_class: usize,
    pub d_in: usize,
    pub spread: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub weight_decay: f64,
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,
    /// Record wall-clock times; off gives byte-identical outputs across runs.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn optimize(target: &str) -> Self {
        Self { mode: Mode::Optimize, target: target.to_string(), epsilon: 0.01, ..Self::train() }
    }

    pub fn train() -> Self {
        Self {
            mode: Mode::Train,
            target: "blobs".into(),
            solver: SolverKind::Bpgrad,
            lipschitz: None,
            mu: 0.9,
            rho_schedule: RhoSchedule::Harmonic,
            epsilon: 0.0,
            epochs: 20,
            batch: 20,
            seed: 7,
            out: None,
            learning_rate: None,
            phases: 1,
            max_inner_iters: 20_000,
            max_outer_iters: 200,
            classes: 2,
            per_class: 100,
            d_in: 2,
            spread: 1.0,
            hidden: vec![16],
            activation: Activation::Relu,
            weight_decay: 1e-3,
            idx_images: None,
            idx_labels: None,
            timing: true,
        }
    }

    /// Sets one key. Keys match the long CLI flag names (`-` or `_` both work).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("bad value {value:?} for `{key}`: expected {what}"));
        let float = || value.parse::<f64>().map_err(|_| bad("a number"));
        let count = || value.parse::<usize>().map_err(|_| bad("a nonnegative integer"));
        match key.as_str() {
            "mode" => self.mode = value.parse()?,
            "fn" | "dataset" | "target" => self.target = value.to_string(),
            "solver" => self.solver = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "l" | "L" | "lipschitz" => self.lipschitz = Some(float()?),
            "mu" => self.mu = float()?,
            "rho-schedule" => {
                self.rho_schedule = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "eps" | "epsilon" => self.epsilon = float()?,
            "epochs" => self.epochs = count()?,
            "batch" => self.batch = count()?,
            "seed" => self.seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "lr" | "learning-rate" => self.learning_rate = Some(float()?),
            "phases" => self.phases = count()?,
            "max-inner" => self.max_inner_iters = count()?,
            "max-outer" => self.max_outer_iters = count()?,
            "classes" => self.classes = count()?,
            "per-class" => self.per_class = count()?,
            "d-in" => self.d_in = count()?,
            "spread" => self.spread = float()?,
            "hidden" => {
                self.hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|w| w.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("comma-separated widths"))?
                }
            }
            "activation" => {
                self.activation = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "weight-decay" => self.weight_decay = float()?,
            "idx-images" => self.idx_images = Some(PathBuf::from(value)),
            "idx-labels" => self.idx_labels = Some(PathBuf::from(value)),
            "timing" => {
                self.timing = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad("a boolean")),
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` text. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {line:?}", n + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    /// Serializes the settings that define the run, in `key = value` form.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("mode = {}", self.mode.name()),
            format!("target = {}", self.target),
            format!("solver = {}", self.solver),
            format!("mu = {}", self.mu),
            format!("rho-schedule = {}", self.rho_schedule.name()),
            format!("eps = {}", self.epsilon),
            format!("epochs = {}", self.epochs),
            format!("batch = {}", self.batch),
            format!("seed = {}", self.seed),
            format!("phases = {}", self.phases),
            format!("max-inner = {}", self.max_inner_iters),
            format!("max-outer = {}", self.max_outer_iters),
            format!("classes = {}", self.classes),
            format!("per-class = {}", self.per_class),
            format!("d-in = {}", self.d_in),
            format!("spread = {}", self.spread),
            format!("hidden = {}", self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")),
            format!("activation = {}", match self.activation {
                Activation::Relu => "relu",
                Activation::Tanh => "tanh",
            }),
            format!("weight-decay = {}", self.weight_decay),
            format!("timing = {}", self.timing),
        ];
        if let Some(l) = self.lipschitz {
            lines.push(format!("L = {l}"));
        }
        if let Some(lr) = self.learning_rate {
            lines.push(format!("lr = {lr}"));
        }
        lines.join("\n") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if let Some(l) = self.lipschitz {
            if !(l > 0.0) {
                return fail(format!("L must be positive, got {l}"));
            }
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return fail(format!("mu must lie in [0, 1], got {}", self.mu));
        }
        if !(self.epsilon >= 0.0) {
            return fail(format!("eps must be nonnegative, got {}", self.epsilon));
        }
        match self.mode {
            Mode::Optimize => {
                crate::testbed::lookup(&self.target).map_err(|e| Error::Config(e.to_string()))?;
            }
            Mode::Train => {
                if self.epochs == 0 || self.batch == 0 || self.phases == 0 {
                    return fail("epochs, batch and phases must be at least 1".into());
                }
                match self.target.as_str() {
                    "blobs" => {
                        if self.classes == 0 || self.per_class == 0 || self.d_in == 0 {
                            return fail("blob sizes must be positive".into());
                        }
                    }
                    "idx" => {
                        if self.idx_images.is_none() || self.idx_labels.is_none() {
                            return fail("dataset `idx` needs idx-images and idx-labels".into());
                        }
                    }
                    other => return fail(format!("unknown dataset `{other}` (blobs | idx)")),
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_file_text() {
        let mut c = ExperimentConfig::train();
        c.apply_text("# comment\nsolver = adam\nL = 50\n\nhidden = 8, 4\nlr=0.01\ntiming = false\n").unwrap();
        assert_eq!(c.solver, SolverKind::Adam);
        assert_eq!(c.lipschitz, Some(50.0));
        assert_eq!(c.hidden, vec![8, 4]);
        assert_eq!(c.learning_rate, Some(0.01));
        assert!(!c.timing);
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = ExperimentConfig::train();
        let err = c.apply_text("solver = adam\nnonsense\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(c.apply_text("mu = fast").is_err());
        assert!(c.apply_text("colour = red").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::optimize("shekel1d");
        c.lipschitz = Some(97.3);
        c.learning_rate = Some(0.5);
        let mut back = ExperimentConfig::train();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::optimize("abs1d").validate().is_ok());
        assert!(ExperimentConfig::optimize("nope").validate().is_err());
        let mut t = ExperimentConfig::train();
        t.target = "mnist".into();
        assert!(t.validate().is_err());
        t.target = "idx".into();
        assert!(t.validate().is_err());
    }
}
