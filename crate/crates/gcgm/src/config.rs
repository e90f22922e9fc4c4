//! Experiment configuration.
//!
//! A config file holds `key = value` lines (`#` starts a comment). Command-line
//! flags are applied afterwards through the same [`ExperimentConfig::set`], so
//! a flag always overrides the file. Keys accept `-` or `_` interchangeably.
//!
//! `alpha` and `lambda` take comma-separated lists; the cartesian product is
//! the sweep grid, one solver run per point.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gcgm_core::{ScreeningMode, SolverConfig, StepSchedule};
use sha2::{Digest, Sha256};

use crate::synthetic::{DEFAULT_D, DEFAULT_N};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Synthetic,
    Mnist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossChoice {
    Logistic,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyChoice {
    Power,
    LogBarrier,
    Indicator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub loss: LossChoice,
    pub penalty: PenaltyChoice,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Domain cap `C_b` of the log-barrier and indicator penalties.
    pub capacity: f64,
    pub beta: f64,
    /// Magnification `C` of the atomic set.
    pub scale: f64,
    pub iters: usize,
    pub gap_tol: f64,
    pub screen: ScreeningMode,
    pub screen_every: usize,
    pub theta: StepSchedule,
    pub trace_every: usize,
    pub conservative: bool,
    /// Record wall-clock time in `elapsed_s`. Off by default so that traces
    /// are byte-for-byte reproducible.
    pub timing: bool,
    pub data: Option<PathBuf>,
    pub atoms: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub digits: (u8, u8),
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Synthetic,
            seed: 0,
            n: DEFAULT_N,
            d: DEFAULT_D,
            loss: LossChoice::Logistic,
            penalty: PenaltyChoice::Power,
            alphas: vec![2.0],
            lambdas: vec![1.0],
            capacity: 1.0,
            beta: 1.0,
            scale: 1.0,
            iters: 10_000,
            gap_tol: 0.0,
            screen: ScreeningMode::PruneLmo,
            screen_every: 1,
            theta: StepSchedule::TwoOverTPlusOne,
            trace_every: 1,
            conservative: false,
            timing: false,
            data: None,
            atoms: None,
            images: None,
            labels: None,
            test_images: None,
            test_labels: None,
            digits: (4, 9),
            out: PathBuf::from("."),
        }
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub alpha: f64,
    pub lambda: f64,
}

fn bad(key: &str, value: &str) -> Error {
    Error::Usage(format!("invalid value {value:?} for {key}"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value.parse().map_err(|_| bad(key, value))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, Error> {
    let list: Vec<f64> = value.split(',').map(|v| parse(key, v.trim())).collect::<Result<_, _>>()?;
    if list.is_empty() || list.iter().any(|v| !v.is_finite()) {
        return Err(bad(key, value));
    }
    Ok(list)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, Error> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn join(list: &[f64]) -> String {
    list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        ExperimentConfig { experiment, ..Default::default() }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "experiment" => {
                self.experiment = match value {
                    "synthetic" => Experiment::Synthetic,
                    "mnist" => Experiment::Mnist,
                    _ => return Err(bad(&key, value)),
                }
            }
            "seed" => self.seed = parse(&key, value)?,
            "n" => self.n = parse(&key, value)?,
            "d" => self.d = parse(&key, value)?,
            "loss" => {
                self.loss = match value {
                    "logistic" => LossChoice::Logistic,
                    "quadratic" => LossChoice::Quadratic,
                    _ => return Err(bad(&key, value)),
                }
            }
            "penalty" => {
                self.penalty = match value {
                    "power" => PenaltyChoice::Power,
                    "log-barrier" | "log_barrier" | "logbarrier" => PenaltyChoice::LogBarrier,
                    "indicator" => PenaltyChoice::Indicator,
                    _ => return Err(bad(&key, value)),
                }
            }
            "alpha" => self.alphas = parse_list(&key, value)?,
            "lambda" => self.lambdas = parse_list(&key, value)?,
            "capacity" => self.capacity = parse(&key, value)?,
            "beta" => self.beta = parse(&key, value)?,
            "scale" => self.scale = parse(&key, value)?,
            "iters" => self.iters = parse(&key, value)?,
            "gap_tol" => self.gap_tol = parse(&key, value)?,
            "screen" => {
                self.screen = match value {
                    "prune" => ScreeningMode::PruneLmo,
                    "report" => ScreeningMode::ReportOnly,
                    "off" => ScreeningMode::Off,
                    _ => return Err(bad(&key, value)),
                }
            }
            "screen_every" => self.screen_every = parse(&key, value)?,
            "theta" => {
                self.theta = match value {
                    "2t1" => StepSchedule::TwoOverTPlusOne,
                    "4t2" => StepSchedule::FourOverTPlusTwo,
                    _ => return Err(bad(&key, value)),
                }
            }
            "trace_every" => self.trace_every = parse(&key, value)?,
            "conservative" => self.conservative = parse_bool(&key, value)?,
            "timing" => self.timing = parse_bool(&key, value)?,
            "data" => self.data = opt_path(value),
            "atoms" => self.atoms = opt_path(value),
            "images" => self.images = opt_path(value),
            "labels" => self.labels = opt_path(value),
            "test_images" => self.test_images = opt_path(value),
            "test_labels" => self.test_labels = opt_path(value),
            "digits" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                match parts.as_slice() {
                    [a, b] => self.digits = (parse(&key, a)?, parse(&key, b)?),
                    _ => return Err(bad(&key, value)),
                }
            }
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, path: &Path, text: &str) -> Result<(), Error> {
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let body = line.split('#').next().unwrap_or("").trim();
            if !body.is_empty() {
                let (k, v) = body
                    .split_once('=')
                    .ok_or_else(|| Error::format(path, offset, "expected `key = value`"))?;
                self.set(k, v).map_err(|e| match e {
                    Error::Usage(msg) => Error::format(path, offset, msg),
                    other => other,
                })?;
            }
            offset += line.len() as u64;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(path, &text)
    }

    /// Every setting except `out`, sorted by key, one `key=value` per line.
    /// Two configs with equal canonical text produce identical outputs.
    pub fn canonical(&self) -> String {
        let screen = match self.screen {
            ScreeningMode::PruneLmo => "prune",
            ScreeningMode::ReportOnly => "report",
            ScreeningMode::Off => "off",
        };
        let theta = match self.theta {
            StepSchedule::TwoOverTPlusOne => "2t1",
            StepSchedule::FourOverTPlusTwo => "4t2",
        };
        let pairs = [
            ("alpha", join(&self.alphas)),
            ("atoms", path_str(&self.atoms)),
            ("beta", self.beta.to_string()),
            ("capacity", self.capacity.to_string()),
            ("conservative", self.conservative.to_string()),
            ("d", self.d.to_string()),
            ("data", path_str(&self.data)),
            ("digits", format!("{},{}", self.digits.0, self.digits.1)),
            ("experiment", self.experiment.name().to_string()),
            ("gap_tol", self.gap_tol.to_string()),
            ("images", path_str(&self.images)),
            ("iters", self.iters.to_string()),
            ("labels", path_str(&self.labels)),
            ("lambda", join(&self.lambdas)),
            ("loss", self.loss.name().to_string()),
            ("n", self.n.to_string()),
            ("penalty", self.penalty.name().to_string()),
            ("scale", self.scale.to_string()),
            ("screen", screen.to_string()),
            ("screen_every", self.screen_every.to_string()),
            ("seed", self.seed.to_string()),
            ("test_images", path_str(&self.test_images)),
            ("test_labels", path_str(&self.test_labels)),
            ("theta", theta.to_string()),
            ("timing", self.timing.to_string()),
            ("trace_every", self.trace_every.to_string()),
        ];
        let mut s = String::new();
        for (k, v) in pairs {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Sweep points. Only power penalties use `alpha`; the indicator ignores
    /// `lambda` as well, so it contributes a single point.
    pub fn grid(&self) -> Vec<GridPoint> {
        let alphas: &[f64] = if self.penalty == PenaltyChoice::Power { &self.alphas } else { &self.alphas[..1] };
        let lambdas: &[f64] = if self.penalty == PenaltyChoice::Indicator { &self.lambdas[..1] } else { &self.lambdas };
        let mut points = Vec::new();
        for &alpha in alphas {
            for &lambda in lambdas {
                points.push(GridPoint { alpha, lambda });
            }
        }
        points
    }

    /// The single-run config for one grid point.
    pub fn at(&self, point: GridPoint) -> ExperimentConfig {
        ExperimentConfig { alphas: vec![point.alpha], lambdas: vec![point.lambda], ..self.clone() }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.iters,
            gap_tolerance: self.gap_tol,
            schedule: self.theta,
            screening: self.screen,
            screen_every: self.screen_every,
            conservative_sigma: self.conservative,
            trace_every: self.trace_every,
            ..SolverConfig::default()
        }
    }
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Synthetic => "synthetic",
            Experiment::Mnist => "mnist",
        }
    }
}

impl LossChoice {
    pub fn name(self) -> &'static str {
        match self {
            LossChoice::Logistic => "logistic",
            LossChoice::Quadratic => "quadratic",
        }
    }
}

impl PenaltyChoice {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyChoice::Power => "power",
            PenaltyChoice::LogBarrier => "log-barrier",
            PenaltyChoice::Indicator => "indicator",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut cfg = ExperimentConfig::default();
        let text = "# sweep\nlambda = 0.01, 0.1,1\npenalty=power\nscreen-every = 5\n";
        cfg.apply_text(Path::new("c"), text).unwrap();
        assert_eq!(cfg.lambdas, vec![0.01, 0.1, 1.0]);
        assert_eq!(cfg.screen_every, 5);
        cfg.set("screen-every", "2").unwrap();
        assert_eq!(cfg.screen_every, 2);
        assert_eq!(cfg.grid().len(), 3);
    }

    #[test]
    fn config_errors_carry_offsets() {
        let mut cfg = ExperimentConfig::default();
        let err = cfg.apply_text(Path::new("c"), "seed = 1\ntheta = 3t\n").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 9, .. }));
        assert!(matches!(cfg.apply_text(Path::new("c"), "seed\n"), Err(Error::Format { offset: 0, .. })));
        assert!(cfg.set("bogus", "1").is_err());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn grid_depends_on_penalty() {
        let mut cfg = ExperimentConfig { alphas: vec![1.5, 2.0], lambdas: vec![0.1, 1.0], ..Default::default() };
        assert_eq!(cfg.grid().len(), 4);
        cfg.penalty = PenaltyChoice::LogBarrier;
        assert_eq!(cfg.grid().len(), 2);
        cfg.penalty = PenaltyChoice::Indicator;
        assert_eq!(cfg.grid().len(), 1);
        let one = cfg.at(cfg.grid()[0]);
        assert_eq!(one.lambdas, vec![0.1]);
    }
}
