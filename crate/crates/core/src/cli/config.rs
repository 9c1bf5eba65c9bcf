use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::acquisition::{AcquisitionSpec, Transform};
use crate::batch::{BatchStrategy, DesignSettings, Goal, StrategyKind};
use crate::benchmarks::Benchmark;
use crate::lipschitz::MMode;

use super::{CliError, SEED_ENV};

/// Parsed `key = value` pairs. Keys are lower-cased; duplicates are rejected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)));
            };
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("key '{key}': cannot parse '{v}': {e}"))))
            .transpose()
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().parse::<T>().map_err(|e| CliError::Config(format!("key '{key}': cannot parse '{s}': {e}"))))
                    .collect()
            })
            .transpose()
    }

    fn finish(self) -> Result<(), CliError> {
        match self.entries.keys().next() {
            Some(k) => Err(CliError::Config(format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub benchmark: String,
    pub dimension: Option<usize>,
    pub strategy: StrategyKind,
    pub acquisition: String,
    pub kappa: f64,
    pub transform: Option<Transform>,
    pub batch_size: usize,
    pub iterations: usize,
    pub replicates: usize,
    /// Defaults to `2 d + 1`.
    pub init_size: Option<usize>,
    pub noise: f64,
    pub seed: u64,
    pub output: PathBuf,
    /// Defaults to the benchmark's own goal.
    pub goal: Option<Goal>,
    pub restarts: usize,
    pub seeds: usize,
    pub m_mode: MMode,
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            benchmark: "gsobol".into(),
            dimension: None,
            strategy: StrategyKind::Lp,
            acquisition: "ucb".into(),
            kappa: 2.0,
            transform: None,
            batch_size: 5,
            iterations: 10,
            replicates: 1,
            init_size: None,
            noise: 0.0,
            seed: 0,
            output: PathBuf::from("results.csv"),
            goal: None,
            restarts: 10,
            seeds: 10,
            m_mode: MMode::MaxY,
            record_timing: true,
        }
    }
}

fn parse_m_mode(s: &str) -> Result<MMode, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "max_y" => Ok(MMode::MaxY),
        "max_mu" => Ok(MMode::MaxMu),
        other => Err(CliError::Config(format!("unknown m_mode '{other}'"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut kv = KeyValues::parse(text)?;
        let mut c = Self::default();
        if let Some(v) = kv.take("benchmark") {
            c.benchmark = v.to_ascii_lowercase();
        }
        c.dimension = kv.get("dimension")?;
        if let Some(v) = kv.take("strategy") {
            c.strategy = v.parse().map_err(|e: crate::Error| CliError::Config(e.to_string()))?;
        }
        if let Some(v) = kv.take("acquisition") {
            c.acquisition = v.to_ascii_lowercase();
        }
        c.kappa = kv.get("kappa")?.unwrap_or(c.kappa);
        c.transform = kv.get("transform")?;
        c.batch_size = kv.get("batch_size")?.unwrap_or(c.batch_size);
        c.iterations = kv.get("iterations")?.unwrap_or(c.iterations);
        c.replicates = kv.get("replicates")?.unwrap_or(c.replicates);
        c.init_size = kv.get("init_size")?;
        c.noise = kv.get("noise")?.unwrap_or(c.noise);
        c.seed = kv.get("seed")?.unwrap_or(c.seed);
        if let Some(v) = kv.take("output") {
            c.output = PathBuf::from(v);
        }
        c.goal = kv.get("goal")?;
        c.restarts = kv.get("restarts")?.unwrap_or(c.restarts);
        c.seeds = kv.get("seeds")?.unwrap_or(c.seeds);
        if let Some(v) = kv.take("m_mode") {
            c.m_mode = parse_m_mode(&v)?;
        }
        c.record_timing = kv.get("record_timing")?.unwrap_or(c.record_timing);
        kv.finish()?;
        c.validate()?;
        Ok(c)
    }

    /// Read a config file and apply the seed override from the environment.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let mut c = Self::parse(&read(path)?)?;
        if let Some(seed) = env_seed()? {
            c.seed = seed;
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bench = self.benchmark()?;
        if self.replicates == 0 || self.iterations == 0 || self.batch_size == 0 {
            return Err(CliError::Config("replicates, iterations and batch_size must be >= 1".into()));
        }
        if self.init_size(&bench) < 2 {
            return Err(CliError::Config("init_size must be >= 2".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(CliError::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        if self.restarts == 0 || self.seeds == 0 {
            return Err(CliError::Config("restarts and seeds must be >= 1".into()));
        }
        self.strategy()?;
        Ok(())
    }

    pub fn benchmark(&self) -> Result<Benchmark, CliError> {
        Benchmark::by_name(&self.benchmark, self.dimension).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn init_size(&self, bench: &Benchmark) -> usize {
        self.init_size.unwrap_or(2 * bench.dim() + 1)
    }

    pub fn acquisition_spec(&self) -> Result<AcquisitionSpec, CliError> {
        let spec = match self.acquisition.as_str() {
            "ei" => AcquisitionSpec::ei(),
            "ucb" => AcquisitionSpec::ucb(self.kappa).map_err(|e| CliError::Config(e.to_string()))?,
            other => return Err(CliError::Config(format!("unknown acquisition '{other}'"))),
        };
        match self.transform {
            Some(t) => spec.with_transform(t).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(spec),
        }
    }

    pub fn strategy(&self) -> Result<BatchStrategy, CliError> {
        BatchStrategy::new(self.strategy, self.batch_size, self.acquisition_spec()?).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn design_settings(&self) -> DesignSettings {
        let mut s = DesignSettings { restarts: self.restarts, m_mode: self.m_mode, ..DesignSettings::default() };
        s.maximize.seeds = self.seeds;
        s
    }

    /// Label used in summaries, e.g. `lp-ucb`.
    pub fn method_label(&self) -> String {
        format!("{}-{}", self.strategy.name(), self.acquisition)
    }
}

/// Settings of the Lipschitz-estimate convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub benchmark: String,
    pub dimension: Option<usize>,
    pub sample_sizes: Vec<usize>,
    pub noise_levels: Vec<f64>,
    pub replicates: usize,
    pub restarts: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            benchmark: "cosines".into(),
            dimension: None,
            sample_sizes: vec![10, 20, 30, 40, 50],
            noise_levels: vec![0.0, 0.1, 0.25],
            replicates: 30,
            restarts: 10,
            seed: 0,
            output: PathBuf::from("lipschitz_study.csv"),
        }
    }
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut kv = KeyValues::parse(text)?;
        let mut c = Self::default();
        if let Some(v) = kv.take("benchmark") {
            c.benchmark = v.to_ascii_lowercase();
        }
        c.dimension = kv.get("dimension")?;
        c.sample_sizes = kv.list("sample_sizes")?.unwrap_or(c.sample_sizes);
        c.noise_levels = kv.list("noise_levels")?.unwrap_or(c.noise_levels);
        c.replicates = kv.get("replicates")?.unwrap_or(c.replicates);
        c.restarts = kv.get("restarts")?.unwrap_or(c.restarts);
        c.seed = kv.get("seed")?.unwrap_or(c.seed);
        if let Some(v) = kv.take("output") {
            c.output = PathBuf::from(v);
        }
        kv.finish()?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let mut c = Self::parse(&read(path)?)?;
        if let Some(seed) = env_seed()? {
            c.seed = seed;
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.benchmark()?;
        if self.replicates == 0 || self.restarts == 0 {
            return Err(CliError::Config("replicates and restarts must be >= 1".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n < 2) {
            return Err(CliError::Config("sample_sizes must be a non-empty list of values >= 2".into()));
        }
        if self.noise_levels.is_empty() || self.noise_levels.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(CliError::Config("noise_levels must be a non-empty list of values >= 0".into()));
        }
        Ok(())
    }

    pub fn benchmark(&self) -> Result<Benchmark, CliError> {
        Benchmark::by_name(&self.benchmark, self.dimension).map_err(|e| CliError::Config(e.to_string()))
    }
}
