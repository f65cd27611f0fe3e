//! Run configuration shared by every CLI verb.
//!
//! The file format is one `key = value` per line; `#` starts a comment and
//! blank lines are ignored. Keys use the CLI flag names with `-` or `_`
//! interchangeable, lists are comma separated. Values given on the command
//! line are applied after the file and therefore win.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::{CsvOptions, LabelColumn};
use crate::drr::DrrConfig;
use crate::error::{DrrError, Result};
use crate::eval::DEFAULT_LDA_RIDGE;
use crate::krr::KrrSettings;
use crate::manifolds::{ManifoldSpec, DEFAULT_TILT};
use crate::ppa::DEFAULT_DEGREE;
use crate::transform::Method;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub methods: Option<Vec<Method>>,
    pub k: Option<usize>,
    pub ks: Option<Vec<usize>>,
    pub seed: u64,
    /// Number of consecutive seeds starting at `seed`.
    pub seeds: Option<usize>,
    pub folds: usize,
    pub degree: usize,
    pub max_train: usize,
    pub cv_max: usize,
    pub sigma_multipliers: Vec<f64>,
    pub gammas: Vec<f64>,
    pub share_hyperparameters: bool,
    pub first_residualized: usize,
    pub last_residualized: Option<usize>,
    pub lda_ridge: f64,
    pub train_fraction: f64,
    pub tilt: f64,
    pub noise_std: f64,
    pub n_samples: usize,
    pub features: bool,
    pub header: bool,
    pub delimiter: u8,
    pub label_column: Option<LabelColumn>,
    pub synthetic: bool,
    pub input: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub test_targets: Option<PathBuf>,
    pub model: Vec<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let krr = KrrSettings::default();
        let manifold = ManifoldSpec::default();
        Self {
            method: Method::Drr,
            methods: None,
            k: None,
            ks: None,
            seed: krr.seed,
            seeds: None,
            folds: krr.folds,
            degree: DEFAULT_DEGREE,
            max_train: krr.max_train,
            cv_max: krr.cv_max,
            sigma_multipliers: krr.sigma_multipliers,
            gammas: krr.gammas,
            share_hyperparameters: false,
            first_residualized: 2,
            last_residualized: None,
            lda_ridge: DEFAULT_LDA_RIDGE,
            train_fraction: 0.5,
            tilt: DEFAULT_TILT,
            noise_std: manifold.noise_std,
            n_samples: manifold.n_samples,
            features: true,
            header: false,
            delimiter: b',',
            label_column: None,
            synthetic: false,
            input: None,
            test: None,
            targets: None,
            test_targets: None,
            model: Vec::new(),
            output: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| DrrError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(DrrError::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one setting. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        let path = || PathBuf::from(value.trim());
        match k {
            "method" => self.method = value.trim().parse().map_err(|e: DrrError| DrrError::Config(e.to_string()))?,
            "methods" => {
                let m = value
                    .split(',')
                    .map(|s| s.trim().parse::<Method>())
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| DrrError::Config(e.to_string()))?;
                self.methods = Some(m);
            }
            "k" => self.k = parse_optional(k, value)?,
            "ks" => self.ks = Some(parse_ks(value)?),
            "seed" => self.seed = parse(k, value)?,
            "seeds" => self.seeds = parse_optional(k, value)?,
            "folds" => self.folds = parse(k, value)?,
            "degree" => self.degree = parse(k, value)?,
            "max_train" => self.max_train = parse(k, value)?,
            "cv_max" => self.cv_max = parse(k, value)?,
            "sigma_multipliers" => self.sigma_multipliers = parse_list(k, value)?,
            "gammas" => self.gammas = parse_list(k, value)?,
            "share_hyperparameters" => self.share_hyperparameters = parse_bool(k, value)?,
            "first_residualized" => self.first_residualized = parse(k, value)?,
            "last_residualized" => self.last_residualized = parse_optional(k, value)?,
            "lda_ridge" => self.lda_ridge = parse(k, value)?,
            "train_fraction" => self.train_fraction = parse(k, value)?,
            "tilt" => self.tilt = parse(k, value)?,
            "noise_std" => self.noise_std = parse(k, value)?,
            "n_samples" => self.n_samples = parse(k, value)?,
            "features" => self.features = parse_bool(k, value)?,
            "header" => self.header = parse_bool(k, value)?,
            "delimiter" => self.delimiter = parse_delimiter(value)?,
            "label_column" => {
                self.label_column = match value.trim() {
                    "" | "none" => None,
                    "last" => Some(LabelColumn::Last),
                    v => Some(LabelColumn::Index(parse(k, v)?)),
                }
            }
            "synthetic" => self.synthetic = parse_bool(k, value)?,
            "input" => self.input = Some(path()),
            "test" => self.test = Some(path()),
            "targets" => self.targets = Some(path()),
            "test_targets" => self.test_targets = Some(path()),
            "model" => self.model = value.split(',').map(|s| PathBuf::from(s.trim())).collect(),
            "output" => self.output = Some(path()),
            _ => return Err(DrrError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| DrrError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| DrrError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| DrrError::io(path, e))?;
        self.parse_str(&text)
    }

    /// Every setting as `(key, value)`; feeding them back through
    /// [`Self::set`] reproduces this config.
    pub fn entries(&self) -> Vec<(String, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let p = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
        let mut e = vec![
            ("method", self.method.to_string()),
            ("k", opt(self.k.map(|v| v.to_string()))),
            ("seed", self.seed.to_string()),
            ("seeds", opt(self.seeds.map(|v| v.to_string()))),
            ("folds", self.folds.to_string()),
            ("degree", self.degree.to_string()),
            ("max_train", self.max_train.to_string()),
            ("cv_max", self.cv_max.to_string()),
            ("sigma_multipliers", join(&self.sigma_multipliers)),
            ("gammas", join(&self.gammas)),
            ("share_hyperparameters", self.share_hyperparameters.to_string()),
            ("first_residualized", self.first_residualized.to_string()),
            ("last_residualized", opt(self.last_residualized.map(|v| v.to_string()))),
            ("lda_ridge", self.lda_ridge.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("tilt", self.tilt.to_string()),
            ("noise_std", self.noise_std.to_string()),
            ("n_samples", self.n_samples.to_string()),
            ("features", self.features.to_string()),
            ("header", self.header.to_string()),
            ("delimiter", delimiter_name(self.delimiter)),
            (
                "label_column",
                match self.label_column {
                    None => "none".into(),
                    Some(LabelColumn::Last) => "last".into(),
                    Some(LabelColumn::Index(i)) => i.to_string(),
                },
            ),
            ("synthetic", self.synthetic.to_string()),
        ];
        if let Some(m) = &self.methods {
            e.push(("methods", join(m)));
        }
        if let Some(ks) = &self.ks {
            e.push(("ks", join(ks)));
        }
        let paths = [
            ("input", p(&self.input)),
            ("test", p(&self.test)),
            ("targets", p(&self.targets)),
            ("test_targets", p(&self.test_targets)),
            ("output", p(&self.output)),
        ];
        e.extend(paths.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
        if !self.model.is_empty() {
            e.push(("model", join(&self.model.iter().map(|p| p.display()).collect::<Vec<_>>())));
        }
        e.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_config_string(&self) -> String {
        self.entries().into_iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            has_header: self.header,
            delimiter: self.delimiter,
        }
    }

    pub fn krr_settings(&self) -> KrrSettings {
        KrrSettings {
            sigma_multipliers: self.sigma_multipliers.clone(),
            gammas: self.gammas.clone(),
            folds: self.folds,
            seed: self.seed,
            max_train: self.max_train,
            cv_max: self.cv_max,
        }
    }

    pub fn drr_config(&self) -> DrrConfig {
        DrrConfig {
            krr: self.krr_settings(),
            first_residualized: self.first_residualized,
            last_residualized: self.last_residualized,
            share_hyperparameters: self.share_hyperparameters,
            ..DrrConfig::default()
        }
    }

    pub fn manifold_spec(&self) -> ManifoldSpec {
        ManifoldSpec {
            n_samples: self.n_samples,
            tilt: self.tilt,
            noise_std: self.noise_std,
            seed: self.seed,
            ..ManifoldSpec::default()
        }
    }

    /// `seed, seed + 1, ...`, `default_count` of them unless `seeds` is set.
    pub fn seed_list(&self, default_count: usize) -> Vec<u64> {
        let n = self.seeds.unwrap_or(default_count) as u64;
        (0..n).map(|i| self.seed.wrapping_add(i)).collect()
    }

    /// Checks the settings every verb relies on.
    pub fn validate(&self) -> Result<()> {
        self.krr_settings().validate().map_err(|e| DrrError::Config(e.to_string()))?;
        if self.degree == 0 {
            return Err(DrrError::Config("degree must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(DrrError::Config("train_fraction must lie in (0, 1)".into()));
        }
        if !(self.lda_ridge >= 0.0) {
            return Err(DrrError::Config("lda_ridge must be non-negative".into()));
        }
        if self.seeds == Some(0) {
            return Err(DrrError::Config("seeds must be at least 1".into()));
        }
        if self.k == Some(0) || self.ks.as_ref().is_some_and(|ks| ks.is_empty() || ks.contains(&0)) {
            return Err(DrrError::Config("k values must be at least 1".into()));
        }
        if self.first_residualized < 2 {
            return Err(DrrError::Config("first_residualized must be at least 2".into()));
        }
        Ok(())
    }
}

/// Comma list with `a-b` inclusive ranges, e.g. `1-5,10`.
fn parse_ks(value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (parse("ks", a)?, parse("ks", b)?);
                if a > b {
                    return Err(DrrError::Config(format!("ks: empty range {part:?}")));
                }
                out.extend(a..=b);
            }
            None => out.push(parse("ks", part)?),
        }
    }
    Ok(out)
}

fn parse_delimiter(value: &str) -> Result<u8> {
    match value {
        "space" | " " => Ok(b' '),
        "tab" | "\t" => Ok(b'\t'),
        "comma" => Ok(b','),
        v if v.trim().len() == 1 && v.trim().is_ascii() => Ok(v.trim().as_bytes()[0]),
        v => Err(DrrError::Config(format!("delimiter must be one ASCII character, space or tab, got {v:?}"))),
    }
}

fn delimiter_name(d: u8) -> String {
    match d {
        b' ' => "space".into(),
        b'\t' => "tab".into(),
        b',' => "comma".into(),
        c => (c as char).to_string(),
    }
}
