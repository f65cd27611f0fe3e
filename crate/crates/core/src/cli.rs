//! Command-line front end. Every verb resolves a [`RunConfig`] (defaults,
//! then `--config` file, then flags), validates it, and runs as a pure
//! function of its inputs.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::dataset::{load_csv, load_labeled_csv, split, write_csv, DataMatrix, LabelColumn, SplitSpec};
use crate::drr::Regressor;
use crate::error::{DrrError, Result};
use crate::eval::{
    classification_curve, classification_error, reconstruction_curve, retrieval_curve, write_results, LdaModel,
    ResultRow, SyntheticRetrieval,
};
use crate::manifolds::{benchmark, generate_manifold, mean_relative_mse_dr, BenchmarkSettings};
use crate::pca::PcaModel;
use crate::persistence::{load_model, save_model, Model};
use crate::transform::{InvertibleTransform, Method};

#[derive(Debug, Parser)]
#[command(name = "drr", version, about = "Dimensionality reduction via regression, with PCA and PPA baselines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on --input and write it to --model; prints a fit report.
    Fit(Opts),
    /// Map --input through the model's forward transform.
    Transform(Opts),
    /// Map transform-domain --input back to the input domain.
    Invert(Opts),
    /// Reconstruct --input from its first --k transform coordinates.
    Reconstruct(Opts),
    /// Truncation error curves of one or more --model files on --input.
    EvalReconstruction(Opts),
    /// LDA error on data reconstructed from k coordinates.
    EvalClassify(Opts),
    /// Linear retrieval error from the first k coordinates.
    EvalRetrieve(Opts),
    /// Sample a (tilted) curved manifold; columns x,y,z,u,v.
    GenManifold(Opts),
    /// PCA/PPA/DRR reconstruction and feature errors on the manifolds.
    BenchmarkManifolds(Opts),
}

/// Every setting of [`RunConfig`] as an optional override.
#[derive(Debug, Default, Args)]
pub struct Opts {
    /// Flat key = value settings file, applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<String>,
    /// Separate test CSV.
    #[arg(long)]
    pub test: Option<String>,
    /// Regression targets matching --input (eval-retrieve).
    #[arg(long)]
    pub targets: Option<String>,
    #[arg(long)]
    pub test_targets: Option<String>,
    /// Model file; repeat or comma-separate for eval-reconstruction.
    #[arg(long)]
    pub model: Vec<String>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub output: Option<String>,
    /// pca, ppa or drr.
    #[arg(long)]
    pub method: Option<String>,
    /// Comma-separated methods for the evaluation verbs.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    /// k values, e.g. 1-5,10.
    #[arg(long)]
    pub ks: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Number of consecutive seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub folds: Option<String>,
    #[arg(long)]
    pub degree: Option<String>,
    #[arg(long)]
    pub max_train: Option<String>,
    #[arg(long)]
    pub cv_max: Option<String>,
    #[arg(long)]
    pub sigma_multipliers: Option<String>,
    #[arg(long)]
    pub gammas: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub share_hyperparameters: Option<String>,
    #[arg(long)]
    pub first_residualized: Option<String>,
    #[arg(long)]
    pub last_residualized: Option<String>,
    #[arg(long)]
    pub lda_ridge: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<String>,
    #[arg(long)]
    pub tilt: Option<String>,
    #[arg(long)]
    pub noise_std: Option<String>,
    #[arg(long)]
    pub n_samples: Option<String>,
    /// Also compute the feature-grid error in benchmark-manifolds.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub features: Option<String>,
    /// Input CSVs have a header line.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub header: Option<String>,
    /// One character, or `space` / `tab`.
    #[arg(long)]
    pub delimiter: Option<String>,
    /// Zero-based label column index or `last`.
    #[arg(long)]
    pub label_column: Option<String>,
    /// Use the built-in synthetic task (eval-retrieve).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub synthetic: Option<String>,
}

impl Opts {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut add = |k: &'static str, val: &Option<String>| {
            if let Some(x) = val {
                v.push((k, x.clone()));
            }
        };
        add("input", &self.input);
        add("test", &self.test);
        add("targets", &self.targets);
        add("test_targets", &self.test_targets);
        add("output", &self.output);
        add("method", &self.method);
        add("methods", &self.methods);
        add("k", &self.k);
        add("ks", &self.ks);
        add("seed", &self.seed);
        add("seeds", &self.seeds);
        add("folds", &self.folds);
        add("degree", &self.degree);
        add("max_train", &self.max_train);
        add("cv_max", &self.cv_max);
        add("sigma_multipliers", &self.sigma_multipliers);
        add("gammas", &self.gammas);
        add("share_hyperparameters", &self.share_hyperparameters);
        add("first_residualized", &self.first_residualized);
        add("last_residualized", &self.last_residualized);
        add("lda_ridge", &self.lda_ridge);
        add("train_fraction", &self.train_fraction);
        add("tilt", &self.tilt);
        add("noise_std", &self.noise_std);
        add("n_samples", &self.n_samples);
        add("features", &self.features);
        add("header", &self.header);
        add("delimiter", &self.delimiter);
        add("label_column", &self.label_column);
        add("synthetic", &self.synthetic);
        if !self.model.is_empty() {
            v.push(("model", self.model.join(",")));
        }
        v
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.load_file(p)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, &v).map_err(|e| DrrError::Config(format!("--{}: {e}", k.replace('_', "-"))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the verb.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        // --help and --version
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(DrrError::Config(e.to_string())),
    };
    execute(&cli.command)
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Fit(o) => cmd_fit(&o.resolve()?),
        Command::Transform(o) => cmd_apply(&o.resolve()?, Apply::Forward),
        Command::Invert(o) => cmd_apply(&o.resolve()?, Apply::Inverse),
        Command::Reconstruct(o) => cmd_apply(&o.resolve()?, Apply::Reconstruct),
        Command::EvalReconstruction(o) => cmd_eval_reconstruction(&o.resolve()?),
        Command::EvalClassify(o) => cmd_eval_classify(&o.resolve()?),
        Command::EvalRetrieve(o) => cmd_eval_retrieve(&o.resolve()?),
        Command::GenManifold(o) => cmd_gen_manifold(&o.resolve()?),
        Command::BenchmarkManifolds(o) => cmd_benchmark_manifolds(&o.resolve()?),
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| DrrError::Config(format!("--{flag} is required")))
}

fn single_model(cfg: &RunConfig) -> Result<&Path> {
    match cfg.model.as_slice() {
        [m] => Ok(m),
        [] => Err(DrrError::Config("--model is required".into())),
        _ => Err(DrrError::Config("this verb takes exactly one --model".into())),
    }
}

/// Features of `path`, with the label column dropped when one is configured.
fn load_features(path: &Path, cfg: &RunConfig) -> Result<DataMatrix> {
    match cfg.label_column {
        Some(lc) => Ok(load_labeled_csv(path, &cfg.csv_options(), lc)?.data),
        None => load_csv(path, &cfg.csv_options()),
    }
}

fn with_output(cfg: &RunConfig, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match &cfg.output {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|e| DrrError::io(p, e))?;
            let mut w = std::io::BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| DrrError::io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|e| DrrError::io("<stdout>", e))
        }
    }
}

fn column_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let input = require(&cfg.input, "input")?;
    let out = single_model(cfg)?;
    let x = load_features(input, cfg)?;
    let model = Model::fit(cfg.method, &x, &cfg.drr_config(), cfg.degree)?;
    save_model(out, &model, &cfg.entries())?;

    // per-dimension report on the training data
    let scores = PcaModel::fit(&x)?.scores(&x)?;
    let coords = model.forward(&x)?;
    let hyper = |j: usize| -> (String, String) {
        match &model {
            Model::Drr(m) if j > 0 => match &m.regressors()[j - 1] {
                Some(Regressor::Kernel(k)) => (k.sigma().to_string(), k.gamma().to_string()),
                _ => (String::new(), String::new()),
            },
            _ => (String::new(), String::new()),
        }
    };
    with_output(cfg, |w| {
        writeln!(w, "dim,score_variance,coordinate_variance,sigma,gamma")?;
        for j in 0..x.ncols() {
            let (s, g) = hyper(j);
            writeln!(
                w,
                "{},{},{},{s},{g}",
                j + 1,
                variance(&scores.column(j)),
                variance(&coords.column(j))
            )?;
        }
        Ok(())
    })
}

enum Apply {
    Forward,
    Inverse,
    Reconstruct,
}

fn cmd_apply(cfg: &RunConfig, what: Apply) -> Result<()> {
    let model = load_model(single_model(cfg)?)?.model;
    let input = require(&cfg.input, "input")?;
    let x = load_features(input, cfg)?;
    let (out, prefix) = match what {
        Apply::Forward => (model.forward(&x)?, "c"),
        Apply::Inverse => (model.inverse(&x)?, "x"),
        Apply::Reconstruct => {
            let k = cfg.k.ok_or_else(|| DrrError::Config("--k is required".into()))?;
            (model.truncate_reconstruct(&x, k)?, "x")
        }
    };
    let header = cfg.header.then(|| column_names(prefix, out.ncols()));
    with_output(cfg, |w| write_csv(w, &out, header.as_deref()))
}

fn cmd_eval_reconstruction(cfg: &RunConfig) -> Result<()> {
    if cfg.model.is_empty() {
        return Err(DrrError::Config("--model is required".into()));
    }
    let x = load_features(require(&cfg.input, "input")?, cfg)?;
    let mut curves = Vec::new();
    for path in &cfg.model {
        let m = load_model(path)?.model;
        curves.push((path.display().to_string(), reconstruction_curve(&m, &x)?));
    }
    let reference = curves.iter().find(|(_, c)| c.method == Method::Pca.as_str()).map(|(_, c)| c.clone());
    with_output(cfg, |w| {
        writeln!(w, "model,method,k,mae,mse,rel_mae,rel_mse")?;
        for (path, c) in &curves {
            let rel = reference
                .as_ref()
                .and_then(|r| Some((c.relative_mae(r).ok()?, c.relative_mse(r).ok()?)));
            for k in 0..c.len() {
                let (ra, rs) = rel.as_ref().map_or((String::new(), String::new()), |(a, s)| {
                    (a[k].to_string(), s[k].to_string())
                });
                writeln!(w, "{path},{},{},{},{},{ra},{rs}", c.method, k + 1, c.mae[k], c.mse[k])?;
            }
        }
        Ok(())
    })
}

fn default_ks(cfg: &RunConfig, d: usize, cap: usize) -> Vec<usize> {
    cfg.ks.clone().unwrap_or_else(|| (1..=d.min(cap)).collect())
}

fn cmd_eval_classify(cfg: &RunConfig) -> Result<()> {
    let lc = cfg.label_column.unwrap_or(LabelColumn::Last);
    let data = load_labeled_csv(require(&cfg.input, "input")?, &cfg.csv_options(), lc)?;
    let test = cfg
        .test
        .as_ref()
        .map(|p| load_labeled_csv(p, &cfg.csv_options(), lc))
        .transpose()?;
    let methods = cfg.methods.clone().unwrap_or_else(|| vec![Method::Pca, Method::Ppa, Method::Drr]);
    let d = data.data.ncols();
    let ks = default_ks(cfg, d, d);
    let mut rows = Vec::new();
    for seed in cfg.seed_list(1) {
        let (train, test) = match &test {
            Some(t) => (data.clone(), t.clone()),
            None => split(
                &data,
                &SplitSpec {
                    train_fraction: cfg.train_fraction,
                    seed,
                },
            )?,
        };
        let labels = |ds: &crate::dataset::LabeledDataset| -> Result<Vec<usize>> {
            ds.class_labels()
                .map(<[usize]>::to_vec)
                .ok_or_else(|| DrrError::Config("classification needs class labels".into()))
        };
        let (ltr, lte) = (labels(&train)?, labels(&test)?);
        let raw = LdaModel::fit(&train.data, &ltr, cfg.lda_ridge)?;
        rows.push(ResultRow {
            method: "raw".into(),
            seed,
            k: d,
            metric: "error".into(),
            value: classification_error(&raw.predict(&test.data)?, &lte)?,
        });
        let mut drr = cfg.drr_config();
        drr.krr.seed = seed;
        for &method in &methods {
            let m = Model::fit(method, &train.data, &drr, cfg.degree)?;
            for (k, err) in classification_curve(&m, (&train.data, &ltr), (&test.data, &lte), &ks, cfg.lda_ridge)? {
                rows.push(ResultRow {
                    method: method.to_string(),
                    seed,
                    k,
                    metric: "error".into(),
                    value: err,
                });
            }
        }
    }
    with_output(cfg, |w| write_results(w, &rows))
}

fn cmd_eval_retrieve(cfg: &RunConfig) -> Result<()> {
    let methods = cfg.methods.clone().unwrap_or_else(|| vec![Method::Pca, Method::Drr]);
    let mut rows = Vec::new();
    for seed in cfg.seed_list(1) {
        let data = if cfg.synthetic {
            SyntheticRetrieval {
                seed,
                ..SyntheticRetrieval::default()
            }
            .generate()?
        } else {
            let opts = cfg.csv_options();
            crate::eval::RetrievalData {
                x_train: load_csv(require(&cfg.input, "input")?, &opts)?,
                y_train: load_csv(require(&cfg.targets, "targets")?, &opts)?,
                x_test: load_csv(require(&cfg.test, "test")?, &opts)?,
                y_test: load_csv(require(&cfg.test_targets, "test-targets")?, &opts)?,
            }
        };
        let d = data.x_train.ncols();
        let ks = default_ks(cfg, d, 10);
        // coordinates past max(ks) are never used, so they need no regressor
        let mut drr = cfg.drr_config();
        drr.krr.seed = seed;
        let kmax = ks.iter().copied().max().unwrap_or(1).max(2).min(d);
        drr.last_residualized = Some(drr.last_residualized.unwrap_or(d).min(kmax));
        drr.first_residualized = drr.first_residualized.min(kmax + 1);
        for &method in &methods {
            let m = Model::fit(method, &data.x_train, &drr, cfg.degree)?;
            let curve = retrieval_curve(&m, (&data.x_train, &data.y_train), (&data.x_test, &data.y_test), &ks)?;
            for (k, v) in curve {
                rows.push(ResultRow {
                    method: method.to_string(),
                    seed,
                    k,
                    metric: "mae".into(),
                    value: v,
                });
            }
        }
    }
    with_output(cfg, |w| write_results(w, &rows))
}

fn cmd_gen_manifold(cfg: &RunConfig) -> Result<()> {
    let (x, lat) = generate_manifold(&cfg.manifold_spec())?;
    let both = DataMatrix::new(faer::Mat::from_fn(x.nrows(), 5, |i, j| {
        if j < 3 {
            x.get(i, j)
        } else {
            lat.get(i, j - 3)
        }
    }))?;
    let header: Vec<String> = ["x", "y", "z", "u", "v"].iter().map(|s| s.to_string()).collect();
    with_output(cfg, |w| write_csv(w, &both, Some(&header)))
}

fn cmd_benchmark_manifolds(cfg: &RunConfig) -> Result<()> {
    let settings = BenchmarkSettings {
        methods: cfg.methods.clone().unwrap_or_else(|| vec![Method::Pca, Method::Ppa, Method::Drr]),
        drr: cfg.drr_config(),
        ppa_degree: cfg.degree,
        features: cfg.features,
    };
    let rows = benchmark(&cfg.manifold_spec(), &cfg.seed_list(10), &settings)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    with_output(cfg, |w| {
        writeln!(w, "tilt,method,seed,mse_dr,mse_f,rel_mse_dr,rel_mse_f")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.tilt,
                r.method,
                r.seed,
                r.mse_dr,
                opt(r.mse_f),
                r.rel_mse_dr,
                opt(r.rel_mse_f)
            )?;
        }
        Ok(())
    })?;
    let mut tilts: Vec<f64> = rows.iter().map(|r| r.tilt).collect();
    tilts.dedup();
    for t in tilts {
        for &m in &settings.methods {
            if let Some(v) = mean_relative_mse_dr(&rows, m, t) {
                eprintln!("tilt {t}: mean relative MSE_DR {m} = {v:.1}");
            }
        }
    }
    Ok(())
}
