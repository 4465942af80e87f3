//! Flat `key=value` configuration with CLI-over-file-over-default precedence.
//!
//! Every knob has a configuration-file key; the common ones additionally have
//! a dedicated CLI flag, and any key at all can be set from the command line
//! with `--set key=value`. A flag given on the command line always beats the
//! same key in the file, which beats the built-in default.

use anyhow::{anyhow, bail, Context, Result};
use spclust::bethe::BhOptions;
use spclust::bp::BpSettings;
use spclust::cluster::{KmeansSettings, Method};
use spclust::ingest::{Bandwidth, IngestOptions};
use spclust::model::ModelParams;
use spclust::nb::NbOptions;
use std::path::{Path, PathBuf};

macro_rules! settings_fields {
    ($(($field:ident, $key:literal, $ty:ty)),+ $(,)?) => {
        /// All tunables; `None` means "use the default".
        #[derive(Debug, Clone, Default)]
        pub struct Settings {
            $(pub $field: Option<$ty>,)+
        }

        impl Settings {
            /// Applies one `key=value` assignment. Unknown keys and
            /// malformed values are configuration errors.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => {
                        self.$field = Some(value.parse::<$ty>().map_err(|_| {
                            anyhow!("invalid value '{value}' for key '{key}'")
                        })?);
                    })+
                    _ => bail!("unknown configuration key '{key}'"),
                }
                Ok(())
            }

            /// Overlays every set field of `other` onto `self`.
            pub fn overlay(&mut self, other: Settings) {
                $(if other.$field.is_some() {
                    self.$field = other.$field;
                })+
            }
        }
    };
}

settings_fields![
    // measurement model
    (model, "model", String),
    (k, "k", usize),
    (eps, "eps", f64),
    (mean_in, "mean_in", f64),
    (mean_out, "mean_out", f64),
    (variance, "variance", f64),
    // instance and experiment shape
    (n, "n", usize),
    (alpha, "alpha", f64),
    (alpha_grid, "alpha_grid", String),
    (trials, "trials", usize),
    (methods, "methods", String),
    (seed, "seed", u64),
    // output
    (out, "out", PathBuf),
    (format, "format", String),
    (timing, "timing", String),
    // belief propagation knobs
    (bp_max_iter, "bp_max_iter", usize),
    (bp_tol, "bp_tol", f64),
    (bp_damping, "bp_damping", f64),
    (bp_noise, "bp_noise", f64),
    // spectral knobs
    (kmeans_restarts, "kmeans_restarts", usize),
    (kmeans_max_iter, "kmeans_max_iter", usize),
    (nb_tol, "nb_tol", f64),
    (nb_max_pairs, "nb_max_pairs", usize),
    (nb_radius_floor, "nb_radius_floor", f64),
    (bh_tol, "bh_tol", f64),
    (bh_max_iter, "bh_max_iter", usize),
    (bh_dense_cutoff, "bh_dense_cutoff", usize),
    (bh_clamp, "bh_clamp", f64),
    // graph and label files
    (graph, "graph", PathBuf),
    (labels, "labels", PathBuf),
    // point-cloud ingestion
    (points, "points", PathBuf),
    (has_header, "has_header", bool),
    (label_column, "label_column", bool),
    (bandwidth, "bandwidth", String),
    (bins, "bins", usize),
    (truth, "truth", PathBuf),
    (report, "report", PathBuf),
];

/// Shared command-line flags. The full key list (belief-propagation and
/// solver knobs included) is reachable through `--set key=value`.
#[derive(clap::Args, Debug, Default)]
pub struct CommonArgs {
    /// Flat key=value configuration file; direct flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Base random seed (default 1).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of items.
    #[arg(long)]
    pub n: Option<usize>,
    /// Mean measurement degree.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated mean-degree grid, strictly increasing (sweep).
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// Number of groups (default 2).
    #[arg(long)]
    pub k: Option<usize>,
    /// Trials per grid point (sweep; default 1).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated subset of {bp, nb, bh} (default all three).
    #[arg(long)]
    pub methods: Option<String>,
    /// Output path; commands that emit CSV print to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; only "csv" is supported.
    #[arg(long)]
    pub format: Option<String>,
    /// Measurement model: "censored" (noisy signs) or "gaussian".
    #[arg(long)]
    pub model: Option<String>,
    /// Sign-flip probability of the censored model (default 0.1).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Within-group mean of the gaussian model (default 1.5).
    #[arg(long)]
    pub mean_in: Option<f64>,
    /// Across-group mean of the gaussian model (default 0).
    #[arg(long)]
    pub mean_out: Option<f64>,
    /// Shared variance of the gaussian model (default 1).
    #[arg(long)]
    pub variance: Option<f64>,
    /// "real" wall-clock columns, or "zero" for byte-reproducible output.
    #[arg(long)]
    pub timing: Option<String>,
    /// Graph file to read (run/spectrum on stored instances).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Labels file: written by generate, read as ground truth by run.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Point CSV file (cluster-points).
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Whether the point CSV starts with a header line (default false).
    #[arg(long)]
    pub has_header: Option<bool>,
    /// Whether the last CSV column holds (possibly empty) training labels
    /// (default true).
    #[arg(long)]
    pub label_column: Option<bool>,
    /// Kernel bandwidth: "auto" or a positive number (default auto).
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Ground-truth labels file enabling the cluster-points accuracy report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Accuracy report path (stdout when omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Any configuration key as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Resolves the effective settings: defaults, then the config file, then
/// `--set` pairs, then dedicated flags.
pub fn resolve(args: &CommonArgs) -> Result<Settings> {
    let mut settings = Settings::default();
    if let Some(path) = &args.config {
        load_file(&mut settings, path)?;
    }

    let mut cli = Settings::default();
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .with_context(|| format!("--set expects key=value, got '{kv}'"))?;
        cli.set(key.trim(), value.trim())?;
    }
    cli.model = args.model.clone().or(cli.model);
    cli.k = args.k.or(cli.k);
    cli.eps = args.eps.or(cli.eps);
    cli.mean_in = args.mean_in.or(cli.mean_in);
    cli.mean_out = args.mean_out.or(cli.mean_out);
    cli.variance = args.variance.or(cli.variance);
    cli.n = args.n.or(cli.n);
    cli.alpha = args.alpha.or(cli.alpha);
    cli.alpha_grid = args.alpha_grid.clone().or(cli.alpha_grid);
    cli.trials = args.trials.or(cli.trials);
    cli.methods = args.methods.clone().or(cli.methods);
    cli.seed = args.seed.or(cli.seed);
    cli.out = args.out.clone().or(cli.out);
    cli.format = args.format.clone().or(cli.format);
    cli.timing = args.timing.clone().or(cli.timing);
    cli.graph = args.graph.clone().or(cli.graph);
    cli.labels = args.labels.clone().or(cli.labels);
    cli.points = args.points.clone().or(cli.points);
    cli.has_header = args.has_header.or(cli.has_header);
    cli.label_column = args.label_column.or(cli.label_column);
    cli.bandwidth = args.bandwidth.clone().or(cli.bandwidth);
    cli.truth = args.truth.clone().or(cli.truth);
    cli.report = args.report.clone().or(cli.report);
    settings.overlay(cli);

    if let Some(f) = settings.format.as_deref() {
        if f != "csv" {
            bail!("unsupported output format '{f}' (only csv)");
        }
    }
    if let Some(t) = settings.timing.as_deref() {
        if t != "real" && t != "zero" {
            bail!("timing must be 'real' or 'zero', got '{t}'");
        }
    }
    Ok(settings)
}

fn load_file(settings: &mut Settings, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').with_context(|| {
            format!("{}:{}: expected key=value", path.display(), idx + 1)
        })?;
        settings
            .set(key.trim(), value.trim())
            .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
    }
    Ok(())
}

impl Settings {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn require_n(&self) -> Result<usize> {
        self.n
            .context("n is required (pass --n or set n= in the config file)")
    }

    pub fn require_alpha(&self) -> Result<f64> {
        let a = self
            .alpha
            .context("alpha is required (pass --alpha or set alpha= in the config file)")?;
        if !(a.is_finite() && a > 0.0) {
            bail!("alpha must be a positive finite number, got {a}");
        }
        Ok(a)
    }

    pub fn trials(&self) -> Result<usize> {
        let t = self.trials.unwrap_or(1);
        if t == 0 {
            bail!("trials must be at least 1");
        }
        Ok(t)
    }

    pub fn alpha_grid(&self) -> Result<Vec<f64>> {
        let raw = self
            .alpha_grid
            .as_deref()
            .context("alpha_grid is required (comma-separated mean degrees)")?;
        let mut grid = Vec::new();
        for part in raw.split(',') {
            let a: f64 = part
                .trim()
                .parse()
                .map_err(|_| anyhow!("invalid grid entry '{}'", part.trim()))?;
            if !(a.is_finite() && a > 0.0) {
                bail!("grid entries must be positive finite numbers, got {a}");
            }
            grid.push(a);
        }
        if grid.is_empty() {
            bail!("alpha_grid must not be empty");
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            bail!("alpha_grid must be strictly increasing");
        }
        Ok(grid)
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        let raw = self.methods.as_deref().unwrap_or("bp,nb,bh");
        let mut out: Vec<Method> = Vec::new();
        for part in raw.split(',') {
            let m: Method = part
                .trim()
                .parse()
                .map_err(|_| anyhow!("unknown method '{}' (expected bp, nb, or bh)", part.trim()))?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            bail!("methods must not be empty");
        }
        Ok(out)
    }

    /// Wall-clock columns are real by default; `timing = zero` pins them to 0
    /// so repeated runs are byte-identical.
    pub fn timing_real(&self) -> bool {
        self.timing.as_deref() != Some("zero")
    }

    /// Builds the measurement model at the given mean degree. `k_fixed`
    /// (e.g. from a graph-file header) wins over the configured k and must
    /// not contradict it.
    pub fn model_params(&self, k_fixed: Option<usize>, alpha: f64) -> Result<ModelParams> {
        let k = match (k_fixed, self.k) {
            (Some(kf), Some(kc)) if kf != kc => {
                bail!("k = {kc} contradicts the graph file's k = {kf}")
            }
            (Some(kf), _) => kf,
            (None, kc) => kc.unwrap_or(2),
        };
        let model = self
            .model
            .as_deref()
            .context("model is required ('censored' or 'gaussian')")?;
        let params = match model {
            "censored" => ModelParams::censored(k, alpha, self.eps.unwrap_or(0.1)),
            "gaussian" => ModelParams::gaussian_pair(
                k,
                alpha,
                self.mean_in.unwrap_or(1.5),
                self.mean_out.unwrap_or(0.0),
                self.variance.unwrap_or(1.0),
            ),
            other => bail!("unknown model '{other}' (expected censored or gaussian)"),
        };
        params.map_err(|e| anyhow!("invalid model: {e}"))
    }

    pub fn bp_settings(&self) -> BpSettings {
        let mut s = BpSettings::default();
        if let Some(v) = self.bp_max_iter {
            s.max_iter = v;
        }
        if let Some(v) = self.bp_tol {
            s.tol = v;
        }
        if let Some(v) = self.bp_damping {
            s.damping = v;
        }
        if let Some(v) = self.bp_noise {
            s.noise = v;
        }
        s
    }

    pub fn kmeans_settings(&self) -> KmeansSettings {
        let mut s = KmeansSettings::default();
        if let Some(v) = self.kmeans_restarts {
            s.restarts = v;
        }
        if let Some(v) = self.kmeans_max_iter {
            s.max_iter = v;
        }
        s
    }

    pub fn nb_options(&self) -> NbOptions {
        let mut o = NbOptions::default();
        if let Some(v) = self.nb_tol {
            o.tol = v;
        }
        if self.nb_max_pairs.is_some() {
            o.max_pairs = self.nb_max_pairs;
        }
        if let Some(v) = self.nb_radius_floor {
            o.radius_floor = v;
        }
        o
    }

    pub fn bh_options(&self) -> BhOptions {
        let mut o = BhOptions::default();
        if let Some(v) = self.bh_tol {
            o.tol = v;
        }
        if let Some(v) = self.bh_max_iter {
            o.max_iter = v;
        }
        if let Some(v) = self.bh_dense_cutoff {
            o.dense_cutoff = v;
        }
        o.clamp = self.bh_clamp;
        o
    }

    pub fn bandwidth(&self) -> Result<Bandwidth> {
        self.bandwidth
            .as_deref()
            .unwrap_or("auto")
            .parse()
            .map_err(|e| anyhow!("{e}"))
    }

    pub fn ingest_options(&self) -> IngestOptions {
        let mut o = IngestOptions::default();
        if let Some(b) = self.bins {
            o.bins = b;
        }
        o
    }
}
