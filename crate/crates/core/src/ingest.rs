//! Point-cloud ingestion: build a sparse random measurement graph from pair
//! distances, estimate the class-pair measurement densities from a small
//! labeled training subset via kernel density estimation, and cluster with
//! message passing on the estimated tables.
//!
//! Training labels enter only through density estimation — the
//! message-passing run itself receives no per-node evidence.

use crate::bp::{bp_init, bp_run_with, decode_marginals, BpSettings};
use crate::cluster::{overlap, ClusterResult, Diagnostics, Method};
use crate::density::MeasurementDensity;
use crate::error::{Error, Result};
use crate::generate::sample_er_pairs;
use crate::graph::MeasurementGraph;
use crate::model::ModelParams;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::erf;
use std::io::BufRead;
use std::path::Path;

/// Default bin count for discretized density tables.
pub const DEFAULT_BINS: usize = 256;
/// Default per-bin mass floor applied before renormalization, keeping every
/// bin strictly positive so likelihood products never hit exact zero.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-12;

/// A point cloud with an optional label on each point; the labeled points
/// form the training subset.
#[derive(Debug, Clone)]
pub struct PointDataset {
    points: Vec<Vec<f64>>,
    labels: Vec<Option<u32>>,
    training_ids: Vec<usize>,
}

impl PointDataset {
    /// Builds a dataset, deriving `training_ids` from the labeled rows.
    ///
    /// # Errors
    /// [`Error::InvalidArgument`] for empty data, ragged or non-finite
    /// coordinates, mismatched label length, or a label below 1.
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<Option<u32>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty point set".into()));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument(
                "points need at least one coordinate".into(),
            ));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has {} coordinates, expected {d}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        if labels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
        if labels.iter().flatten().any(|&l| l == 0) {
            return Err(Error::InvalidArgument("labels are 1-based".into()));
        }
        let training_ids = labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|_| i))
            .collect();
        Ok(PointDataset {
            points,
            labels,
            training_ids,
        })
    }

    /// Unlabeled dataset.
    pub fn unlabeled(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![None; n])
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn label(&self, i: usize) -> Option<u32> {
        self.labels[i]
    }

    /// Indices of the labeled (training) points, increasing.
    pub fn training_ids(&self) -> &[usize] {
        &self.training_ids
    }
}

/// Pairwise measurement function on point pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
}

impl Metric {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidArgument(format!("unknown metric '{other}'"))),
        }
    }
}

/// Kernel bandwidth: a fixed positive value or the normal-reference rule
/// `1.06 · σ̂ · m^{-1/5}` computed per class pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
            _ => Err(Error::InvalidArgument(format!(
                "bandwidth must be 'auto' or a positive number, got '{s}'"
            ))),
        }
    }
}

/// Knobs of the density-estimation step.
#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Add all labeled point pairs (not only sampled edges) to the training
    /// measurements.
    pub supplement_training_pairs: bool,
    /// Let a class pair with no samples borrow the pooled all-pairs density
    /// instead of erroring.
    pub pooled_fallback: bool,
    /// Per-bin mass floor applied before renormalization; `None` disables.
    pub density_floor: Option<f64>,
    /// Histogram resolution used by [`cluster_points_with`].
    pub bins: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            supplement_training_pairs: true,
            pooled_fallback: false,
            density_floor: Some(DEFAULT_DENSITY_FLOOR),
            bins: DEFAULT_BINS,
        }
    }
}

/// Samples the measurement graph: each of the `n(n-1)/2` point pairs enters
/// independently with probability `alpha/n`, with the metric value as the
/// edge measurement.
///
/// # Errors
/// [`Error::InvalidRate`] when `alpha/n` falls outside `[0, 1]`.
pub fn build_graph_from_points(
    data: &PointDataset,
    alpha: f64,
    metric: Metric,
    seed: u64,
) -> Result<MeasurementGraph> {
    let n = data.n();
    let p = alpha / n as f64;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidRate { rate: p });
    }
    let mut rng = crate::new_rng(seed);
    let pairs = sample_er_pairs(n, p, &mut rng);
    let edges = pairs
        .into_iter()
        .map(|(i, j)| (i, j, metric.eval(data.point(i), data.point(j))))
        .collect();
    MeasurementGraph::new(n, edges)
}

/// Gaussian kernel density estimate `(1/m) Σ_i φ_h(s − s_i)` at a point.
pub fn kernel_density_at(samples: &[f64], h: f64, s: f64) -> f64 {
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let total: f64 = samples
        .iter()
        .map(|&si| {
            let z = (s - si) / h;
            (-0.5 * z * z).exp()
        })
        .sum();
    norm * total / samples.len() as f64
}

/// Standard normal CDF.
fn phi(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Estimates the `k × k` table of binned measurement densities from training
/// measurements with Gaussian-kernel density estimation, discretized onto
/// `bins` uniform bins spanning `[0, 1.05 · max observed s]`.
///
/// Training measurements for class pair `(a, b)` are the sampled edges whose
/// endpoints are both labeled with `{a, b}`, supplemented (by default) with
/// every labeled point pair at its Euclidean distance. The table is exactly
/// symmetric and every row sums to 1 within [`crate::density::MASS_TOL`].
///
/// # Errors
/// [`Error::InsufficientTrainingData`] for a class pair with no measurement
/// when the pooled fallback is off; [`Error::InvalidArgument`] for a label
/// above `k`, `bins = 0`, or `k < 2`.
pub fn kde_estimate(
    graph: &MeasurementGraph,
    data: &PointDataset,
    k: usize,
    bandwidth: Bandwidth,
    bins: usize,
) -> Result<Vec<Vec<MeasurementDensity>>> {
    kde_estimate_with(graph, data, k, bandwidth, bins, &IngestOptions::default())
}

/// [`kde_estimate`] with explicit options.
pub fn kde_estimate_with(
    graph: &MeasurementGraph,
    data: &PointDataset,
    k: usize,
    bandwidth: Bandwidth,
    bins: usize,
    options: &IngestOptions,
) -> Result<Vec<Vec<MeasurementDensity>>> {
    if k < 2 {
        return Err(Error::InvalidArgument("need k ≥ 2 classes".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    if graph.n() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: graph.n(),
        });
    }
    for &id in data.training_ids() {
        let l = data.label(id).expect("training point carries a label");
        if l as usize > k {
            return Err(Error::InvalidArgument(format!(
                "label {l} on point {id} exceeds k = {k}"
            )));
        }
    }

    // Collect per-unordered-class-pair training measurements.
    let pair_index = |a: u32, b: u32| -> usize {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        ((lo - 1) as usize) * k + (hi - 1) as usize
    };
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); k * k];
    for edge in graph.edges() {
        if let (Some(a), Some(b)) = (data.label(edge.i), data.label(edge.j)) {
            samples[pair_index(a, b)].push(edge.s);
        }
    }
    if options.supplement_training_pairs {
        let ids = data.training_ids();
        for (t, &u) in ids.iter().enumerate() {
            for &v in &ids[t + 1..] {
                let a = data.label(u).unwrap();
                let b = data.label(v).unwrap();
                let s = Metric::Euclidean.eval(data.point(u), data.point(v));
                samples[pair_index(a, b)].push(s);
            }
        }
    }

    // Common bin grid over everything the table will ever be evaluated on:
    // all graph measurements and all training measurements.
    let mut smax = 0.0f64;
    for edge in graph.edges() {
        smax = smax.max(edge.s);
    }
    for list in &samples {
        for &s in list {
            smax = smax.max(s);
        }
    }
    let span = if smax > 0.0 { smax * 1.05 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins)
        .map(|t| span * t as f64 / bins as f64)
        .collect();

    let pooled: Vec<f64> = samples.iter().flatten().copied().collect();
    let mut table: Vec<Vec<Option<MeasurementDensity>>> = vec![vec![None; k]; k];
    for a in 1..=k as u32 {
        for b in a..=k as u32 {
            let own = &samples[pair_index(a, b)];
            let list: &[f64] = if !own.is_empty() {
                own
            } else if options.pooled_fallback && !pooled.is_empty() {
                &pooled
            } else {
                return Err(Error::InsufficientTrainingData { a, b });
            };
            let h = match bandwidth {
                Bandwidth::Fixed(h) => h,
                Bandwidth::Auto => auto_bandwidth(list, span),
            };
            let density = binned_kde(list, h, &edges, options.density_floor);
            table[(a - 1) as usize][(b - 1) as usize] = Some(density.clone());
            table[(b - 1) as usize][(a - 1) as usize] = Some(density);
        }
    }
    let table: Vec<Vec<MeasurementDensity>> = table
        .into_iter()
        .map(|row| row.into_iter().map(|d| d.expect("filled above")).collect())
        .collect();
    for row in &table {
        for density in row {
            density.validate()?;
        }
    }
    Ok(table)
}

/// Normal-reference bandwidth `1.06 · σ̂ · m^{-1/5}`, floored at a small
/// fraction of the bin span so degenerate sample sets stay usable.
fn auto_bandwidth(samples: &[f64], span: f64) -> f64 {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let h = 1.06 * var.sqrt() * m.powf(-0.2);
    h.max(1e-3 * span).max(1e-12)
}

/// Bin masses by integrating the kernel mixture over each bin (normal CDF
/// differences), flooring, and renormalizing to total mass 1.
fn binned_kde(
    samples: &[f64],
    h: f64,
    edges: &[f64],
    floor: Option<f64>,
) -> MeasurementDensity {
    let bins = edges.len() - 1;
    let m = samples.len() as f64;
    let mut masses = vec![0.0; bins];
    for &s in samples {
        let mut cdf_lo = phi((edges[0] - s) / h);
        for (t, mass) in masses.iter_mut().enumerate() {
            let cdf_hi = phi((edges[t + 1] - s) / h);
            *mass += (cdf_hi - cdf_lo) / m;
            cdf_lo = cdf_hi;
        }
    }
    if let Some(f) = floor {
        for mass in &mut masses {
            *mass = mass.max(f);
        }
    }
    let total: f64 = masses.iter().sum();
    for mass in &mut masses {
        *mass /= total;
    }
    MeasurementDensity::Binned {
        edges: edges.to_vec(),
        masses,
    }
}

/// End-to-end point-cloud clustering: sample the measurement graph, estimate
/// the class-pair densities from the training subset, run message passing
/// with the estimated general table, decode.
///
/// The returned result carries no overlap (no ground truth here); evaluate
/// held-out agreement separately with [`held_out_overlap`].
pub fn cluster_points(
    data: &PointDataset,
    alpha: f64,
    k: usize,
    bandwidth: Bandwidth,
    bp: &BpSettings,
    seed: u64,
) -> Result<ClusterResult> {
    cluster_points_with(data, alpha, k, bandwidth, bp, seed, &IngestOptions::default())
}

/// [`cluster_points`] with explicit density-estimation options.
pub fn cluster_points_with(
    data: &PointDataset,
    alpha: f64,
    k: usize,
    bandwidth: Bandwidth,
    bp: &BpSettings,
    seed: u64,
    options: &IngestOptions,
) -> Result<ClusterResult> {
    let graph = build_graph_from_points(data, alpha, Metric::Euclidean, crate::mix_seed(seed, 0x16))?;
    let table = kde_estimate_with(&graph, data, k, bandwidth, options.bins, options)?;
    let params = ModelParams::general(k, alpha, table)?;
    let noise = bp.noise.min(0.5 / k as f64).max(0.0);
    let init = bp_init(&graph, k, crate::mix_seed(seed, 0xB9), noise);
    let (marginals, _, report) = bp_run_with(&graph, &params, init, bp.max_iter, bp.tol, bp.damping)?;
    let labels = decode_marginals(&marginals);
    Ok(ClusterResult {
        labels,
        overlap: None,
        method: Method::Bp,
        diagnostics: Diagnostics::Pipeline {
            bp: report,
            accuracy_non_training: None,
        },
    })
}

/// Permutation-maximized overlap restricted to the non-training points.
///
/// # Errors
/// [`Error::InvalidArgument`] when every point is a training point; overlap
/// errors propagate.
pub fn held_out_overlap(
    pred: &[u32],
    truth: &[u32],
    training_ids: &[usize],
    k: usize,
) -> Result<f64> {
    let (p, t) = filter_held_out(pred, truth, training_ids)?;
    overlap(&p, &t, k)
}

/// Permutation-maximized fraction of correctly labeled non-training points.
pub fn held_out_accuracy(
    pred: &[u32],
    truth: &[u32],
    training_ids: &[usize],
    k: usize,
) -> Result<f64> {
    let ov = held_out_overlap(pred, truth, training_ids, k)?;
    let guess = 1.0 / k as f64;
    Ok(ov * (1.0 - guess) + guess)
}

fn filter_held_out(
    pred: &[u32],
    truth: &[u32],
    training_ids: &[usize],
) -> Result<(Vec<u32>, Vec<u32>)> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let mut is_training = vec![false; pred.len()];
    for &id in training_ids {
        if id >= pred.len() {
            return Err(Error::InvalidArgument(format!(
                "training id {id} out of range"
            )));
        }
        is_training[id] = true;
    }
    let mut p = Vec::new();
    let mut t = Vec::new();
    for i in 0..pred.len() {
        if !is_training[i] {
            p.push(pred[i]);
            t.push(truth[i]);
        }
    }
    if p.is_empty() {
        return Err(Error::InvalidArgument(
            "no non-training points to evaluate".into(),
        ));
    }
    Ok((p, t))
}

/// Reads a point cloud from CSV lines `x1,...,xd[,label]`.
///
/// With `label_column` set, the last field of every row is a 1-based integer
/// label, empty for unlabeled rows. Blank lines are skipped; `has_header`
/// drops the first non-blank line.
pub fn read_points_csv<R: BufRead>(
    reader: R,
    has_header: bool,
    label_column: bool,
) -> Result<PointDataset> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut seen_header = !has_header;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (coord_fields, label_field) = if label_column {
            let (last, rest) = fields.split_last().expect("split yields ≥ 1 field");
            (rest, Some(*last))
        } else {
            (&fields[..], None)
        };
        if coord_fields.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: "row has no coordinates".into(),
            });
        }
        let mut coords = Vec::with_capacity(coord_fields.len());
        for f in coord_fields {
            coords.push(f.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                msg: format!("bad coordinate '{f}': {e}"),
            })?);
        }
        let label = match label_field {
            None | Some("") => None,
            Some(text) => {
                let l = text.parse::<u32>().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("bad label '{text}': {e}"),
                })?;
                if l == 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "labels are 1-based".into(),
                    });
                }
                Some(l)
            }
        };
        points.push(coords);
        labels.push(label);
    }
    PointDataset::new(points, labels)
}

/// [`read_points_csv`] from a file path.
pub fn read_points_csv_file<P: AsRef<Path>>(
    path: P,
    has_header: bool,
    label_column: bool,
) -> Result<PointDataset> {
    let file = std::fs::File::open(path)?;
    read_points_csv(std::io::BufReader::new(file), has_header, label_column)
}

/// Test fixture: two spherical Gaussian blobs in the plane, centers
/// `(0, 0)` and `(separation, 0)`, coordinate spread `spread`, classes
/// assigned uniformly. Returns points and 1-based truth.
pub fn two_blobs(n: usize, spread: f64, separation: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<u32>) {
    let mut rng = crate::new_rng(seed);
    let noise = Normal::new(0.0, spread).expect("positive spread");
    let mut points = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let c: u32 = rng.gen_range(1..=2);
        let cx = if c == 1 { 0.0 } else { separation };
        points.push(vec![cx + noise.sample(&mut rng), noise.sample(&mut rng)]);
        truth.push(c);
    }
    (points, truth)
}

/// Test fixture: two concentric rings, radii `radius_inner`/`radius_outer`
/// with radial jitter `noise`, classes assigned uniformly.
pub fn concentric_rings(
    n: usize,
    radius_inner: f64,
    radius_outer: f64,
    noise: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<u32>) {
    let mut rng = crate::new_rng(seed);
    let jitter = Normal::new(0.0, noise).expect("positive noise");
    let mut points = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let c: u32 = rng.gen_range(1..=2);
        let radius = if c == 1 { radius_inner } else { radius_outer };
        let rho = radius + jitter.sample(&mut rng);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        points.push(vec![rho * theta.cos(), rho * theta.sin()]);
        truth.push(c);
    }
    (points, truth)
}

/// Labels a uniformly random `fraction` of the points with their true class,
/// producing the per-point optional-label vector for [`PointDataset::new`].
pub fn make_training_subset(truth: &[u32], fraction: f64, seed: u64) -> Vec<Option<u32>> {
    let n = truth.len();
    let t = ((n as f64 * fraction).round() as usize).min(n);
    let mut rng = crate::new_rng(seed);
    let chosen = rand::seq::index::sample(&mut rng, n, t);
    let mut labels = vec![None; n];
    for id in chosen {
        labels[id] = Some(truth[id]);
    }
    labels
}
