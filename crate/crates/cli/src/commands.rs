//! The five harness commands.
//!
//! Error policy: configuration, parse, and I/O problems abort with a nonzero
//! exit (as `anyhow` errors); algorithmic outcomes on valid inputs — a method
//! finding no informative eigenvalue, a solver giving up — are recorded in
//! the output rows' `error` column and exit 0.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use spclust::bethe::{build_h, build_h_clamped, negative_eigenpairs_with, BetheHessian};
use spclust::bp::{bp_init, bp_run_with, decode_marginals};
use spclust::cluster::{overlap, ClusterResult, Diagnostics, Method};
use spclust::eig::LinearMap;
use spclust::generate::sample_instance;
use spclust::graph::{
    read_graph_file, read_labels_file, write_graph_file, write_labels_file, MeasurementGraph,
};
use spclust::ingest::{cluster_points_with, held_out_accuracy, held_out_overlap, read_points_csv_file};
use spclust::model::{critical_degree, ModelParams};
use spclust::nb::{nb_cluster_with, nb_ritz_pairs, NbOperator, REALNESS_TOL};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::Settings;

/// Trial seeds step by a large prime so per-trial streams never collide for
/// neighboring base seeds.
const TRIAL_SEED_STRIDE: u64 = 1_000_000_007;

// ---------------------------------------------------------------- generate

pub fn cmd_generate(s: &Settings) -> Result<()> {
    let n = s.require_n()?;
    let alpha = s.require_alpha()?;
    let params = s.model_params(None, alpha)?;
    let seed = s.seed();
    let inst = sample_instance(&params, n, seed).context("sampling the instance")?;
    let out = s
        .out
        .clone()
        .context("generate needs --out for the graph file")?;
    let labels = s.labels.clone().unwrap_or_else(|| labels_path_for(&out));
    write_graph_file(&out, &inst.graph, params.k).context("writing the graph file")?;
    write_labels_file(&labels, &inst.truth).context("writing the labels file")?;
    eprintln!(
        "wrote {} ({} items, {} measurements) and {}",
        out.display(),
        n,
        inst.graph.m(),
        labels.display()
    );
    Ok(())
}

fn labels_path_for(graph_path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.labels", graph_path.display()))
}

// --------------------------------------------------------------------- run

pub fn cmd_run(s: &Settings) -> Result<()> {
    let graph_path = s.graph.clone().context("run needs --graph")?;
    let (graph, k_file) =
        read_graph_file(&graph_path).context("reading the graph file")?;
    let n = graph.n();
    // Without an explicit alpha the empirical mean degree is reported.
    let alpha = s.alpha.unwrap_or(2.0 * graph.m() as f64 / n.max(1) as f64);
    let params = s.model_params(Some(k_file), alpha)?;
    let truth = match &s.labels {
        Some(p) => {
            let t = read_labels_file(p).context("reading the truth labels file")?;
            check_labels(&t, n, params.k)?;
            Some(t)
        }
        None => None,
    };
    let methods = s.methods()?;
    let seed = s.seed();

    let mut w = open_out(s.out.as_deref())?;
    writeln!(w, "method,n,alpha,seed,overlap,converged_or_r,wallclock_ms,error")?;
    for m in methods {
        let row = run_method(&graph, &params, truth.as_deref(), m, seed, s);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            m,
            n,
            alpha,
            seed,
            fmt_overlap(row.overlap),
            row.conv,
            row.ms,
            row.error
        )?;
    }
    w.flush()?;
    Ok(())
}

fn check_labels(labels: &[u32], n: usize, k: usize) -> Result<()> {
    if labels.len() != n {
        bail!(
            "labels file holds {} labels but the graph has {} items",
            labels.len(),
            n
        );
    }
    if let Some(&bad) = labels.iter().find(|&&c| c == 0 || c > k as u32) {
        bail!("label {bad} is outside 1..={k}");
    }
    Ok(())
}

/// Outcome of one method on one instance.
struct MethodRow {
    overlap: f64,
    conv: String,
    ms: u128,
    error: &'static str,
}

fn run_method(
    graph: &MeasurementGraph,
    params: &ModelParams,
    truth: Option<&[u32]>,
    method: Method,
    seed: u64,
    s: &Settings,
) -> MethodRow {
    let timer = Instant::now();
    let outcome = apply_method(graph, params, method, seed, s);
    let ms = if s.timing_real() {
        timer.elapsed().as_millis()
    } else {
        0
    };
    match outcome {
        Ok((labels, conv)) => {
            let (ov, error) = match truth {
                Some(t) => match overlap(&labels, t, params.k) {
                    Ok(o) => (o, ""),
                    Err(e) => (f64::NAN, error_tag(&e)),
                },
                None => (f64::NAN, ""),
            };
            MethodRow {
                overlap: ov,
                conv,
                ms,
                error,
            }
        }
        Err(e) => MethodRow {
            overlap: f64::NAN,
            conv: String::new(),
            ms,
            error: error_tag(&e),
        },
    }
}

/// Runs one method and returns its labels plus the `converged_or_r` cell:
/// BP's convergence flag, or the retained eigenvector count of a spectral
/// method.
fn apply_method(
    graph: &MeasurementGraph,
    params: &ModelParams,
    method: Method,
    seed: u64,
    s: &Settings,
) -> spclust::Result<(Vec<u32>, String)> {
    match method {
        Method::Bp => {
            let bp = s.bp_settings();
            // Same cap as the library's default entry point: initial noise
            // stays inside the valid [0, 1/k) band.
            let noise = bp.noise.clamp(0.0, 0.5 / params.k as f64);
            let init = bp_init(graph, params.k, spclust::mix_seed(seed, 0xB9), noise);
            let (marginals, _, report) =
                bp_run_with(graph, params, init, bp.max_iter, bp.tol, bp.damping)?;
            Ok((decode_marginals(&marginals), report.converged.to_string()))
        }
        Method::Nb => {
            let res = nb_cluster_with(graph, params, &s.kmeans_settings(), seed, &s.nb_options())?;
            Ok(labels_and_r(res))
        }
        Method::Bh => {
            let res = spclust::bethe::bh_cluster_with(
                graph,
                params,
                &s.kmeans_settings(),
                seed,
                &s.bh_options(),
            )?;
            Ok(labels_and_r(res))
        }
    }
}

fn labels_and_r(res: ClusterResult) -> (Vec<u32>, String) {
    let conv = match &res.diagnostics {
        Diagnostics::Spectral { r, .. } => r.to_string(),
        Diagnostics::Bp(rep) | Diagnostics::Pipeline { bp: rep, .. } => rep.converged.to_string(),
    };
    (res.labels, conv)
}

// ------------------------------------------------------------------- sweep

struct SweepJob {
    alpha_index: usize,
    alpha: f64,
    method_index: usize,
    method: Method,
    trial: usize,
    /// Seed of this (grid point, trial, method) cell; a fresh instance is
    /// sampled from it, so methods never share an instance.
    seed: u64,
}

struct SweepRow {
    alpha_index: usize,
    method_index: usize,
    trial: usize,
    alpha: f64,
    method: Method,
    seed: u64,
    /// Failed runs count as overlap 0 here and in the plain aggregate mean.
    overlap: f64,
    conv: String,
    ms: u128,
    error: &'static str,
}

pub fn cmd_sweep(s: &Settings) -> Result<()> {
    let n = s.require_n()?;
    let trials = s.trials()?;
    let methods = s.methods()?;
    let grid = s.alpha_grid()?;
    let base_seed = s.seed();
    // Fail fast on model problems before spawning parallel work.
    s.model_params(None, grid[0])?;

    let mut jobs = Vec::with_capacity(grid.len() * methods.len() * trials);
    for (alpha_index, &alpha) in grid.iter().enumerate() {
        for (method_index, &method) in methods.iter().enumerate() {
            for trial in 0..trials {
                let trial_seed =
                    base_seed.wrapping_add((trial as u64).wrapping_mul(TRIAL_SEED_STRIDE));
                let seed = spclust::mix_seed(
                    spclust::mix_seed(trial_seed, alpha_index as u64),
                    method_index as u64,
                );
                jobs.push(SweepJob {
                    alpha_index,
                    alpha,
                    method_index,
                    method,
                    trial,
                    seed,
                });
            }
        }
    }

    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|job| -> Result<SweepRow> {
            let params = s.model_params(None, job.alpha)?;
            let inst = sample_instance(&params, n, job.seed)
                .with_context(|| format!("sampling at alpha = {}", job.alpha))?;
            let timer = Instant::now();
            let outcome = apply_method(&inst.graph, &params, job.method, job.seed, s);
            let ms = if s.timing_real() {
                timer.elapsed().as_millis()
            } else {
                0
            };
            let (ov, conv, error) = match outcome {
                Ok((labels, conv)) => match overlap(&labels, &inst.truth, params.k) {
                    Ok(o) => (o, conv, ""),
                    Err(e) => (0.0, conv, error_tag(&e)),
                },
                Err(e) => (0.0, String::new(), error_tag(&e)),
            };
            Ok(SweepRow {
                alpha_index: job.alpha_index,
                method_index: job.method_index,
                trial: job.trial,
                alpha: job.alpha,
                method: job.method,
                seed: job.seed,
                overlap: ov,
                conv,
                ms,
                error,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = rows;
    rows.sort_by_key(|r| (r.alpha_index, r.method_index, r.trial));

    let mut w = open_out(s.out.as_deref())?;
    writeln!(
        w,
        "kind,method,n,alpha,seed,trial,overlap,converged_or_r,wallclock_ms,error,\
         mean_overlap,stderr_overlap,mean_overlap_ok,n_ok"
    )?;
    for r in &rows {
        writeln!(
            w,
            "raw,{},{},{},{},{},{},{},{},{},,,,",
            r.method,
            n,
            r.alpha,
            r.seed,
            r.trial,
            fmt_overlap(r.overlap),
            r.conv,
            r.ms,
            r.error
        )?;
    }
    for (alpha_index, &alpha) in grid.iter().enumerate() {
        for (method_index, &method) in methods.iter().enumerate() {
            let cell: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.alpha_index == alpha_index && r.method_index == method_index)
                .collect();
            let t = cell.len() as f64;
            let mean = cell.iter().map(|r| r.overlap).sum::<f64>() / t;
            let stderr = if cell.len() > 1 {
                let var = cell
                    .iter()
                    .map(|r| (r.overlap - mean).powi(2))
                    .sum::<f64>()
                    / (t - 1.0);
                (var / t).sqrt()
            } else {
                f64::NAN
            };
            let ok: Vec<f64> = cell
                .iter()
                .filter(|r| r.error.is_empty())
                .map(|r| r.overlap)
                .collect();
            let mean_ok = if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().sum::<f64>() / ok.len() as f64
            };
            writeln!(
                w,
                "aggregate,{},{},{},{},,,,,,{},{},{},{}",
                method,
                n,
                alpha,
                base_seed,
                fmt_overlap(mean),
                fmt_overlap(stderr),
                fmt_overlap(mean_ok),
                ok.len()
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- spectrum

struct SpectrumRow {
    source: &'static str,
    re: f64,
    im: f64,
    is_real: bool,
    residual: f64,
    error: &'static str,
}

impl SpectrumRow {
    fn value(source: &'static str, re: f64, im: f64, is_real: bool, residual: f64) -> Self {
        SpectrumRow {
            source,
            re,
            im,
            is_real,
            residual,
            error: "",
        }
    }

    fn failure(source: &'static str, error: &'static str) -> Self {
        SpectrumRow {
            source,
            re: f64::NAN,
            im: f64::NAN,
            is_real: false,
            residual: f64::NAN,
            error,
        }
    }
}

pub fn cmd_spectrum(s: &Settings) -> Result<()> {
    let n = s.require_n()?;
    let alpha = s.require_alpha()?;
    let params = s.model_params(None, alpha)?;
    let seed = s.seed();
    let inst = sample_instance(&params, n, seed).context("sampling the instance")?;
    let nb_opts = s.nb_options();
    let bh_opts = s.bh_options();

    let mut rows: Vec<SpectrumRow> = Vec::new();

    // Leading directed-edge-operator Ritz values, complex, largest modulus
    // first.
    match NbOperator::new(&inst.graph, &params) {
        Ok(op) => {
            let want = nb_opts.max_pairs.unwrap_or(params.k + 2) + 2;
            match nb_ritz_pairs(&op, want, nb_opts.tol, spclust::mix_seed(seed, 0xE16)) {
                Ok(pairs) => rows.extend(pairs.iter().map(|p| {
                    SpectrumRow::value(
                        "nb",
                        p.value.re,
                        p.value.im,
                        p.is_real(REALNESS_TOL),
                        p.residual,
                    )
                })),
                Err(e) => rows.push(SpectrumRow::failure("nb", error_tag(&e))),
            }
        }
        Err(e) => rows.push(SpectrumRow::failure("nb", error_tag(&e))),
    }

    // Negative eigenvalues of the symmetric deformation at x = 1, ascending.
    let h = match bh_opts.clamp {
        None => build_h(&inst.graph, &params, 1.0),
        Some(c) => build_h_clamped(&inst.graph, &params, 1.0, c),
    };
    match h {
        Ok(h) => {
            match negative_eigenpairs_with(
                &h,
                bh_opts.tol,
                params.k + 2,
                spclust::mix_seed(seed, 0xBE),
                &bh_opts,
            ) {
                Ok(pairs) => rows.extend(pairs.iter().map(|(lam, v)| {
                    SpectrumRow::value("bh", *lam, 0.0, true, bh_residual(&h, *lam, v))
                })),
                Err(e) => rows.push(SpectrumRow::failure("bh", error_tag(&e))),
            }
        }
        Err(e) => rows.push(SpectrumRow::failure("bh", error_tag(&e))),
    }

    // Where theory expects the informative eigenvalue and the bulk edge.
    let ratio = alpha / critical_degree(&params).map_err(|e| anyhow::anyhow!("{e}"))?;
    rows.push(SpectrumRow::value("marker_lambda1", ratio, 0.0, true, 0.0));
    rows.push(SpectrumRow::value(
        "marker_bulk_edge",
        ratio.sqrt(),
        0.0,
        true,
        0.0,
    ));

    let mut w = open_out(s.out.as_deref())?;
    writeln!(w, "source,re,im,is_real,residual,error")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.source,
            fmt_val(r.re),
            fmt_val(r.im),
            r.is_real,
            fmt_residual(r.residual),
            r.error
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Independent residual `‖Hv − λv‖ / max(1, |λ|)` on a unit vector.
fn bh_residual(h: &BetheHessian, lam: f64, v: &[f64]) -> f64 {
    let mut hv = vec![0.0; v.len()];
    h.apply(v, &mut hv);
    let acc: f64 = hv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - lam * b) * (a - lam * b))
        .sum();
    acc.sqrt() / lam.abs().max(1.0)
}

// ---------------------------------------------------------- cluster-points

pub fn cmd_cluster_points(s: &Settings) -> Result<()> {
    let points = s.points.clone().context("cluster-points needs --points")?;
    let has_header = s.has_header.unwrap_or(false);
    let label_column = s.label_column.unwrap_or(true);
    if s.truth.is_some() && !label_column {
        bail!(
            "an accuracy report was requested (--truth) but label_column is false, \
             so there are no training labels to cluster from"
        );
    }
    let data = read_points_csv_file(&points, has_header, label_column)
        .context("reading the points file")?;
    let k = s.k.unwrap_or(2);
    let alpha = s.require_alpha()?;
    let bandwidth = s.bandwidth()?;
    let seed = s.seed();

    let res = cluster_points_with(
        &data,
        alpha,
        k,
        bandwidth,
        &s.bp_settings(),
        seed,
        &s.ingest_options(),
    )
    .map_err(|e| anyhow::anyhow!("clustering failed: {e}"))?;

    let out = s
        .out
        .clone()
        .context("cluster-points needs --out for the predicted labels file")?;
    write_labels_file(&out, &res.labels).context("writing the predicted labels")?;

    let bp = match &res.diagnostics {
        Diagnostics::Pipeline { bp, .. } | Diagnostics::Bp(bp) => bp.clone(),
        Diagnostics::Spectral { .. } => unreachable!("point pipeline always reports BP"),
    };
    let mut report = vec![
        format!("n={}", data.n()),
        format!("training={}", data.training_ids().len()),
        format!("bp_iterations={}", bp.iterations),
        format!("bp_converged={}", bp.converged),
        format!("labels_out={}", out.display()),
    ];
    if let Some(truth_path) = &s.truth {
        let truth = read_labels_file(truth_path).context("reading the truth labels file")?;
        check_labels(&truth, data.n(), k)?;
        let all = overlap(&res.labels, &truth, k).map_err(|e| anyhow::anyhow!("{e}"))?;
        let acc = held_out_accuracy(&res.labels, &truth, data.training_ids(), k)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let ov = held_out_overlap(&res.labels, &truth, data.training_ids(), k)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        report.push(format!("overlap_all={all:.6}"));
        report.push(format!("accuracy_non_training={acc:.6}"));
        report.push(format!("overlap_non_training={ov:.6}"));
    }
    let text = report.join("\n") + "\n";
    match &s.report {
        Some(p) => std::fs::write(p, text).context("writing the report")?,
        None => print!("{text}"),
    }
    Ok(())
}

// ----------------------------------------------------------------- helpers

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p)
                .with_context(|| format!("creating output file {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn fmt_overlap(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        "NaN".to_string()
    }
}

fn fmt_val(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.9}")
    } else {
        "NaN".to_string()
    }
}

fn fmt_residual(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3e}")
    } else {
        "NaN".to_string()
    }
}

/// Stable one-word tags for the CSV error column.
fn error_tag(e: &spclust::Error) -> &'static str {
    use spclust::Error::*;
    match e {
        InvalidRate { .. } => "invalid-rate",
        OutOfSupport { .. } => "out-of-support",
        InvalidModel(_) => "invalid-model",
        UnsupportedModel => "unsupported-model",
        WeightSaturation { .. } => "weight-saturation",
        NumericalUnderflow { .. } => "numerical-underflow",
        NoInformativeEigenvalue => "no-informative-eigenvalue",
        SolverFailure(_) => "solver-failure",
        EnumerationBound { .. } => "enumeration-bound",
        InsufficientTrainingData { .. } => "insufficient-training-data",
        DimensionMismatch { .. } => "dimension-mismatch",
        SizeLimit { .. } => "size-limit",
        InvalidArgument(_) => "invalid-argument",
        Parse { .. } => "parse",
        Io(_) => "io",
    }
}
