//! Weighted non-backtracking operator on directed edges, its leading real
//! spectrum, the edge-to-node companion operator, and the spectral
//! clustering pipeline built on them.
//!
//! The operator acts on the `2m` directed edges as
//! `(Bx)_{a→b} = Σ_{(c→a), c≠b} w(s_{ca}) · x_{c→a}`: walks arrive at `a`
//! from anywhere except the edge being extended backwards, each carrying the
//! measurement weight of the edge they traversed. It is applied implicitly
//! in O(m) by computing per-node in-sums and subtracting the one excluded
//! backtracking term.

use crate::cluster::{kmeans, ClusterResult, Diagnostics, KmeansSettings, Method};
use crate::eig::{krylov_nonsymmetric, EigenPair, LinearMap};
use crate::error::{Error, Result};
use crate::graph::MeasurementGraph;
use crate::model::ModelParams;

/// Realness threshold for Ritz values: `|Im λ| ≤ REALNESS_TOL · (1 + |λ|)`.
pub const REALNESS_TOL: f64 = 1e-6;
/// Default modulus floor for retained eigenvalues.
pub const NB_RADIUS_FLOOR: f64 = 1.0;
/// Default residual tolerance for retained eigenpairs.
pub const NB_EIG_TOL: f64 = 1e-6;
/// Krylov budget ladder: retry sizes when real candidates fail to converge.
const KRYLOV_BUDGETS: [usize; 2] = [130, 300];

/// The weighted non-backtracking operator as an implicit [`LinearMap`] of
/// dimension `2m`. Both orientations of an undirected edge share one weight.
pub struct NbOperator<'g> {
    graph: &'g MeasurementGraph,
    /// Per undirected edge: `w(s_e)`.
    weights: Vec<f64>,
}

impl<'g> NbOperator<'g> {
    /// Builds the operator by evaluating the weight function on every edge
    /// measurement. Requires a model with a defined scalar weight
    /// (two-density symmetric mode).
    pub fn new(graph: &'g MeasurementGraph, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let mut weights = Vec::with_capacity(graph.m());
        for edge in graph.edges() {
            weights.push(params.weight(edge.s)?);
        }
        Ok(NbOperator { graph, weights })
    }

    /// Builds the operator from explicit per-edge weights (tests and
    /// non-model uses).
    pub fn from_weights(graph: &'g MeasurementGraph, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != graph.m() {
            return Err(Error::DimensionMismatch {
                expected: graph.m(),
                got: weights.len(),
            });
        }
        Ok(NbOperator { graph, weights })
    }

    pub fn graph(&self) -> &MeasurementGraph {
        self.graph
    }

    /// Per-undirected-edge weights (shared by both orientations).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl LinearMap for NbOperator<'_> {
    fn dim(&self) -> usize {
        2 * self.graph.m()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        // in_sum[a] = Σ over directed edges (c→a) of w(s_ca) · x_{c→a}
        let mut in_sum = vec![0.0; self.graph.n()];
        for d in 0..2 * self.graph.m() {
            in_sum[self.graph.head(d)] += self.weights[d >> 1] * x[d];
        }
        // (Bx)_{a→b} = in_sum[a] − w(s_ba) · x_{b→a}: everything arriving at
        // `a` except the contribution that would backtrack along (b→a).
        for (d, out) in y.iter_mut().enumerate() {
            let rev = d ^ 1;
            *out = in_sum[self.graph.tail(d)] - self.weights[d >> 1] * x[rev];
        }
    }
}

/// Validated matvec: applies the operator to an explicit vector.
///
/// # Errors
/// [`Error::DimensionMismatch`] when `x` is not `2m` long.
pub fn nb_matvec(op: &NbOperator<'_>, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: x.len(),
        });
    }
    let mut y = vec![0.0; op.dim()];
    op.apply(x, &mut y);
    Ok(y)
}

/// Edge-to-node aggregation: `(Cy)_i = Σ over directed edges (j→i) of
/// w(s_ji) · y_{j→i}`, with `weights` indexed by undirected edge.
///
/// # Errors
/// [`Error::DimensionMismatch`] on wrong `y` or `weights` length.
pub fn c_matvec(graph: &MeasurementGraph, weights: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != graph.m() {
        return Err(Error::DimensionMismatch {
            expected: graph.m(),
            got: weights.len(),
        });
    }
    if y.len() != 2 * graph.m() {
        return Err(Error::DimensionMismatch {
            expected: 2 * graph.m(),
            got: y.len(),
        });
    }
    let mut out = vec![0.0; graph.n()];
    for (d, &yd) in y.iter().enumerate() {
        out[graph.head(d)] += weights[d >> 1] * yd;
    }
    Ok(out)
}

/// All real eigenvalues of the operator with modulus above `radius_floor`
/// (up to `max_pairs`), each with a unit eigenvector meeting the residual
/// tolerance, sorted by decreasing eigenvalue. Eigenvector gauge is fixed:
/// unit norm, first significantly nonzero entry positive.
///
/// An empty list means no real eigenvalue lives above the floor — callers
/// decide whether that is an error.
///
/// # Errors
/// [`Error::SolverFailure`] when a real Ritz value above the floor refuses
/// to converge within the Krylov budget ladder (so "empty" would be a lie);
/// [`Error::InvalidArgument`] on a negative floor or `max_pairs = 0`.
pub fn nb_leading_spectrum(
    op: &NbOperator<'_>,
    radius_floor: f64,
    max_pairs: usize,
    tol: f64,
    seed: u64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    if !(radius_floor >= 0.0) {
        return Err(Error::InvalidArgument(
            "radius_floor must be nonnegative".into(),
        ));
    }
    if max_pairs == 0 {
        return Err(Error::InvalidArgument("max_pairs must be ≥ 1".into()));
    }
    if op.graph.m() == 0 {
        return Ok(Vec::new());
    }
    let dim = op.dim();
    let want = (max_pairs + 2).min(dim);

    for (attempt, &budget) in KRYLOV_BUDGETS.iter().enumerate() {
        let report = krylov_nonsymmetric(op, want, tol, budget.min(dim), seed)?;
        let mut kept: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut pending_real_above_floor = false;
        for pair in &report.pairs {
            let above = pair.value.norm() > radius_floor;
            if !pair.is_real(REALNESS_TOL) || !above {
                continue;
            }
            if pair.residual <= tol {
                let v = crate::eig::normalize_sign_gauge(real_vector(pair));
                if kept
                    .iter()
                    .all(|(lam, _)| (lam - pair.value.re).abs() > 1e-10 * (1.0 + lam.abs()))
                {
                    kept.push((pair.value.re, v));
                }
            } else {
                pending_real_above_floor = true;
            }
        }
        if !kept.is_empty() || !pending_real_above_floor {
            kept.sort_by(|a, b| b.0.total_cmp(&a.0));
            kept.truncate(max_pairs);
            return Ok(kept);
        }
        if attempt + 1 == KRYLOV_BUDGETS.len() || budget >= dim {
            return Err(Error::SolverFailure(
                "real eigenvalue candidate above the modulus floor failed to converge".into(),
            ));
        }
    }
    unreachable!("budget ladder always returns or errors");
}

/// Raw leading Ritz pairs of the operator — complex values with residuals,
/// no realness or modulus filtering — for spectrum inspection and dumps.
/// Uses the final rung of the Krylov budget ladder. An edgeless graph has an
/// empty spectrum.
pub fn nb_ritz_pairs(
    op: &NbOperator<'_>,
    want: usize,
    tol: f64,
    seed: u64,
) -> Result<Vec<EigenPair>> {
    if want == 0 {
        return Err(Error::InvalidArgument("want must be ≥ 1".into()));
    }
    if op.graph.m() == 0 {
        return Ok(Vec::new());
    }
    let dim = op.dim();
    let budget = KRYLOV_BUDGETS[KRYLOV_BUDGETS.len() - 1].min(dim);
    let report = krylov_nonsymmetric(op, want.min(dim), tol, budget, seed)?;
    Ok(report.pairs)
}

/// For a real eigenvalue found through complex arithmetic, both stored vector
/// parts are multiples of the same real eigenvector; take the larger one.
fn real_vector(pair: &EigenPair) -> Vec<f64> {
    let re_norm: f64 = pair.vector_re.iter().map(|x| x * x).sum();
    let im_norm: f64 = pair.vector_im.iter().map(|x| x * x).sum();
    if pair.vector_im.is_empty() || re_norm >= im_norm {
        pair.vector_re.clone()
    } else {
        pair.vector_im.clone()
    }
}

/// Node-space spectral embedding: retained eigenvalues plus the matrix whose
/// column `j` is the companion operator applied to eigenvector `j`.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    n: usize,
    r: usize,
    /// Row-major `n × r`.
    matrix: Vec<f64>,
    /// Retained real eigenvalues, decreasing.
    pub eigenvalues: Vec<f64>,
}

impl SpectralEmbedding {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of retained eigenvector columns.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Embedding row of node `i` (length `r`).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.r..(i + 1) * self.r]
    }

    /// Column `j` as a vector (length `n`).
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.matrix[i * self.r + j]).collect()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.matrix
    }
}

/// Maps edge-space eigenvectors into node space: column `j` is
/// `C · v_j`.
///
/// # Errors
/// [`Error::NoInformativeEigenvalue`] when the spectrum is empty.
pub fn nb_embedding(
    graph: &MeasurementGraph,
    params: &ModelParams,
    spectrum: &[(f64, Vec<f64>)],
) -> Result<SpectralEmbedding> {
    if spectrum.is_empty() {
        return Err(Error::NoInformativeEigenvalue);
    }
    let weights = edge_weights(graph, params)?;
    let n = graph.n();
    let r = spectrum.len();
    let mut matrix = vec![0.0; n * r];
    let mut eigenvalues = Vec::with_capacity(r);
    for (j, (lam, vector)) in spectrum.iter().enumerate() {
        let col = c_matvec(graph, &weights, vector)?;
        for (i, &x) in col.iter().enumerate() {
            matrix[i * r + j] = x;
        }
        eigenvalues.push(*lam);
    }
    Ok(SpectralEmbedding {
        n,
        r,
        matrix,
        eigenvalues,
    })
}

fn edge_weights(graph: &MeasurementGraph, params: &ModelParams) -> Result<Vec<f64>> {
    graph.edges().iter().map(|e| params.weight(e.s)).collect()
}

/// Knobs for the non-backtracking pipeline. `max_pairs = None` means
/// `k + 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbOptions {
    pub radius_floor: f64,
    pub max_pairs: Option<usize>,
    pub tol: f64,
}

impl Default for NbOptions {
    fn default() -> Self {
        NbOptions {
            radius_floor: NB_RADIUS_FLOOR,
            max_pairs: None,
            tol: NB_EIG_TOL,
        }
    }
}

/// Full non-backtracking spectral pipeline: weights → leading real spectrum
/// (floor 1, up to `k + 2` pairs) → embedding → row-wise k-means.
///
/// The returned overlap is `None` (no truth is consulted here); diagnostics
/// carry `r` and the retained eigenvalues.
///
/// # Errors
/// [`Error::NoInformativeEigenvalue`] when no real eigenvalue exceeds the
/// floor (the undetectable regime); solver and model errors pass through.
pub fn nb_cluster(
    graph: &MeasurementGraph,
    params: &ModelParams,
    kmeans_settings: &KmeansSettings,
    seed: u64,
) -> Result<ClusterResult> {
    nb_cluster_with(graph, params, kmeans_settings, seed, &NbOptions::default())
}

/// [`nb_cluster`] with explicit solver knobs.
pub fn nb_cluster_with(
    graph: &MeasurementGraph,
    params: &ModelParams,
    kmeans_settings: &KmeansSettings,
    seed: u64,
    options: &NbOptions,
) -> Result<ClusterResult> {
    let op = NbOperator::new(graph, params)?;
    let spectrum = nb_leading_spectrum(
        &op,
        options.radius_floor,
        options.max_pairs.unwrap_or(params.k + 2),
        options.tol,
        crate::mix_seed(seed, 0xE16),
    )?;
    let embedding = nb_embedding(graph, params, &spectrum)?;
    let labels = kmeans(
        embedding.as_slice(),
        embedding.r(),
        params.k,
        kmeans_settings.restarts,
        kmeans_settings.max_iter,
        crate::mix_seed(seed, 0x4B3),
    )?;
    Ok(ClusterResult {
        labels,
        overlap: None,
        method: Method::Nb,
        diagnostics: Diagnostics::Spectral {
            r: embedding.r(),
            eigenvalues: embedding.eigenvalues.clone(),
        },
    })
}
