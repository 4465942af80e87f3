//! Belief propagation on directed measurement edges: message recursion,
//! marginal computation, convergence control, and label decoding.
//!
//! Messages live on directed edges (table row `d` is the message from
//! `tail(d)` to `head(d)`). A synchronous (flooding) schedule with optional
//! damping updates all messages at once; per-neighbor factors are rescaled to
//! max-entry 1 before multiplying so products of many factors never underflow
//! in ordinary operation.

use crate::error::{Error, Result};
use crate::graph::MeasurementGraph;
use crate::model::ModelParams;
use rand::Rng;

/// Default convergence tolerance on the max message change.
pub const BP_DEFAULT_TOL: f64 = 1e-6;
/// Default sweep cap.
pub const BP_DEFAULT_MAX_ITER: usize = 200;
/// Default perturbation half-width around the uniform initial message.
pub const BP_DEFAULT_NOISE: f64 = 0.01;
/// Default damping (none).
pub const BP_DEFAULT_DAMPING: f64 = 0.0;

/// Settings bundle for the message-passing loop; [`Default`] reproduces the
/// module constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
    /// Initial-condition perturbation half-width; clamped below `1/k` at use.
    pub noise: f64,
}

impl Default for BpSettings {
    fn default() -> Self {
        BpSettings {
            max_iter: BP_DEFAULT_MAX_ITER,
            tol: BP_DEFAULT_TOL,
            damping: BP_DEFAULT_DAMPING,
            noise: BP_DEFAULT_NOISE,
        }
    }
}

/// Per-directed-edge message table (`2m × k`, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    k: usize,
    values: Vec<f64>,
}

impl MessageSet {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of directed edges (rows).
    pub fn rows(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.values.len() / self.k
        }
    }

    /// Message row for directed edge `d`.
    pub fn row(&self, d: usize) -> &[f64] {
        &self.values[d * self.k..(d + 1) * self.k]
    }

    fn row_mut(&mut self, d: usize) -> &mut [f64] {
        &mut self.values[d * self.k..(d + 1) * self.k]
    }

    /// All entries, row-major.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Builds a message set from raw entries; rows must be `k` long and
    /// normalized. Intended for tests and custom initial conditions.
    pub fn from_rows(k: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * k);
        for (d, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: row.len(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "row {d} is not a probability vector"
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(MessageSet { k, values })
    }
}

/// Per-node marginal table (`n × k`, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    k: usize,
    values: Vec<f64>,
}

impl MarginalSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.values.len() / self.k
        }
    }

    /// Marginal row for node `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Outcome of a [`bp_run`]: sweeps done, last max message change, and
/// whether the change dropped below tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpReport {
    pub iterations: usize,
    pub final_delta: f64,
    pub converged: bool,
}

/// Initial messages: uniform `1/k` plus i.i.d. uniform noise in
/// `[−noise, +noise]`, renormalized per row. Deterministic given `seed`.
///
/// # Panics
/// If `noise` is outside `[0, 1/k)` (caller contract).
pub fn bp_init(graph: &MeasurementGraph, k: usize, seed: u64, noise: f64) -> MessageSet {
    assert!(k >= 1, "k must be positive");
    assert!(
        (0.0..1.0 / k as f64).contains(&noise),
        "noise must lie in [0, 1/k)"
    );
    let rows = 2 * graph.m();
    let mut values = vec![1.0 / k as f64; rows * k];
    if noise > 0.0 {
        let mut rng = crate::new_rng(seed);
        for row in values.chunks_mut(k) {
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x += rng.gen_range(-noise..=noise);
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
    }
    MessageSet { k, values }
}

/// Measurement likelihood tables: for undirected edge `e`, a symmetric
/// `k × k` matrix `L[a][b] = p_{a,b}(s_e)`. Built once per run.
struct EdgeTables {
    k: usize,
    /// `m` flattened `k × k` blocks.
    values: Vec<f64>,
}

impl EdgeTables {
    fn build(graph: &MeasurementGraph, params: &ModelParams) -> Self {
        let k = params.k;
        let mut values = Vec::with_capacity(graph.m() * k * k);
        for edge in graph.edges() {
            for a in 1..=k as u32 {
                for b in 1..=k as u32 {
                    values.push(params.density_for(a, b).eval(edge.s));
                }
            }
        }
        EdgeTables { k, values }
    }

    /// Likelihood block of edge `e`.
    fn block(&self, e: usize) -> &[f64] {
        &self.values[e * self.k * self.k..(e + 1) * self.k * self.k]
    }
}

/// For every directed edge `d`, the factor
/// `g_d(c) = Σ_{c'} p_{c,c'}(s_d) · msg_d(c')`, rescaled to max-entry 1.
///
/// Errors with [`Error::NumericalUnderflow`] if a factor is identically zero
/// (the measurement is outside the support of every pair density).
fn incoming_factors(
    graph: &MeasurementGraph,
    tables: &EdgeTables,
    messages: &MessageSet,
    out: &mut [f64],
) -> Result<()> {
    let k = tables.k;
    for d in 0..2 * graph.m() {
        let e = d >> 1;
        let block = tables.block(e);
        let msg = messages.row(d);
        let g = &mut out[d * k..(d + 1) * k];
        let mut top = 0.0f64;
        for c in 0..k {
            let mut acc = 0.0;
            for (cp, &m) in msg.iter().enumerate() {
                acc += block[c * k + cp] * m;
            }
            g[c] = acc;
            top = top.max(acc);
        }
        if top <= 1e-300 {
            return Err(Error::NumericalUnderflow { edge: e });
        }
        for x in g.iter_mut() {
            *x /= top;
        }
    }
    Ok(())
}

/// One synchronous sweep: every directed message is recomputed from the old
/// set. Returns the new messages and the max absolute entry change.
///
/// Nodes whose only neighbor is the message target emit the uniform row
/// (empty product).
pub fn bp_sweep(
    graph: &MeasurementGraph,
    params: &ModelParams,
    messages: &MessageSet,
) -> Result<(MessageSet, f64)> {
    let tables = EdgeTables::build(graph, params);
    let mut factors = vec![0.0; 2 * graph.m() * params.k];
    let mut next = MessageSet {
        k: params.k,
        values: vec![0.0; messages.values.len()],
    };
    let delta = sweep_with(graph, &tables, messages, &mut factors, &mut next)?;
    Ok((next, delta))
}

fn sweep_with(
    graph: &MeasurementGraph,
    tables: &EdgeTables,
    messages: &MessageSet,
    factors: &mut [f64],
    next: &mut MessageSet,
) -> Result<f64> {
    let k = tables.k;
    incoming_factors(graph, tables, messages, factors)?;
    let uniform = 1.0 / k as f64;
    let mut delta: f64 = 0.0;
    let mut prefix: Vec<f64> = Vec::new();
    let mut suffix: Vec<f64> = Vec::new();
    for i in 0..graph.n() {
        let nbrs = graph.neighbors(i);
        let deg = nbrs.len();
        if deg == 0 {
            continue;
        }
        // prefix[t] = g_0 ⊙ … ⊙ g_{t-1}; suffix[t] = g_t ⊙ … ⊙ g_{deg-1}
        // (entrywise products of the rescaled incoming factors at node i).
        prefix.clear();
        prefix.resize((deg + 1) * k, 1.0);
        suffix.clear();
        suffix.resize((deg + 1) * k, 1.0);
        for (t, &(_, e)) in nbrs.iter().enumerate() {
            let d_in = graph.directed_into(e, i);
            let g = &factors[d_in * k..(d_in + 1) * k];
            for c in 0..k {
                prefix[(t + 1) * k + c] = prefix[t * k + c] * g[c];
            }
        }
        for (t, &(_, e)) in nbrs.iter().enumerate().rev() {
            let d_in = graph.directed_into(e, i);
            let g = &factors[d_in * k..(d_in + 1) * k];
            for c in 0..k {
                suffix[t * k + c] = suffix[(t + 1) * k + c] * g[c];
            }
        }
        for (t, &(nbr, e)) in nbrs.iter().enumerate() {
            let d_out = graph.directed_into(e, nbr);
            let row = next.row_mut(d_out);
            if deg == 1 {
                row.fill(uniform);
            } else {
                let mut sum = 0.0;
                for c in 0..k {
                    let v = prefix[t * k + c] * suffix[(t + 1) * k + c];
                    row[c] = v;
                    sum += v;
                }
                if sum <= 1e-300 {
                    return Err(Error::NumericalUnderflow { edge: e });
                }
                for x in row.iter_mut() {
                    *x /= sum;
                }
            }
            let old = messages.row(d_out);
            for (a, b) in row.iter().zip(old) {
                delta = delta.max((a - b).abs());
            }
            debug_assert!(
                (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9 && row.iter().all(|&x| x >= 0.0),
                "message row left the simplex"
            );
        }
    }
    Ok(delta)
}

/// Marginals from a converged (or final) message set:
/// `P_i(c) ∝ Π_{l∈∂i} Σ_{c'} p_{c,c'}(s_il) · P_{l→i}(c')`; degree-0 nodes
/// get the uniform row.
fn compute_marginals(
    graph: &MeasurementGraph,
    tables: &EdgeTables,
    messages: &MessageSet,
    factors: &mut [f64],
) -> Result<MarginalSet> {
    let k = tables.k;
    incoming_factors(graph, tables, messages, factors)?;
    let uniform = 1.0 / k as f64;
    let mut values = vec![uniform; graph.n() * k];
    for i in 0..graph.n() {
        let nbrs = graph.neighbors(i);
        if nbrs.is_empty() {
            continue;
        }
        let row = &mut values[i * k..(i + 1) * k];
        row.fill(1.0);
        for &(_, e) in nbrs {
            let d_in = graph.directed_into(e, i);
            let g = &factors[d_in * k..(d_in + 1) * k];
            for (rc, gc) in row.iter_mut().zip(g) {
                *rc *= gc;
            }
        }
        let sum: f64 = row.iter().sum();
        if sum <= 1e-300 {
            return Err(Error::NumericalUnderflow {
                edge: nbrs[0].1,
            });
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
        debug_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    Ok(MarginalSet { k, values })
}

/// Full run from the default noisy-uniform initial condition: damped sweeps
/// until the max message change drops below `tol` or `max_iter` sweeps have
/// run, then marginal computation. Non-convergence is reported in the
/// [`BpReport`], not raised as an error.
pub fn bp_run(
    graph: &MeasurementGraph,
    params: &ModelParams,
    seed: u64,
    max_iter: usize,
    tol: f64,
    damping: f64,
) -> Result<(MarginalSet, MessageSet, BpReport)> {
    let init = bp_init(graph, params.k, seed, BP_DEFAULT_NOISE.min(0.5 / params.k as f64));
    bp_run_with(graph, params, init, max_iter, tol, damping)
}

/// [`bp_run`] from an explicit initial message set.
pub fn bp_run_with(
    graph: &MeasurementGraph,
    params: &ModelParams,
    init: MessageSet,
    max_iter: usize,
    tol: f64,
    damping: f64,
) -> Result<(MarginalSet, MessageSet, BpReport)> {
    params.validate()?;
    if max_iter < 1 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidArgument("damping must lie in [0, 1)".into()));
    }
    if init.k != params.k || init.rows() != 2 * graph.m() {
        return Err(Error::DimensionMismatch {
            expected: 2 * graph.m() * params.k,
            got: init.values.len(),
        });
    }
    let tables = EdgeTables::build(graph, params);
    let mut factors = vec![0.0; 2 * graph.m() * params.k];
    let mut current = init;
    let mut next = MessageSet {
        k: params.k,
        values: vec![0.0; current.values.len()],
    };
    let mut report = BpReport {
        iterations: 0,
        final_delta: 0.0,
        converged: graph.m() == 0,
    };
    for it in 1..=max_iter {
        let raw = sweep_with(graph, &tables, &current, &mut factors, &mut next)?;
        let delta = (1.0 - damping) * raw;
        if damping > 0.0 {
            for (nx, cur) in next.values.iter_mut().zip(&current.values) {
                *nx = (1.0 - damping) * *nx + damping * cur;
            }
        }
        std::mem::swap(&mut current, &mut next);
        report.iterations = it;
        report.final_delta = delta;
        if delta < tol {
            report.converged = true;
            break;
        }
    }
    let marginals = compute_marginals(graph, &tables, &current, &mut factors)?;
    Ok((marginals, current, report))
}

/// Per-node argmax decoding; ties break toward the smallest label. Labels
/// are 1-based.
pub fn decode_marginals(marginals: &MarginalSet) -> Vec<u32> {
    let k = marginals.k;
    (0..marginals.n())
        .map(|i| {
            let row = marginals.row(i);
            let mut best = 0usize;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best as u32 + 1
        })
        .collect()
}
