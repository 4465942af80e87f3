//! Synthetic benchmark generator: plants a hidden partition, draws a sparse
//! Erdős–Rényi interaction graph, and samples one measurement per edge from
//! the group-pair densities.

use crate::error::{Error, Result};
use crate::graph::MeasurementGraph;
use crate::model::ModelParams;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

/// A sampled benchmark instance: the observable graph plus the hidden truth.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub graph: MeasurementGraph,
    /// Hidden group of each node, 1-based.
    pub truth: Vec<u32>,
    pub params: ModelParams,
    pub seed: u64,
}

/// Draws a full instance: uniform labels, an Erdős–Rényi edge set where each
/// of the `n(n-1)/2` pairs appears independently with probability
/// `alpha / n`, and one measurement per edge from the density attached to
/// the endpoint group pair.
///
/// Identical `(params, n, seed)` always produce an identical instance.
///
/// # Errors
/// [`Error::InvalidRate`] when `alpha / n > 1`; parameter validation errors
/// are forwarded from [`ModelParams::validate`].
pub fn sample_instance(params: &ModelParams, n: usize, seed: u64) -> Result<PlantedInstance> {
    params.validate()?;
    let p = params.alpha / n as f64;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidRate { rate: p });
    }
    let mut rng = crate::new_rng(seed);
    let truth: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=params.k as u32)).collect();
    let pairs = sample_er_pairs(n, p, &mut rng);
    let mut edge_list = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        let density = params.density_for(truth[i], truth[j]);
        let s = density.sample(&mut rng);
        edge_list.push((i, j, s));
    }
    let graph = MeasurementGraph::new(n, edge_list)?;
    Ok(PlantedInstance {
        graph,
        truth,
        params: params.clone(),
        seed,
    })
}

/// Samples the Bernoulli(`p`) subset of all ordered pairs `i < j` by
/// geometric gap skipping: the number of pairs skipped between successive
/// hits is geometric, so the cost is proportional to the number of edges
/// rather than to `n^2`.
pub(crate) fn sample_er_pairs(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    if n < 2 || p <= 0.0 {
        return pairs;
    }
    if p >= 1.0 {
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
            }
        }
        return pairs;
    }
    let geo = Geometric::new(p).expect("probability already range-checked");
    // Walk the pair sequence (0,1), (0,2), .., (0,n-1), (1,2), .. with an
    // explicit (row, col) cursor; `skip` counts pairs to jump past.
    let mut i = 0usize;
    let mut j = 0usize; // col offset: current pair is (i, i + 1 + j) after advancing
    let mut first = true;
    loop {
        let mut skip = geo.sample(rng) as usize;
        if !first {
            skip += 1; // move off the pair just emitted
        }
        first = false;
        loop {
            let row_left = (n - 1 - i) - j; // pairs remaining in row i at or after cursor
            if skip < row_left {
                j += skip;
                break;
            }
            skip -= row_left;
            i += 1;
            j = 0;
            if i >= n - 1 {
                return pairs;
            }
        }
        pairs.push((i, i + 1 + j));
    }
}
