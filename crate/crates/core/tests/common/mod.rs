//! Independent oracles shared by the integration tests.
//!
//! Everything here is built straight from definitions — brute-force
//! enumeration, explicit dense matrices, quadrature — deliberately avoiding
//! the library's own optimized routines, so agreement between the two routes
//! is evidence rather than tautology.

#![allow(dead_code)]

use rand::Rng;
use spclust::density::MeasurementDensity;
use spclust::graph::MeasurementGraph;
use spclust::model::ModelParams;

/// Exact posterior node marginals by summing over all `k^n` label
/// assignments: `P(c) ∝ Π_edges p_{c_i c_j}(s_ij)` with a uniform prior.
/// Returns row-major `n × k`. Only for tiny instances.
pub fn enumerate_posterior(graph: &MeasurementGraph, params: &ModelParams) -> Vec<Vec<f64>> {
    let n = graph.n();
    let k = params.k;
    assert!(
        (k as f64).powi(n as i32) < 2e7,
        "enumeration oracle needs k^n small"
    );
    let mut marginals = vec![vec![0.0; k]; n];
    let mut total = 0.0;
    let mut assignment = vec![1u32; n];
    loop {
        let mut like = 1.0;
        for e in graph.edges() {
            like *= params
                .density_for(assignment[e.i], assignment[e.j])
                .eval(e.s);
        }
        total += like;
        for i in 0..n {
            marginals[i][(assignment[i] - 1) as usize] += like;
        }
        // Odometer-style advance through all k^n assignments.
        let mut pos = 0;
        loop {
            if pos == n {
                // wrapped past the last assignment: normalize and return
                assert!(total > 0.0, "zero total likelihood");
                for row in &mut marginals {
                    for x in row.iter_mut() {
                        *x /= total;
                    }
                }
                return marginals;
            }
            if assignment[pos] < k as u32 {
                assignment[pos] += 1;
                break;
            }
            assignment[pos] = 1;
            pos += 1;
        }
    }
}

/// A uniformly labeled random tree instance: node `i ≥ 1` attaches to a
/// uniform earlier node, and each edge measurement is drawn from the density
/// of its endpoint pair.
pub fn tree_instance(
    params: &ModelParams,
    n: usize,
    seed: u64,
) -> (MeasurementGraph, Vec<u32>) {
    let mut rng = spclust::new_rng(seed);
    let truth: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=params.k as u32)).collect();
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let s = params.density_for(truth[i], truth[j]).sample(&mut rng);
        edges.push((i, j, s));
    }
    (
        MeasurementGraph::new(n, edges).expect("tree instance is a valid graph"),
        truth,
    )
}

/// The directed-edge (non-backtracking) matrix built straight from its
/// definition: entry `[d', d] = w_d · 1[head(d) = tail(d')] · 1[tail(d) ≠
/// head(d')]`, using only the public directed-id convention (edge `e` yields
/// ids `2e` for `i→j` and `2e+1` for `j→i`).
pub fn dense_nb_matrix(graph: &MeasurementGraph, weights: &[f64]) -> Vec<Vec<f64>> {
    let m = graph.m();
    assert_eq!(weights.len(), m);
    let dim = 2 * m;
    let tail = |d: usize| {
        let e = &graph.edges()[d / 2];
        if d % 2 == 0 {
            e.i
        } else {
            e.j
        }
    };
    let head = |d: usize| {
        let e = &graph.edges()[d / 2];
        if d % 2 == 0 {
            e.j
        } else {
            e.i
        }
    };
    let mut b = vec![vec![0.0; dim]; dim];
    for dst in 0..dim {
        for src in 0..dim {
            if head(src) == tail(dst) && tail(src) != head(dst) {
                b[dst][src] = weights[src / 2];
            }
        }
    }
    b
}

/// Per-edge weights straight from the model (thin wrapper kept here so oracle
/// call sites read independently).
pub fn model_weights(graph: &MeasurementGraph, params: &ModelParams) -> Vec<f64> {
    graph
        .edges()
        .iter()
        .map(|e| params.weight(e.s).expect("weight defined on support"))
        .collect()
}

/// Critical mean degree of a symmetric model by direct quadrature/summation
/// of `1/alpha_c = (1/k) ∫ (p_in − p_out)² / (p_in + (k−1) p_out)`,
/// independent of the library's threshold routine.
pub fn threshold_oracle(p_in: &MeasurementDensity, p_out: &MeasurementDensity, k: usize) -> f64 {
    let integrand = |a: f64, b: f64| {
        let den = a + (k as f64 - 1.0) * b;
        if den <= 0.0 {
            0.0
        } else {
            (a - b) * (a - b) / den
        }
    };
    let integral = match (p_in, p_out) {
        (
            MeasurementDensity::Discrete {
                symbols, probs, ..
            },
            MeasurementDensity::Discrete {
                symbols: s2,
                probs: q,
            },
        ) => {
            assert_eq!(symbols, s2, "oracle assumes a shared symbol set");
            probs
                .iter()
                .zip(q)
                .map(|(&a, &b)| integrand(a, b))
                .sum::<f64>()
        }
        _ => {
            // Simpson's rule over a window wide enough for Gaussian-type
            // tails at double precision.
            let (lo, hi) = (-20.0, 20.0);
            let steps = 200_000usize; // even
            let h = (hi - lo) / steps as f64;
            let mut acc = 0.0;
            for t in 0..=steps {
                let s = lo + t as f64 * h;
                let w = if t == 0 || t == steps {
                    1.0
                } else if t % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * integrand(p_in.eval(s), p_out.eval(s));
            }
            acc * h / 3.0
        }
    };
    k as f64 / integral
}

/// Overlap by explicit recursion over all `k!` label permutations —
/// an independent implementation of the agreement score.
pub fn overlap_bruteforce(pred: &[u32], truth: &[u32], k: usize) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let n = pred.len();
    let mut perm: Vec<u32> = (1..=k as u32).collect();
    let mut used = vec![false; k + 1];
    let mut best = 0usize;
    fn rec(
        pos: usize,
        k: usize,
        perm: &mut Vec<u32>,
        used: &mut Vec<bool>,
        pred: &[u32],
        truth: &[u32],
        best: &mut usize,
    ) {
        if pos == k {
            let hits = pred
                .iter()
                .zip(truth)
                .filter(|&(&p, &t)| perm[(p - 1) as usize] == t)
                .count();
            *best = (*best).max(hits);
            return;
        }
        for c in 1..=k as u32 {
            if !used[c as usize] {
                used[c as usize] = true;
                perm[pos] = c;
                rec(pos + 1, k, perm, used, pred, truth, best);
                used[c as usize] = false;
            }
        }
    }
    rec(0, k, &mut perm, &mut used, pred, truth, &mut best);
    let frac = best as f64 / n as f64;
    let guess = 1.0 / k as f64;
    (frac - guess) / (1.0 - guess)
}

/// Complex eigenvalues of a dense matrix through the library's dense oracle,
/// sorted by decreasing modulus then decreasing real part.
pub fn dense_eigenvalues(rows: &[Vec<f64>], symmetric: bool) -> Vec<num_complex::Complex64> {
    let report = spclust::eig::dense_eig_oracle(rows, symmetric).expect("dense oracle");
    let mut vals: Vec<num_complex::Complex64> = report.pairs.iter().map(|p| p.value).collect();
    vals.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    vals
}
