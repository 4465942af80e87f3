//! k-means over embedding rows, the permutation-maximized overlap score, and
//! the shared result type returned by the three clustering methods.

use crate::bp::BpReport;
use crate::error::{Error, Result};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

/// Largest `k` for which the factorial permutation scan in [`overlap`] runs.
pub const OVERLAP_MAX_K: usize = 10;

/// Which algorithm produced a [`ClusterResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bp,
    Nb,
    Bh,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Bp => "bp",
            Method::Nb => "nb",
            Method::Bh => "bh",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bp" => Ok(Method::Bp),
            "nb" => Ok(Method::Nb),
            "bh" => Ok(Method::Bh),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected bp, nb, or bh)"
            ))),
        }
    }
}

/// Method-specific run details carried alongside the labels.
#[derive(Debug, Clone)]
pub enum Diagnostics {
    /// Belief propagation: the convergence report.
    Bp(BpReport),
    /// Spectral methods: number of retained eigenvectors and their values.
    Spectral { r: usize, eigenvalues: Vec<f64> },
    /// Point-cloud pipeline: BP report plus held-out accuracy when truth was
    /// supplied.
    Pipeline {
        bp: BpReport,
        accuracy_non_training: Option<f64>,
    },
}

/// Labels plus scoring and diagnostics for one clustering run.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    /// Per-node label in `1..=k`.
    pub labels: Vec<u32>,
    /// Permutation-maximized overlap against the truth; `None` when no truth
    /// was available.
    pub overlap: Option<f64>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

/// Restart and iteration budget for [`kmeans`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KmeansSettings {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KmeansSettings {
    fn default() -> Self {
        KmeansSettings {
            restarts: 10,
            max_iter: 100,
        }
    }
}

/// k-means over `n` points of dimension `r` (row-major `points`, length
/// `n·r`). Careful seeding (first center uniform, later centers drawn with
/// probability proportional to squared distance from the chosen set), Lloyd
/// alternation, empty clusters reseeded from the farthest point, and the
/// best-inertia result over `restarts` runs. Labels are 1-based.
///
/// # Errors
/// [`Error::InvalidArgument`] on non-finite coordinates, `r = 0`, ragged
/// input, or `k > n` or `k = 0`.
pub fn kmeans(
    points: &[f64],
    r: usize,
    k: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    if r == 0 {
        return Err(Error::InvalidArgument("dimension r must be ≥ 1".into()));
    }
    if points.len() % r != 0 {
        return Err(Error::InvalidArgument(
            "points length is not a multiple of r".into(),
        ));
    }
    let n = points.len() / r;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 ≤ k ≤ n, got k={k}, n={n}"
        )));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "points contain non-finite coordinates".into(),
        ));
    }
    if k == 1 {
        return Ok(vec![1; n]);
    }
    let restarts = restarts.max(1);
    let mut best: Option<(f64, Vec<u32>)> = None;
    for run in 0..restarts {
        let (inertia, labels) = kmeans_once(points, n, r, k, max_iter, crate::mix_seed(seed, run as u64));
        if best.as_ref().map_or(true, |(bi, _)| inertia < *bi) {
            best = Some((inertia, labels));
        }
    }
    Ok(best.expect("at least one restart ran").1)
}

fn dist2(points: &[f64], r: usize, i: usize, center: &[f64]) -> f64 {
    points[i * r..(i + 1) * r]
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn kmeans_once(
    points: &[f64],
    n: usize,
    r: usize,
    k: usize,
    max_iter: usize,
    seed: u64,
) -> (f64, Vec<u32>) {
    let mut rng = crate::new_rng(seed);
    // Careful seeding: centers spread out proportionally to squared distance.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centers.push(points[first * r..(first + 1) * r].to_vec());
    let mut min_d2: Vec<f64> = (0..n).map(|i| dist2(points, r, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total > 0.0 {
            let w = WeightedIndex::new(&min_d2).expect("nonnegative weights with positive sum");
            w.sample(&mut rng)
        } else {
            rng.gen_range(0..n) // all points coincide with a center
        };
        centers.push(points[next * r..(next + 1) * r].to_vec());
        for i in 0..n {
            min_d2[i] = min_d2[i].min(dist2(points, r, i, centers.last().unwrap()));
        }
    }

    let mut assign = vec![0usize; n];
    let mut last_inertia = f64::INFINITY;
    for _ in 0..max_iter.max(1) {
        // Assignment step.
        let mut inertia = 0.0;
        let mut changed = false;
        for i in 0..n {
            let mut bc = 0usize;
            let mut bd = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(points, r, i, center);
                if d < bd {
                    bd = d;
                    bc = c;
                }
            }
            if assign[i] != bc {
                changed = true;
                assign[i] = bc;
            }
            inertia += bd;
        }
        // Empty-cluster repair: move the center onto the point farthest from
        // its current center, then redo the assignment next iteration.
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        let mut reseeded = false;
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|i| !taken.contains(i))
                .max_by(|&a, &b| {
                    dist2(points, r, a, &centers[assign[a]])
                        .total_cmp(&dist2(points, r, b, &centers[assign[b]]))
                })
                .expect("k ≤ n leaves a point to reseed from");
            centers[c] = points[far * r..(far + 1) * r].to_vec();
            taken.push(far);
            reseeded = true;
        }
        if !reseeded {
            debug_assert!(
                inertia <= last_inertia * (1.0 + 1e-9) + 1e-12,
                "inertia increased: {last_inertia} -> {inertia}"
            );
        }
        last_inertia = inertia;
        if !changed && !reseeded {
            break;
        }
        // Update step.
        let mut sums = vec![vec![0.0; r]; k];
        for (i, &a) in assign.iter().enumerate() {
            for (s, &x) in sums[a].iter_mut().zip(&points[i * r..(i + 1) * r]) {
                *s += x;
            }
        }
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (ctr, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *ctr = s / counts[c] as f64;
                }
            }
        }
    }
    // Final inertia for restart comparison.
    let inertia: f64 = (0..n)
        .map(|i| dist2(points, r, i, &centers[assign[i]]))
        .sum();
    (inertia, assign.iter().map(|&a| a as u32 + 1).collect())
}

/// Permutation-maximized agreement rescaled so random guessing is 0 and
/// perfect recovery is 1:
/// `max_σ ((1/n) Σ 1(σ(pred_i) = truth_i) − 1/k) / (1 − 1/k)`.
///
/// # Errors
/// [`Error::EnumerationBound`] for `k >` [`OVERLAP_MAX_K`];
/// [`Error::DimensionMismatch`] for length mismatch;
/// [`Error::InvalidArgument`] for labels outside `1..=k` or empty input.
pub fn overlap(pred: &[u32], truth: &[u32], k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument("overlap needs k ≥ 2".into()));
    }
    if k > OVERLAP_MAX_K {
        return Err(Error::EnumerationBound {
            k,
            max: OVERLAP_MAX_K,
        });
    }
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let n = pred.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty label vectors".into()));
    }
    let mut conf = vec![0u64; k * k];
    for (&p, &t) in pred.iter().zip(truth) {
        let (p, t) = (p as usize, t as usize);
        if p == 0 || p > k || t == 0 || t > k {
            return Err(Error::InvalidArgument(format!(
                "label outside 1..={k}: pred={p}, truth={t}"
            )));
        }
        conf[(p - 1) * k + (t - 1)] += 1;
    }
    // Heap's algorithm over all k! permutations of the predicted labels.
    let mut perm: Vec<usize> = (0..k).collect();
    let mut counters = vec![0usize; k];
    let score = |perm: &[usize], conf: &[u64]| -> u64 {
        (0..k).map(|a| conf[a * k + perm[a]]).sum()
    };
    let mut best = score(&perm, &conf);
    let mut i = 1;
    while i < k {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            best = best.max(score(&perm, &conf));
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    let frac = best as f64 / n as f64;
    let kk = k as f64;
    Ok((frac - 1.0 / kk) / (1.0 - 1.0 / kk))
}

/// Two-group decoding of a single embedding column: label 1 where the entry
/// is ≥ 0, label 2 otherwise.
pub fn sign_decode(column: &[f64]) -> Vec<u32> {
    column.iter().map(|&x| if x >= 0.0 { 1 } else { 2 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_perfect_and_flipped() {
        let truth = vec![1, 1, 2, 2, 1];
        assert_eq!(overlap(&truth, &truth, 2).unwrap(), 1.0);
        let flipped: Vec<u32> = truth.iter().map(|&x| 3 - x).collect();
        assert_eq!(overlap(&flipped, &truth, 2).unwrap(), 1.0);
    }

    #[test]
    fn overlap_of_uninformative_prediction_is_zero() {
        let truth = vec![1, 1, 2, 2];
        let pred = vec![1, 2, 1, 2];
        assert_eq!(overlap(&pred, &truth, 2).unwrap(), 0.0);
    }

    #[test]
    fn overlap_rejects_large_k() {
        let v = vec![1u32; 4];
        assert!(matches!(
            overlap(&v, &v, 11),
            Err(Error::EnumerationBound { k: 11, max: 10 })
        ));
    }

    #[test]
    fn sign_decode_maps_signs() {
        assert_eq!(sign_decode(&[0.5, -0.1, 0.0, -2.0]), vec![1, 2, 1, 2]);
    }

    #[test]
    fn kmeans_separates_two_blobs() {
        // 20 points near 0 and 20 near 10 in one dimension.
        let mut pts = Vec::new();
        for i in 0..20 {
            pts.push(0.0 + 0.005 * i as f64);
        }
        for i in 0..20 {
            pts.push(10.0 + 0.005 * i as f64);
        }
        let labels = kmeans(&pts, 1, 2, 5, 50, 3).unwrap();
        assert_eq!(labels[..20], vec![labels[0]; 20][..]);
        assert_eq!(labels[20..], vec![labels[20]; 20][..]);
        assert_ne!(labels[0], labels[20]);
    }

    #[test]
    fn kmeans_k_equals_one() {
        let labels = kmeans(&[1.0, 2.0, 3.0], 1, 1, 3, 10, 0).unwrap();
        assert_eq!(labels, vec![1, 1, 1]);
    }

    #[test]
    fn kmeans_exact_on_duplicated_locations() {
        // Three distinct locations, several duplicates each, k=3.
        let mut pts = Vec::new();
        let locs = [[0.0, 0.0], [5.0, 5.0], [-4.0, 3.0]];
        for rep in 0..7 {
            for loc in &locs {
                pts.extend_from_slice(loc);
                let _ = rep;
            }
        }
        let labels = kmeans(&pts, 2, 3, 10, 50, 1).unwrap();
        for off in 0..3 {
            let expect = labels[off];
            for rep in 0..7 {
                assert_eq!(labels[rep * 3 + off], expect);
            }
        }
        let mut distinct = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 3);
    }
}
