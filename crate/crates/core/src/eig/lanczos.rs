//! Symmetric Lanczos with full reorthogonalization, explicit restarts, and
//! projection deflation for extremal eigenpairs.
//!
//! Each inner run targets the single most extremal eigenpair in the
//! orthogonal complement of everything already locked. The Krylov basis is
//! capped; when the cap is reached the run restarts from the current best
//! Ritz vector, so orthogonalization cost stays `O(cap · dim)` per matvec
//! while convergence keeps the usual restarted-Lanczos rate. Converged pairs
//! are locked and projected out of all later runs; after the requested
//! count is reached one extra probe run per extra copy checks that no more
//! extremal (repeated) eigenvalue hides in the complement.

use super::tridiag::symmetric_tridiag_eig;
use super::{dot, norm2, random_unit, recompute_residual, EigenPair, EigenReport, LinearMap};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Which end of the spectrum to converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Smallest,
    Largest,
}

/// Convergence is probed every this many steps.
const CHECK_EVERY: usize = 10;
/// Krylov basis bound per restart cycle.
const BASIS_CAP: usize = 60;

/// Extremal eigenpairs of a symmetric operator.
///
/// Returns up to `want` pairs from the requested end of the spectrum, sorted
/// ascending for [`Side::Smallest`] and descending for [`Side::Largest`], so
/// `pairs[0]` is always the most extremal. `max_iter` bounds the total number
/// of matvecs across all runs. `converged` is true iff every returned pair
/// meets `‖Mv − λv‖ ≤ tol · ‖v‖ · max(1, |λ|)`, recomputed from the
/// operator.
///
/// The operator must be symmetric; this is the caller's responsibility and is
/// not checked here.
pub fn lanczos_symmetric_extremal<M: LinearMap + ?Sized>(
    map: &M,
    side: Side,
    want: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenReport> {
    let dim = map.dim();
    if want == 0 {
        return Err(Error::InvalidArgument("want must be at least 1".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("operator has dimension 0".into()));
    }
    let want = want.min(dim);
    // `locked` holds certified pairs (residual ≤ tol); `spares` holds
    // best-effort pairs from budget-exhausted runs.
    let mut locked: Vec<EigenPair> = Vec::new();
    let mut spares: Vec<EigenPair> = Vec::new();
    let mut used = 0usize;
    let mut run = 0u64;

    // A Krylov run cannot see the multiplicity of an eigenvalue, so after
    // `want` pairs are certified one more deflated probe run checks the
    // orthogonal complement; if it uncovers a value more extremal than the
    // current want-th (a repeated eigenvalue), probing continues.
    while used < max_iter && locked.len() < dim {
        let was_probe = locked.len() >= want;
        let found = lanczos_run(
            map,
            side,
            tol,
            max_iter - used,
            crate::mix_seed(seed, run),
            &locked,
            &mut used,
        )?;
        run += 1;
        let Some(pair) = found else {
            break; // complement numerically exhausted
        };
        let kth = kth_extremal(&locked, side, want);
        if pair.residual <= tol {
            let discovered_more_extremal =
                kth.is_some_and(|kv| more_extremal(pair.value.re, kv, side));
            locked.push(pair);
            if was_probe && !discovered_more_extremal {
                break; // complement holds nothing more extremal: done
            }
        } else {
            spares.push(pair);
            break; // a whole run certified nothing: out of budget or stuck
        }
    }

    sort_side(&mut locked, side);
    locked.truncate(want);
    if locked.len() < want {
        sort_side(&mut spares, side);
        locked.extend(spares.into_iter().take(want - locked.len()));
        sort_side(&mut locked, side);
    }
    let converged = locked.len() == want && locked.iter().all(|p| p.residual <= tol);
    Ok(EigenReport {
        pairs: locked,
        iterations: used,
        converged,
    })
}

fn sort_side(pairs: &mut [EigenPair], side: Side) {
    match side {
        Side::Smallest => pairs.sort_by(|a, b| a.value.re.total_cmp(&b.value.re)),
        Side::Largest => pairs.sort_by(|a, b| b.value.re.total_cmp(&a.value.re)),
    }
}

/// The want-th most extremal certified value, when that many exist.
fn kth_extremal(locked: &[EigenPair], side: Side, want: usize) -> Option<f64> {
    if locked.len() < want {
        return None;
    }
    let mut vals: Vec<f64> = locked.iter().map(|p| p.value.re).collect();
    match side {
        Side::Smallest => vals.sort_by(f64::total_cmp),
        Side::Largest => vals.sort_by(|a, b| b.total_cmp(a)),
    }
    Some(vals[want - 1])
}

fn more_extremal(value: f64, reference: f64, side: Side) -> bool {
    match side {
        Side::Smallest => value < reference,
        Side::Largest => value > reference,
    }
}

/// One restarted Lanczos run targeting the most extremal eigenpair in the
/// orthogonal complement of `locked`. Returns `None` when the complement is
/// numerically exhausted; otherwise the pair is certified when its recomputed
/// residual meets `tol` and best-effort (larger residual) when the budget ran
/// out first.
fn lanczos_run<M: LinearMap + ?Sized>(
    map: &M,
    side: Side,
    tol: f64,
    budget: usize,
    seed: u64,
    locked: &[EigenPair],
    used: &mut usize,
) -> Result<Option<EigenPair>> {
    let dim = map.dim();
    let complement = dim - locked.len();
    if complement == 0 || budget == 0 {
        return Ok(None);
    }
    let cap = BASIS_CAP.min(complement);
    let start_used = *used;

    let mut v0 = random_unit(dim, seed);
    project_out(&mut v0, locked);
    let nv = norm2(&v0);
    if nv < 1e-10 {
        return Ok(None); // complement is (numerically) exhausted
    }
    for x in &mut v0 {
        *x /= nv;
    }

    let mut w = vec![0.0; dim];
    loop {
        // One cycle: grow a fresh Krylov basis from v0 up to `cap` vectors.
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut exact_subspace = false;
        let mut budget_out = false;

        loop {
            let j = alpha.len();
            map.apply(&basis[j], &mut w);
            *used += 1;
            alpha.push(dot(&basis[j], &w));
            // Full reorthogonalization (two modified Gram-Schmidt passes)
            // against the cycle basis and all locked vectors.
            for _ in 0..2 {
                for q in basis.iter() {
                    let c = dot(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
                for p in locked {
                    let c = dot(&p.vector_re, &w);
                    for (wi, qi) in w.iter_mut().zip(&p.vector_re) {
                        *wi -= c * qi;
                    }
                }
            }
            let b = norm2(&w);
            let scale = alpha
                .iter()
                .chain(beta.iter())
                .fold(1.0f64, |m, x| m.max(x.abs()));
            if b <= scale * 1e-14 {
                exact_subspace = true; // invariant subspace of the complement
                break;
            }
            let steps = alpha.len();
            if *used - start_used >= budget {
                budget_out = true;
                break;
            }
            if steps >= cap {
                break;
            }
            if steps % CHECK_EVERY == 0 && top_ritz_estimate(&alpha, &beta, b, side)? <= tol {
                break;
            }
            beta.push(b);
            for x in &mut w {
                *x /= b;
            }
            basis.push(w.clone());
        }

        // Extremal Ritz pair of this cycle.
        let (vals, vecs) = symmetric_tridiag_eig(&alpha, &beta)?;
        let idx = match side {
            Side::Smallest => 0,
            Side::Largest => vals.len() - 1,
        };
        let theta = vals[idx];
        let y = &vecs[idx];
        let mut vec = vec![0.0; dim];
        for (coef, q) in y.iter().zip(&basis) {
            for (vi, qi) in vec.iter_mut().zip(q) {
                *vi += coef * qi;
            }
        }
        project_out(&mut vec, locked);
        let nv = norm2(&vec);
        if nv < 1e-10 {
            return Ok(None);
        }
        for x in &mut vec {
            *x /= nv;
        }

        let value = Complex64::new(theta, 0.0);
        let residual = recompute_residual(map, value, &vec, &[]);
        *used += 1; // residual recomputation costs one matvec
        let done = exact_subspace || residual <= tol || budget_out || *used - start_used >= budget;
        if done {
            return Ok(Some(EigenPair {
                value,
                vector_re: vec,
                vector_im: Vec::new(),
                residual,
            }));
        }
        // Restart from the best Ritz vector.
        v0 = vec;
    }
}

/// Residual estimate `|β_j · y_last|` of the current extremal Ritz value,
/// scaled the way the convergence contract is (relative to `max(1, |θ|)`).
fn top_ritz_estimate(alpha: &[f64], beta: &[f64], next_beta: f64, side: Side) -> Result<f64> {
    let (vals, vecs) = symmetric_tridiag_eig(alpha, beta)?;
    let idx = match side {
        Side::Smallest => 0,
        Side::Largest => vals.len() - 1,
    };
    let est = next_beta * vecs[idx].last().copied().unwrap_or(1.0).abs();
    Ok(est / vals[idx].abs().max(1.0))
}

fn project_out(v: &mut [f64], locked: &[EigenPair]) {
    for p in locked {
        let c = dot(&p.vector_re, v);
        for (vi, qi) in v.iter_mut().zip(&p.vector_re) {
            *vi -= c * qi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::DenseMap;

    #[test]
    fn identity_smallest_is_one() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..6).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let map = DenseMap { rows: &rows };
        let rep = lanczos_symmetric_extremal(&map, Side::Smallest, 1, 1e-10, 100, 1).unwrap();
        assert!(rep.converged);
        assert!((rep.pairs[0].value.re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_extremes() {
        let d = [-2.0, 0.5, 1.0, 2.5, 5.0];
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { d[i] } else { 0.0 }).collect())
            .collect();
        let map = DenseMap { rows: &rows };
        let lo = lanczos_symmetric_extremal(&map, Side::Smallest, 2, 1e-10, 100, 3).unwrap();
        assert!(lo.converged);
        assert!((lo.pairs[0].value.re + 2.0).abs() < 1e-8);
        assert!((lo.pairs[1].value.re - 0.5).abs() < 1e-8);
        let hi = lanczos_symmetric_extremal(&map, Side::Largest, 1, 1e-10, 100, 3).unwrap();
        assert!((hi.pairs[0].value.re - 5.0).abs() < 1e-8);
    }

    #[test]
    fn repeated_eigenvalue_found_via_deflation() {
        // diag(1, 1, 4): the smallest eigenvalue has multiplicity 2; a single
        // Krylov run can only see one copy, so the second must come from a
        // deflated restart.
        let d = [1.0, 1.0, 4.0];
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { d[i] } else { 0.0 }).collect())
            .collect();
        let map = DenseMap { rows: &rows };
        let rep = lanczos_symmetric_extremal(&map, Side::Smallest, 2, 1e-10, 200, 11).unwrap();
        assert!(rep.converged, "residuals: {:?}", ilist(&rep));
        assert!((rep.pairs[0].value.re - 1.0).abs() < 1e-8);
        assert!((rep.pairs[1].value.re - 1.0).abs() < 1e-8);
        let orth = dot(&rep.pairs[0].vector_re, &rep.pairs[1].vector_re);
        assert!(orth.abs() < 1e-8, "locked vectors must stay orthogonal");
    }

    #[test]
    fn large_tridiagonal_needs_restarts() {
        // "Discretized Laplacian" style matrix, dimension above the basis
        // cap: restart cycles must still converge the extreme pair.
        let n = 150;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            rows[i][i] = 2.0;
            if i + 1 < n {
                rows[i][i + 1] = -1.0;
                rows[i + 1][i] = -1.0;
            }
        }
        let map = DenseMap { rows: &rows };
        let rep = lanczos_symmetric_extremal(&map, Side::Largest, 1, 1e-8, 2000, 5).unwrap();
        assert!(rep.converged, "residual {:?}", ilist(&rep));
        let expect = 2.0 - 2.0 * (std::f64::consts::PI * n as f64 / (n as f64 + 1.0)).cos();
        assert!(
            (rep.pairs[0].value.re - expect).abs() < 1e-6,
            "got {}, expected {expect}",
            rep.pairs[0].value.re
        );
    }

    fn ilist(rep: &EigenReport) -> Vec<f64> {
        rep.pairs.iter().map(|p| p.residual).collect()
    }
}
