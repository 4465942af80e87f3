//! Arnoldi iteration for the largest-modulus eigenpairs of a general real
//! operator. One long run with a two-pass modified Gram–Schmidt
//! orthogonalization; Ritz values come from a Francis QR on the Hessenberg
//! factor and Ritz vectors from Hessenberg inverse iteration.

use super::hessenberg::{hessenberg_eigenvalues, hessenberg_eigenvector};
use super::{dot, norm2, random_unit, recompute_residual, EigenPair, EigenReport, LinearMap};
use crate::error::{Error, Result};
use num_complex::Complex64;

const CHECK_EVERY: usize = 20;
const MAX_RUNS: usize = 3;

/// Largest-modulus eigenpairs of a general (possibly non-symmetric) real
/// operator, sorted by modulus descending (ties broken by imaginary part
/// descending, so a conjugate pair appears with `+im` first).
///
/// Complex pairs are returned as such; see [`EigenPair::is_real`] for the
/// realness test. `max_iter` bounds the total Krylov dimension. `converged`
/// is true iff `want` pairs were found and every one meets
/// `‖Mv − λv‖ ≤ tol · ‖v‖ · max(1, |λ|)`, recomputed from the operator;
/// otherwise partial results are returned with the flag lowered.
pub fn krylov_nonsymmetric<M: LinearMap + ?Sized>(
    map: &M,
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
    let mut pairs: Vec<EigenPair> = Vec::new();
    let mut used = 0usize;
    let mut runs = 0usize;

    // Usually a single run; extra runs only happen after a happy breakdown
    // that exposed an invariant subspace too small to hold `want` pairs.
    while pairs.len() < want && used < max_iter && runs < MAX_RUNS {
        let before = pairs.len();
        arnoldi_run(map, want, tol, max_iter, seed, runs as u64, &mut pairs, &mut used)?;
        runs += 1;
        if pairs.len() == before {
            break;
        }
    }

    sort_pairs(&mut pairs);
    pairs.truncate(want);
    let converged = pairs.len() == want && pairs.iter().all(|p| p.residual <= tol);
    Ok(EigenReport {
        pairs,
        iterations: used,
        converged,
    })
}

#[allow(clippy::too_many_arguments)]
fn arnoldi_run<M: LinearMap + ?Sized>(
    map: &M,
    want: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
    run: u64,
    found: &mut Vec<EigenPair>,
    used: &mut usize,
) -> Result<()> {
    let dim = map.dim();
    // Deflation space: orthonormalized real/imaginary parts of pairs located
    // by earlier runs. Every Krylov vector is kept orthogonal to it.
    let deflate = orthonormal_span(found, dim);
    if dim == deflate.len() {
        return Ok(());
    }
    let budget = (max_iter - *used).min(dim - deflate.len());
    if budget == 0 {
        return Ok(());
    }

    let mut v0 = random_unit(dim, crate::mix_seed(seed, run));
    mgs_against(&mut v0, &deflate);
    let n0 = norm2(&v0);
    if n0 < 1e-10 {
        return Ok(());
    }
    for x in &mut v0 {
        *x /= n0;
    }

    let mut basis: Vec<Vec<f64>> = vec![v0];
    // h[i][j] for i ≤ j+1: upper Hessenberg, grown column by column.
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut w = vec![0.0; dim];

    loop {
        let j = basis.len() - 1;
        map.apply(&basis[j], &mut w);
        *used += 1;
        mgs_against(&mut w, &deflate);
        let mut col = vec![0.0; j + 2];
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(q, &w);
                col[i] += c;
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = norm2(&w);
        col[j + 1] = b;
        h.push(col);
        let steps = h.len();

        let hscale = h
            .iter()
            .flat_map(|c| c.iter())
            .fold(1.0f64, |m, x| m.max(x.abs()));
        if b <= hscale * 1e-13 {
            break; // happy breakdown: exact invariant subspace
        }
        if steps >= budget {
            break;
        }
        if steps % CHECK_EVERY == 0 && steps > want {
            if let Some(true) = check_top_converged(&h, want, tol)? {
                break;
            }
        }
        basis.push(w.iter().map(|x| x / b).collect());
    }

    // Harvest Ritz pairs from the final Hessenberg factor.
    let m = h.len();
    let hm = square_hessenberg(&h, m);
    let mut values = hessenberg_eigenvalues(hm.clone())?;
    sort_values(&mut values);
    let take = want.min(values.len());
    for &lam in values.iter().take(take) {
        let y = hessenberg_eigenvector(&hm, lam, crate::mix_seed(seed, 1000 + run));
        // Complex arithmetic leaves an arbitrary phase on the coefficient
        // vector; gauge it away so real eigenvalues get real vectors.
        let mut yre: Vec<f64> = y.iter().map(|c| c.re).collect();
        let mut yim: Vec<f64> = y.iter().map(|c| c.im).collect();
        super::phase_align_max_real(&mut yre, &mut yim);
        let keep_im = norm2(&yim) > 1e-14;
        let mut vre = vec![0.0; dim];
        let mut vim = vec![0.0; if keep_im { dim } else { 0 }];
        for (idx, q) in basis.iter().enumerate() {
            let (cr, ci) = (yre[idx], yim[idx]);
            for i in 0..dim {
                vre[i] += cr * q[i];
            }
            if keep_im {
                for i in 0..dim {
                    vim[i] += ci * q[i];
                }
            }
        }
        let residual = recompute_residual(map, lam, &vre, &vim);
        *used += if vim.is_empty() { 1 } else { 2 };
        found.push(EigenPair {
            value: lam,
            vector_re: vre,
            vector_im: vim,
            residual,
        });
    }
    Ok(())
}

/// Estimated-residual convergence probe for the top `want` Ritz values of the
/// current Hessenberg factor. `None` means the factor is still too small.
fn check_top_converged(h: &[Vec<f64>], want: usize, tol: f64) -> Result<Option<bool>> {
    let m = h.len();
    if m <= want {
        return Ok(None);
    }
    let hm = square_hessenberg(h, m);
    let beta = h[m - 1][m];
    let mut values = hessenberg_eigenvalues(hm.clone())?;
    sort_values(&mut values);
    for (idx, &lam) in values.iter().take(want).enumerate() {
        let y = hessenberg_eigenvector(&hm, lam, 17 + idx as u64);
        let est = beta * y.last().map(|c| c.norm()).unwrap_or(1.0);
        if est > tol * lam.norm().max(1.0) {
            return Ok(Some(false));
        }
    }
    Ok(Some(true))
}

/// Leading m×m block of the column-stored Hessenberg factor as dense rows.
fn square_hessenberg(h: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let mut hm = vec![vec![0.0; m]; m];
    for (j, col) in h.iter().enumerate().take(m) {
        for (i, &v) in col.iter().enumerate() {
            if i < m {
                hm[i][j] = v;
            }
        }
    }
    hm
}

fn sort_values(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.im.total_cmp(&a.im))
            .then(b.re.total_cmp(&a.re))
    });
}

fn sort_pairs(pairs: &mut [EigenPair]) {
    pairs.sort_by(|a, b| {
        b.value
            .norm()
            .total_cmp(&a.value.norm())
            .then(b.value.im.total_cmp(&a.value.im))
            .then(b.value.re.total_cmp(&a.value.re))
    });
}

/// Orthonormal basis of the span of all found eigenvector parts.
fn orthonormal_span(found: &[EigenPair], dim: usize) -> Vec<Vec<f64>> {
    let mut span: Vec<Vec<f64>> = Vec::new();
    let push = |v: &[f64], span: &mut Vec<Vec<f64>>| {
        let mut v = v.to_vec();
        mgs_against(&mut v, span);
        let n = norm2(&v);
        if n > 1e-10 && span.len() < dim {
            for x in &mut v {
                *x /= n;
            }
            span.push(v);
        }
    };
    for p in found {
        push(&p.vector_re, &mut span);
        if !p.vector_im.is_empty() {
            push(&p.vector_im, &mut span);
        }
    }
    span
}

fn mgs_against(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::DenseMap;

    #[test]
    fn diagonal_top_pair_is_exact() {
        let rows = vec![
            vec![3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.5],
        ];
        let map = DenseMap { rows: &rows };
        let rep = krylov_nonsymmetric(&map, 1, 1e-10, 50, 2).unwrap();
        assert!(rep.converged);
        let p = &rep.pairs[0];
        assert!((p.value.re - 3.0).abs() < 1e-9 && p.value.im.abs() < 1e-12);
        // Eigenvector is ±e1.
        assert!(p.vector_re[0].abs() > 1.0 - 1e-8);
        assert!(p.vector_re[1].abs() < 1e-7 && p.vector_re[2].abs() < 1e-7);
    }

    #[test]
    fn rotation_reports_complex_pair() {
        let rows = vec![vec![0.6, -0.8], vec![0.8, 0.6]];
        let map = DenseMap { rows: &rows };
        let rep = krylov_nonsymmetric(&map, 2, 1e-8, 20, 5).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.pairs.len(), 2);
        for p in &rep.pairs {
            assert!((p.value.norm() - 1.0).abs() < 1e-9);
            assert!(!p.is_real(1e-6), "rotation eigenvalues are not real");
        }
        assert!(rep.pairs[0].value.im > 0.0, "+im sorts first");
        assert!((rep.pairs[0].value.im - 0.8).abs() < 1e-9);
    }

    #[test]
    fn identity_breakdown_still_yields_requested_pairs() {
        // Krylov space of the identity is one-dimensional: instant breakdown.
        // Deflated restarts must still produce two (orthogonal) eigenpairs.
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let map = DenseMap { rows: &rows };
        let rep = krylov_nonsymmetric(&map, 2, 1e-10, 50, 8).unwrap();
        assert!(rep.converged, "pairs: {:?}", rep.pairs.len());
        for p in &rep.pairs {
            assert!((p.value.re - 1.0).abs() < 1e-10);
        }
        let ortho = dot(&rep.pairs[0].vector_re, &rep.pairs[1].vector_re);
        assert!(ortho.abs() < 1e-8);
    }
}
