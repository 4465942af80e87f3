//! Dense reference eigensolver. Symmetric matrices go through a direct
//! tridiagonalization-based decomposition; general matrices go through a
//! full dense eigendecomposition from a second, independently implemented
//! linear-algebra stack.
//!
//! This is the independent check that the iterative Krylov kernels are tested
//! against; it is deliberately direct rather than fast. Residuals are always
//! recomputed here from the input matrix, so every returned pair carries its
//! own certificate.

use super::{recompute_residual, DenseMap, EigenPair, EigenReport};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Largest matrix size the oracle accepts.
pub const DENSE_ORACLE_MAX: usize = 2000;

/// Full eigendecomposition of an explicit real matrix (row-major rows).
///
/// With `symmetric = true` the pairs are real and sorted ascending by value;
/// otherwise they are sorted descending by modulus (conjugate pairs adjacent,
/// `+im` first). Residuals are recomputed from the matrix for every pair.
///
/// # Errors
/// [`Error::SizeLimit`] above [`DENSE_ORACLE_MAX`];
/// [`Error::InvalidArgument`] for non-square input; [`Error::SolverFailure`]
/// if the underlying decomposition does not converge.
pub fn dense_eig_oracle(rows: &[Vec<f64>], symmetric: bool) -> Result<EigenReport> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidArgument("matrix has dimension 0".into()));
    }
    if n > DENSE_ORACLE_MAX {
        return Err(Error::SizeLimit {
            n,
            max: DENSE_ORACLE_MAX,
        });
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }

    let mut pairs = if symmetric {
        symmetric_pairs(rows, n)?
    } else {
        general_pairs(rows, n)?
    };
    let map = DenseMap { rows };
    for p in &mut pairs {
        p.residual = recompute_residual(&map, p.value, &p.vector_re, &p.vector_im);
    }
    Ok(EigenReport {
        pairs,
        iterations: 0,
        converged: true,
    })
}

fn symmetric_pairs(rows: &[Vec<f64>], n: usize) -> Result<Vec<EigenPair>> {
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    let mat = DMatrix::from_row_slice(n, n, &flat);
    let eig = SymmetricEigen::try_new(mat, f64::EPSILON, 0)
        .ok_or_else(|| Error::SolverFailure("symmetric eigendecomposition stalled".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Ok(order
        .into_iter()
        .map(|j| EigenPair {
            value: Complex64::new(eig.eigenvalues[j], 0.0),
            vector_re: eig.eigenvectors.column(j).iter().copied().collect(),
            vector_im: Vec::new(),
            residual: 0.0,
        })
        .collect())
}

fn general_pairs(rows: &[Vec<f64>], n: usize) -> Result<Vec<EigenPair>> {
    faer::set_global_parallelism(faer::Par::Seq);
    let mat = faer::Mat::<f64>::from_fn(n, n, |i, j| rows[i][j]);
    let evd = faer::linalg::solvers::Eigen::new_from_real(mat.as_ref())
        .map_err(|_| Error::SolverFailure("dense eigendecomposition did not converge".into()))?;
    let values = evd.S();
    let vectors = evd.U();

    let mut pairs = Vec::with_capacity(n);
    for j in 0..n {
        let lam: Complex64 = values[j];
        let mut vre = vec![0.0; n];
        let mut vim = vec![0.0; n];
        for i in 0..n {
            let z: Complex64 = vectors[(i, j)];
            vre[i] = z.re;
            vim[i] = z.im;
        }
        // Gauge away the arbitrary complex phase so real eigenvalues come
        // with real eigenvectors, then normalize.
        super::phase_align_max_real(&mut vre, &mut vim);
        let nv = (super::norm2(&vre).powi(2) + super::norm2(&vim).powi(2)).sqrt();
        for x in vre.iter_mut().chain(vim.iter_mut()) {
            *x /= nv;
        }
        let vim = if super::norm2(&vim) > 1e-13 {
            vim
        } else {
            Vec::new()
        };
        pairs.push(EigenPair {
            value: lam,
            vector_re: vre,
            vector_im: vim,
            residual: 0.0,
        });
    }
    pairs.sort_by(|a, b| {
        b.value
            .norm()
            .total_cmp(&a.value.norm())
            .then(b.value.im.total_cmp(&a.value.im))
            .then(b.value.re.total_cmp(&a.value.re))
    });
    Ok(pairs)
}
