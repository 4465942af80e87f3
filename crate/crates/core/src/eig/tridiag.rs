//! Symmetric tridiagonal eigensolver: implicit QL with Wilkinson shifts and
//! accumulated rotations (the classical Bowdler–Martin–Reinsch–Wilkinson
//! scheme). Small dense kernel used to extract Ritz pairs from a Lanczos
//! tridiagonalization.

use crate::error::{Error, Result};

/// Full eigendecomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and subdiagonal `offdiag` (`offdiag.len() == diag.len() - 1`).
///
/// Returns `(values, vectors)` with values ascending; `vectors[j]` is the
/// unit eigenvector of `values[j]`.
pub(crate) fn symmetric_tridiag_eig(
    diag: &[f64],
    offdiag: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = diag.len();
    assert!(
        m == 0 || offdiag.len() == m - 1,
        "subdiagonal length must be m - 1"
    );
    if m == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut d = diag.to_vec();
    // Shifted copy with a trailing zero so e[i] couples d[i] and d[i+1].
    let mut e = offdiag.to_vec();
    e.push(0.0);
    // z[row][col]: accumulated rotations, starts as identity.
    let mut z = vec![vec![0.0; m]; m];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for l in 0..m {
        let mut iter = 0usize;
        loop {
            // Look for a negligible subdiagonal element splitting the matrix.
            let mut split = l;
            while split < m - 1 {
                let dd = d[split].abs() + d[split + 1].abs();
                if e[split].abs() <= f64::EPSILON * dd {
                    break;
                }
                split += 1;
            }
            if split == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::SolverFailure(
                    "tridiagonal QL failed to converge".into(),
                ));
            }
            // Wilkinson shift from the leading 2x2 of the active block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[split] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflowed = false;
            for i in (l..split).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Rotation annihilated prematurely; restart this block.
                    d[i + 1] -= p;
                    e[split] = 0.0;
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflowed {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[split] = 0.0;
        }
    }

    // Sort ascending, carrying columns of z along.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values: Vec<f64> = order.iter().map(|&j| d[j]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| z.iter().map(|row| row[j]).collect())
        .collect();
    Ok((values, vectors))
}
