//! Real upper-Hessenberg eigen kernels: Francis double-shift QR for the
//! eigenvalues and complex inverse iteration for the eigenvectors. Used to
//! turn an Arnoldi Hessenberg factor into Ritz pairs, and to supply
//! eigenvectors for the dense non-symmetric reference solver.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Eigenvalues of a real upper Hessenberg matrix by the implicit double-shift
/// QR iteration (Francis), without accumulating vectors. `h` is row-major and
/// is consumed by value since the iteration destroys it.
pub(crate) fn hessenberg_eigenvalues(mut h: Vec<Vec<f64>>) -> Result<Vec<Complex64>> {
    let n = h.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(out);
    }
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[i][j].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(out);
    }
    let mut nn = n as isize - 1; // index of the trailing active row
    let mut t = 0.0; // accumulated exceptional shifts
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            // Find a negligible subdiagonal; the active block is l..=nn.
            let mut l = nn;
            while l >= 1 {
                let lu = l as usize;
                let mut s = h[lu - 1][lu - 1].abs() + h[lu][lu].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if h[lu][lu - 1].abs() <= f64::EPSILON * s {
                    h[lu][lu - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let nnu = nn as usize;
            let x = h[nnu][nnu];
            if l == nn {
                // 1x1 block: one real eigenvalue.
                out[nnu] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let y = h[nnu - 1][nnu - 1];
            let w = h[nnu][nnu - 1] * h[nnu - 1][nnu];
            if l == nn - 1 {
                // 2x2 block: a real pair or a conjugate complex pair.
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let xs = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    out[nnu - 1] = Complex64::new(xs + z, 0.0);
                    out[nnu] = if z != 0.0 {
                        Complex64::new(xs - w / z, 0.0)
                    } else {
                        Complex64::new(xs + z, 0.0)
                    };
                } else {
                    out[nnu - 1] = Complex64::new(xs + p, z);
                    out[nnu] = Complex64::new(xs + p, -z);
                }
                nn -= 2;
                break;
            }
            if its == 40 {
                return Err(Error::SolverFailure(
                    "Hessenberg QR failed to converge".into(),
                ));
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 || its == 30 {
                // Exceptional shift to break symmetry-induced stalls.
                t += x;
                for i in 0..=nnu {
                    h[i][i] -= x;
                }
                let s = h[nnu][nnu - 1].abs() + h[nnu - 1][nnu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // Look for two consecutive small subdiagonals to start the sweep.
            let lu = l as usize;
            let mut m = nnu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[m][m];
                let rr = x - z;
                let s = y - z;
                p = (rr * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - rr - s;
                r = h[m + 2][m + 1];
                let scale = p.abs() + q.abs() + r.abs();
                p /= scale;
                q /= scale;
                r /= scale;
                if m == lu {
                    break;
                }
                let u = h[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nnu {
                h[i][i - 2] = 0.0;
                if i != m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }
            // Double-shift QR sweep via 3x3 Householder reflectors.
            for k in m..nnu {
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if k != nnu - 1 { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m as isize {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                } else {
                    h[k][k - 1] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nnu {
                    let mut pp = h[k][j] + q * h[k + 1][j];
                    if k != nnu - 1 {
                        pp += r * h[k + 2][j];
                        h[k + 2][j] -= pp * z;
                    }
                    h[k + 1][j] -= pp * y;
                    h[k][j] -= pp * x;
                }
                let mmin = nnu.min(k + 3);
                for i in lu..=mmin {
                    let mut pp = x * h[i][k] + y * h[i][k + 1];
                    if k != nnu - 1 {
                        pp += z * h[i][k + 2];
                        h[i][k + 2] -= pp * r;
                    }
                    h[i][k + 1] -= pp * q;
                    h[i][k] -= pp;
                }
            }
        }
    }
    Ok(out)
}

/// Unit eigenvector of the upper Hessenberg matrix `h` for the (approximate)
/// eigenvalue `lambda`, by inverse iteration: two solves of
/// `(H − λI) x = b` through a Hessenberg-structured complex LU with
/// adjacent-row pivoting. Robust to `λ` being an exact eigenvalue (singular
/// pivots are replaced by a tiny multiple of `‖H‖`).
pub(crate) fn hessenberg_eigenvector(
    h: &[Vec<f64>],
    lambda: Complex64,
    seed: u64,
) -> Vec<Complex64> {
    use rand::Rng;
    let n = h.len();
    assert!(n > 0);
    let mut a: Vec<Complex64> = Vec::with_capacity(n * n);
    let mut hnorm = 0.0f64;
    for (i, row) in h.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let mut c = Complex64::new(v, 0.0);
            if i == j {
                c -= lambda;
            }
            a.push(c);
            hnorm = hnorm.max(v.abs());
        }
    }
    let tiny = Complex64::new((hnorm.max(1.0)) * 1e-30, 0.0);
    // LU with row pivoting; only rows k and k+1 can carry a nonzero in
    // column k, so pivoting is a single adjacent-row comparison.
    let mut perm_swap = vec![false; n.saturating_sub(1)];
    for k in 0..n - 1 {
        if a[(k + 1) * n + k].norm() > a[k * n + k].norm() {
            perm_swap[k] = true;
            for j in k..n {
                a.swap(k * n + j, (k + 1) * n + j);
            }
        }
        let mut piv = a[k * n + k];
        if piv.norm() == 0.0 {
            piv = tiny;
            a[k * n + k] = tiny;
        }
        let factor = a[(k + 1) * n + k] / piv;
        a[(k + 1) * n + k] = factor; // store the multiplier in place
        for j in k + 1..n {
            let akj = a[k * n + j];
            a[(k + 1) * n + j] -= factor * akj;
        }
    }
    if a[(n - 1) * n + (n - 1)].norm() == 0.0 {
        a[(n - 1) * n + (n - 1)] = tiny;
    }

    let solve = |a: &[Complex64], b: &mut [Complex64]| {
        for k in 0..n - 1 {
            if perm_swap[k] {
                b.swap(k, k + 1);
            }
            let f = a[(k + 1) * n + k];
            let bk = b[k];
            b[k + 1] -= f * bk;
        }
        for i in (0..n).rev() {
            let mut sum = b[i];
            for j in i + 1..n {
                sum -= a[i * n + j] * b[j];
            }
            b[i] = sum / a[i * n + i];
        }
    };

    let mut rng = crate::new_rng(seed);
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    for _ in 0..2 {
        let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in &mut x {
            *c /= norm;
        }
        solve(&a, &mut x);
    }
    let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut x {
        *c /= norm;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_matrix_reports_its_diagonal() {
        let h = vec![
            vec![3.0, 1.0, 0.0],
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.0, 0.5],
        ];
        let mut vals = hessenberg_eigenvalues(h).unwrap();
        vals.sort_by(|a, b| b.re.total_cmp(&a.re));
        assert!((vals[0].re - 3.0).abs() < 1e-12 && vals[0].im == 0.0);
        assert!((vals[1].re - 1.0).abs() < 1e-12);
        assert!((vals[2].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotation_block_yields_conjugate_pair() {
        // [[0, -1], [1, 0]] has eigenvalues ±i.
        let h = vec![vec![0.0, -1.0], vec![1.0, 0.0]];
        let vals = hessenberg_eigenvalues(h).unwrap();
        let mut ims: Vec<f64> = vals.iter().map(|c| c.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-12);
        assert!((ims[1] - 1.0).abs() < 1e-12);
        assert!(vals.iter().all(|c| c.re.abs() < 1e-12));
    }

    #[test]
    fn inverse_iteration_recovers_a_hessenberg_eigenvector() {
        let h = vec![
            vec![2.0, 1.0, 3.0],
            vec![0.5, 1.0, -1.0],
            vec![0.0, 0.25, 0.5],
        ];
        let vals = hessenberg_eigenvalues(h.clone()).unwrap();
        for lam in vals {
            let v = hessenberg_eigenvector(&h, lam, 7);
            // Compute ‖Hv − λv‖ directly in complex arithmetic.
            let mut err = 0.0f64;
            for i in 0..3 {
                let mut hv = Complex64::new(0.0, 0.0);
                for j in 0..3 {
                    hv += Complex64::new(h[i][j], 0.0) * v[j];
                }
                err += (hv - lam * v[i]).norm_sqr();
            }
            assert!(err.sqrt() < 1e-8, "residual {} for λ={lam}", err.sqrt());
        }
    }
}
