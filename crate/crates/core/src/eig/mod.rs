//! Iterative eigensolvers over abstract matvec operators, plus a dense
//! reference solver used as an independent check in tests.
//!
//! Two iterative kernels are provided: [`lanczos_symmetric_extremal`] for
//! symmetric operators (extremal eigenpairs) and [`krylov_nonsymmetric`]
//! (Arnoldi) for general real operators (largest-modulus pairs, possibly
//! complex). Both work purely through [`LinearMap::apply`], never needing the
//! matrix entries, and are deterministic given their seed.

mod arnoldi;
mod dense;
mod hessenberg;
mod lanczos;
mod tridiag;

pub use arnoldi::krylov_nonsymmetric;
pub use dense::dense_eig_oracle;
pub use lanczos::{lanczos_symmetric_extremal, Side};

use num_complex::Complex64;

/// Abstract linear operator: a dimension plus a deterministic matvec.
pub trait LinearMap {
    /// Vector-space dimension (input and output length of [`apply`]).
    ///
    /// [`apply`]: LinearMap::apply
    fn dim(&self) -> usize;

    /// Writes `M x` into `y`. Must be linear and deterministic.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Dense row-major matrix viewed as a [`LinearMap`]; mainly for tests.
pub struct DenseMap<'a> {
    pub rows: &'a [Vec<f64>],
}

impl LinearMap for DenseMap<'_> {
    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(self.rows) {
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// One eigenpair. Real pairs have `value.im == 0` and an empty
/// `vector_im`; complex pairs carry both vector parts.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector_re: Vec<f64>,
    /// Imaginary part of the eigenvector; empty for real pairs.
    pub vector_im: Vec<f64>,
    /// Relative residual `‖Mv − λv‖ / (‖v‖·max(1, |λ|))`, recomputed from
    /// the operator after extraction. `NaN` when no vector is available.
    pub residual: f64,
}

impl EigenPair {
    /// True when the eigenvalue is real to within `tol·(1+|λ|)`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.value.im.abs() <= tol * (1.0 + self.value.norm())
    }
}

/// Solver outcome: the pairs found, iteration count, and whether every
/// requested pair met the residual tolerance.
#[derive(Debug, Clone)]
pub struct EigenReport {
    pub pairs: Vec<EigenPair>,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean norm.
pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Fixes eigenvector gauge for reproducibility: unit norm with the first
/// significantly nonzero entry positive.
pub(crate) fn normalize_sign_gauge(mut v: Vec<f64>) -> Vec<f64> {
    let norm = norm2(&v);
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * sup.max(1e-300)) {
        if *first < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
    }
    v
}

/// Rotates a complex vector `u + iv` by the unit phase that maximizes the
/// real part's norm (also making the parts orthogonal). An eigenvector of a
/// real eigenvalue computed through complex arithmetic carries an arbitrary
/// phase; this gauge turns it back into a real vector plus rounding noise.
pub(crate) fn phase_align_max_real(u: &mut [f64], v: &mut [f64]) {
    let a = dot(u, u);
    let b = dot(v, v);
    let c = dot(u, v);
    let r = ((a - b) * (a - b) + 4.0 * c * c).sqrt();
    if r <= 0.0 {
        return; // perfectly circular: any phase is as good
    }
    let two_phi = (2.0 * c).atan2(a - b);
    let (sin_p, cos_p) = (0.5 * two_phi).sin_cos();
    for (ui, vi) in u.iter_mut().zip(v.iter_mut()) {
        let nu = *ui * cos_p + *vi * sin_p;
        let nv = *vi * cos_p - *ui * sin_p;
        *ui = nu;
        *vi = nv;
    }
}

/// Seeded uniform start vector on the unit sphere.
pub(crate) fn random_unit(dim: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = crate::new_rng(seed);
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm2(&v);
        if n > 1e-6 {
            for x in &mut v {
                *x /= n;
            }
            return v;
        }
    }
}

/// Recomputes the relative residual `‖Mv − λv‖ / (‖v‖·max(1,|λ|))` for a
/// possibly complex pair, using two real matvecs.
pub(crate) fn recompute_residual<M: LinearMap + ?Sized>(
    map: &M,
    value: Complex64,
    vre: &[f64],
    vim: &[f64],
) -> f64 {
    let dim = map.dim();
    let mut mre = vec![0.0; dim];
    map.apply(vre, &mut mre);
    let (mim, vim_or_zero);
    if vim.is_empty() {
        mim = vec![0.0; dim];
        vim_or_zero = vec![0.0; dim];
    } else {
        let mut t = vec![0.0; dim];
        map.apply(vim, &mut t);
        mim = t;
        vim_or_zero = vim.to_vec();
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for idx in 0..dim {
        let rre = mre[idx] - (value.re * vre[idx] - value.im * vim_or_zero[idx]);
        let rim = mim[idx] - (value.re * vim_or_zero[idx] + value.im * vre[idx]);
        num += rre * rre + rim * rim;
        den += vre[idx] * vre[idx] + vim_or_zero[idx] * vim_or_zero[idx];
    }
    (num.sqrt()) / (den.sqrt().max(1e-300) * value.norm().max(1.0))
}
