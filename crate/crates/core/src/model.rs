//! Benchmark model parameters, the edge weight function, and the
//! detectability threshold.

use crate::density::MeasurementDensity;
use crate::error::{Error, Result};

/// Denominator floor below which a measurement counts as out of support.
pub const SUPPORT_FLOOR: f64 = 1e-300;

/// Absolute tolerance of the threshold quadrature for Gaussian densities.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// The family of pairwise measurement densities.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    /// Same density `p_in` for all within-group pairs and `p_out` for all
    /// across-group pairs.
    Symmetric {
        p_in: MeasurementDensity,
        p_out: MeasurementDensity,
    },
    /// Full `k x k` symmetric table; `table[a][b]` is the density of a
    /// measurement between groups `a+1` and `b+1`.
    General { table: Vec<Vec<MeasurementDensity>> },
}

/// Parameters of the generative benchmark: group count `k`, mean degree
/// `alpha` of the measurement graph, and the measurement densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub k: usize,
    pub alpha: f64,
    pub densities: DensityModel,
}

impl ModelParams {
    /// Symmetric model from explicit in/out densities.
    pub fn symmetric(
        k: usize,
        alpha: f64,
        p_in: MeasurementDensity,
        p_out: MeasurementDensity,
    ) -> Result<Self> {
        let params = ModelParams {
            k,
            alpha,
            densities: DensityModel::Symmetric { p_in, p_out },
        };
        params.validate()?;
        Ok(params)
    }

    /// Sign model: measurements are `+1` on within-group pairs and `-1`
    /// across, each flipped independently with probability `eps`.
    pub fn censored(k: usize, alpha: f64, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidArgument(format!(
                "flip probability must lie in [0,1], got {eps}"
            )));
        }
        if eps == 0.5 {
            return Err(Error::InvalidModel(
                "flip probability 0.5 makes in/out densities identical".into(),
            ));
        }
        let p_in = MeasurementDensity::Discrete {
            symbols: vec![1.0, -1.0],
            probs: vec![1.0 - eps, eps],
        };
        let p_out = MeasurementDensity::Discrete {
            symbols: vec![1.0, -1.0],
            probs: vec![eps, 1.0 - eps],
        };
        Self::symmetric(k, alpha, p_in, p_out)
    }

    /// Symmetric model with Gaussian in/out densities of a shared variance.
    pub fn gaussian_pair(
        k: usize,
        alpha: f64,
        mean_in: f64,
        mean_out: f64,
        variance: f64,
    ) -> Result<Self> {
        Self::symmetric(
            k,
            alpha,
            MeasurementDensity::Gaussian {
                mean: mean_in,
                variance,
            },
            MeasurementDensity::Gaussian {
                mean: mean_out,
                variance,
            },
        )
    }

    /// General model from a full `k x k` symmetric density table.
    pub fn general(k: usize, alpha: f64, table: Vec<Vec<MeasurementDensity>>) -> Result<Self> {
        let params = ModelParams {
            k,
            alpha,
            densities: DensityModel::General { table },
        };
        params.validate()?;
        Ok(params)
    }

    /// Structural validation of all fields.
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidModel(format!(
                "need at least 2 groups, got k = {}",
                self.k
            )));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidModel(format!(
                "mean degree must be finite and nonnegative, got {}",
                self.alpha
            )));
        }
        match &self.densities {
            DensityModel::Symmetric { p_in, p_out } => {
                p_in.validate()?;
                p_out.validate()?;
                if p_in == p_out {
                    return Err(Error::InvalidModel(
                        "p_in equals p_out: groups are indistinguishable".into(),
                    ));
                }
                Ok(())
            }
            DensityModel::General { table } => {
                if table.len() != self.k || table.iter().any(|row| row.len() != self.k) {
                    return Err(Error::InvalidModel(format!(
                        "density table must be {k} x {k}",
                        k = self.k
                    )));
                }
                for row in table {
                    for d in row {
                        d.validate()?;
                    }
                }
                for a in 0..self.k {
                    for b in 0..a {
                        if table[a][b] != table[b][a] {
                            return Err(Error::InvalidModel(format!(
                                "density table not symmetric at ({a},{b})"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// The density governing a measurement between groups `a` and `b`
    /// (1-based labels).
    pub fn density_for(&self, a: u32, b: u32) -> &MeasurementDensity {
        match &self.densities {
            DensityModel::Symmetric { p_in, p_out } => {
                if a == b {
                    p_in
                } else {
                    p_out
                }
            }
            DensityModel::General { table } => &table[(a - 1) as usize][(b - 1) as usize],
        }
    }

    /// Edge weight `w(s)` of this model; symmetric mode only.
    pub fn weight(&self, s: f64) -> Result<f64> {
        match &self.densities {
            DensityModel::Symmetric { p_in, p_out } => weight(p_in, p_out, self.k, s),
            DensityModel::General { .. } => Err(Error::UnsupportedModel),
        }
    }
}

/// Likelihood contrast `w(s) = (p_in(s) - p_out(s)) / (p_in(s) + (k-1) p_out(s))`.
///
/// Lies in `[-1/(k-1), 1]` for any `s` in the support of the mixture.
///
/// # Errors
/// [`Error::OutOfSupport`] when the denominator falls below [`SUPPORT_FLOOR`].
pub fn weight(
    p_in: &MeasurementDensity,
    p_out: &MeasurementDensity,
    k: usize,
    s: f64,
) -> Result<f64> {
    let pi = p_in.eval(s);
    let po = p_out.eval(s);
    let den = pi + (k as f64 - 1.0) * po;
    if den <= SUPPORT_FLOOR {
        return Err(Error::OutOfSupport { s, den });
    }
    let w = (pi - po) / den;
    debug_assert!(w <= 1.0 + 1e-12 && w >= -1.0 / (k as f64 - 1.0) - 1e-12);
    Ok(w)
}

/// Detectability threshold `alpha_c` of a symmetric model.
///
/// See [`critical_degree_pair`]; this form reads the densities and `k` from
/// the model parameters.
///
/// # Errors
/// [`Error::UnsupportedModel`] for general tables; [`Error::InvalidModel`]
/// when the two densities use incompatible representations.
pub fn critical_degree(params: &ModelParams) -> Result<f64> {
    match &params.densities {
        DensityModel::Symmetric { p_in, p_out } => critical_degree_pair(p_in, p_out, params.k),
        DensityModel::General { .. } => Err(Error::UnsupportedModel),
    }
}

/// Detectability threshold for an explicit `(p_in, p_out)` density pair.
///
/// Defined through
/// `1/alpha_c = (1/k) * integral of (p_in - p_out)^2 / (p_in + (k-1) p_out)`
/// over the measurement support: an exact sum for discrete and binned
/// densities, adaptive Simpson quadrature (absolute tolerance
/// [`QUADRATURE_TOL`], support truncated at mean ± 10 standard deviations per
/// component) for Gaussians.
///
/// Returns `f64::INFINITY` when the integral vanishes (`p_in == p_out`
/// pointwise), in which case no mean degree suffices for recovery.
///
/// # Errors
/// [`Error::InvalidModel`] when the two densities use incompatible
/// representations.
pub fn critical_degree_pair(
    p_in: &MeasurementDensity,
    p_out: &MeasurementDensity,
    k: usize,
) -> Result<f64> {
    let k = k as f64;
    let inv = match (p_in, p_out) {
        (
            MeasurementDensity::Discrete {
                symbols: sin,
                probs: qin,
            },
            MeasurementDensity::Discrete {
                symbols: sout,
                probs: qout,
            },
        ) => {
            // Sum over the union of atoms; an atom missing from a density
            // carries zero mass there.
            let mut atoms: Vec<f64> = sin.iter().chain(sout.iter()).copied().collect();
            atoms.sort_by(|a, b| a.partial_cmp(b).expect("finite symbols"));
            atoms.dedup();
            let mut total = 0.0;
            for &s in &atoms {
                let pi = lookup(sin, qin, s);
                let po = lookup(sout, qout, s);
                let den = pi + (k - 1.0) * po;
                if den > SUPPORT_FLOOR {
                    total += (pi - po) * (pi - po) / den;
                }
            }
            total / k
        }
        (
            MeasurementDensity::Binned {
                edges: ein,
                masses: min,
            },
            MeasurementDensity::Binned {
                edges: eout,
                masses: mout,
            },
        ) => {
            if ein != eout {
                return Err(Error::InvalidModel(
                    "binned densities must share identical bin edges".into(),
                ));
            }
            let mut total = 0.0;
            for t in 0..min.len() {
                let den = min[t] + (k - 1.0) * mout[t];
                if den > SUPPORT_FLOOR {
                    total += (min[t] - mout[t]) * (min[t] - mout[t]) / den;
                }
            }
            total / k
        }
        (
            MeasurementDensity::Gaussian {
                mean: m1,
                variance: v1,
            },
            MeasurementDensity::Gaussian {
                mean: m2,
                variance: v2,
            },
        ) => {
            let s1 = v1.sqrt();
            let s2 = v2.sqrt();
            let lo = (m1 - 10.0 * s1).min(m2 - 10.0 * s2);
            let hi = (m1 + 10.0 * s1).max(m2 + 10.0 * s2);
            let f = |s: f64| {
                let pi = p_in.eval(s);
                let po = p_out.eval(s);
                let den = pi + (k - 1.0) * po;
                if den > SUPPORT_FLOOR {
                    (pi - po) * (pi - po) / den
                } else {
                    0.0
                }
            };
            adaptive_simpson(&f, lo, hi, QUADRATURE_TOL) / k
        }
        _ => {
            return Err(Error::InvalidModel(
                "threshold needs p_in and p_out in the same representation".into(),
            ))
        }
    };
    if inv <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / inv)
    }
}

fn lookup(symbols: &[f64], probs: &[f64], s: f64) -> f64 {
    symbols
        .iter()
        .position(|&sym| sym == s)
        .map_or(0.0, |t| probs[t])
}

/// Adaptive Simpson quadrature with absolute tolerance `tol` on `[a, b]`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        let s = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        (m, fm, s)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn censored_weight_matches_closed_form() {
        let params = ModelParams::censored(2, 3.0, 0.1).unwrap();
        // (0.9 - 0.1) / (0.9 + 0.1) = 1 - 2 eps
        assert!((params.weight(1.0).unwrap() - 0.8).abs() < 1e-15);
        assert!((params.weight(-1.0).unwrap() + 0.8).abs() < 1e-15);
    }

    #[test]
    fn censored_threshold_closed_form() {
        for eps in [0.05, 0.1, 0.25] {
            let params = ModelParams::censored(2, 3.0, eps).unwrap();
            let expect = (1.0 - 2.0 * eps).powi(-2);
            assert!(
                (critical_degree(&params).unwrap() - expect).abs() < 1e-12,
                "eps = {eps}"
            );
        }
    }

    #[test]
    fn identical_densities_give_infinite_threshold() {
        let d = MeasurementDensity::Discrete {
            symbols: vec![1.0, -1.0],
            probs: vec![0.5, 0.5],
        };
        assert_eq!(critical_degree_pair(&d, &d, 2).unwrap(), f64::INFINITY);
    }

    #[test]
    fn identical_densities_rejected_by_constructor() {
        let d = MeasurementDensity::Discrete {
            symbols: vec![1.0, -1.0],
            probs: vec![0.5, 0.5],
        };
        assert!(matches!(
            ModelParams::symmetric(2, 3.0, d.clone(), d),
            Err(Error::InvalidModel(_))
        ));
    }
}
