//! Measurement-density representations.
//!
//! A density describes the distribution of the scalar measurement observed on
//! an edge, conditioned on the (hidden) groups of its endpoints. Three
//! representations are supported: a discrete alphabet of atoms, a Gaussian,
//! and a binned empirical table (the output of kernel density estimation on
//! ingested data).

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Tolerance on total probability mass at validation time.
pub const MASS_TOL: f64 = 1e-9;

/// A probability density (or mass function) over measurement values.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementDensity {
    /// Finite alphabet: `probs[t]` is the mass of atom `symbols[t]`.
    Discrete { symbols: Vec<f64>, probs: Vec<f64> },
    /// Gaussian with the given mean and variance.
    Gaussian { mean: f64, variance: f64 },
    /// Piecewise-constant masses over contiguous bins. `edges` has one more
    /// entry than `masses`; bin `t` spans `[edges[t], edges[t+1])`.
    Binned { edges: Vec<f64>, masses: Vec<f64> },
}

impl MeasurementDensity {
    /// Checks structural validity: nonnegative masses summing to 1 within
    /// [`MASS_TOL`], distinct atoms, strictly increasing bin edges, positive
    /// variance.
    pub fn validate(&self) -> Result<()> {
        match self {
            MeasurementDensity::Discrete { symbols, probs } => {
                if symbols.len() != probs.len() || symbols.is_empty() {
                    return Err(Error::InvalidModel(
                        "discrete density needs matching, non-empty symbol and probability lists"
                            .into(),
                    ));
                }
                for t in 0..symbols.len() {
                    if !symbols[t].is_finite() {
                        return Err(Error::InvalidModel("non-finite symbol".into()));
                    }
                    if !(probs[t] >= 0.0) {
                        return Err(Error::InvalidModel("negative or NaN probability".into()));
                    }
                    for u in 0..t {
                        if symbols[u] == symbols[t] {
                            return Err(Error::InvalidModel(format!(
                                "duplicate symbol {}",
                                symbols[t]
                            )));
                        }
                    }
                }
                check_mass(probs.iter().sum())
            }
            MeasurementDensity::Gaussian { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || *variance <= 0.0 {
                    return Err(Error::InvalidModel(
                        "gaussian density needs finite mean and positive variance".into(),
                    ));
                }
                Ok(())
            }
            MeasurementDensity::Binned { edges, masses } => {
                if edges.len() != masses.len() + 1 || masses.is_empty() {
                    return Err(Error::InvalidModel(
                        "binned density needs len(edges) == len(masses) + 1 >= 2".into(),
                    ));
                }
                if edges.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidModel(
                        "bin edges must be strictly increasing".into(),
                    ));
                }
                if masses.iter().any(|m| !(*m >= 0.0)) {
                    return Err(Error::InvalidModel("negative or NaN bin mass".into()));
                }
                check_mass(masses.iter().sum())
            }
        }
    }

    /// Probability mass (discrete/binned) or density value (Gaussian) at `s`.
    ///
    /// Values outside a discrete alphabet or the binned support evaluate to 0.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            MeasurementDensity::Discrete { symbols, probs } => symbols
                .iter()
                .position(|&sym| sym == s)
                .map_or(0.0, |t| probs[t]),
            MeasurementDensity::Gaussian { mean, variance } => {
                let z = (s - mean) * (s - mean) / (2.0 * variance);
                (-z).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            MeasurementDensity::Binned { edges, masses } => {
                match locate_bin(edges, s) {
                    Some(t) => masses[t],
                    None => 0.0,
                }
            }
        }
    }

    /// Draws one measurement. Deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MeasurementDensity::Discrete { symbols, probs } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for t in 0..probs.len() {
                    acc += probs[t];
                    if u < acc {
                        return symbols[t];
                    }
                }
                // Total mass may be marginally below 1; fall back to the last atom.
                *symbols.last().expect("validated non-empty")
            }
            MeasurementDensity::Gaussian { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            MeasurementDensity::Binned { edges, masses } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut t = masses.len() - 1;
                for (idx, m) in masses.iter().enumerate() {
                    acc += m;
                    if u < acc {
                        t = idx;
                        break;
                    }
                }
                let lo = edges[t];
                let hi = edges[t + 1];
                lo + rng.gen::<f64>() * (hi - lo)
            }
        }
    }
}

fn check_mass(total: f64) -> Result<()> {
    if (total - 1.0).abs() <= MASS_TOL {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "total mass {total} deviates from 1 by more than {MASS_TOL:e}"
        )))
    }
}

/// Index of the bin containing `s`, or `None` if outside `[edges[0], edges[last])`.
fn locate_bin(edges: &[f64], s: f64) -> Option<usize> {
    if s < edges[0] || s >= edges[edges.len() - 1] {
        return None;
    }
    // Binary search for the rightmost edge <= s.
    let mut lo = 0usize;
    let mut hi = edges.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if edges[mid] <= s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}
