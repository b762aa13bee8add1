//! Compactly supported kernels and the local weights built from them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::twice_censored::Observation;

/// Density cutoff of the truncated Gaussian kernel.
pub const DEFAULT_TRUNCATION: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `φ(u)·1{φ(u) > threshold}`.
    TruncatedGaussian,
    /// `½·1{|u| ≤ 1}`.
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub truncation_threshold: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::truncated_gaussian()
    }
}

impl KernelSpec {
    pub fn truncated_gaussian() -> Self {
        KernelSpec {
            kind: KernelKind::TruncatedGaussian,
            truncation_threshold: DEFAULT_TRUNCATION,
        }
    }

    pub fn rectangular() -> Self {
        KernelSpec {
            kind: KernelKind::Rectangular,
            truncation_threshold: 0.0,
        }
    }

    /// Radius `r` such that the kernel vanishes for `|u| > r`.
    pub fn support_radius(&self) -> f64 {
        match self.kind {
            // φ(u) > c  ⇔  |u| < sqrt(-2 ln(c·sqrt(2π)))
            KernelKind::TruncatedGaussian => {
                let arg = self.truncation_threshold * (2.0 * PI).sqrt();
                if arg >= 1.0 {
                    0.0
                } else {
                    (-2.0 * arg.ln()).sqrt()
                }
            }
            KernelKind::Rectangular => 1.0,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self.kind {
            KernelKind::TruncatedGaussian => {
                let phi = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
                if phi > self.truncation_threshold {
                    phi
                } else {
                    0.0
                }
            }
            KernelKind::Rectangular => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFamily {
    /// Nadaraya–Watson.
    Nw,
    /// Local linear (scalar covariate only).
    Ll,
}

impl std::str::FromStr for WeightFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nw" => Ok(WeightFamily::Nw),
            "ll" => Ok(WeightFamily::Ll),
            other => Err(Error::Config(format!("unknown weight family `{other}` (expected nw|ll)"))),
        }
    }
}

impl std::fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightFamily::Nw => "nw",
            WeightFamily::Ll => "ll",
        })
    }
}

/// Local weights `W_i(x)` attached to a sample at one covariate point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub covariate_point: Vec<f64>,
    pub bandwidth: f64,
}

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        WeightVector {
            weights: vec![1.0 / n as f64; n],
            covariate_point: Vec::new(),
            bandwidth: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn has_negative(&self) -> bool {
        self.weights.iter().any(|&w| w < 0.0)
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")))
    }
}

/// Nadaraya–Watson weights with a product kernel over the covariate coordinates.
pub fn nw_weights(x: &[f64], covariates: &[Vec<f64>], h: f64, kernel: &KernelSpec) -> Result<WeightVector> {
    nw_from_rows(x, covariates.iter().map(Vec::as_slice), h, kernel)
}

fn nw_from_rows<'a>(
    x: &[f64],
    rows: impl Iterator<Item = &'a [f64]>,
    h: f64,
    kernel: &KernelSpec,
) -> Result<WeightVector> {
    check_bandwidth(h)?;
    let mut raw = Vec::new();
    for xi in rows {
        if xi.len() != x.len() {
            return Err(Error::InvalidInput(format!(
                "covariate dimension {} does not match evaluation point dimension {}",
                xi.len(),
                x.len()
            )));
        }
        let v: f64 = x
            .iter()
            .zip(xi)
            .map(|(&a, &b)| kernel.eval((a - b) / h))
            .product();
        raw.push(v);
    }
    if raw.is_empty() {
        return Err(Error::InvalidInput("empty covariate sample".into()));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyNeighborhood);
    }
    Ok(WeightVector {
        weights: raw.into_iter().map(|v| v / total).collect(),
        covariate_point: x.to_vec(),
        bandwidth: h,
    })
}

/// Weights of the given family at `x` for the covariates of `sample`.
pub fn local_weights(
    family: WeightFamily,
    x: &[f64],
    sample: &[Observation],
    h: f64,
    kernel: &KernelSpec,
) -> Result<WeightVector> {
    match family {
        WeightFamily::Nw => nw_from_rows(x, sample.iter().map(|o| o.x.as_slice()), h, kernel),
        WeightFamily::Ll => {
            if x.len() != 1 || sample.iter().any(|o| o.x.len() != 1) {
                return Err(Error::InvalidInput(
                    "local-linear weights need a scalar covariate".into(),
                ));
            }
            let xs: Vec<f64> = sample.iter().map(|o| o.x[0]).collect();
            ll_weights(x[0], &xs, h, kernel)
        }
    }
}

/// Local-linear weights for a scalar covariate.
pub fn ll_weights(x: f64, covariates: &[f64], h: f64, kernel: &KernelSpec) -> Result<WeightVector> {
    check_bandwidth(h)?;
    if covariates.is_empty() {
        return Err(Error::InvalidInput("empty covariate sample".into()));
    }
    let nh = covariates.len() as f64 * h;
    let k: Vec<f64> = covariates.iter().map(|&xi| kernel.eval((x - xi) / h)).collect();
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (&ki, &xi) in k.iter().zip(covariates) {
        let d = x - xi;
        s0 += ki;
        s1 += ki * d;
        s2 += ki * d * d;
    }
    if s0 <= 0.0 {
        return Err(Error::EmptyNeighborhood);
    }
    let (s0, s1, s2) = (s0 / nh, s1 / nh, s2 / nh);
    let det = s2 * s0 - s1 * s1;
    // scale-free version of the `1e-14` floor: Cauchy–Schwarz gives det ≤ s0·s2
    if !(det > 1e-14 * s0 * s2) {
        return Err(Error::SingularDesign);
    }
    let weights = k
        .iter()
        .zip(covariates)
        .map(|(&ki, &xi)| ki * (s2 - (x - xi) * s1) / (nh * det))
        .collect();
    Ok(WeightVector {
        weights,
        covariate_point: vec![x],
        bandwidth: h,
    })
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn ll_weights_reproduce_lines(
            xs in prop::collection::vec(0.0..1.0f64, 3..60),
            x in 0.0..1.0f64,
            h in 0.1..1.0f64,
        ) {
            if let Ok(w) = ll_weights(x, &xs, h, &KernelSpec::default()) {
                let s0: f64 = w.weights.iter().sum();
                let s1: f64 = w.weights.iter().zip(&xs).map(|(wi, xi)| wi * (xi - x)).sum();
                prop_assert!((s0 - 1.0).abs() < 1e-8);
                prop_assert!(s1.abs() < 1e-8);
            }
        }

        #[test]
        fn nw_weights_form_a_probability_vector(
            xs in prop::collection::vec(0.0..1.0f64, 1..60),
            x in 0.0..1.0f64,
            h in 0.01..1.0f64,
        ) {
            let cov: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
            if let Ok(w) = nw_weights(&[x], &cov, h, &KernelSpec::default()) {
                prop_assert!(!w.has_negative());
                prop_assert!((w.sum() - 1.0).abs() < 1e-12);
            }
        }
    }
}
