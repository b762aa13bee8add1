//! Quick dual-route consistency checks run by `tcquant selftest`.
//!
//! Each check computes one quantity along two independent paths on random
//! inputs and reports the worst discrepancy.

use rand::Rng;

use crate::beran::{beran_estimate, reverse_time_crosscheck, RightCensoredObservation};
use crate::error::Result;
use crate::kernel::{ll_weights, nw_weights, KernelSpec, WeightVector};
use crate::rearrange::{phi_tilde, RearrangeDomain};
use crate::simulate::stream_rng;
use crate::stepfun::StepFunction;
use crate::twice_censored::{
    estimate, quantile_ip, quantile_psi, rearranged_hazard, subdist, Delta, Estimator, Observation, TailPolicy,
    HAZARD_ATOM_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Random twice-censored sample with times on a coarse grid (so ties occur)
/// and scalar covariates in `[0, 1]`.
pub fn random_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, left_censoring: bool) -> Vec<Observation> {
    (0..n)
        .map(|_| {
            let y = (rng.random_range(0.05..10.0f64) * 20.0).round() / 20.0 + 0.05;
            let u: f64 = rng.random();
            let delta = if u < 0.55 {
                Delta::Uncensored
            } else if u < 0.8 || !left_censoring {
                Delta::RightCensored
            } else {
                Delta::LeftCensored
            };
            Observation::scalar(y, rng.random(), delta)
        })
        .collect()
}

/// `∫_J |f|^p` computed piece by piece.
pub fn lp_norm_pow(f: &StepFunction, dom: &RearrangeDomain, p: f64) -> f64 {
    let (j1, j2) = (dom.j1(), dom.j2());
    let mut start = j1;
    let mut level = f.eval(j1);
    let mut acc = 0.0;
    for (&t, &v) in f.locations().iter().zip(f.values()) {
        if t <= j1 || t >= j2 {
            continue;
        }
        acc += level.abs().powf(p) * (t - start);
        start = t;
        level = v;
    }
    acc + level.abs().powf(p) * (j2 - start)
}

fn km_reduction(seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..40);
        let sample = random_sample(&mut rng, n, false);
        let xs: Vec<Vec<f64>> = sample.iter().map(|o| o.x.clone()).collect();
        let Ok(w) = nw_weights(&[rng.random()], &xs, 0.4, &KernelSpec::default()) else {
            continue;
        };
        let rc: Vec<RightCensoredObservation> = sample
            .iter()
            .map(|o| RightCensoredObservation { z: o.y, x: o.x.clone(), event: o.delta == Delta::Uncensored })
            .collect();
        let km = beran_estimate(&rc, &w)?;
        let f = estimate(&sample, &w, Estimator::Psi, TailPolicy::Undefined)?;
        for o in &sample {
            worst = worst.max((km.eval(o.y) - f.cdf.eval(o.y)).abs());
        }
    }
    Ok(worst)
}

fn hazard_atoms_bounded(seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(5..40);
        let sample = random_sample(&mut rng, n, true);
        let xs: Vec<f64> = sample.iter().map(|o| o.x[0]).collect();
        let Ok(w) = ll_weights(0.0, &xs, 0.3, &KernelSpec::default()) else {
            continue;
        };
        let s = subdist(&sample, &w)?;
        for (_, m) in rearranged_hazard(&s, &s.domain()?)? {
            worst = worst.max(-m).max(m - 1.0);
        }
    }
    Ok(worst)
}

fn estimator_coincidence(seed: u64) -> Result<usize> {
    let mut rng = stream_rng(seed, 3);
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.random_range(5..40);
        let sample = random_sample(&mut rng, n, true);
        let xs: Vec<Vec<f64>> = sample.iter().map(|o| o.x.clone()).collect();
        let Ok(w) = nw_weights(&[0.5], &xs, 0.3, &KernelSpec::default()) else {
            continue;
        };
        let a = estimate(&sample, &w, Estimator::Psi, TailPolicy::Undefined)?;
        let b = estimate(&sample, &w, Estimator::Ip, TailPolicy::Undefined)?;
        for k in 1..100 {
            let tau = k as f64 / 100.0;
            if quantile_psi(&a, tau)?.value != quantile_ip(&b, tau)?.value {
                mismatches += 1;
            }
        }
    }
    Ok(mismatches)
}

fn time_reversal(seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..30);
        let sample = random_sample(&mut rng, n, true);
        worst = worst.max(reverse_time_crosscheck(&sample, &WeightVector::uniform(n))?);
    }
    Ok(worst)
}

fn rearrangement_norms(seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(1..12);
        let f = StepFunction::from_levels(
            0.0,
            (0..k).map(|_| (rng.random_range(0.0..10.0), rng.random_range(-1.0..2.0))),
        );
        let dom = RearrangeDomain::new(0.0, 10.0)?;
        let g = phi_tilde(&f, &dom);
        for p in [1.0, 2.0] {
            worst = worst.max((lp_norm_pow(&f, &dom, p) - lp_norm_pow(&g, &dom, p)).abs());
        }
        let gg = phi_tilde(&g, &dom);
        worst = worst.max((lp_norm_pow(&gg.combine(&g, |a, b| a - b), &dom, 1.0)).abs());
    }
    Ok(worst)
}

/// Runs every check; the seed fixes all random inputs.
pub fn run_selftest(seed: u64) -> Vec<CheckOutcome> {
    fn outcome<T: std::fmt::Display>(
        name: &'static str,
        r: Result<T>,
        ok: impl Fn(&T) -> bool,
    ) -> CheckOutcome {
        match r {
            Ok(v) => CheckOutcome { name, passed: ok(&v), detail: format!("worst = {v}") },
            Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
        }
    }
    vec![
        outcome("beran reduction without left censoring", km_reduction(seed), |&d| d <= 1e-12),
        outcome("rearranged hazard atoms in [0, 1]", hazard_atoms_bounded(seed), |&d| d <= HAZARD_ATOM_TOLERANCE),
        outcome("psi and ip quantiles coincide for nw weights", estimator_coincidence(seed), |&m| m == 0),
        outcome("time-reversal identity", time_reversal(seed), |&d| d <= 1e-10),
        outcome("rearrangement keeps L1/L2 norms and is idempotent", rearrangement_norms(seed), |&d| {
            d <= 1e-10
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest(17) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
