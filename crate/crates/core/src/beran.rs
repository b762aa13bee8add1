//! Beran estimator for conditionally right-censored data, and the time-reversal
//! check that ties the left-censoring reverse hazard to a right-censored
//! Nelson–Aalen hazard.

use crate::error::{Error, Result};
use crate::kernel::WeightVector;
use crate::stepfun::{
    product_limit, ratio_measure, DenominatorMode, Direction, SignedMeasure, StepFunction,
};
use crate::twice_censored::{Delta, Observation};

#[derive(Debug, Clone, PartialEq)]
pub struct RightCensoredObservation {
    /// `min(B, D)`.
    pub z: f64,
    pub x: Vec<f64>,
    /// `true` iff the lifetime `D` was observed.
    pub event: bool,
}

fn check_aligned(n: usize, w: &WeightVector) -> Result<()> {
    if n == w.len() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{n} observations but {} weights", w.len())))
    }
}

/// Hazard atoms `dπ_event(s) / (1 - F_Z(s-))`.
fn hazard(sample: &[RightCensoredObservation], w: &WeightVector) -> Result<SignedMeasure> {
    check_aligned(sample.len(), w)?;
    let fz = StepFunction::from_jumps(0.0, sample.iter().zip(&w.weights).map(|(o, &wi)| (o.z, wi)));
    let events = SignedMeasure::from_atoms(
        sample
            .iter()
            .zip(&w.weights)
            .filter(|(o, _)| o.event)
            .map(|(o, &wi)| (o.z, wi)),
    );
    // censored observations tied with an event are still at risk
    let at_risk = fz.map_values(|v| 1.0 - v);
    ratio_measure(&events, &at_risk, DenominatorMode::LeftLimit)
}

/// Conditional Nelson–Aalen cumulative hazard.
pub fn nelson_aalen(sample: &[RightCensoredObservation], w: &WeightVector) -> Result<StepFunction> {
    Ok(hazard(sample, w)?.cumulative())
}

/// `F_D(t) = 1 - Π_{[0,t]} (1 - Λ_D(ds))`.
pub fn beran_estimate(sample: &[RightCensoredObservation], w: &WeightVector) -> Result<StepFunction> {
    let survival = product_limit(&hazard(sample, w)?, Direction::Forward)?;
    Ok(survival.map_values(|v| 1.0 - v))
}

/// Largest absolute difference between the Nelson–Aalen hazard of the
/// time-reversed model (`Z = 1/Y`, events = left-censored) evaluated at
/// `1/t`, and the tail mass `M2((t-, ∞))` of the reverse hazard
/// `M2(ds) = H2(ds) / H(s)`.
pub fn reverse_time_crosscheck(sample: &[Observation], w: &WeightVector) -> Result<f64> {
    check_aligned(sample.len(), w)?;
    if let Some(o) = sample.iter().find(|o| !(o.y > 0.0)) {
        return Err(Error::NonpositiveTime(o.y));
    }

    let h = StepFunction::from_jumps(0.0, sample.iter().zip(&w.weights).map(|(o, &wi)| (o.y, wi)));
    let h2 = SignedMeasure::from_atoms(
        sample
            .iter()
            .zip(&w.weights)
            .filter(|(o, _)| o.delta == Delta::LeftCensored)
            .map(|(o, &wi)| (o.y, wi)),
    );
    let m2 = ratio_measure(&h2, &h, DenominatorMode::AtPoint)?;
    let tail = |t: f64| -> f64 { m2.atoms().filter(|&(s, _)| s >= t).map(|(_, m)| m).sum() };

    let reversed: Vec<RightCensoredObservation> = sample
        .iter()
        .map(|o| RightCensoredObservation {
            z: 1.0 / o.y,
            x: o.x.clone(),
            event: o.delta == Delta::LeftCensored,
        })
        .collect();
    let lambda_d = nelson_aalen(&reversed, w)?;

    let mut ys: Vec<f64> = sample.iter().map(|o| o.y).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut probes = ys.clone();
    probes.extend(ys.windows(2).map(|p| 0.5 * (p[0] + p[1])));
    if let (Some(&lo), Some(&hi)) = (ys.first(), ys.last()) {
        probes.push(0.5 * lo);
        probes.push(2.0 * hi);
    }
    Ok(probes
        .into_iter()
        .map(|t| (lambda_d.eval(1.0 / t) - tail(t)).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rc(zs: &[f64], ev: &[bool]) -> Vec<RightCensoredObservation> {
        zs.iter()
            .zip(ev)
            .map(|(&z, &event)| RightCensoredObservation { z, x: vec![0.0], event })
            .collect()
    }

    #[test]
    fn no_censoring_gives_ecdf() {
        let f = beran_estimate(&rc(&[1.0, 2.0, 3.0], &[true; 3]), &WeightVector::uniform(3)).unwrap();
        assert!((f.eval(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((f.eval(3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn classical_kaplan_meier_values() {
        let f = beran_estimate(&rc(&[1.0, 2.0, 3.0], &[true, false, true]), &WeightVector::uniform(3)).unwrap();
        assert!((f.eval(1.5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.eval(2.5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.eval(3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn censored_only_gives_zero() {
        let w = WeightVector {
            weights: vec![1.0],
            covariate_point: vec![0.0],
            bandwidth: 1.0,
        };
        let f = beran_estimate(&rc(&[2.0], &[false]), &w).unwrap();
        assert_eq!(f.sup(), 0.0);
    }

    #[test]
    fn ties_keep_censored_at_risk() {
        // event and censoring both at 1: the full mass is at risk just before 1
        let f = beran_estimate(&rc(&[1.0, 1.0], &[true, false]), &WeightVector::uniform(2)).unwrap();
        assert_eq!(f.eval(1.0), 0.5);
    }

    #[test]
    fn crosscheck_trivial_cases() {
        let sample = vec![
            Observation::scalar(1.0, 0.0, Delta::Uncensored),
            Observation::scalar(2.0, 0.0, Delta::RightCensored),
        ];
        assert_eq!(reverse_time_crosscheck(&sample, &WeightVector::uniform(2)).unwrap(), 0.0);
        let single = vec![Observation::scalar(1.5, 0.0, Delta::LeftCensored)];
        let w = WeightVector { weights: vec![1.0], covariate_point: vec![], bandwidth: 1.0 };
        assert_eq!(reverse_time_crosscheck(&single, &w).unwrap(), 0.0);
    }

    #[test]
    fn crosscheck_rejects_nonpositive_times() {
        let sample = vec![Observation::scalar(0.0, 0.0, Delta::LeftCensored)];
        assert_eq!(
            reverse_time_crosscheck(&sample, &WeightVector::uniform(1)),
            Err(Error::NonpositiveTime(0.0))
        );
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn invariant_under_increasing_time_maps(
            data in prop::collection::vec((1u32..40, any::<bool>(), 0.01..1.0f64), 1..40),
        ) {
            let total: f64 = data.iter().map(|d| d.2).sum();
            let w = WeightVector {
                weights: data.iter().map(|d| d.2 / total).collect(),
                covariate_point: vec![],
                bandwidth: 1.0,
            };
            let build = |map: &dyn Fn(f64) -> f64| -> Vec<RightCensoredObservation> {
                data.iter()
                    .map(|&(k, event, _)| RightCensoredObservation { z: map(0.25 * k as f64), x: vec![], event })
                    .collect()
            };
            let f = beran_estimate(&build(&|z| z), &w).unwrap();
            let g = beran_estimate(&build(&|z: f64| z.exp()), &w).unwrap();
            prop_assert!(f.is_nondecreasing(0.0));
            for k in 0..42 {
                let t = 0.25 * k as f64;
                prop_assert_eq!(f.eval(t), g.eval(t.exp()));
            }
        }
    }
}
