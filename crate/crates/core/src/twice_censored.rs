//! Conditional distribution and quantile estimation for twice-censored data.
//!
//! Each lifetime `T` may be censored from the left by `L` or from the right by
//! `R`; only `Y = max(min(T, R), L)` and the indicator `δ` are seen. Given local
//! weights, the pipeline is
//!
//! 1. weighted subdistributions `H, H0, H1, H2` of `(Y, δ)`;
//! 2. the reverse hazard `dH2 / H` and its backward product-limit, which
//!    reconstructs `F_L`;
//! 3. the hazard `dH0 / (F_L(s-) - H(s-))` and its forward product-limit,
//!    which reconstructs `F_T`;
//! 4. a quantile, either by simultaneous inversion of the plug-in `F_T`
//!    ([`quantile_psi`]) or by plain inversion of the estimate obtained from
//!    rearranged weights ([`quantile_ip`]).
//!
//! Observations sharing a time are merged per `(y, δ)` and ordered at that
//! time as `δ = 2`, then `0`, then `1`. The product-limits are computed on the
//! resulting rank axis and mapped back to real time.

use crate::error::{Error, Result};
use crate::kernel::WeightVector;
use crate::rearrange::{psi_tilde, rearranged_weights, RearrangeDomain};
use crate::stepfun::{
    product_limit, ratio_measure, DenominatorMode, Direction, SignedMeasure, StepFunction,
};

/// Slack allowed on rearranged hazard atoms before they count as a violation.
pub const HAZARD_ATOM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Delta {
    /// `L < T ≤ R`: the lifetime itself is observed.
    Uncensored,
    /// `L < R < T`: censored from the right.
    RightCensored,
    /// `T ≤ L < R` or `R ≤ L`: censored from the left.
    LeftCensored,
}

impl Delta {
    pub fn code(self) -> u8 {
        match self {
            Delta::Uncensored => 0,
            Delta::RightCensored => 1,
            Delta::LeftCensored => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Delta::Uncensored),
            1 => Some(Delta::RightCensored),
            2 => Some(Delta::LeftCensored),
            _ => None,
        }
    }

    /// Processing order among atoms at one time: 2, 0, 1.
    fn tie_rank(self) -> u8 {
        match self {
            Delta::LeftCensored => 0,
            Delta::Uncensored => 1,
            Delta::RightCensored => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: f64,
    pub x: Vec<f64>,
    pub delta: Delta,
}

impl Observation {
    pub fn new(y: f64, x: Vec<f64>, delta: Delta) -> Self {
        Observation { y, x, delta }
    }

    pub fn scalar(y: f64, x: f64, delta: Delta) -> Self {
        Observation { y, x: vec![x], delta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    y: f64,
    delta: Delta,
    weight: f64,
}

/// Weighted subdistributions of `(Y, δ)`, stored as merged `(y, δ)` atoms in
/// processing order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdistSet {
    keys: Vec<Key>,
}

pub fn subdist(sample: &[Observation], w: &WeightVector) -> Result<SubdistSet> {
    if sample.len() != w.len() {
        return Err(Error::InvalidInput(format!(
            "{} observations but {} weights",
            sample.len(),
            w.len()
        )));
    }
    SubdistSet::from_atoms(sample.iter().zip(&w.weights).map(|(o, &wi)| (o.y, o.delta, wi)))
}

impl SubdistSet {
    pub fn from_atoms<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Delta, f64)>,
    {
        let mut raw: Vec<Key> = Vec::new();
        for (y, delta, weight) in atoms {
            if !y.is_finite() || !weight.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite observation time {y} or weight {weight}"
                )));
            }
            raw.push(Key { y, delta, weight });
        }
        raw.sort_by(|a, b| {
            a.y.total_cmp(&b.y)
                .then(a.delta.tie_rank().cmp(&b.delta.tie_rank()))
        });
        let mut keys: Vec<Key> = Vec::with_capacity(raw.len());
        for k in raw {
            match keys.last_mut() {
                Some(last) if last.y == k.y && last.delta == k.delta => last.weight += k.weight,
                _ => keys.push(k),
            }
        }
        Ok(SubdistSet { keys })
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Number of merged `(y, δ)` atoms.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    fn real(&self, pick: impl Fn(Delta) -> bool) -> StepFunction {
        StepFunction::from_jumps(
            0.0,
            self.keys
                .iter()
                .filter(|k| pick(k.delta))
                .map(|k| (k.y, k.weight)),
        )
    }

    /// `H(t) = Σ W_i 1{Y_i ≤ t}`.
    pub fn h(&self) -> StepFunction {
        self.real(|_| true)
    }

    /// `H_k(t) = Σ W_i 1{Y_i ≤ t, δ_i = k}`.
    pub fn h_k(&self, delta: Delta) -> StepFunction {
        self.real(|d| d == delta)
    }

    pub fn h0(&self) -> StepFunction {
        self.h_k(Delta::Uncensored)
    }

    pub fn h1(&self) -> StepFunction {
        self.h_k(Delta::RightCensored)
    }

    pub fn h2(&self) -> StepFunction {
        self.h_k(Delta::LeftCensored)
    }

    pub fn has_negative_weights(&self) -> bool {
        self.keys.iter().any(|k| k.weight < 0.0)
    }

    /// Distinct observation times, increasing.
    pub fn times(&self) -> Vec<f64> {
        let mut ys: Vec<f64> = self.keys.iter().map(|k| k.y).collect();
        ys.dedup();
        ys
    }

    /// `[min Y, max Y]` over all atoms, weighted or not; a single point when
    /// all times coincide.
    pub fn domain(&self) -> Result<RearrangeDomain> {
        match (self.keys.first(), self.keys.last()) {
            (Some(a), Some(b)) if a.y == b.y => Ok(RearrangeDomain::point(a.y)),
            _ => RearrangeDomain::spanning(self.keys.iter().map(|k| k.y)),
        }
    }

    fn last_weighted_time(&self) -> Option<f64> {
        self.keys.iter().rev().find(|k| k.weight != 0.0).map(|k| k.y)
    }

    /// Step function on the rank axis (atom `k` sits at `k as f64`).
    fn ranked(&self, pick: impl Fn(Delta) -> bool) -> StepFunction {
        StepFunction::from_jumps(
            0.0,
            self.keys
                .iter()
                .enumerate()
                .filter(|(_, k)| pick(k.delta))
                .map(|(i, k)| (i as f64, k.weight)),
        )
    }

    /// Maps a rank-axis step function back to real time.
    fn to_real_axis(&self, f: &StepFunction) -> StepFunction {
        StepFunction::from_levels(
            f.base(),
            f.locations()
                .iter()
                .zip(f.values())
                .map(|(&r, &v)| (self.keys[r as usize].y, v)),
        )
    }

    fn with_weights(&self, weights: &[f64]) -> SubdistSet {
        SubdistSet {
            keys: self
                .keys
                .iter()
                .zip(weights)
                .map(|(k, &weight)| Key { weight, ..*k })
                .collect(),
        }
    }
}

/// Backward product-limit of the reverse hazard `dH2 / H`.
pub fn estimate_fl(s: &SubdistSet) -> Result<StepFunction> {
    let reverse_hazard = ratio_measure(
        &s.ranked(|d| d == Delta::LeftCensored).increments(),
        &s.ranked(|_| true),
        DenominatorMode::AtPoint,
    )?;
    let fl = product_limit(&reverse_hazard, Direction::Reverse)?;
    Ok(s.to_real_axis(&fl))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Plug-in `F_T` inverted by simultaneous isotonization and inversion.
    Psi,
    /// `F_T` from rearranged weights, inverted directly.
    Ip,
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psi" | "plugin" => Ok(Estimator::Psi),
            "ip" => Ok(Estimator::Ip),
            other => Err(Error::Config(format!("unknown estimator `{other}` (expected ip|psi)"))),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Psi => "psi",
            Estimator::Ip => "ip",
        })
    }
}

/// What happens above the last observation with nonzero weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailPolicy {
    /// Quantiles above `sup F` are undefined.
    #[default]
    Undefined,
    /// The cdf jumps to 1 at the last weighted observation.
    ForceOne,
}

impl std::str::FromStr for TailPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "undefined" => Ok(TailPolicy::Undefined),
            "force-one" | "force_one" | "forceone" => Ok(TailPolicy::ForceOne),
            other => Err(Error::Config(format!(
                "unknown tail policy `{other}` (expected undefined|force-one)"
            ))),
        }
    }
}

impl std::fmt::Display for TailPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TailPolicy::Undefined => "undefined",
            TailPolicy::ForceOne => "force-one",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionEstimate {
    pub cdf: StepFunction,
    pub domain_j: RearrangeDomain,
    /// Largest value attained by `cdf`.
    pub sup_value: f64,
    pub variant: Estimator,
    pub tail_policy: TailPolicy,
    /// Largest observation time carrying nonzero weight.
    pub last_weighted_y: Option<f64>,
}

impl DistributionEstimate {
    pub fn with_tail_policy(mut self, policy: TailPolicy) -> Self {
        if policy == TailPolicy::ForceOne && self.tail_policy != TailPolicy::ForceOne {
            if let Some(y_last) = self.last_weighted_y {
                let mut levels: Vec<(f64, f64)> = self
                    .cdf
                    .locations()
                    .iter()
                    .zip(self.cdf.values())
                    .filter(|(&t, _)| t < y_last)
                    .map(|(&t, &v)| (t, v))
                    .collect();
                levels.push((y_last, 1.0));
                self.cdf = StepFunction::from_levels(self.cdf.base(), levels);
                self.sup_value = self.cdf.sup();
            }
        }
        self.tail_policy = policy;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileResult {
    /// `None` when the level is above the attainable cdf range.
    pub value: Option<f64>,
    pub tau: f64,
}

impl QuantileResult {
    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HazardCheck {
    Plugin { negative_weights: bool },
    Rearranged,
}

fn hazard_atoms(s: &SubdistSet, fl: &StepFunction, check: HazardCheck) -> Result<SignedMeasure> {
    // On the rank axis F_L(k) equals the real-axis F_L at y_k, because left-censored
    // atoms come first at every time.
    let fl_ranked = StepFunction::from_levels(
        fl.base(),
        s.keys
            .iter()
            .enumerate()
            .map(|(i, k)| (i as f64, fl.eval(k.y))),
    );
    let at_risk = fl_ranked.combine(&s.ranked(|_| true), |a, b| a - b);
    let hazard = ratio_measure(
        &s.ranked(|d| d == Delta::Uncensored).increments(),
        &at_risk,
        DenominatorMode::LeftLimit,
    )?;
    let lo = -HAZARD_ATOM_TOLERANCE;
    let hi = 1.0 + HAZARD_ATOM_TOLERANCE;
    let mut failure: Option<Error> = None;
    let checked = hazard.map_masses(|r, m| {
        if failure.is_none() && !(lo..=hi).contains(&m) {
            let location = s.keys[r as usize].y;
            failure = Some(match check {
                HazardCheck::Rearranged => Error::LemmaViolation { location, mass: m },
                HazardCheck::Plugin { .. } => Error::MassOutOfRange { location, mass: m },
            });
        }
        match check {
            HazardCheck::Plugin { negative_weights: false } => m,
            _ => m.clamp(0.0, 1.0),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(checked),
    }
}

fn distribution_from(
    s: &SubdistSet,
    fl: &StepFunction,
    check: HazardCheck,
    variant: Estimator,
) -> Result<DistributionEstimate> {
    let hazard = hazard_atoms(s, fl, check)?;
    let survival = product_limit(&hazard, Direction::Forward)?;
    let cdf = s.to_real_axis(&survival.map_values(|v| 1.0 - v));
    Ok(DistributionEstimate {
        sup_value: cdf.sup(),
        cdf,
        domain_j: s.domain()?,
        variant,
        tail_policy: TailPolicy::Undefined,
        last_weighted_y: s.last_weighted_time(),
    })
}

/// Plug-in `F_T = 1 - Π_{[0,t]} (1 - dH0 / (F_L(s-) - H(s-)))`.
pub fn estimate_ft(s: &SubdistSet, fl: &StepFunction) -> Result<DistributionEstimate> {
    let check = HazardCheck::Plugin {
        negative_weights: s.has_negative_weights(),
    };
    distribution_from(s, fl, check, Estimator::Psi)
}

/// `F_T` built from the rearranged, nonnegative weights.
///
/// Every hazard atom is checked to lie in `[0, 1]` up to [`HAZARD_ATOM_TOLERANCE`].
pub fn estimate_ft_ip(
    sample: &[Observation],
    w: &WeightVector,
    dom: &RearrangeDomain,
) -> Result<DistributionEstimate> {
    let s = subdist(sample, w)?;
    let ip = rearranged_subdist(&s, dom)?;
    let fl = estimate_fl(&ip)?;
    let mut est = distribution_from(&ip, &fl, HazardCheck::Rearranged, Estimator::Ip)?;
    est.domain_j = *dom;
    est.last_weighted_y = s.last_weighted_time();
    Ok(est)
}

/// Replaces the atom weights by the rearranged weights of `H`.
///
/// When several censoring types share a time, the rearranged mass at that
/// time is split in proportion to the positive parts of their original
/// weights (equally if none is positive).
pub fn rearranged_subdist(s: &SubdistSet, dom: &RearrangeDomain) -> Result<SubdistSet> {
    let ys = s.times();
    let w_ip = rearranged_weights(&s.h(), dom, &ys)?;
    let mut weights = Vec::with_capacity(s.keys.len());
    let mut start = 0;
    for (&y, &mass) in ys.iter().zip(&w_ip) {
        let mut end = start;
        while end < s.keys.len() && s.keys[end].y == y {
            end += 1;
        }
        let group = &s.keys[start..end];
        if group.len() == 1 {
            weights.push(mass);
        } else {
            let pos: f64 = group.iter().map(|k| k.weight.max(0.0)).sum();
            for k in group {
                let share = if pos > 0.0 {
                    k.weight.max(0.0) / pos
                } else {
                    1.0 / group.len() as f64
                };
                weights.push(mass * share);
            }
        }
        start = end;
    }
    Ok(s.with_weights(&weights))
}

/// Rearranged hazard atoms `(time, mass)` before clamping; exposed for diagnostics.
pub fn rearranged_hazard(s: &SubdistSet, dom: &RearrangeDomain) -> Result<Vec<(f64, f64)>> {
    let ip = rearranged_subdist(s, dom)?;
    let fl = estimate_fl(&ip)?;
    let fl_ranked = StepFunction::from_levels(
        fl.base(),
        ip.keys.iter().enumerate().map(|(i, k)| (i as f64, fl.eval(k.y))),
    );
    let at_risk = fl_ranked.combine(&ip.ranked(|_| true), |a, b| a - b);
    let hazard = ratio_measure(
        &ip.ranked(|d| d == Delta::Uncensored).increments(),
        &at_risk,
        DenominatorMode::LeftLimit,
    )?;
    Ok(hazard
        .atoms()
        .map(|(r, m)| (ip.keys[r as usize].y, m))
        .collect())
}

fn check_level(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("quantile level {tau} is not in (0, 1)")))
    }
}

fn undefined_at(f: &DistributionEstimate, tau: f64) -> bool {
    f.tail_policy == TailPolicy::Undefined && f.sup_value < tau
}

/// `j1 + λ({u ∈ J : F(u) ≤ τ})`.
pub fn quantile_psi(f: &DistributionEstimate, tau: f64) -> Result<QuantileResult> {
    check_level(tau)?;
    if undefined_at(f, tau) {
        return Ok(QuantileResult { value: None, tau });
    }
    Ok(QuantileResult {
        value: Some(psi_tilde(&f.cdf, &f.domain_j, tau)),
        tau,
    })
}

/// `sup{s ∈ J : F(s) ≤ τ}`, or `j1` when the set is empty.
pub fn quantile_ip(f: &DistributionEstimate, tau: f64) -> Result<QuantileResult> {
    check_level(tau)?;
    if undefined_at(f, tau) {
        return Ok(QuantileResult { value: None, tau });
    }
    let (j1, j2) = (f.domain_j.j1(), f.domain_j.j2());
    // constancy intervals [starts[i], starts[i+1]) of F inside J
    let mut starts = vec![j1];
    let mut levels = vec![f.cdf.eval(j1)];
    for (&t, &v) in f.cdf.locations().iter().zip(f.cdf.values()) {
        if t > j1 && t < j2 {
            starts.push(t);
            levels.push(v);
        }
    }
    starts.push(j2);
    let value = (0..levels.len())
        .rev()
        .find(|&i| levels[i] <= tau)
        .map_or(j1, |i| starts[i + 1]);
    Ok(QuantileResult { value: Some(value), tau })
}

/// Dispatches to [`quantile_psi`] or [`quantile_ip`] by the estimate's variant.
pub fn quantile(f: &DistributionEstimate, tau: f64) -> Result<QuantileResult> {
    match f.variant {
        Estimator::Psi => quantile_psi(f, tau),
        Estimator::Ip => quantile_ip(f, tau),
    }
}

/// Conditional cdf estimate from a sample and its local weights.
pub fn estimate(
    sample: &[Observation],
    w: &WeightVector,
    variant: Estimator,
    tail: TailPolicy,
) -> Result<DistributionEstimate> {
    let s = subdist(sample, w)?;
    let dom = s.domain()?;
    let est = match variant {
        Estimator::Psi => {
            let fl = estimate_fl(&s)?;
            estimate_ft(&s, &fl)?
        }
        Estimator::Ip => estimate_ft_ip(sample, w, &dom)?,
    };
    Ok(est.with_tail_policy(tail))
}
