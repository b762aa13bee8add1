//! Right-continuous step functions and the discrete measures they induce.
//!
//! A [`StepFunction`] stores its jump locations together with both the jump
//! masses and the value reached at each jump. Keeping both means a function
//! built from values (a product-limit, a rearrangement) evaluates to exactly
//! those values, and a function built from masses (a weighted empirical
//! distribution) reports exactly those masses. Nothing here is grid-based.

use crate::error::{Error, Result};

/// Masses this close to 0 or 1 are snapped before range checks.
pub const MASS_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    base: f64,
    locs: Vec<f64>,
    vals: Vec<f64>,
    masses: Vec<f64>,
}

impl StepFunction {
    pub fn constant(value: f64) -> Self {
        StepFunction {
            base: value,
            locs: Vec::new(),
            vals: Vec::new(),
            masses: Vec::new(),
        }
    }

    /// Builds `base + Σ mass·1{loc ≤ t}`. Atoms sharing a location are summed.
    pub fn from_jumps<I>(base: f64, jumps: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms: Vec<(f64, f64)> = jumps.into_iter().collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locs: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut masses: Vec<f64> = Vec::with_capacity(atoms.len());
        for (t, m) in atoms {
            match locs.last() {
                Some(&last) if last == t => *masses.last_mut().unwrap() += m,
                _ => {
                    locs.push(t);
                    masses.push(m);
                }
            }
        }
        let mut vals = Vec::with_capacity(masses.len());
        let mut acc = base;
        for &m in &masses {
            acc += m;
            vals.push(acc);
        }
        StepFunction {
            base,
            locs,
            vals,
            masses,
        }
    }

    /// Builds a step function from `(location, value at and right of location)`
    /// pairs. For repeated locations the last value wins.
    pub fn from_levels<I>(base: f64, levels: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut pts: Vec<(f64, f64)> = levels.into_iter().collect();
        // stable: keeps the caller's order among equal locations
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locs: Vec<f64> = Vec::with_capacity(pts.len());
        let mut vals: Vec<f64> = Vec::with_capacity(pts.len());
        for (t, v) in pts {
            match locs.last() {
                Some(&last) if last == t => *vals.last_mut().unwrap() = v,
                _ => {
                    locs.push(t);
                    vals.push(v);
                }
            }
        }
        let masses = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| v - if i == 0 { base } else { vals[i - 1] })
            .collect();
        StepFunction {
            base,
            locs,
            vals,
            masses,
        }
    }

    /// Value left of the first jump.
    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn locations(&self) -> &[f64] {
        &self.locs
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Value at and right of each jump location.
    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn len(&self) -> usize {
        self.locs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.locs.partition_point(|&l| l <= t);
        if k == 0 {
            self.base
        } else {
            self.vals[k - 1]
        }
    }

    /// Left limit `f(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.locs.partition_point(|&l| l < t);
        if k == 0 {
            self.base
        } else {
            self.vals[k - 1]
        }
    }

    /// Value right of the last jump.
    pub fn terminal(&self) -> f64 {
        self.vals.last().copied().unwrap_or(self.base)
    }

    pub fn sup(&self) -> f64 {
        self.vals.iter().copied().fold(self.base, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.vals.iter().copied().fold(self.base, f64::min)
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        let mut prev = self.base;
        for &v in &self.vals {
            if v < prev - tol {
                return false;
            }
            prev = v;
        }
        true
    }

    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        let mut prev = self.base;
        for &v in &self.vals {
            if v > prev + tol {
                return false;
            }
            prev = v;
        }
        true
    }

    /// Applies `op` to every level, keeping the jump locations.
    pub fn map_values(&self, op: impl Fn(f64) -> f64) -> StepFunction {
        StepFunction::from_levels(
            op(self.base),
            self.locs.iter().zip(&self.vals).map(|(&t, &v)| (t, op(v))),
        )
    }

    /// Pointwise `op(self, other)` on the merged jump grid.
    pub fn combine(&self, other: &StepFunction, op: impl Fn(f64, f64) -> f64) -> StepFunction {
        let mut grid: Vec<f64> = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.locs.len() || j < other.locs.len() {
            let next = match (self.locs.get(i), other.locs.get(j)) {
                (Some(&a), Some(&b)) if a < b => {
                    i += 1;
                    a
                }
                (Some(&a), Some(&b)) if b < a => {
                    j += 1;
                    b
                }
                (Some(&a), Some(_)) => {
                    i += 1;
                    j += 1;
                    a
                }
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (None, Some(&b)) => {
                    j += 1;
                    b
                }
                (None, None) => unreachable!(),
            };
            grid.push(next);
        }
        StepFunction::from_levels(
            op(self.base, other.base),
            grid.into_iter()
                .map(|t| (t, op(self.eval(t), other.eval(t)))),
        )
    }

    pub fn increments(&self) -> SignedMeasure {
        SignedMeasure {
            locs: self.locs.clone(),
            masses: self.masses.clone(),
        }
    }
}

/// Finite collection of point masses at strictly increasing locations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedMeasure {
    locs: Vec<f64>,
    masses: Vec<f64>,
}

impl SignedMeasure {
    /// Atoms sharing a location are summed.
    pub fn from_atoms<I>(atoms: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let f = StepFunction::from_jumps(0.0, atoms);
        f.increments()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locs.iter().copied().zip(self.masses.iter().copied())
    }

    pub fn locations(&self) -> &[f64] {
        &self.locs
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.locs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Cumulative distribution `t ↦ m((-∞, t])`.
    pub fn cumulative(&self) -> StepFunction {
        StepFunction::from_jumps(0.0, self.atoms())
    }

    pub fn map_masses(&self, mut op: impl FnMut(f64, f64) -> f64) -> SignedMeasure {
        SignedMeasure {
            locs: self.locs.clone(),
            masses: self.atoms().map(|(t, m)| op(t, m)).collect(),
        }
    }
}

/// Where the denominator of [`ratio_measure`] is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenominatorMode {
    AtPoint,
    LeftLimit,
}

/// Forward gives `Π_{s ≤ t}`, reverse gives `Π_{s > t}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

pub fn increments(f: &StepFunction) -> SignedMeasure {
    f.increments()
}

/// Atomwise quotient `num({t}) / denom(t)` (or `denom(t-)`), with `0/0 = 0`.
pub fn ratio_measure(
    num: &SignedMeasure,
    denom: &StepFunction,
    mode: DenominatorMode,
) -> Result<SignedMeasure> {
    let mut masses = Vec::with_capacity(num.len());
    for (t, m) in num.atoms() {
        let d = match mode {
            DenominatorMode::AtPoint => denom.eval(t),
            DenominatorMode::LeftLimit => denom.eval_left(t),
        };
        let m = if m.abs() <= MASS_GUARD { 0.0 } else { m };
        if m == 0.0 {
            masses.push(0.0);
        } else if d == 0.0 {
            return Err(Error::NonzeroOverZero { location: t, mass: m });
        } else {
            masses.push(m / d);
        }
    }
    Ok(SignedMeasure {
        locs: num.locs.clone(),
        masses,
    })
}

/// Snaps a hazard-type mass into `[0, 1]` within [`MASS_GUARD`].
pub(crate) fn guard_unit_mass(t: f64, m: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&m) {
        Ok(m)
    } else if (-MASS_GUARD..0.0).contains(&m) {
        Ok(0.0)
    } else if m > 1.0 && m <= 1.0 + MASS_GUARD {
        Ok(1.0)
    } else {
        Err(Error::MassOutOfRange { location: t, mass: m })
    }
}

/// Product-integral of `1 - m` over `(-∞, t]` (forward) or `(t, ∞)` (reverse).
pub fn product_limit(m: &SignedMeasure, direction: Direction) -> Result<StepFunction> {
    let factors: Vec<f64> = m
        .atoms()
        .map(|(t, q)| guard_unit_mass(t, q).map(|q| 1.0 - q))
        .collect::<Result<_>>()?;
    match direction {
        Direction::Forward => {
            let mut acc = 1.0;
            let levels: Vec<(f64, f64)> = m
                .locs
                .iter()
                .zip(&factors)
                .map(|(&t, &f)| {
                    acc *= f;
                    (t, acc)
                })
                .collect();
            Ok(StepFunction::from_levels(1.0, levels))
        }
        Direction::Reverse => {
            // value at location i is the product over atoms strictly after i
            let n = factors.len();
            let mut suffix = vec![1.0; n + 1];
            for i in (0..n).rev() {
                suffix[i] = suffix[i + 1] * factors[i];
            }
            Ok(StepFunction::from_levels(
                suffix[0],
                m.locs.iter().enumerate().map(|(i, &t)| (t, suffix[i + 1])),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ecdf(xs: &[f64]) -> StepFunction {
        let n = xs.len() as f64;
        StepFunction::from_jumps(0.0, xs.iter().map(|&x| (x, 1.0 / n)))
    }

    #[test]
    fn eval_is_right_continuous_with_left_limits() {
        let f = ecdf(&[1.0, 2.0, 3.0]);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(1.0), 1.0 / 3.0);
        assert_eq!(f.eval_left(1.0), 0.0);
        assert_eq!(f.eval_left(2.0), 1.0 / 3.0);
        assert_eq!(f.eval(10.0), f.terminal());
    }

    #[test]
    fn tied_atoms_are_merged() {
        let f = StepFunction::from_jumps(0.0, [(2.0, 0.25), (1.0, 0.5), (2.0, 0.25)]);
        assert_eq!(f.locations(), &[1.0, 2.0]);
        assert_eq!(f.masses(), &[0.5, 0.5]);
    }

    #[test]
    fn increments_examples() {
        let f = StepFunction::from_jumps(0.0, [(1.0, 0.5)]);
        assert_eq!(f.increments().atoms().collect::<Vec<_>>(), vec![(1.0, 0.5)]);
        assert!(StepFunction::constant(3.0).increments().is_empty());
        let e = ecdf(&[1.0, 2.0, 3.0]).increments();
        assert_eq!(
            e.atoms().collect::<Vec<_>>(),
            vec![(1.0, 1.0 / 3.0), (2.0, 1.0 / 3.0), (3.0, 1.0 / 3.0)]
        );
    }

    #[test]
    fn ratio_examples() {
        let num = SignedMeasure::from_atoms([(1.0, 0.5)]);
        let den = StepFunction::from_jumps(0.0, [(1.0, 0.5)]);
        let r = ratio_measure(&num, &den, DenominatorMode::AtPoint).unwrap();
        assert_eq!(r.masses(), &[1.0]);

        let num = SignedMeasure::from_atoms([(1.0, 0.0)]);
        let zero = StepFunction::constant(0.0);
        let r = ratio_measure(&num, &zero, DenominatorMode::AtPoint).unwrap();
        assert_eq!(r.masses(), &[0.0]);

        // value_left(2) of the ecdf of {1,2,3} is 1/3
        let num = SignedMeasure::from_atoms([(2.0, 0.25)]);
        let r = ratio_measure(&num, &ecdf(&[1.0, 2.0, 3.0]), DenominatorMode::LeftLimit).unwrap();
        assert!((r.masses()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn ratio_nonzero_over_zero_is_an_error() {
        let num = SignedMeasure::from_atoms([(1.0, 0.3)]);
        let err = ratio_measure(&num, &StepFunction::constant(0.0), DenominatorMode::LeftLimit);
        assert!(matches!(err, Err(Error::NonzeroOverZero { .. })));
    }

    #[test]
    fn product_limit_examples() {
        let m = SignedMeasure::from_atoms([(1.0, 0.5)]);
        let s = product_limit(&m, Direction::Forward).unwrap();
        assert_eq!(s.eval(0.9), 1.0);
        assert_eq!(s.eval(1.0), 0.5);
        assert_eq!(s.eval(7.0), 0.5);

        let p = product_limit(&SignedMeasure::default(), Direction::Reverse).unwrap();
        assert_eq!(p.eval(-1e9), 1.0);
        assert_eq!(p.eval(1e9), 1.0);
    }

    #[test]
    fn unit_atom_kills_forward_product() {
        let m = SignedMeasure::from_atoms([(1.0, 0.2), (2.0, 1.0), (3.0, 0.5)]);
        let s = product_limit(&m, Direction::Forward).unwrap();
        assert_eq!(s.eval(2.0), 0.0);
        assert_eq!(s.eval(5.0), 0.0);
        assert!(s.eval(1.5) > 0.0);
    }

    #[test]
    fn reverse_product_limit_values() {
        let m = SignedMeasure::from_atoms([(1.0, 0.5), (2.0, 0.5)]);
        let p = product_limit(&m, Direction::Reverse).unwrap();
        assert_eq!(p.eval(0.0), 0.25);
        assert_eq!(p.eval(1.0), 0.5);
        assert_eq!(p.eval(2.0), 1.0);
        assert!(p.is_nondecreasing(0.0));
    }

    #[test]
    fn mass_out_of_range_is_rejected_but_guarded_near_bounds() {
        let bad = SignedMeasure::from_atoms([(1.0, 1.5)]);
        assert!(matches!(
            product_limit(&bad, Direction::Forward),
            Err(Error::MassOutOfRange { .. })
        ));
        let near = SignedMeasure::from_atoms([(1.0, 1.0 + 1e-13), (2.0, -1e-13)]);
        let s = product_limit(&near, Direction::Forward).unwrap();
        assert_eq!(s.eval(1.0), 0.0);
    }

    #[test]
    fn combine_adds_pointwise() {
        let f = ecdf(&[1.0, 3.0]);
        let g = ecdf(&[2.0, 3.0]);
        let h = f.combine(&g, |a, b| a + b);
        assert_eq!(h.locations(), &[1.0, 2.0, 3.0]);
        assert_eq!(h.eval(2.5), 1.0);
        assert_eq!(h.eval(3.0), 2.0);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-50.0..50.0f64, 0.0..0.95f64), 0..25)
    }

    proptest! {
        #[test]
        fn forward_product_limit_recovers_hazard(a in atoms()) {
            let m = SignedMeasure::from_atoms(a);
            let s = product_limit(&m, Direction::Forward).unwrap();
            prop_assert!(s.is_nonincreasing(0.0));
            for (t, q) in m.atoms() {
                let recovered = 1.0 - s.eval(t) / s.eval_left(t);
                prop_assert!((recovered - q).abs() < 1e-9);
            }
        }

        #[test]
        fn reverse_product_limit_recovers_hazard(a in atoms()) {
            let m = SignedMeasure::from_atoms(a);
            let f = product_limit(&m, Direction::Reverse).unwrap();
            prop_assert!(f.is_nondecreasing(0.0));
            prop_assert_eq!(f.terminal(), 1.0);
            for (t, q) in m.atoms() {
                let recovered = 1.0 - f.eval_left(t) / f.eval(t);
                prop_assert!((recovered - q).abs() < 1e-9);
            }
        }

        #[test]
        fn increments_rebuild_the_function(levels in prop::collection::vec((-5.0..5.0f64, -2.0..2.0f64), 0..20), base in -1.0..1.0f64) {
            let f = StepFunction::from_levels(base, levels);
            let g = StepFunction::from_jumps(base, f.increments().atoms());
            for &t in f.locations() {
                prop_assert!((f.eval(t) - g.eval(t)).abs() < 1e-12);
                prop_assert!((f.eval_left(t) - g.eval_left(t)).abs() < 1e-12);
            }
        }
    }
}
