//! Monotone rearrangement of step functions over a compact interval.
//!
//! All operators work on the exact piece decomposition of a step function on
//! `J = [j1, j2]`: a list of half-open intervals with constant level. The
//! inversion operator sums interval lengths, the rearrangement operator sorts
//! the pieces by level and lays them back out from `j1`.

use crate::error::{Error, Result};
use crate::stepfun::{StepFunction, MASS_GUARD};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RearrangeDomain {
    j1: f64,
    j2: f64,
}

impl RearrangeDomain {
    pub fn new(j1: f64, j2: f64) -> Result<Self> {
        if j1.is_finite() && j2.is_finite() && j1 < j2 {
            Ok(RearrangeDomain { j1, j2 })
        } else {
            Err(Error::DegenerateDomain(j1, j2))
        }
    }

    /// `[y, y]`. Only built internally, for samples whose times all coincide;
    /// every operator then returns `y` or the value of `f` at `y`.
    pub(crate) fn point(y: f64) -> Self {
        RearrangeDomain { j1: y, j2: y }
    }

    /// `[min ys, max ys]`.
    pub fn spanning(ys: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (lo, hi) = ys
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
        Self::new(lo, hi)
    }

    pub fn j1(&self) -> f64 {
        self.j1
    }

    pub fn j2(&self) -> f64 {
        self.j2
    }

    pub fn length(&self) -> f64 {
        self.j2 - self.j1
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    end: f64,
    level: f64,
}

impl Piece {
    fn len(&self) -> f64 {
        self.end - self.start
    }
}

fn pieces(f: &StepFunction, dom: &RearrangeDomain) -> Vec<Piece> {
    let (j1, j2) = (dom.j1, dom.j2);
    let mut out = Vec::new();
    let mut start = j1;
    let mut level = f.eval(j1);
    for (&t, &v) in f.locations().iter().zip(f.values()) {
        if t <= j1 {
            continue;
        }
        if t >= j2 {
            break;
        }
        out.push(Piece { start, end: t, level });
        start = t;
        level = v;
    }
    out.push(Piece { start, end: j2, level });
    out
}

/// `j1 + λ({u ∈ J : f(u) ≤ y})`.
pub fn psi_tilde(f: &StepFunction, dom: &RearrangeDomain, y: f64) -> f64 {
    let ps = pieces(f, dom);
    let mut total = 0.0;
    let mut first_excluded: Option<usize> = None;
    let mut gap = false;
    for (i, p) in ps.iter().enumerate() {
        if p.level <= y {
            total += p.len();
            if first_excluded.is_some() {
                gap = true;
            }
        } else if first_excluded.is_none() {
            first_excluded = Some(i);
        }
    }
    if !gap {
        // sublevel set is a leading run of pieces: its right end is an exact breakpoint
        return match first_excluded {
            Some(i) => ps[i].start,
            None => dom.j2,
        };
    }
    (dom.j1 + total).clamp(dom.j1, dom.j2)
}

/// Increasing rearrangement of `f` on `J`, extended by `f(j1-)` below and by
/// the larger of `f(j2)` and the top level from `j2` on, so the result stays
/// nondecreasing on `J`.
pub fn phi_tilde(f: &StepFunction, dom: &RearrangeDomain) -> StepFunction {
    let ps = pieces(f, dom);
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.sort_by(|&a, &b| ps[a].level.total_cmp(&ps[b].level));

    let breaks: Vec<f64> = ps.iter().skip(1).map(|p| p.start).collect();
    let tol = 1e-12 * dom.length().max(dom.j1.abs()).max(dom.j2.abs());
    let snap = |pos: f64| -> f64 {
        let k = breaks.partition_point(|&b| b < pos);
        let mut best = pos;
        let mut best_d = tol;
        for cand in [k.checked_sub(1), Some(k)].into_iter().flatten() {
            if let Some(&b) = breaks.get(cand) {
                let d = (b - pos).abs();
                if d <= best_d {
                    best = b;
                    best_d = d;
                }
            }
        }
        best
    };

    let mut levels: Vec<(f64, f64)> = Vec::with_capacity(ps.len() + 1);
    levels.push((dom.j1, ps[order[0]].level));
    let mut cum = 0.0;
    let mut max_idx = 0usize;
    let mut prev_pos = dom.j1;
    for r in 0..ps.len() - 1 {
        cum += ps[order[r]].len();
        max_idx = max_idx.max(order[r]);
        let pos = if max_idx == r {
            // first r+1 sorted pieces are the first r+1 original ones
            ps[r + 1].start
        } else {
            snap(dom.j1 + cum)
        };
        let pos = pos.max(prev_pos).min(dom.j2);
        prev_pos = pos;
        levels.push((pos, ps[order[r + 1]].level));
    }
    let top = ps[order[ps.len() - 1]].level;
    levels.push((dom.j2, f.eval(dom.j2).max(top)));

    let base = f.eval_left(dom.j1);
    // drop zero-height steps
    let mut compact: Vec<(f64, f64)> = Vec::with_capacity(levels.len());
    let mut last_level = base;
    let mut merged = StepFunction::from_levels(base, levels);
    for (&t, &v) in merged.locations().iter().zip(merged.values()) {
        if v != last_level {
            compact.push((t, v));
            last_level = v;
        }
    }
    if compact.len() != merged.len() {
        merged = StepFunction::from_levels(base, compact);
    }
    merged
}

/// Pointwise truncation of the values to `[0, 1]`.
pub fn clamp01(f: &StepFunction) -> StepFunction {
    f.map_values(|v| v.clamp(0.0, 1.0))
}

/// Jump sizes of `phi_tilde(clamp01(h), J)` read off at the sorted points
/// `ys`: `W_i = H(y_i) - H(y_{i-1})`, with `H(y_0) := H(j1-)`.
///
/// Rearrangement can move a jump between two consecutive points; its mass is
/// then attributed to the next point, which keeps `Σ W_i = H(j2) - H(j1-)`.
pub fn rearranged_weights(h: &StepFunction, dom: &RearrangeDomain, ys: &[f64]) -> Result<Vec<f64>> {
    if ys.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("observation times must be strictly increasing".into()));
    }
    let clamped = clamp01(h);
    if clamped.is_nondecreasing(0.0) {
        // already monotone: the rearrangement reproduces it, keep the exact masses
        let mut out = Vec::with_capacity(ys.len());
        for &y in ys {
            let untouched = clamped.eval(y) == h.eval(y) && clamped.eval_left(y) == h.eval_left(y);
            let w = if untouched {
                let locs = h.locations();
                let k = locs.partition_point(|&l| l < y);
                if k < locs.len() && locs[k] == y {
                    h.masses()[k]
                } else {
                    0.0
                }
            } else {
                clamped.eval(y) - clamped.eval_left(y)
            };
            out.push(w);
        }
        return Ok(out);
    }
    let g = phi_tilde(&clamped, dom);
    let mut prev = g.base();
    let mut out = Vec::with_capacity(ys.len());
    for &y in ys {
        let cur = g.eval(y);
        let w = cur - prev;
        out.push(if (-MASS_GUARD..0.0).contains(&w) { 0.0 } else { w });
        prev = cur;
    }
    Ok(out)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn step() -> impl Strategy<Value = StepFunction> {
        (-1.0..2.0f64, prop::collection::vec((-1.0..11.0f64, -1.0..2.0f64), 0..15))
            .prop_map(|(base, lv)| StepFunction::from_levels(base, lv))
    }

    fn norm_pow(f: &StepFunction, dom: &RearrangeDomain, p: i32) -> f64 {
        pieces(f, dom).iter().map(|q| q.level.abs().powi(p) * q.len()).sum()
    }

    proptest! {
        #[test]
        fn phi_is_monotone_idempotent_and_norm_preserving(f in step()) {
            let dom = RearrangeDomain::new(0.0, 10.0).unwrap();
            let g = phi_tilde(&f, &dom);
            let mut pts: Vec<f64> = g.locations().iter().copied().filter(|t| (0.0..10.0).contains(t)).collect();
            pts.insert(0, 0.0);
            pts.push(10.0);
            prop_assert!(pts.windows(2).all(|p| g.eval(p[0]) <= g.eval(p[1])));
            let gg = phi_tilde(&g, &dom);
            for t in [0.0, 0.5, 2.5, 5.0, 7.5, 9.99] {
                prop_assert_eq!(gg.eval(t), g.eval(t));
            }
            for p in [1, 2] {
                prop_assert!((norm_pow(&f, &dom, p) - norm_pow(&g, &dom, p)).abs() < 1e-10);
            }
        }

        #[test]
        fn psi_is_monotone_in_level(f in step(), a in -1.5..2.5f64, b in -1.5..2.5f64) {
            let dom = RearrangeDomain::new(0.0, 10.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (qa, qb) = (psi_tilde(&f, &dom, lo), psi_tilde(&f, &dom, hi));
            prop_assert!(qa <= qb);
            prop_assert!((0.0..=10.0).contains(&qa) && (0.0..=10.0).contains(&qb));
        }

        #[test]
        fn rearranged_weights_are_nonnegative_and_sum_to_range(
            jumps in prop::collection::vec((0usize..30, -0.3..0.6f64), 1..30),
        ) {
            let h = StepFunction::from_jumps(0.0, jumps.iter().map(|&(k, m)| (k as f64, m)));
            let ys: Vec<f64> = (0..30).map(|k| k as f64).collect();
            let dom = RearrangeDomain::new(0.0, 29.0).unwrap();
            let w = rearranged_weights(&h, &dom, &ys).unwrap();
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            let g = phi_tilde(&clamp01(&h), &dom);
            let total: f64 = w.iter().sum();
            prop_assert!((total - (g.eval(29.0) - g.base())).abs() < 1e-10);
        }
    }
}
