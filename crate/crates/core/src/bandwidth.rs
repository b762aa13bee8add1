//! Block cross-validation for the smoothing bandwidth.
//!
//! The sample is cut into contiguous blocks along the sorted covariate. Inside
//! each block the unconditional twice-censored estimator gives a jump size at
//! every uncensored observation; these jumps weight a leave-one-out check loss
//! of the conditional quantile estimate on the full sample.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{local_weights, KernelSpec, WeightFamily, WeightVector};
use crate::simulate::stream_rng;
use crate::twice_censored::{
    estimate, estimate_fl, estimate_ft, quantile, subdist, Delta, Estimator, Observation, TailPolicy,
};

/// `ρ_τ(u) = u (τ - 1{u < 0})`.
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub n_blocks: usize,
    pub tau: f64,
    pub candidate_grid: Vec<f64>,
    pub n_runs: usize,
    pub estimator: Estimator,
    pub weight_family: WeightFamily,
    pub kernel: KernelSpec,
    pub tail_policy: TailPolicy,
    /// Evaluate only this many randomly chosen leave-one-out terms per run.
    pub loo_subsample: Option<usize>,
}

impl CvConfig {
    pub fn new(tau: f64, candidate_grid: Vec<f64>) -> Self {
        CvConfig {
            n_blocks: 25,
            tau,
            candidate_grid,
            n_runs: 1,
            estimator: Estimator::Ip,
            weight_family: WeightFamily::Ll,
            kernel: KernelSpec::default(),
            tail_policy: TailPolicy::Undefined,
            loo_subsample: None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.candidate_grid.is_empty() {
            return Err(Error::Config("empty candidate grid".into()));
        }
        if self.candidate_grid.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
            return Err(Error::Config("candidate bandwidths must be positive".into()));
        }
        if self.candidate_grid.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Config("candidate grid must be strictly increasing".into()));
        }
        if self.n_blocks == 0 || self.n_blocks > n {
            return Err(Error::Config(format!(
                "{} blocks requested for {n} observations",
                self.n_blocks
            )));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("quantile level {} is not in (0, 1)", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Mean of the per-run minimizers.
    pub selected_h: f64,
    /// Loss of every candidate, averaged over runs; `+∞` when no term was usable.
    pub loss_per_candidate: Vec<f64>,
    /// Leave-one-out quantiles that were undefined or failed, over all runs and candidates.
    pub skipped_terms: usize,
    pub per_run_selected: Vec<f64>,
}

/// Index sets of `n_blocks` contiguous blocks along the sorted first covariate.
///
/// Ties in the covariate are broken by a seeded shuffle; block sizes differ by
/// at most one.
pub fn make_blocks<R: Rng + ?Sized>(sample: &[Observation], n_blocks: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| sample[a].x[0].total_cmp(&sample[b].x[0]));
    let (q, r) = (sample.len() / n_blocks, sample.len() % n_blocks);
    let mut blocks = Vec::with_capacity(n_blocks);
    let mut start = 0;
    for k in 0..n_blocks {
        let size = q + usize::from(k < r);
        blocks.push(order[start..start + size].to_vec());
        start += size;
    }
    blocks
}

/// Jump of the within-block estimate of `F_T` at each uncensored member of the
/// block, as `(sample index, jump)`. Tied uncensored times share their jump equally.
pub fn block_jump_weights(sample: &[Observation], block: &[usize]) -> Result<Vec<(usize, f64)>> {
    let members: Vec<Observation> = block.iter().map(|&i| sample[i].clone()).collect();
    let s = subdist(&members, &WeightVector::uniform(members.len()))?;
    let fl = estimate_fl(&s)?;
    let ft = estimate_ft(&s, &fl)?;
    let mut out = Vec::new();
    for (&i, o) in block.iter().zip(&members) {
        if o.delta != Delta::Uncensored {
            continue;
        }
        let ties = members
            .iter()
            .filter(|m| m.delta == Delta::Uncensored && m.y == o.y)
            .count();
        let jump = ft.cdf.eval(o.y) - ft.cdf.eval_left(o.y);
        out.push((i, jump / ties as f64));
    }
    Ok(out)
}

/// Leave-one-out quantile at observation `i`, or `None` if undefined or failed.
fn loo_quantile(work: &mut [Observation], i: usize, h: f64, cfg: &CvConfig) -> Option<f64> {
    let last = work.len() - 1;
    work.swap(i, last);
    let fit = || -> Result<Option<f64>> {
        let (rest, held) = work.split_at(last);
        let held = &held[0];
        let w = local_weights(cfg.weight_family, &held.x, rest, h, &cfg.kernel)?;
        let f = estimate(rest, &w, cfg.estimator, cfg.tail_policy)?;
        Ok(quantile(&f, cfg.tau)?.value)
    };
    let q = fit();
    work.swap(i, last);
    match q {
        Ok(v) => v,
        Err(e) => {
            log::debug!("leave-one-out fit at index {i}, h = {h}: {e}");
            None
        }
    }
}

struct RunOutcome {
    losses: Vec<f64>,
    skipped: usize,
}

fn one_run(sample: &[Observation], cfg: &CvConfig, seed: u64, run: u64) -> Result<RunOutcome> {
    let mut rng = stream_rng(seed, run);
    let blocks = make_blocks(sample, cfg.n_blocks, &mut rng);
    let mut terms = Vec::new();
    for block in &blocks {
        terms.extend(
            block_jump_weights(sample, block)?
                .into_iter()
                .filter(|&(_, w)| w != 0.0),
        );
    }
    if let Some(m) = cfg.loo_subsample {
        if m < terms.len() {
            terms.shuffle(&mut rng);
            terms.truncate(m);
            terms.sort_by_key(|&(i, _)| i);
        }
    }
    let per_candidate: Vec<(f64, usize)> = cfg
        .candidate_grid
        .par_iter()
        .map(|&h| {
            let mut work = sample.to_vec();
            let (mut loss, mut used, mut skipped) = (0.0, 0usize, 0usize);
            for &(i, wjk) in &terms {
                match loo_quantile(&mut work, i, h, cfg) {
                    Some(q) => {
                        loss += wjk * check_loss(sample[i].y - q, cfg.tau);
                        used += 1;
                    }
                    None => skipped += 1,
                }
            }
            if used == 0 {
                (f64::INFINITY, skipped)
            } else {
                (loss, skipped)
            }
        })
        .collect();
    Ok(RunOutcome {
        losses: per_candidate.iter().map(|p| p.0).collect(),
        skipped: per_candidate.iter().map(|p| p.1).sum(),
    })
}

/// Cross-validated bandwidth. Each run draws its own stream from `seed`.
pub fn cv_bandwidth(sample: &[Observation], cfg: &CvConfig, seed: u64) -> Result<CvReport> {
    cfg.validate(sample.len())?;
    if sample.iter().any(|o| o.x.is_empty()) {
        return Err(Error::InvalidInput("observations without covariates".into()));
    }
    let k = cfg.candidate_grid.len();
    let mut total = vec![0.0; k];
    let mut skipped_terms = 0;
    let mut per_run_selected = Vec::with_capacity(cfg.n_runs);
    for run in 0..cfg.n_runs as u64 {
        let out = one_run(sample, cfg, seed, run)?;
        skipped_terms += out.skipped;
        let best = argmin(&out.losses).ok_or(Error::AllCandidatesInvalid)?;
        per_run_selected.push(cfg.candidate_grid[best]);
        for (t, l) in total.iter_mut().zip(&out.losses) {
            *t += l;
        }
    }
    let runs = cfg.n_runs as f64;
    Ok(CvReport {
        selected_h: per_run_selected.iter().sum::<f64>() / runs,
        loss_per_candidate: total.into_iter().map(|t| t / runs).collect(),
        skipped_terms,
        per_run_selected,
    })
}

/// First index of the smallest finite entry.
fn argmin(v: &[f64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, l)| l.is_finite())
        .fold(None, |best: Option<(usize, f64)>, (i, &l)| match best {
            Some((_, b)) if b <= l => best,
            _ => Some((i, l)),
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_loss_examples() {
        assert_eq!(check_loss(1.0, 0.5), 0.5);
        assert_eq!(check_loss(-1.0, 0.5), 0.5);
        assert_eq!(check_loss(-2.0, 0.25), 1.5);
        assert_eq!(check_loss(0.0, 0.3), 0.0);
    }

    fn linear(n: usize) -> Vec<Observation> {
        (0..n)
            .map(|i| {
                let x = i as f64 / (n - 1) as f64;
                Observation::scalar(x, x, Delta::Uncensored)
            })
            .collect()
    }

    #[test]
    fn blocks_are_balanced_and_ordered() {
        let mut sample = linear(53);
        sample.reverse();
        let blocks = make_blocks(&sample, 5, &mut stream_rng(0, 0));
        let sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![11, 11, 11, 10, 10]);
        let flat: Vec<usize> = blocks.concat();
        for p in flat.windows(2) {
            assert!(sample[p[0]].x[0] <= sample[p[1]].x[0]);
        }
    }

    #[test]
    fn uncensored_blocks_give_uniform_jumps() {
        let sample = linear(30);
        for block in make_blocks(&sample, 3, &mut stream_rng(1, 0)) {
            for (_, w) in block_jump_weights(&sample, &block).unwrap() {
                assert!((w - 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_candidate_is_selected() {
        let mut cfg = CvConfig::new(0.5, vec![0.3]);
        cfg.n_blocks = 3;
        let r = cv_bandwidth(&linear(30), &cfg, 7).unwrap();
        assert_eq!(r.selected_h, 0.3);
    }

    #[test]
    fn linear_data_prefers_small_bandwidth() {
        let mut cfg = CvConfig::new(0.5, vec![0.05, 50.0]);
        cfg.n_blocks = 3;
        cfg.weight_family = WeightFamily::Nw;
        let r = cv_bandwidth(&linear(30), &cfg, 7).unwrap();
        assert_eq!(r.selected_h, 0.05);
        assert!(r.loss_per_candidate[0] < r.loss_per_candidate[1]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let s = linear(10);
        assert!(cv_bandwidth(&s, &CvConfig::new(0.5, vec![]), 0).is_err());
        assert!(cv_bandwidth(&s, &CvConfig::new(0.5, vec![0.2, 0.1]), 0).is_err());
        let cfg = CvConfig::new(0.5, vec![0.1]);
        assert!(matches!(cv_bandwidth(&s, &cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn all_invalid_candidates() {
        // bandwidth far too small: every leave-one-out neighbourhood is empty
        let mut cfg = CvConfig::new(0.5, vec![1e-6]);
        cfg.n_blocks = 2;
        cfg.weight_family = WeightFamily::Nw;
        assert_eq!(cv_bandwidth(&linear(10), &cfg, 0), Err(Error::AllCandidatesInvalid));
    }

    #[test]
    fn runs_average_their_minimizers() {
        let mut cfg = CvConfig::new(0.5, vec![0.05, 50.0]);
        cfg.n_blocks = 3;
        cfg.n_runs = 3;
        cfg.weight_family = WeightFamily::Nw;
        let r = cv_bandwidth(&linear(30), &cfg, 11).unwrap();
        assert_eq!(r.per_run_selected.len(), 3);
        let mean = r.per_run_selected.iter().sum::<f64>() / 3.0;
        assert_eq!(r.selected_h, mean);
    }
}
