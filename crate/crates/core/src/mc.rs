//! Monte Carlo driver: repeated simulation, estimation on a covariate grid and
//! aggregation into mean, bias, MSE and undefined counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::bandwidth::{cv_bandwidth, CvConfig};
use crate::error::{Error, Result};
use crate::kernel::{local_weights, KernelSpec, WeightFamily};
use crate::simulate::{generate, stream_rng, true_quantile, GenOptions, Model, Model2Params};
use crate::twice_censored::{estimate, quantile, Estimator, Observation, TailPolicy};

/// Streams at and above this offset are reserved for bandwidth pilot samples.
const PILOT_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthChoice {
    Fixed(f64),
    /// Cross-validate on `pilots` independent samples and use the mean choice
    /// for every replication.
    Cv { cfg: CvConfig, pilots: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub model: Model,
    pub n: usize,
    pub n_reps: usize,
    pub taus: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub bandwidth: BandwidthChoice,
    pub weight_family: WeightFamily,
    pub estimator: Estimator,
    pub kernel: KernelSpec,
    pub seed: u64,
    pub tail_policy: TailPolicy,
    pub gen: GenOptions,
}

pub fn default_cv_grid() -> Vec<f64> {
    vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0]
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("grid `{spec}` is not start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (v[0], v[1], v[2]);
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // rounding keeps values such as -1.9 free of representation noise in the output
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

pub fn parse_list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("`{s}` in `{spec}` is not a number")))
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

impl McConfig {
    pub fn new(model: Model, n: usize, n_reps: usize) -> Self {
        McConfig {
            model,
            n,
            n_reps,
            taus: vec![0.25, 0.5, 0.75],
            x_grid: parse_grid("-2:2:0.1").expect("static grid"),
            bandwidth: BandwidthChoice::Fixed(0.3),
            weight_family: WeightFamily::Ll,
            estimator: Estimator::Ip,
            kernel: KernelSpec::default(),
            seed: 0,
            tail_policy: TailPolicy::Undefined,
            gen: GenOptions::default(),
        }
    }

    /// Builds a config from `key = value` pairs named like the CLI flags.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let params = Model2Params {
            c_l: get("cl").map(|v| parse_value("cl", v)).transpose()?.unwrap_or(-0.5),
            c_r: get("cr").map(|v| parse_value("cr", v)).transpose()?.unwrap_or(1.5),
        };
        let model_id: u8 = get("model").map(|v| parse_value("model", v)).transpose()?.unwrap_or(1);
        let model = Model::from_id(model_id, params)?;
        let n = get("n").map(|v| parse_value("n", v)).transpose()?.unwrap_or(100);
        let reps = get("reps").map(|v| parse_value("reps", v)).transpose()?.unwrap_or(100);
        let mut cfg = McConfig::new(model, n, reps);
        for (key, value) in map {
            match key.as_str() {
                "model" | "n" | "reps" | "cl" | "cr" => {}
                "taus" => cfg.taus = parse_list(value)?,
                "xgrid" => cfg.x_grid = parse_grid(value)?,
                "weights" => cfg.weight_family = value.parse()?,
                "estimator" => cfg.estimator = value.parse()?,
                "tail" => cfg.tail_policy = value.parse()?,
                "seed" => cfg.seed = parse_value(key, value)?,
                "bandwidth" => {
                    cfg.bandwidth = if value.trim() == "cv" {
                        BandwidthChoice::Cv { cfg: CvConfig::new(0.5, default_cv_grid()), pilots: 5 }
                    } else {
                        BandwidthChoice::Fixed(parse_value(key, value)?)
                    }
                }
                "cv_grid" | "cv_tau" | "cv_pilots" | "cv_blocks" | "cv_runs" => {}
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        if let BandwidthChoice::Cv { cfg: cv, pilots } = &mut cfg.bandwidth {
            if let Some(v) = get("cv_grid") {
                cv.candidate_grid = parse_list(v)?;
            }
            if let Some(v) = get("cv_tau") {
                cv.tau = parse_value("cv_tau", v)?;
            }
            if let Some(v) = get("cv_blocks") {
                cv.n_blocks = parse_value("cv_blocks", v)?;
            }
            if let Some(v) = get("cv_runs") {
                cv.n_runs = parse_value("cv_runs", v)?;
            }
            if let Some(v) = get("cv_pilots") {
                *pilots = parse_value("cv_pilots", v)?;
            }
        }
        cfg.sync_cv();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes the CV settings use the study's estimator, weights and kernel.
    pub fn sync_cv(&mut self) {
        if let BandwidthChoice::Cv { cfg, .. } = &mut self.bandwidth {
            cfg.estimator = self.estimator;
            cfg.weight_family = self.weight_family;
            cfg.kernel = self.kernel;
            cfg.tail_policy = self.tail_policy;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_reps == 0 {
            return Err(Error::Config("n and reps must be at least 1".into()));
        }
        if self.taus.is_empty() || self.taus.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Config("taus must be nonempty and inside (0, 1)".into()));
        }
        if self.taus.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Config("taus must be strictly increasing".into()));
        }
        if self.x_grid.is_empty() || self.x_grid.iter().any(|x| !(-2.0..=2.0).contains(x)) {
            return Err(Error::Config("x grid must be nonempty and inside [-2, 2]".into()));
        }
        match &self.bandwidth {
            BandwidthChoice::Fixed(h) if !(h.is_finite() && *h > 0.0) => {
                Err(Error::Config(format!("bandwidth must be positive, got {h}")))
            }
            BandwidthChoice::Cv { pilots: 0, .. } => Err(Error::Config("cv_pilots must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn sample(&self, stream: u64) -> Vec<Observation> {
        generate(self.model, self.n, &mut stream_rng(self.seed, stream), self.gen).observations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McCell {
    pub x: f64,
    pub tau: f64,
    pub truth: f64,
    /// `NaN` when no replication was defined.
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
    pub variance: f64,
    pub defined: usize,
    pub undefined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMeta {
    pub rep: usize,
    /// Random stream of the master seed used for this replication.
    pub stream: u64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub bandwidth: f64,
    /// Grid-major: cell `(i, j)` is at `i * taus.len() + j`.
    pub cells: Vec<McCell>,
    /// `estimates[rep][x][tau]`.
    pub estimates: Vec<Vec<Vec<Option<f64>>>>,
    pub runs: Vec<RunMeta>,
    /// `(rep, x)` fits that failed outright.
    pub failures: usize,
}

impl McResult {
    pub fn cell(&self, xi: usize, ti: usize) -> &McCell {
        let nt = self.estimates.first().and_then(|r| r.first()).map_or(0, Vec::len);
        &self.cells[xi * nt + ti]
    }

    /// `(rep, x)` pairs whose defined estimates decrease in `τ`.
    pub fn crossings(&self) -> usize {
        self.estimates
            .iter()
            .flatten()
            .filter(|qs| {
                let v: Vec<f64> = qs.iter().flatten().copied().collect();
                v.windows(2).any(|p| p[1] < p[0])
            })
            .count()
    }

    pub fn undefined_fraction(&self) -> f64 {
        let (u, total) = self
            .cells
            .iter()
            .fold((0, 0), |(u, t), c| (u + c.undefined, t + c.undefined + c.defined));
        u as f64 / total.max(1) as f64
    }
}

/// Mean CV choice over the pilot samples.
pub fn select_bandwidth(cfg: &McConfig) -> Result<f64> {
    match &cfg.bandwidth {
        BandwidthChoice::Fixed(h) => Ok(*h),
        BandwidthChoice::Cv { cfg: cv, pilots } => {
            let mut sum = 0.0;
            for k in 0..*pilots as u64 {
                let sample = cfg.sample(PILOT_STREAM_BASE + k);
                let report = cv_bandwidth(&sample, cv, cfg.seed.wrapping_add(k))?;
                log::info!("pilot {k}: selected h = {}", report.selected_h);
                sum += report.selected_h;
            }
            Ok(sum / *pilots as f64)
        }
    }
}

fn fit_point(cfg: &McConfig, sample: &[Observation], x: f64, h: f64) -> Result<Vec<Option<f64>>> {
    let w = local_weights(cfg.weight_family, &[x], sample, h, &cfg.kernel)?;
    let f = estimate(sample, &w, cfg.estimator, cfg.tail_policy)?;
    cfg.taus
        .iter()
        .map(|&tau| Ok(quantile(&f, tau)?.value))
        .collect()
}

pub fn run_mc(cfg: &McConfig) -> Result<McResult> {
    cfg.validate()?;
    let h = select_bandwidth(cfg)?;
    let per_rep: Vec<(Vec<Vec<Option<f64>>>, usize)> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|rep| {
            let sample = cfg.sample(rep as u64);
            let mut failures = 0;
            let rows = cfg
                .x_grid
                .iter()
                .map(|&x| match fit_point(cfg, &sample, x, h) {
                    Ok(q) => q,
                    Err(e) => {
                        log::debug!("rep {rep}, x = {x}: {e}");
                        failures += 1;
                        vec![None; cfg.taus.len()]
                    }
                })
                .collect();
            (rows, failures)
        })
        .collect();
    let failures = per_rep.iter().map(|r| r.1).sum();
    let estimates: Vec<_> = per_rep.into_iter().map(|r| r.0).collect();

    let mut cells = Vec::with_capacity(cfg.x_grid.len() * cfg.taus.len());
    for (xi, &x) in cfg.x_grid.iter().enumerate() {
        for (ti, &tau) in cfg.taus.iter().enumerate() {
            let truth = true_quantile(cfg.model, tau, x)?;
            let vals: Vec<f64> = estimates.iter().filter_map(|r| r[xi][ti]).collect();
            cells.push(aggregate(x, tau, truth, &vals, cfg.n_reps));
        }
    }
    Ok(McResult {
        bandwidth: h,
        cells,
        estimates,
        runs: (0..cfg.n_reps)
            .map(|rep| RunMeta { rep, stream: rep as u64, bandwidth: h })
            .collect(),
        failures,
    })
}

fn aggregate(x: f64, tau: f64, truth: f64, vals: &[f64], n_reps: usize) -> McCell {
    let m = vals.len();
    let (mean, mse, variance) = if m == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mean = vals.iter().sum::<f64>() / m as f64;
        let mse = vals.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / m as f64;
        let variance = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
        (mean, mse, variance)
    };
    McCell {
        x,
        tau,
        truth,
        mean,
        bias: mean - truth,
        mse,
        variance,
        defined: m,
        undefined: n_reps - m,
    }
}

fn write_grid(path: &Path, cells: &[McCell], value: impl Fn(&McCell) -> String) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let to_io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["x", "tau", "value"]).map_err(to_io)?;
    for c in cells {
        w.write_record([c.x.to_string(), c.tau.to_string(), value(c)])
            .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `mean.csv`, `mse.csv`, `undef.csv` and `manifest.txt` into `dir`.
pub fn write_outputs(cfg: &McConfig, result: &McResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_grid(&dir.join("mean.csv"), &result.cells, |c| c.mean.to_string())?;
    write_grid(&dir.join("mse.csv"), &result.cells, |c| c.mse.to_string())?;
    write_grid(&dir.join("undef.csv"), &result.cells, |c| c.undefined.to_string())?;
    fs::write(dir.join("manifest.txt"), manifest(cfg, result))?;
    Ok(())
}

pub fn manifest(cfg: &McConfig, result: &McResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tcquant {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "model = {}", cfg.model.id());
    if let Model::Two(p) = cfg.model {
        let _ = writeln!(s, "cl = {}\ncr = {}", p.c_l, p.c_r);
    }
    let _ = writeln!(s, "n = {}\nreps = {}", cfg.n, cfg.n_reps);
    let taus: Vec<String> = cfg.taus.iter().map(f64::to_string).collect();
    let _ = writeln!(s, "taus = {}", taus.join(","));
    let _ = writeln!(
        s,
        "xgrid = {} points in [{}, {}]",
        cfg.x_grid.len(),
        cfg.x_grid[0],
        cfg.x_grid[cfg.x_grid.len() - 1]
    );
    let _ = writeln!(s, "weights = {}\nestimator = {}\ntail = {}", cfg.weight_family, cfg.estimator, cfg.tail_policy);
    match &cfg.bandwidth {
        BandwidthChoice::Fixed(h) => {
            let _ = writeln!(s, "bandwidth = {h}");
        }
        BandwidthChoice::Cv { cfg: cv, pilots } => {
            let _ = writeln!(
                s,
                "bandwidth = cv (tau {}, {} blocks, {} pilots) -> {}",
                cv.tau, cv.n_blocks, pilots, result.bandwidth
            );
        }
    }
    let _ = writeln!(s, "failed fits = {}", result.failures);
    let _ = writeln!(s, "undefined fraction = {}", result.undefined_fraction());
    let _ = writeln!(s, "crossings = {}", result.crossings());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("-2:2:0.1").unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[1], -1.9);
        assert_eq!(g[40], 2.0);
        assert_eq!(parse_grid("-2:2:0.05").unwrap().len(), 81);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert_eq!(parse_list("0.25, 0.5,0.75").unwrap(), vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn config_from_map() {
        let mut m = BTreeMap::new();
        for (k, v) in [("model", "2"), ("cl", "-0.2"), ("n", "50"), ("reps", "3"), ("weights", "nw"), ("bandwidth", "0.4")] {
            m.insert(k.to_string(), v.to_string());
        }
        let cfg = McConfig::from_map(&m).unwrap();
        assert_eq!(cfg.model, Model::Two(Model2Params { c_l: -0.2, c_r: 1.5 }));
        assert_eq!(cfg.weight_family, WeightFamily::Nw);
        assert_eq!(cfg.bandwidth, BandwidthChoice::Fixed(0.4));
        m.insert("bogus".into(), "1".into());
        assert!(McConfig::from_map(&m).is_err());
    }

    #[test]
    fn single_noiseless_replication() {
        let mut cfg = McConfig::new(Model::One, 200, 1);
        cfg.gen.zero_noise = true;
        cfg.taus = vec![0.5];
        cfg.x_grid = vec![-1.0, 0.0, 1.0];
        cfg.weight_family = WeightFamily::Nw;
        cfg.bandwidth = BandwidthChoice::Fixed(0.2);
        let r = run_mc(&cfg).unwrap();
        for (xi, c) in r.cells.iter().enumerate() {
            let est = r.estimates[0][xi][0].unwrap();
            assert_eq!(c.bias, est - c.truth);
            assert!((c.mse - c.bias * c.bias).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_decomposed() {
        let mut cfg = McConfig::new(Model::Two(Model2Params::default()), 80, 6);
        cfg.x_grid = vec![-1.0, 0.5];
        cfg.seed = 5;
        let a = run_mc(&cfg).unwrap();
        let b = run_mc(&cfg).unwrap();
        assert_eq!(a, b);
        for c in &a.cells {
            if c.defined > 0 {
                assert!((c.mse - (c.bias * c.bias + c.variance)).abs() < 1e-10);
                assert!(c.mse >= c.bias * c.bias - 1e-12);
            }
            assert!(c.undefined <= cfg.n_reps);
        }
    }

    #[test]
    fn writes_outputs() {
        let mut cfg = McConfig::new(Model::One, 60, 2);
        cfg.x_grid = vec![0.0, 0.5];
        let r = run_mc(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&cfg, &r, dir.path()).unwrap();
        let mean = fs::read_to_string(dir.path().join("mean.csv")).unwrap();
        assert!(mean.starts_with("x,tau,value\n0,0.25,"));
        assert_eq!(mean.lines().count(), 1 + 2 * 3);
        assert!(fs::read_to_string(dir.path().join("manifest.txt")).unwrap().contains("seed = 0"));
    }
}
