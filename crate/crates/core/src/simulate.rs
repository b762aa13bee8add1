//! Data generators for the two location models used in the simulation study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::twice_censored::{Delta, Observation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model2Params {
    pub c_l: f64,
    pub c_r: f64,
}

impl Default for Model2Params {
    fn default() -> Self {
        Model2Params { c_l: -0.5, c_r: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// Normal noise, `L` and `R` shifted by normal deciles.
    One,
    /// Exponential noise, uniform left and exponential right censoring.
    Two(Model2Params),
}

impl Model {
    pub fn from_id(id: u8, params: Model2Params) -> Result<Self> {
        match id {
            1 => Ok(Model::One),
            2 => Ok(Model::Two(params)),
            other => Err(Error::Config(format!("unknown model {other} (expected 1 or 2)"))),
        }
    }

    pub fn id(&self) -> u8 {
        match self {
            Model::One => 1,
            Model::Two(_) => 2,
        }
    }

    /// Location curve shared by `T`, `L` and `R`, without the model's intercept.
    pub fn location(&self, x: f64) -> f64 {
        match self {
            Model::One => (2.0 * x).sin() + 2.0 * (-16.0 * x * x).exp(),
            Model::Two(_) => 2.0 * x.cos() + (-4.0 * x * x).exp(),
        }
    }
}

/// Latent `(T, L, R)` of one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latent {
    pub t: f64,
    pub l: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub observations: Vec<Observation>,
    /// Only filled when requested; estimators never read it.
    pub latent: Option<Vec<Latent>>,
}

impl SimSample {
    /// Fractions of `δ = 1` and `δ = 2` observations.
    pub fn censoring_rates(&self) -> (f64, f64) {
        let n = self.observations.len().max(1) as f64;
        let count = |d| self.observations.iter().filter(|o| o.delta == d).count() as f64 / n;
        (count(Delta::RightCensored), count(Delta::LeftCensored))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenOptions {
    pub keep_latent: bool,
    /// Replace every noise term by zero (diagnostic).
    pub zero_noise: bool,
}

/// Independent generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Censoring indicator of a latent triple.
pub fn classify(t: f64, l: f64, r: f64) -> (f64, Delta) {
    let y = t.min(r).max(l);
    let delta = if l < t && t <= r {
        Delta::Uncensored
    } else if l < r && r < t {
        Delta::RightCensored
    } else {
        Delta::LeftCensored
    };
    (y, delta)
}

pub fn generate<R: Rng + ?Sized>(model: Model, n: usize, rng: &mut R, opts: GenOptions) -> SimSample {
    let (q10, q90) = (std_normal_quantile(0.1), std_normal_quantile(0.9));
    let mut observations = Vec::with_capacity(n);
    let mut latent = opts.keep_latent.then(|| Vec::with_capacity(n));
    let normal = |rng: &mut R| -> f64 {
        if opts.zero_noise {
            0.0
        } else {
            StandardNormal.sample(rng)
        }
    };
    for _ in 0..n {
        let x: f64 = rng.random_range(-2.0..=2.0);
        let m = model.location(x);
        let (t, l, r) = match model {
            Model::One => {
                let (e_t, e_l, e_r) = (normal(rng), normal(rng), normal(rng));
                (
                    2.5 + m + 0.5 * e_t,
                    2.6 + m + 0.5 * (e_l + q10),
                    3.4 + m + 0.5 * (e_r + q90),
                )
            }
            Model::Two(p) => {
                let (e_t, u_l, e_r): (f64, f64, f64) = if opts.zero_noise {
                    (0.0, 0.0, 0.0)
                } else {
                    (Exp1.sample(rng), rng.random(), Exp1.sample(rng))
                };
                (2.0 + m + e_t, 2.0 + m + p.c_l + u_l, 2.0 + m + p.c_r + e_r)
            }
        };
        let (y, delta) = classify(t, l, r);
        observations.push(Observation::scalar(y, x, delta));
        if let Some(v) = latent.as_mut() {
            v.push(Latent { t, l, r });
        }
    }
    SimSample { observations, latent }
}

pub fn gen_model1(n: usize, seed: u64) -> SimSample {
    generate(Model::One, n, &mut stream_rng(seed, 0), GenOptions::default())
}

pub fn gen_model2(n: usize, p: Model2Params, seed: u64) -> SimSample {
    generate(Model::Two(p), n, &mut stream_rng(seed, 0), GenOptions::default())
}

/// Conditional `τ`-quantile of `T` given `X = x`.
pub fn true_quantile(model: Model, tau: f64, x: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("quantile level {tau} is not in (0, 1)")));
    }
    Ok(match model {
        Model::One => 2.5 + model.location(x) + 0.5 * std_normal_quantile(tau),
        Model::Two(_) => 2.0 + model.location(x) - (1.0 - tau).ln(),
    })
}
