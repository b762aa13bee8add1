use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tcquant::io::{load_config, load_sample, save_sample, write_sample};
use tcquant::mc::{parse_list, run_mc, write_outputs, McConfig};
use tcquant::selftest::run_selftest;
use tcquant::simulate::{gen_model1, gen_model2, Model2Params};
use tcquant::{
    cv_bandwidth, estimate, local_weights, quantile, CvConfig, Error, Estimator, KernelSpec, Observation, TailPolicy,
    WeightFamily,
};

#[derive(Parser)]
#[command(name = "tcquant", version, about = "Conditional quantiles for twice-censored data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from one of the simulation models.
    Simulate(SimulateArgs),
    /// Estimate conditional quantiles from a CSV sample.
    Estimate(EstimateArgs),
    /// Cross-validate the bandwidth on a CSV sample.
    Cv(CvArgs),
    /// Run a Monte Carlo study and write mean/MSE/undefined grids.
    Mc(McArgs),
    /// Run the built-in consistency checks.
    Selftest {
        #[arg(long, default_value_t = 20240917)]
        seed: u64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    model: u8,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    cl: f64,
    #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
    cr: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, default_value = "ll")]
    weights: WeightFamily,
    #[arg(long, default_value = "ip")]
    estimator: Estimator,
    #[arg(long, default_value = "undefined")]
    tail: TailPolicy,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Covariate points, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long, default_value = "0.25,0.5,0.75")]
    taus: String,
    #[arg(long)]
    bandwidth: f64,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Candidate bandwidths, comma separated and increasing.
    #[arg(long, default_value = "0.1,0.15,0.2,0.25,0.3,0.4,0.5,0.6,0.8,1")]
    grid: String,
    #[arg(long, default_value_t = 25)]
    blocks: usize,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args)]
struct McArgs {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    taus: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    xgrid: Option<String>,
    /// A positive bandwidth or `cv`.
    #[arg(long)]
    bandwidth: Option<String>,
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    tail: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    cl: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    cr: Option<String>,
    #[arg(long, default_value = "mc_out")]
    out: PathBuf,
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn simulate(a: SimulateArgs) -> Result<(), Error> {
    let sample = match a.model {
        1 => gen_model1(a.n, a.seed),
        2 => gen_model2(a.n, Model2Params { c_l: a.cl, c_r: a.cr }, a.seed),
        m => return Err(Error::Config(format!("unknown model {m}"))),
    };
    match &a.out {
        Some(p) => save_sample(&sample.observations, p),
        None => write_sample(&sample.observations, std::io::stdout().lock()),
    }
}

fn estimate_cmd(a: EstimateArgs) -> Result<(), Error> {
    let sample: Vec<Observation> = load_sample(&a.data)?;
    let xs = parse_list(&a.x)?;
    let taus = parse_list(&a.taus)?;
    let mut out = open_out(&a.out)?;
    writeln!(out, "x,tau,value")?;
    for &x in &xs {
        let w = local_weights(a.fit.weights, &[x], &sample, a.bandwidth, &KernelSpec::default())?;
        let f = estimate(&sample, &w, a.fit.estimator, a.fit.tail)?;
        for &tau in &taus {
            let v = quantile(&f, tau)?.value.map_or("NA".to_string(), |q| q.to_string());
            writeln!(out, "{x},{tau},{v}")?;
        }
    }
    Ok(())
}

fn cv_cmd(a: CvArgs) -> Result<(), Error> {
    let sample = load_sample(&a.data)?;
    let mut cfg = CvConfig::new(a.tau, parse_list(&a.grid)?);
    cfg.n_blocks = a.blocks;
    cfg.n_runs = a.runs;
    cfg.estimator = a.fit.estimator;
    cfg.weight_family = a.fit.weights;
    cfg.tail_policy = a.fit.tail;
    let report = cv_bandwidth(&sample, &cfg, a.seed)?;
    println!("h,loss");
    for (h, l) in cfg.candidate_grid.iter().zip(&report.loss_per_candidate) {
        println!("{h},{l}");
    }
    println!("# selected h = {}", report.selected_h);
    println!("# skipped leave-one-out terms = {}", report.skipped_terms);
    Ok(())
}

fn mc_cmd(a: McArgs) -> Result<(), Error> {
    let mut map = match &a.config {
        Some(p) => load_config(p)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("model", a.model),
        ("n", a.n),
        ("reps", a.reps),
        ("taus", a.taus),
        ("xgrid", a.xgrid),
        ("bandwidth", a.bandwidth),
        ("weights", a.weights),
        ("estimator", a.estimator),
        ("tail", a.tail),
        ("seed", a.seed),
        ("cl", a.cl),
        ("cr", a.cr),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    let cfg = McConfig::from_map(&map)?;
    let result = run_mc(&cfg)?;
    write_outputs(&cfg, &result, &a.out)?;
    log::info!("wrote results to {}", a.out.display());
    print!("{}", tcquant::mc::manifest(&cfg, &result));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Cv(a) => cv_cmd(a),
        Command::Mc(a) => mc_cmd(a),
        Command::Selftest { seed } => {
            let outcomes = run_selftest(seed);
            for c in &outcomes {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if outcomes.iter().all(|c| c.passed) {
                Ok(())
            } else {
                return ExitCode::FAILURE;
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
