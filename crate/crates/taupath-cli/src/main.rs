//! Command-line front end for the sensitivity estimators: single
//! estimation runs, parameter sweeps, and model-file validation, with
//! CSV or JSON output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use taupath::estimate::{estimate, EstimateOptions, Method, SensitivityEstimate};
use taupath::model::ReactionNetwork;

#[derive(Parser)]
#[command(
    name = "taupath",
    version,
    about = "Parameter sensitivity estimation for stochastic reaction networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one sensitivity estimation and write a result row.
    Estimate(EstimateArgs),
    /// Run one estimation per value of a swept axis.
    Sweep(SweepArgs),
    /// Parse-check a model file and print its shape.
    Validate {
        /// Model file to check.
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Args)]
struct EstimateArgs {
    /// Model file describing the reaction network.
    #[arg(long)]
    model: PathBuf,

    /// Estimator: eipa, tauipa, ecfd, ecrp, tcfd, or tcrp.
    #[arg(long)]
    method: Method,

    /// Parameter to differentiate with respect to.
    #[arg(long)]
    param: String,

    /// Time horizon T.
    #[arg(short = 'T', long = "horizon")]
    horizon: f64,

    /// Number of Monte Carlo samples N.
    #[arg(short = 'N', long = "samples")]
    samples: u64,

    /// Maximum leap size (required by tau-kernel methods).
    #[arg(long = "tau-max")]
    tau_max: Option<f64>,

    /// Expected auxiliary pairs per integral-path sample.
    #[arg(long, default_value_t = 10)]
    m0: u64,

    /// Pilot simulations used to set the thinning scale.
    #[arg(long, default_value_t = 1000)]
    n0: u64,

    /// Centered perturbation width for finite-difference methods.
    #[arg(long, default_value_t = 0.1)]
    h: f64,

    /// RNG seed; falls back to TAUPATH_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for the sample fan-out (default: all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Known sensitivity value; fills the relative-error column.
    #[arg(long, allow_negative_numbers = true)]
    reference: Option<f64>,

    /// Output file.
    #[arg(long)]
    out: PathBuf,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: EstimateArgs,

    /// Quantity varied across rows.
    #[arg(long, value_enum)]
    axis: Axis,

    /// Comma-separated axis values, one estimation per value.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,

    /// Name of the model parameter that carries the system volume
    /// (volume sweeps only).
    #[arg(long, default_value = "V")]
    volume_param: String,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, ValueEnum)]
enum Axis {
    /// Vary the maximum leap size.
    #[value(name = "tau_max")]
    TauMax,
    /// Vary the auxiliary-pair budget of integral-path methods.
    M0,
    /// Vary the declared volume parameter (and the auxiliary budget with
    /// it, for integral-path methods).
    Volume,
}

/// One output row; field names are the CSV column names, and the JSON
/// form uses the same names. Non-applicable fields are empty in CSV and
/// null in JSON. The two `*_seconds` columns are measured timings and are
/// excluded from the byte-identical determinism guarantee.
#[derive(Serialize)]
struct Row {
    method: String,
    param: String,
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "N")]
    n: u64,
    seed: u64,
    tau_max: Option<f64>,
    m0: Option<u64>,
    h: Option<f64>,
    mean: f64,
    stddev_of_estimator: f64,
    rsd: Option<f64>,
    rsdcc_seconds: Option<f64>,
    re_percent: Option<f64>,
    cost_per_sample_seconds: f64,
    c_constant: Option<f64>,
    mean_rho_tot: Option<f64>,
    clamp_rate: Option<f64>,
}

const CSV_HEADER: &str = "method,param,T,N,seed,tau_max,m0,h,mean,stddev_of_estimator,rsd,\
                          rsdcc_seconds,re_percent,cost_per_sample_seconds,c_constant,\
                          mean_rho_tot,clamp_rate";

impl Row {
    fn from_estimate(est: &SensitivityEstimate) -> Row {
        Row {
            method: est.method.name().to_string(),
            param: est.param.clone(),
            t: est.t_end,
            n: est.samples,
            seed: est.seed,
            tau_max: est.tau_max,
            m0: est.m0,
            h: est.h,
            mean: est.mean,
            stddev_of_estimator: est.stddev_of_estimator,
            rsd: est.rsd,
            rsdcc_seconds: est.rsdcc_seconds,
            re_percent: est.re_percent,
            cost_per_sample_seconds: est.cost_per_sample_seconds,
            c_constant: est.c_constant,
            mean_rho_tot: est.mean_rho_tot,
            clamp_rate: est.clamp_rate,
        }
    }

    fn to_csv_line(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        let mut line = String::new();
        write!(
            line,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.param,
            self.t,
            self.n,
            self.seed,
            opt(&self.tau_max),
            opt(&self.m0),
            opt(&self.h),
            self.mean,
            self.stddev_of_estimator,
            opt(&self.rsd),
            opt(&self.rsdcc_seconds),
            opt(&self.re_percent),
            self.cost_per_sample_seconds,
            opt(&self.c_constant),
            opt(&self.mean_rho_tot),
            opt(&self.clamp_rate),
        )
        .expect("writing to a String cannot fail");
        line
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Estimate(args) => {
            let net = load_model(&args.model)?;
            let opts = build_options(&args)?;
            let est = estimate(&net, &opts)?;
            write_rows(&args.out, args.format, &[Row::from_estimate(&est)])?;
            println!(
                "{} d/d{} at T={}: mean {} (stddev {}), N={}, wrote {}",
                est.method,
                est.param,
                est.t_end,
                est.mean,
                est.stddev_of_estimator,
                est.samples,
                args.out.display()
            );
            Ok(())
        }
        Command::Sweep(args) => run_sweep(args),
        Command::Validate { model } => {
            let net = load_model(&model)?;
            println!("{} parses cleanly:", model.display());
            println!("  species ({}): {}", net.species.len(), net.species.join(" "));
            println!("  reactions: {}", net.num_reactions());
            for p in &net.parameters {
                println!("  param {} = {}", p.name, p.value);
            }
            println!(
                "  init: {}",
                net.init.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
            );
            Ok(())
        }
    }
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    if args.values.is_empty() {
        bail!("--values must list at least one value");
    }
    let mut net = load_model(&args.base.model)?;
    let base_opts = build_options(&args.base)?;
    let mut rows = Vec::with_capacity(args.values.len());
    for &value in &args.values {
        let mut opts = base_opts.clone();
        match args.axis {
            Axis::TauMax => {
                if !args.base.method.uses_tau_leap() {
                    bail!("--axis tau_max applies only to tau-kernel methods");
                }
                opts.tau_max = Some(value);
            }
            Axis::M0 => {
                if !args.base.method.is_integral_path() {
                    bail!("--axis m0 applies only to integral-path methods");
                }
                if value < 1.0 || value.fract() != 0.0 {
                    bail!("--axis m0 needs positive integer values, got {value}");
                }
                opts.m0 = value as u64;
            }
            Axis::Volume => {
                let vi = net.parameter_index(&args.volume_param).with_context(|| {
                    format!(
                        "model declares no parameter named '{}'; point --volume-param at the \
                         volume-scaled parameter",
                        args.volume_param
                    )
                })?;
                if value <= 0.0 {
                    bail!("--axis volume needs positive values, got {value}");
                }
                net.parameters[vi].value = value;
                if args.base.method.is_integral_path() {
                    // Match the auxiliary budget to the system size so the
                    // per-sample work stays balanced across the sweep.
                    opts.m0 = value.round().max(1.0) as u64;
                }
            }
        }
        let est = estimate(&net, &opts)
            .with_context(|| format!("sweep value {value} failed"))?;
        println!(
            "{} {}={}: mean {} (stddev {})",
            est.method,
            sweep_axis_name(args.axis),
            value,
            est.mean,
            est.stddev_of_estimator
        );
        rows.push(Row::from_estimate(&est));
    }
    write_rows(&args.base.out, args.base.format, &rows)?;
    println!("wrote {} rows to {}", rows.len(), args.base.out.display());
    Ok(())
}

fn sweep_axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::TauMax => "tau_max",
        Axis::M0 => "m0",
        Axis::Volume => "volume",
    }
}

fn load_model(path: &Path) -> Result<ReactionNetwork> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read model file {}", path.display()))?;
    ReactionNetwork::parse(&text)
        .with_context(|| format!("model file {} does not parse", path.display()))
}

fn build_options(args: &EstimateArgs) -> Result<EstimateOptions> {
    let mut opts = EstimateOptions::new(args.method, args.param.clone(), args.horizon, args.samples);
    opts.seed = match args.seed {
        Some(s) => s,
        None => match std::env::var("TAUPATH_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .with_context(|| format!("TAUPATH_SEED is set but not a u64: '{v}'"))?,
            Err(_) => 0,
        },
    };
    opts.tau_max = args.tau_max;
    opts.m0 = args.m0;
    opts.n0 = args.n0;
    opts.h = args.h;
    opts.workers = args.workers;
    opts.reference = args.reference;
    Ok(opts)
}

fn write_rows(path: &Path, format: Format, rows: &[Row]) -> Result<()> {
    let text = match format {
        Format::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for row in rows {
                out.push_str(&row.to_csv_line());
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let mut out = if rows.len() == 1 {
                serde_json::to_string_pretty(&rows[0])?
            } else {
                serde_json::to_string_pretty(&rows)?
            };
            out.push('\n');
            out
        }
    };
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
