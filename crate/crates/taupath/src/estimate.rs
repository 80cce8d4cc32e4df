//! End-to-end sensitivity estimation: configuration, sample fan-out, and
//! metric assembly.
//!
//! Samples are independent; sample i draws every bit of its randomness from
//! the substream `derive(derive(root, 1), i)`, so the multiset of samples is
//! a pure function of the seed. Samples are processed in fixed blocks of
//! 1024 whose partial statistics are merged in block order, which makes the
//! reported mean and spread bit-identical whether the blocks ran on one
//! thread or many (timing-derived fields are the only exception). With the
//! `parallel` feature (default) blocks run on a rayon pool; without it the
//! same blocks run sequentially.

use crate::error::SimError;
use crate::fd::{generate_sample_fd, CouplingKind, FdConfig};
use crate::ipa::{
    generate_sample_ipa, select_normalizing_constant, IpaConfig, IpaError,
};
use crate::model::{ParameterSet, PropensityDerivatives, ReactionNetwork};
use crate::rng::RngStream;
use crate::stats::{relative_error_percent, relative_stddev, rsd_cost, Moments};
use crate::KernelKind;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

/// Samples per reduction block. Fixed so that the merge tree, and therefore
/// the floating-point result, does not depend on the worker count.
const BLOCK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Integral-path estimator on the exact kernel.
    EIpa,
    /// Integral-path estimator on the tau-leap kernel.
    TauIpa,
    /// Centered finite difference, split coupling, exact kernel.
    ECfd,
    /// Centered finite difference, common reaction paths, exact kernel.
    ECrp,
    /// Centered finite difference, split coupling, tau-leap kernel.
    TCfd,
    /// Centered finite difference, common reaction paths, tau-leap kernel.
    TCrp,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::EIpa, Method::TauIpa, Method::ECfd, Method::ECrp, Method::TCfd, Method::TCrp];

    pub fn name(&self) -> &'static str {
        match self {
            Method::EIpa => "eipa",
            Method::TauIpa => "tauipa",
            Method::ECfd => "ecfd",
            Method::ECrp => "ecrp",
            Method::TCfd => "tcfd",
            Method::TCrp => "tcrp",
        }
    }

    pub fn uses_tau_leap(&self) -> bool {
        matches!(self, Method::TauIpa | Method::TCfd | Method::TCrp)
    }

    pub fn is_integral_path(&self) -> bool {
        matches!(self, Method::EIpa | Method::TauIpa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown method '{s}' (expected one of: {})",
                    Method::ALL.map(|m| m.name()).join(", ")
                )
            })
    }
}

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Ipa(#[from] IpaError),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Everything needed to run one estimation.
#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub method: Method,
    pub param: String,
    pub t_end: f64,
    pub samples: u64,
    pub seed: u64,
    /// Maximum leap size; required by tau-leap methods, ignored otherwise.
    pub tau_max: Option<f64>,
    /// Expected auxiliary pairs per integral-path sample.
    pub m0: u64,
    /// Pilot simulations for the thinning scale.
    pub n0: u64,
    /// Centered perturbation width for finite differences.
    pub h: f64,
    /// Worker threads; `None` uses the pool default. Ignored without the
    /// `parallel` feature.
    pub workers: Option<usize>,
    /// Known sensitivity value for relative-error reporting.
    pub reference: Option<f64>,
}

impl EstimateOptions {
    pub fn new(method: Method, param: impl Into<String>, t_end: f64, samples: u64) -> Self {
        EstimateOptions {
            method,
            param: param.into(),
            t_end,
            samples,
            seed: 0,
            tau_max: None,
            m0: 10,
            n0: 1000,
            h: 0.1,
            workers: None,
            reference: None,
        }
    }
}

/// The result of one estimation run. Optional fields are `None` where the
/// quantity does not apply to the method (for example `tau_max` for exact
/// kernels or `h` for integral-path estimators).
#[derive(Debug, Clone)]
pub struct SensitivityEstimate {
    pub method: Method,
    pub param: String,
    pub t_end: f64,
    pub samples: u64,
    pub seed: u64,
    pub tau_max: Option<f64>,
    pub m0: Option<u64>,
    pub h: Option<f64>,
    pub mean: f64,
    pub stddev_of_estimator: f64,
    /// sqrt(N) * stddev / |mean|; `None` when the mean is exactly zero.
    pub rsd: Option<f64>,
    /// RSD^2 * cost per sample: work-normalized inefficiency, seconds.
    pub rsdcc_seconds: Option<f64>,
    /// |mean - reference| / |reference| * 100, when a reference was given.
    pub re_percent: Option<f64>,
    pub cost_per_sample_seconds: f64,
    /// Selected thinning scale (integral-path methods).
    pub c_constant: Option<f64>,
    /// Mean number of auxiliary pairs per sample (integral-path methods).
    pub mean_rho_tot: Option<f64>,
    /// Negative-state clamps per leap (tau-leap methods).
    pub clamp_rate: Option<f64>,
    /// Fraction of thinning probabilities that saturated at 1
    /// (integral-path methods; diagnostic, not part of the table output).
    pub p_saturated_fraction: Option<f64>,
}

#[derive(Default, Clone, Copy)]
struct BlockOut {
    moments: Moments,
    rho: u64,
    clamps: u64,
    leaps: u64,
    p_sat: u64,
    thinning: u64,
    seconds: f64,
}

enum Driver<'a> {
    Ipa { cfg: &'a IpaConfig, c: f64, derivs: &'a PropensityDerivatives },
    Fd { cfg: &'a FdConfig, theta: usize },
}

fn run_block(
    network: &ReactionNetwork,
    params: &ParameterSet,
    driver: &Driver<'_>,
    t_end: f64,
    samples_root: &RngStream,
    range: std::ops::Range<u64>,
) -> Result<BlockOut, SimError> {
    let mut out = BlockOut::default();
    let started = Instant::now();
    for i in range {
        let sample_stream = samples_root.derive(i);
        match driver {
            Driver::Ipa { cfg, c, derivs } => {
                let trace =
                    generate_sample_ipa(network, params, derivs, t_end, cfg, *c, &sample_stream)?;
                out.moments.push(trace.value);
                out.rho += trace.rho_total;
                out.clamps += trace.clamp_events;
                out.leaps += trace.leaps;
                out.p_sat += trace.p_saturated;
                out.thinning += trace.thinning_draws;
            }
            Driver::Fd { cfg, theta } => {
                let trace =
                    generate_sample_fd(network, params, *theta, t_end, cfg, &sample_stream)?;
                out.moments.push(trace.value);
                out.clamps += trace.clamp_events;
                out.leaps += trace.leaps;
            }
        }
    }
    out.seconds = started.elapsed().as_secs_f64();
    Ok(out)
}

fn collect_blocks(
    network: &ReactionNetwork,
    params: &ParameterSet,
    driver: &Driver<'_>,
    opts: &EstimateOptions,
    samples_root: &RngStream,
) -> Result<Vec<BlockOut>, SimError> {
    let n = opts.samples;
    let block_count = n.div_ceil(BLOCK);
    let ranges: Vec<std::ops::Range<u64>> =
        (0..block_count).map(|b| (b * BLOCK)..((b + 1) * BLOCK).min(n)).collect();

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let work = || {
            ranges
                .into_par_iter()
                .map(|r| run_block(network, params, driver, opts.t_end, samples_root, r))
                .collect::<Result<Vec<_>, _>>()
        };
        match opts.workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .expect("worker pool construction cannot fail for positive thread counts")
                .install(work),
            None => work(),
        }
    }

    #[cfg(not(feature = "parallel"))]
    {
        ranges
            .into_iter()
            .map(|r| run_block(network, params, driver, opts.t_end, samples_root, r))
            .collect()
    }
}

/// Runs a full estimation: validates the options, selects the thinning
/// scale for integral-path methods, generates `opts.samples` samples, and
/// assembles the estimate with its efficiency metrics.
pub fn estimate(
    network: &ReactionNetwork,
    opts: &EstimateOptions,
) -> Result<SensitivityEstimate, EstimateError> {
    let theta = network
        .parameter_index(&opts.param)
        .ok_or_else(|| EstimateError::UnknownParameter(opts.param.clone()))?;
    if opts.samples < 2 {
        return Err(EstimateError::InvalidConfig("need at least 2 samples".into()));
    }
    if opts.t_end.is_nan() || opts.t_end <= 0.0 {
        return Err(EstimateError::InvalidConfig("horizon T must be positive".into()));
    }
    if let Some(reference) = opts.reference {
        if reference == 0.0 {
            return Err(EstimateError::InvalidConfig(
                "reference sensitivity must be nonzero for relative error".into(),
            ));
        }
    }
    let kernel = if opts.method.uses_tau_leap() {
        let tau_max = opts.tau_max.ok_or_else(|| {
            EstimateError::InvalidConfig(format!(
                "method {} requires --tau-max",
                opts.method
            ))
        })?;
        if tau_max.is_nan() || tau_max <= 0.0 {
            return Err(EstimateError::InvalidConfig("tau_max must be positive".into()));
        }
        KernelKind::TauLeap { tau_max }
    } else {
        KernelKind::Exact
    };

    let params = ParameterSet::from_network(network);
    let root = RngStream::new(opts.seed);
    let pilot_root = root.derive(0);
    let samples_root = root.derive(1);

    let derivs;
    let ipa_cfg;
    let fd_cfg;
    let driver = if opts.method.is_integral_path() {
        if opts.m0 < 1 || opts.n0 < 1 {
            return Err(EstimateError::InvalidConfig("m0 and n0 must be at least 1".into()));
        }
        derivs = network.propensity_derivatives(theta);
        ipa_cfg = IpaConfig::new(opts.m0, opts.n0, kernel);
        let c = select_normalizing_constant(
            network,
            &params,
            &derivs,
            opts.t_end,
            &ipa_cfg,
            &pilot_root,
        )?;
        Driver::Ipa { cfg: &ipa_cfg, c, derivs: &derivs }
    } else {
        if opts.h.is_nan() || opts.h <= 0.0 {
            return Err(EstimateError::InvalidConfig(
                "perturbation width h must be positive".into(),
            ));
        }
        let coupling = match opts.method {
            Method::ECfd | Method::TCfd => CouplingKind::Cfd,
            Method::ECrp | Method::TCrp => CouplingKind::Crp,
            _ => unreachable!(),
        };
        fd_cfg = FdConfig::new(opts.h, coupling, kernel);
        Driver::Fd { cfg: &fd_cfg, theta }
    };

    let blocks = collect_blocks(network, &params, &driver, opts, &samples_root)?;
    let mut total = BlockOut::default();
    for b in &blocks {
        total.moments.merge(&b.moments);
        total.rho += b.rho;
        total.clamps += b.clamps;
        total.leaps += b.leaps;
        total.p_sat += b.p_sat;
        total.thinning += b.thinning;
        total.seconds += b.seconds;
    }

    let cost_per_sample_seconds = total.seconds / opts.samples as f64;
    let mean = total.moments.mean();
    let re_percent = opts.reference.map(|reference| {
        relative_error_percent(mean, reference).expect("reference was validated to be nonzero")
    });
    let is_ipa = opts.method.is_integral_path();
    Ok(SensitivityEstimate {
        method: opts.method,
        param: opts.param.clone(),
        t_end: opts.t_end,
        samples: opts.samples,
        seed: opts.seed,
        tau_max: if opts.method.uses_tau_leap() { opts.tau_max } else { None },
        m0: is_ipa.then_some(opts.m0),
        h: (!is_ipa).then_some(opts.h),
        mean,
        stddev_of_estimator: total.moments.estimator_stddev(),
        rsd: relative_stddev(&total.moments),
        rsdcc_seconds: rsd_cost(&total.moments, cost_per_sample_seconds),
        re_percent,
        cost_per_sample_seconds,
        c_constant: match &driver {
            Driver::Ipa { c, .. } => Some(*c),
            Driver::Fd { .. } => None,
        },
        mean_rho_tot: is_ipa.then(|| total.rho as f64 / opts.samples as f64),
        clamp_rate: (opts.method.uses_tau_leap() && total.leaps > 0)
            .then(|| total.clamps as f64 / total.leaps as f64),
        p_saturated_fraction: (is_ipa && total.thinning > 0)
            .then(|| total.p_sat as f64 / total.thinning as f64),
    })
}
