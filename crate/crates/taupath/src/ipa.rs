//! Integral-path sensitivity samples.
//!
//! The estimand d/dtheta E[f(X(T))] is written as an expected path integral:
//! over each step of the driving simulation (a tau-leap of length tau, or an
//! SSA sojourn, whose length plays the same role), every parameter-sensitive
//! reaction k contributes weight dlambda_k/dtheta at interpolated states,
//! multiplied by the conditional effect of one extra reaction-k firing —
//! the difference between two coupled paths started one firing apart. A
//! thinning layer keeps the work bounded: each potential contribution is
//! kept with probability P proportional to its weight (scaled so the
//! expected number of simulated coupled pairs per sample is the configured
//! budget M0), and kept terms are reweighted by 1/P.
//!
//! [`select_normalizing_constant`] pins the thinning scale from pilot runs;
//! [`generate_sample_ipa`] produces one unbiased sample; the estimator
//! drivers in [`crate::estimate`] average them.

use crate::error::SimError;
use crate::exact::{coupled_difference_exact, select_reaction};
use crate::model::{
    apply_stoichiometry, ParameterSet, PropensityDerivatives, ReactionNetwork, State,
};
use crate::rng::RngStream;
use crate::stats::CompensatedSum;
use crate::tauleap::{coupled_difference_tau, get_tau, leap_with_interpolation};
use crate::KernelKind;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpaConfig {
    /// Expected number of auxiliary coupled pairs per sample.
    pub m0: u64,
    /// Pilot simulations used to estimate the thinning scale.
    pub n0: u64,
    pub kernel: KernelKind,
}

impl IpaConfig {
    pub fn new(m0: u64, n0: u64, kernel: KernelKind) -> Self {
        assert!(m0 >= 1, "auxiliary budget M0 must be at least 1");
        assert!(n0 >= 1, "pilot count N0 must be at least 1");
        if let KernelKind::TauLeap { tau_max } = kernel {
            assert!(tau_max > 0.0, "tau_max must be positive");
        }
        IpaConfig { m0, n0, kernel }
    }
}

#[derive(Debug, Error)]
pub enum IpaError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(
        "the propensity derivatives for this parameter vanished along every pilot path; \
         the sensitivity is identically zero and no thinning scale exists"
    )]
    ZeroSensitivityMass,
}

/// One generated sample plus its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpaSampleTrace {
    /// The unbiased sensitivity sample.
    pub value: f64,
    /// Number of auxiliary coupled pairs actually simulated.
    pub rho_total: u64,
    /// Negative-component clamps on the main path.
    pub clamp_events: u64,
    /// Main-path steps (tau-leaps, or SSA sojourns for the exact kernel).
    pub leaps: u64,
    /// Thinning probabilities that saturated at 1.
    pub p_saturated: u64,
    /// Thinning decisions taken (nonzero-weight (time, reaction) pairs).
    pub thinning_draws: u64,
}

/// Number of interpolation points for a step: ceil(weight / C), at least 1,
/// where weight is tau times the summed absolute propensity derivatives at
/// the step's start state.
pub fn compute_eta(weight: f64, c: f64) -> u64 {
    assert!(c > 0.0, "normalizing constant must be positive");
    debug_assert!(weight >= 0.0);
    ((weight / c).ceil() as u64).max(1)
}

fn sensitivity_weight(
    derivs: &PropensityDerivatives,
    state: &State,
    params: &ParameterSet,
    tau: f64,
) -> Result<f64, SimError> {
    let mut w = 0.0;
    for &k in derivs.sensitive_reactions() {
        let d = derivs
            .eval(k, state, params)
            .map_err(|source| SimError::Derivative { reaction: k, source })?;
        w += d.abs() * tau;
    }
    Ok(w)
}

/// Estimates the thinning scale C from `n0` pilot simulations: the average
/// per-path accumulated weight sum_steps sum_k |dlambda_k/dtheta| * tau,
/// divided by the auxiliary budget M0. A sample then launches an expected
/// M0 coupled pairs. Pilot path i draws from `pilot_root.derive(i)`.
pub fn select_normalizing_constant(
    network: &ReactionNetwork,
    params: &ParameterSet,
    derivs: &PropensityDerivatives,
    t_end: f64,
    cfg: &IpaConfig,
    pilot_root: &RngStream,
) -> Result<f64, IpaError> {
    let total = pilot_weight_total(network, params, derivs, t_end, cfg, pilot_root)?;
    let c = total / (cfg.n0 as f64 * cfg.m0 as f64);
    if c <= 0.0 {
        return Err(IpaError::ZeroSensitivityMass);
    }
    Ok(c)
}

fn pilot_weight_total(
    network: &ReactionNetwork,
    params: &ParameterSet,
    derivs: &PropensityDerivatives,
    t_end: f64,
    cfg: &IpaConfig,
    pilot_root: &RngStream,
) -> Result<f64, SimError> {
    let mut accumulated = CompensatedSum::new();
    let k_count = network.num_reactions();
    let mut props = vec![0.0; k_count];
    let mut firings = vec![0u64; k_count];
    for i in 0..cfg.n0 {
        let mut stream = pilot_root.derive(i);
        let mut state = network.init.clone();
        let mut t = 0.0;
        match cfg.kernel {
            KernelKind::TauLeap { tau_max } => {
                while t < t_end {
                    let tau = get_tau(tau_max, t, t_end);
                    let clipped = t_end - t <= tau_max;
                    accumulated.add(sensitivity_weight(derivs, &state, params, tau)?);
                    network.propensities(&state, params, &mut props)?;
                    for (f, &p) in firings.iter_mut().zip(&props) {
                        *f = stream.poisson(p * tau)?;
                    }
                    for (&f, reaction) in firings.iter().zip(&network.reactions) {
                        if f > 0 {
                            apply_stoichiometry(&mut state, &reaction.delta, f);
                        }
                    }
                    t = if clipped { t_end } else { t + tau };
                }
            }
            KernelKind::Exact => {
                while t < t_end {
                    let total = network.propensities(&state, params, &mut props)?;
                    let (sojourn, fires) = if total > 0.0 {
                        let wait = stream.exponential(total)?;
                        if t + wait < t_end {
                            (wait, true)
                        } else {
                            (t_end - t, false)
                        }
                    } else {
                        (t_end - t, false)
                    };
                    accumulated.add(sensitivity_weight(derivs, &state, params, sojourn)?);
                    if !fires {
                        break;
                    }
                    let k = select_reaction(&props, total, stream.next_uniform());
                    apply_stoichiometry(&mut state, &network.reactions[k].delta, 1);
                    t += sojourn;
                }
            }
        }
    }
    Ok(accumulated.value())
}

/// Generates one sensitivity sample.
///
/// `sample_stream` is the sample's root: child 0 carries the main path and
/// the thinning machinery (step dynamics, interpolation point placement,
/// keep/drop coin flips, all consumed in algorithm order); child 1 is the
/// root for auxiliary pairs, with launched pair number j drawing from its
/// child j. Auxiliary simulations therefore never disturb main-path draws,
/// however long they run.
pub fn generate_sample_ipa(
    network: &ReactionNetwork,
    params: &ParameterSet,
    derivs: &PropensityDerivatives,
    t_end: f64,
    cfg: &IpaConfig,
    c: f64,
    sample_stream: &RngStream,
) -> Result<IpaSampleTrace, SimError> {
    match cfg.kernel {
        KernelKind::TauLeap { tau_max } => {
            generate_sample_tau(network, params, derivs, t_end, tau_max, c, sample_stream)
        }
        KernelKind::Exact => generate_sample_exact(network, params, derivs, t_end, c, sample_stream),
    }
}

fn generate_sample_tau(
    network: &ReactionNetwork,
    params: &ParameterSet,
    derivs: &PropensityDerivatives,
    t_end: f64,
    tau_max: f64,
    c: f64,
    sample_stream: &RngStream,
) -> Result<IpaSampleTrace, SimError> {
    let mut main = sample_stream.derive(0);
    let aux_root = sample_stream.derive(1);
    let mut aux_counter = 0u64;
    let mut acc = CompensatedSum::new();
    let mut trace =
        IpaSampleTrace { value: 0.0, rho_total: 0, clamp_events: 0, leaps: 0, p_saturated: 0, thinning_draws: 0 };
    let mut state = network.init.clone();
    let mut t = 0.0;
    while t < t_end {
        let tau = get_tau(tau_max, t, t_end);
        let clipped = t_end - t <= tau_max;
        let weight = sensitivity_weight(derivs, &state, params, tau)?;
        let eta = compute_eta(weight, c);
        let frame = leap_with_interpolation(network, params, &state, t, tau, eta, &mut main)?;
        trace.clamp_events += frame.clamp_events;
        trace.leaps += 1;
        for (j, zj) in frame.states.iter().enumerate() {
            let sigma_j = frame.sigmas[j];
            for &k in derivs.sensitive_reactions() {
                let r = derivs
                    .eval(k, zj, params)
                    .map_err(|source| SimError::Derivative { reaction: k, source })?
                    * tau;
                if r == 0.0 {
                    continue;
                }
                trace.thinning_draws += 1;
                let p_raw = r.abs() / (c * eta as f64);
                let p = p_raw.min(1.0);
                if p_raw >= 1.0 {
                    trace.p_saturated += 1;
                }
                if main.bernoulli(p) {
                    trace.rho_total += 1;
                    let mut shifted = zj.clone();
                    apply_stoichiometry(&mut shifted, &network.reactions[k].delta, 1);
                    let mut aux = aux_root.derive(aux_counter);
                    aux_counter += 1;
                    let diff = coupled_difference_tau(
                        network,
                        params,
                        zj.clone(),
                        shifted,
                        sigma_j,
                        t_end,
                        tau_max,
                        &mut aux,
                    )?;
                    acc.add(r / (p * eta as f64) * diff);
                }
            }
        }
        state = frame.end_state;
        t = if clipped { t_end } else { t + tau };
    }
    trace.value = acc.value();
    if !trace.value.is_finite() {
        return Err(SimError::NonFiniteSample);
    }
    Ok(trace)
}

fn generate_sample_exact(
    network: &ReactionNetwork,
    params: &ParameterSet,
    derivs: &PropensityDerivatives,
    t_end: f64,
    c: f64,
    sample_stream: &RngStream,
) -> Result<IpaSampleTrace, SimError> {
    let mut main = sample_stream.derive(0);
    let aux_root = sample_stream.derive(1);
    let mut aux_counter = 0u64;
    let mut acc = CompensatedSum::new();
    let mut trace =
        IpaSampleTrace { value: 0.0, rho_total: 0, clamp_events: 0, leaps: 0, p_saturated: 0, thinning_draws: 0 };
    let k_count = network.num_reactions();
    let mut props = vec![0.0; k_count];
    // Per-sojourn weights, evaluated once (the state is constant between
    // jumps, unlike the tau-leap case where interpolated states differ).
    let sensitive = derivs.sensitive_reactions();
    let mut rvals = vec![0.0; sensitive.len()];
    let mut state = network.init.clone();
    let mut t = 0.0;
    while t < t_end {
        let total = network.propensities(&state, params, &mut props)?;
        let (sojourn, fires) = if total > 0.0 {
            let wait = main.exponential(total)?;
            if t + wait < t_end {
                (wait, true)
            } else {
                (t_end - t, false)
            }
        } else {
            (t_end - t, false)
        };
        trace.leaps += 1;
        let mut weight = 0.0;
        for (slot, &k) in sensitive.iter().enumerate() {
            let d = derivs
                .eval(k, &state, params)
                .map_err(|source| SimError::Derivative { reaction: k, source })?;
            rvals[slot] = d * sojourn;
            weight += d.abs() * sojourn;
        }
        let eta = compute_eta(weight, c);
        let mut sigmas: Vec<f64> =
            (0..eta).map(|_| t + main.next_uniform() * sojourn).collect();
        sigmas.sort_by(|a, b| a.partial_cmp(b).expect("interior times are finite"));
        for &sigma_j in &sigmas {
            for (slot, &k) in sensitive.iter().enumerate() {
                let r = rvals[slot];
                if r == 0.0 {
                    continue;
                }
                trace.thinning_draws += 1;
                let p_raw = r.abs() / (c * eta as f64);
                let p = p_raw.min(1.0);
                if p_raw >= 1.0 {
                    trace.p_saturated += 1;
                }
                if main.bernoulli(p) {
                    trace.rho_total += 1;
                    let mut shifted = state.clone();
                    apply_stoichiometry(&mut shifted, &network.reactions[k].delta, 1);
                    let mut aux = aux_root.derive(aux_counter);
                    aux_counter += 1;
                    let diff = coupled_difference_exact(
                        network,
                        params,
                        state.clone(),
                        shifted,
                        sigma_j,
                        t_end,
                        &mut aux,
                    )?;
                    acc.add(r / (p * eta as f64) * diff);
                }
            }
        }
        if fires {
            let k = select_reaction(&props, total, main.next_uniform());
            trace.clamp_events +=
                apply_stoichiometry(&mut state, &network.reactions[k].delta, 1) as u64;
            t += sojourn;
        } else {
            t = t_end;
        }
    }
    trace.value = acc.value();
    if !trace.value.is_finite() {
        return Err(SimError::NonFiniteSample);
    }
    Ok(trace)
}
