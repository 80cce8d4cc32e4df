//! Explicit Poisson tau-leaping with a fixed maximum step.
//!
//! The kernel advances in steps of `min(tau_max, t_end - t)`, drawing one
//! Poisson firing count per reaction with propensities held at the leap's
//! start state. On top of the plain path simulation this module provides:
//!
//! * Poisson-bridge interpolation ([`leap_with_interpolation`]): conditional
//!   on a leap, states at intermediate times are filled in segment by
//!   segment so that the total over the leap keeps the one-shot law.
//! * A split-coupled two-path difference ([`coupled_difference_tau`]) that
//!   leaps a pair of same-parameter paths with shared Poisson counts on the
//!   common rate and stops once they meet.
//! * Pair simulations for finite differences: shared-count common channels
//!   ([`simulate_cfd_pair_tau`]) and shared per-channel streams with
//!   common-uniform Poisson draws ([`simulate_crp_pair_tau`]).

use crate::error::SimError;
use crate::model::{apply_stoichiometry, ParameterSet, ReactionNetwork, State};
use crate::rng::{normal_quantile, poisson_inversion, RngStream};

/// Step size at time `t`: the configured maximum, clipped to the horizon.
pub fn get_tau(tau_max: f64, t: f64, t_end: f64) -> f64 {
    assert!(tau_max > 0.0, "tau_max must be positive");
    assert!(t < t_end, "get_tau called at or past the horizon");
    tau_max.min(t_end - t)
}

/// Draws one Poisson firing count per reaction over a window of length
/// `dt`, with propensities evaluated at `z`.
pub fn get_reaction_firings(
    network: &ReactionNetwork,
    params: &ParameterSet,
    z: &State,
    dt: f64,
    stream: &mut RngStream,
) -> Result<Vec<u64>, SimError> {
    let mut props = vec![0.0; network.num_reactions()];
    let mut out = vec![0u64; network.num_reactions()];
    network.propensities(z, params, &mut props)?;
    draw_firings(&props, dt, stream, &mut out)?;
    Ok(out)
}

#[inline]
fn draw_firings(
    props: &[f64],
    dt: f64,
    stream: &mut RngStream,
    out: &mut [u64],
) -> Result<(), SimError> {
    for (o, &p) in out.iter_mut().zip(props) {
        *o = stream.poisson(p * dt)?;
    }
    Ok(())
}

/// Result of a path simulation, with the bookkeeping the estimators report.
#[derive(Debug, Clone, PartialEq)]
pub struct TauLeapPath {
    pub state: State,
    pub leaps: u64,
    pub clamp_events: u64,
}

/// Simulates a single tau-leap path from `(t, state)` to exactly `t_end`.
pub fn simulate_tauleap(
    network: &ReactionNetwork,
    params: &ParameterSet,
    mut state: State,
    mut t: f64,
    t_end: f64,
    tau_max: f64,
    stream: &mut RngStream,
) -> Result<TauLeapPath, SimError> {
    let k_count = network.num_reactions();
    let mut props = vec![0.0; k_count];
    let mut firings = vec![0u64; k_count];
    let mut leaps = 0u64;
    let mut clamp_events = 0u64;
    while t < t_end {
        let tau = get_tau(tau_max, t, t_end);
        let clipped = t_end - t <= tau_max;
        network.propensities(&state, params, &mut props)?;
        draw_firings(&props, tau, stream, &mut firings)?;
        for (&f, reaction) in firings.iter().zip(&network.reactions) {
            if f > 0 {
                clamp_events += apply_stoichiometry(&mut state, &reaction.delta, f) as u64;
            }
        }
        leaps += 1;
        // Land on the horizon exactly: a clipped step means tau == t_end - t
        // and floating addition may fall an ulp short, which would spin on
        // vanishing steps.
        t = if clipped { t_end } else { t + tau };
    }
    Ok(TauLeapPath { state, leaps, clamp_events })
}

/// One leap of length `tau` from `(t, z)`, materialized at the sorted
/// interior times `sigmas` by drawing the firings segment by segment
/// (Poisson over each gap, propensities held at `z` throughout). The
/// concatenation of segments reproduces the one-shot leap in law.
#[derive(Debug, Clone)]
pub struct LeapFrame {
    pub t: f64,
    pub tau: f64,
    /// Interior times, ascending, within [t, t + tau].
    pub sigmas: Vec<f64>,
    /// State at each interior time.
    pub states: Vec<State>,
    /// State at t + tau.
    pub end_state: State,
    pub clamp_events: u64,
}

/// Builds a [`LeapFrame`] at caller-chosen interior times (must be sorted
/// and lie in `[t, t + tau]`). Exposed separately so tests can pin the
/// interior times; estimator code goes through [`leap_with_interpolation`].
pub fn leap_at_times(
    network: &ReactionNetwork,
    params: &ParameterSet,
    z: &State,
    t: f64,
    tau: f64,
    sigmas: Vec<f64>,
    stream: &mut RngStream,
) -> Result<LeapFrame, SimError> {
    let k_count = network.num_reactions();
    let mut props = vec![0.0; k_count];
    network.propensities(z, params, &mut props)?;
    let mut firings = vec![0u64; k_count];
    let mut clamp_events = 0u64;
    let mut states = Vec::with_capacity(sigmas.len());
    let mut current = z.clone();
    let mut prev_time = t;
    for &sigma in &sigmas {
        debug_assert!(sigma >= prev_time && sigma <= t + tau);
        let dt = (sigma - prev_time).max(0.0);
        draw_firings(&props, dt, stream, &mut firings)?;
        for (&f, reaction) in firings.iter().zip(&network.reactions) {
            if f > 0 {
                clamp_events += apply_stoichiometry(&mut current, &reaction.delta, f) as u64;
            }
        }
        states.push(current.clone());
        prev_time = sigma;
    }
    let dt = (t + tau - prev_time).max(0.0);
    draw_firings(&props, dt, stream, &mut firings)?;
    for (&f, reaction) in firings.iter().zip(&network.reactions) {
        if f > 0 {
            clamp_events += apply_stoichiometry(&mut current, &reaction.delta, f) as u64;
        }
    }
    Ok(LeapFrame { t, tau, sigmas, states, end_state: current, clamp_events })
}

/// One leap with `eta` uniformly placed interior times (sorted ascending;
/// stable sort, so exact ties keep draw order).
pub fn leap_with_interpolation(
    network: &ReactionNetwork,
    params: &ParameterSet,
    z: &State,
    t: f64,
    tau: f64,
    eta: u64,
    stream: &mut RngStream,
) -> Result<LeapFrame, SimError> {
    let mut sigmas: Vec<f64> = (0..eta).map(|_| t + stream.next_uniform() * tau).collect();
    sigmas.sort_by(|a, b| a.partial_cmp(b).expect("interior times are finite"));
    leap_at_times(network, params, z, t, tau, sigmas, stream)
}

/// Difference of the observable between two same-parameter tau-leap paths
/// started at `(z1, z2)` at time `t`: returns f(path from z2) - f(path from
/// z1) at `t_end`.
///
/// Each step leaps both paths with a split coupling, channel by channel in
/// index order: the shared Poisson count at rate min(lambda_k(z1),
/// lambda_k(z2)) feeds both paths and independent residual counts make up
/// each marginal rate. States update within the channel loop, so channel
/// k+1 sees the updates of channel k; time advances once per step. Paths
/// that meet stay met (same parameters, shared counts), so the walk stops
/// at coincidence.
#[allow(clippy::too_many_arguments)]
pub fn coupled_difference_tau(
    network: &ReactionNetwork,
    params: &ParameterSet,
    mut z1: State,
    mut z2: State,
    mut t: f64,
    t_end: f64,
    tau_max: f64,
    stream: &mut RngStream,
) -> Result<f64, SimError> {
    let k_count = network.num_reactions();
    while z1 != z2 && t < t_end {
        let tau = get_tau(tau_max, t, t_end);
        let clipped = t_end - t <= tau_max;
        for k in 0..k_count {
            let la = network.propensity(k, &z1, params)?;
            let lb = network.propensity(k, &z2, params)?;
            let common = la.min(lb);
            let shared = stream.poisson(common * tau)?;
            let own1 = stream.poisson((la - common) * tau)?;
            let own2 = stream.poisson((lb - common) * tau)?;
            let delta = &network.reactions[k].delta;
            if shared + own1 > 0 {
                apply_stoichiometry(&mut z1, delta, shared + own1);
            }
            if shared + own2 > 0 {
                apply_stoichiometry(&mut z2, delta, shared + own2);
            }
        }
        t = if clipped { t_end } else { t + tau };
    }
    if z1 == z2 {
        return Ok(0.0);
    }
    Ok(network.observe(&z2, params)? - network.observe(&z1, params)?)
}

/// One coupled finite-difference pair under the tau-leap kernel: per leap
/// and channel, a shared Poisson count at the smaller of the two paths'
/// rates plus independent residuals, all propensities held at the leap's
/// start states.
pub fn simulate_cfd_pair_tau(
    network: &ReactionNetwork,
    params_minus: &ParameterSet,
    params_plus: &ParameterSet,
    t_end: f64,
    tau_max: f64,
    stream: &mut RngStream,
) -> Result<(TauLeapPath, TauLeapPath), SimError> {
    let k_count = network.num_reactions();
    let mut z1 = network.init.clone();
    let mut z2 = network.init.clone();
    let mut pa = vec![0.0; k_count];
    let mut pb = vec![0.0; k_count];
    let mut t = 0.0;
    let mut leaps = 0u64;
    let (mut clamps1, mut clamps2) = (0u64, 0u64);
    while t < t_end {
        let tau = get_tau(tau_max, t, t_end);
        let clipped = t_end - t <= tau_max;
        network.propensities(&z1, params_minus, &mut pa)?;
        network.propensities(&z2, params_plus, &mut pb)?;
        for k in 0..k_count {
            let common = pa[k].min(pb[k]);
            let shared = stream.poisson(common * tau)?;
            let own1 = stream.poisson((pa[k] - common) * tau)?;
            let own2 = stream.poisson((pb[k] - common) * tau)?;
            let delta = &network.reactions[k].delta;
            if shared + own1 > 0 {
                clamps1 += apply_stoichiometry(&mut z1, delta, shared + own1) as u64;
            }
            if shared + own2 > 0 {
                clamps2 += apply_stoichiometry(&mut z2, delta, shared + own2) as u64;
            }
        }
        leaps += 1;
        t = if clipped { t_end } else { t + tau };
    }
    Ok((
        TauLeapPath { state: z1, leaps, clamp_events: clamps1 },
        TauLeapPath { state: z2, leaps, clamp_events: clamps2 },
    ))
}

/// Two Poisson draws with means `r1` and `r2` from a single uniform, so
/// equal means give equal counts and nearby means give highly correlated
/// counts. Small means invert the exact CDF; means of 10 or more map the
/// shared uniform through a normal approximation, which keeps the pair
/// correlated even when the two means straddle the switch.
pub fn shared_poisson_pair(stream: &mut RngStream, r1: f64, r2: f64) -> (u64, u64) {
    debug_assert!(r1 >= 0.0 && r2 >= 0.0);
    if r1 == 0.0 && r2 == 0.0 {
        return (0, 0);
    }
    let u = stream.next_uniform();
    (shared_poisson_draw(r1, u), shared_poisson_draw(r2, u))
}

fn shared_poisson_draw(r: f64, u: f64) -> u64 {
    if r == 0.0 {
        0
    } else if r < 10.0 {
        poisson_inversion(r, u)
    } else {
        // Guard the quantile's open-interval domain; next_uniform can be 0.
        let u = u.max(f64::MIN_POSITIVE);
        let n = r + r.sqrt() * normal_quantile(u) + 0.5;
        if n <= 0.0 {
            0
        } else {
            n as u64
        }
    }
}

/// One common-reaction-path pair under the tau-leap kernel. Channel k of
/// leap i draws from the one-shot stream derive(derive(sample, k), i); both
/// paths' counts for that channel come from the same uniform via
/// [`shared_poisson_pair`].
pub fn simulate_crp_pair_tau(
    network: &ReactionNetwork,
    params_minus: &ParameterSet,
    params_plus: &ParameterSet,
    t_end: f64,
    tau_max: f64,
    sample_stream: &RngStream,
) -> Result<(TauLeapPath, TauLeapPath), SimError> {
    let k_count = network.num_reactions();
    let channel_roots: Vec<RngStream> =
        (0..k_count).map(|k| sample_stream.derive(k as u64)).collect();
    let mut z1 = network.init.clone();
    let mut z2 = network.init.clone();
    let mut pa = vec![0.0; k_count];
    let mut pb = vec![0.0; k_count];
    let mut t = 0.0;
    let mut leap_index = 0u64;
    let (mut clamps1, mut clamps2) = (0u64, 0u64);
    while t < t_end {
        let tau = get_tau(tau_max, t, t_end);
        let clipped = t_end - t <= tau_max;
        network.propensities(&z1, params_minus, &mut pa)?;
        network.propensities(&z2, params_plus, &mut pb)?;
        for k in 0..k_count {
            let mut leap_stream = channel_roots[k].derive(leap_index);
            let (n1, n2) = shared_poisson_pair(&mut leap_stream, pa[k] * tau, pb[k] * tau);
            let delta = &network.reactions[k].delta;
            if n1 > 0 {
                clamps1 += apply_stoichiometry(&mut z1, delta, n1) as u64;
            }
            if n2 > 0 {
                clamps2 += apply_stoichiometry(&mut z2, delta, n2) as u64;
            }
        }
        leap_index += 1;
        t = if clipped { t_end } else { t + tau };
    }
    Ok((
        TauLeapPath { state: z1, leaps: leap_index, clamp_events: clamps1 },
        TauLeapPath { state: z2, leaps: leap_index, clamp_events: clamps2 },
    ))
}
