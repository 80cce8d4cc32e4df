//! Exact (event-by-event) simulation of reaction networks.
//!
//! Three entry styles live here:
//!
//! * [`simulate_ssa`]: the classic direct method for a single path.
//! * [`coupled_pair_exact`]: two paths advanced as one joint Markov chain
//!   with a split coupling — every reaction contributes a "both move"
//!   channel at the smaller of the two propensities plus one residual
//!   channel per path — which maximizes shared jumps and keeps the paths
//!   glued together once they meet (when their parameters agree).
//! * [`simulate_mnrm`] and [`simulate_crp_pair_exact`]: the modified next
//!   reaction method, where each reaction channel owns its own random
//!   stream. Running two parameter values against clones of the same
//!   channel streams gives finite differences with common reaction paths.

use crate::error::SimError;
use crate::model::{apply_stoichiometry, ParameterSet, ReactionNetwork, State};
use crate::rng::RngStream;

/// Picks the reaction whose cumulative propensity bracket contains
/// `u * total`. Skips zero channels; roundoff at the top end falls back to
/// the last positive channel.
pub(crate) fn select_reaction(props: &[f64], total: f64, u: f64) -> usize {
    let mut target = u * total;
    let mut chosen = None;
    for (k, &w) in props.iter().enumerate() {
        if w > 0.0 {
            chosen = Some(k);
            if target < w {
                break;
            }
            target -= w;
        }
    }
    chosen.expect("positive total propensity implies a positive channel")
}

/// Direct-method simulation from `(t, state)` to `t_end`. Returns the end
/// state and the number of reaction events fired.
pub fn simulate_ssa(
    network: &ReactionNetwork,
    params: &ParameterSet,
    mut state: State,
    mut t: f64,
    t_end: f64,
    stream: &mut RngStream,
) -> Result<(State, u64), SimError> {
    let mut props = vec![0.0; network.num_reactions()];
    let mut events = 0u64;
    while t < t_end {
        let total = network.propensities(&state, params, &mut props)?;
        if total <= 0.0 {
            break; // nothing can fire; the state holds to t_end
        }
        t += stream.exponential(total)?;
        if t >= t_end {
            break;
        }
        let k = select_reaction(&props, total, stream.next_uniform());
        apply_stoichiometry(&mut state, &network.reactions[k].delta, 1);
        events += 1;
    }
    Ok((state, events))
}

/// Advances two paths jointly under a split coupling until `t_end`.
///
/// Path a follows `params_a` from `za`, path b follows `params_b` from `zb`.
/// For each reaction the joint chain carries three channels, scanned in a
/// fixed order (shared, a-only, b-only) so runs are reproducible: the shared
/// channel fires in both paths at rate min(la, lb) and the residuals make up
/// each path's marginal rate. Marginally each path is an exact simulation of
/// its own network.
///
/// When the parameter sets are identical, state coincidence is absorbing:
/// once the paths meet they have identical propensities forever, so the
/// shared channels carry all the rate and the paths never separate. In that
/// case `stop_when_coupled` returns early (useful when only the difference
/// of the end values is needed); otherwise the merged path is continued to
/// `t_end` as a single simulation. With distinct parameter sets coincidence
/// is *not* absorbing and the joint chain always runs to `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn coupled_pair_exact(
    network: &ReactionNetwork,
    params_a: &ParameterSet,
    params_b: &ParameterSet,
    mut za: State,
    mut zb: State,
    mut t: f64,
    t_end: f64,
    stream: &mut RngStream,
    stop_when_coupled: bool,
) -> Result<(State, State), SimError> {
    let k_count = network.num_reactions();
    let mut pa = vec![0.0; k_count];
    let mut pb = vec![0.0; k_count];
    let same_params = params_a.values() == params_b.values();
    loop {
        if same_params && za == zb {
            if stop_when_coupled || t >= t_end {
                return Ok((za, zb));
            }
            let (merged, _) = simulate_ssa(network, params_a, za, t, t_end, stream)?;
            return Ok((merged.clone(), merged));
        }
        if t >= t_end {
            return Ok((za, zb));
        }
        let total_a = network.propensities(&za, params_a, &mut pa)?;
        let total_b = network.propensities(&zb, params_b, &mut pb)?;
        let mut shared = 0.0;
        for k in 0..k_count {
            shared += pa[k].min(pb[k]);
        }
        let total = total_a + total_b - shared;
        if total <= 0.0 {
            return Ok((za, zb));
        }
        t += stream.exponential(total)?;
        if t >= t_end {
            return Ok((za, zb));
        }
        // Channel scan: for each reaction in index order, shared then
        // a-residual then b-residual. Falling off the end (roundoff at the
        // top of the cumulative sum) keeps the last positive channel.
        let mut target = stream.next_uniform() * total;
        let mut fired: Option<(usize, bool, bool)> = None;
        'scan: for k in 0..k_count {
            let common = pa[k].min(pb[k]);
            for (w, in_a, in_b) in
                [(common, true, true), (pa[k] - common, true, false), (pb[k] - common, false, true)]
            {
                if w > 0.0 {
                    fired = Some((k, in_a, in_b));
                    if target < w {
                        break 'scan;
                    }
                    target -= w;
                }
            }
        }
        let (k, in_a, in_b) = fired.expect("positive total implies a positive channel");
        let delta = &network.reactions[k].delta;
        if in_a {
            apply_stoichiometry(&mut za, delta, 1);
        }
        if in_b {
            apply_stoichiometry(&mut zb, delta, 1);
        }
    }
}

/// Difference of the observable between two coupled paths with the *same*
/// parameters, started at `(z1, z2)` at time `t` and run to `t_end`:
/// returns f(path from z2) - f(path from z1). Exact zero once the paths
/// couple.
pub fn coupled_difference_exact(
    network: &ReactionNetwork,
    params: &ParameterSet,
    z1: State,
    z2: State,
    t: f64,
    t_end: f64,
    stream: &mut RngStream,
) -> Result<f64, SimError> {
    let (za, zb) =
        coupled_pair_exact(network, params, params, z1, z2, t, t_end, stream, true)?;
    if za == zb {
        return Ok(0.0);
    }
    Ok(network.observe(&zb, params)? - network.observe(&za, params)?)
}

/// One coupled finite-difference pair: both paths start from the model's
/// initial state at time zero and run to `t_end` under the split coupling,
/// one per parameter set.
pub fn simulate_cfd_pair_exact(
    network: &ReactionNetwork,
    params_minus: &ParameterSet,
    params_plus: &ParameterSet,
    t_end: f64,
    stream: &mut RngStream,
) -> Result<(State, State), SimError> {
    coupled_pair_exact(
        network,
        params_minus,
        params_plus,
        network.init.clone(),
        network.init.clone(),
        0.0,
        t_end,
        stream,
        false,
    )
}

/// Modified next reaction method: each channel k draws only from
/// `channel_streams[k]`, so two runs that share stream clones see the same
/// unit-exponential skeleton per channel regardless of parameter values.
pub fn simulate_mnrm(
    network: &ReactionNetwork,
    params: &ParameterSet,
    mut state: State,
    mut t: f64,
    t_end: f64,
    channel_streams: &mut [RngStream],
) -> Result<State, SimError> {
    let k_count = network.num_reactions();
    debug_assert_eq!(channel_streams.len(), k_count);
    let mut props = vec![0.0; k_count];
    // Internal (unit-rate) clocks: consumed time and next firing mark.
    let mut consumed = vec![0.0; k_count];
    let mut next_mark = Vec::with_capacity(k_count);
    for s in channel_streams.iter_mut() {
        next_mark.push(s.exponential(1.0)?);
    }
    while t < t_end {
        network.propensities(&state, params, &mut props)?;
        let mut best: Option<(usize, f64)> = None;
        for k in 0..k_count {
            if props[k] > 0.0 {
                let dt = ((next_mark[k] - consumed[k]) / props[k]).max(0.0);
                if best.is_none_or(|(_, b)| dt < b) {
                    best = Some((k, dt));
                }
            }
        }
        let Some((mu, dt)) = best else {
            break; // all channels blocked; state holds to t_end
        };
        if t + dt >= t_end {
            break;
        }
        t += dt;
        for k in 0..k_count {
            consumed[k] += props[k] * dt;
        }
        next_mark[mu] = consumed[mu] + channel_streams[mu].exponential(1.0)?;
        apply_stoichiometry(&mut state, &network.reactions[mu].delta, 1);
    }
    Ok(state)
}

/// One common-reaction-path finite-difference pair: channel streams are
/// derived from `sample_stream` (child k for reaction k), cloned, and fed to
/// two next-reaction runs that differ only in the parameter set.
pub fn simulate_crp_pair_exact(
    network: &ReactionNetwork,
    params_minus: &ParameterSet,
    params_plus: &ParameterSet,
    t_end: f64,
    sample_stream: &RngStream,
) -> Result<(State, State), SimError> {
    let k_count = network.num_reactions();
    let channels: Vec<RngStream> = (0..k_count).map(|k| sample_stream.derive(k as u64)).collect();
    let mut minus_streams = channels.clone();
    let minus = simulate_mnrm(
        network,
        params_minus,
        network.init.clone(),
        0.0,
        t_end,
        &mut minus_streams,
    )?;
    let mut plus_streams = channels;
    let plus = simulate_mnrm(
        network,
        params_plus,
        network.init.clone(),
        0.0,
        t_end,
        &mut plus_streams,
    )?;
    Ok((minus, plus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ReactionNetwork;

    fn birth_death() -> ReactionNetwork {
        ReactionNetwork::parse(
            "species: X\n\
             param theta1 = 10\n\
             param theta2 = 0.1\n\
             reaction: -> X @ theta1\n\
             reaction: X -> @ theta2 * X\n\
             observable: X\n\
             init: 0\n",
        )
        .unwrap()
    }

    #[test]
    fn frozen_network_returns_initial_state() {
        let net = ReactionNetwork::parse(
            "species: X\nparam k = 0\nreaction: -> X @ k\nobservable: X\ninit: 7\n",
        )
        .unwrap();
        let params = ParameterSet::from_network(&net);
        let mut s = RngStream::new(1);
        let (state, events) = simulate_ssa(&net, &params, net.init.clone(), 0.0, 5.0, &mut s).unwrap();
        assert_eq!(state, vec![7]);
        assert_eq!(events, 0);
    }

    #[test]
    fn birth_death_mean_matches_closed_form() {
        // E[X(T)] = (theta1/theta2)(1 - exp(-theta2 T)) = 63.212 at T = 10.
        let net = birth_death();
        let params = ParameterSet::from_network(&net);
        let root = RngStream::new(42);
        let n = 2000;
        let mut sum = 0.0;
        for i in 0..n {
            let mut s = root.derive(i);
            let (state, _) = simulate_ssa(&net, &params, net.init.clone(), 0.0, 10.0, &mut s).unwrap();
            sum += state[0] as f64;
        }
        let mean = sum / n as f64;
        let expect = 100.0 * (1.0 - (-1.0f64).exp());
        let band = 3.0 * expect.sqrt() / (n as f64).sqrt(); // Poisson limit law
        assert!((mean - expect).abs() < band, "mean {mean}, expect {expect}, band {band}");
    }

    #[test]
    fn event_count_matches_expected_firings() {
        // Expected events on [0, 10]: integral of total propensity =
        // theta1 T + (theta1 T - E[X(T)]) = 100 + 100/e = 136.79.
        let net = birth_death();
        let params = ParameterSet::from_network(&net);
        let root = RngStream::new(7);
        let n = 2000;
        let mut sum = 0.0;
        for i in 0..n {
            let mut s = root.derive(i);
            let (_, events) = simulate_ssa(&net, &params, net.init.clone(), 0.0, 10.0, &mut s).unwrap();
            sum += events as f64;
        }
        let mean = sum / n as f64;
        let expect = 100.0 + 100.0 * (-1.0f64).exp();
        assert!((mean - expect).abs() < 1.5, "mean {mean}, expect {expect}");
    }

    #[test]
    fn mnrm_mean_matches_direct_method_law() {
        let net = birth_death();
        let params = ParameterSet::from_network(&net);
        let root = RngStream::new(11);
        let n = 1500;
        let mut sum = 0.0;
        for i in 0..n {
            let sample = root.derive(i);
            let mut channels: Vec<RngStream> = (0..2).map(|k| sample.derive(k)).collect();
            let state =
                simulate_mnrm(&net, &params, net.init.clone(), 0.0, 5.0, &mut channels).unwrap();
            sum += state[0] as f64;
        }
        let mean = sum / n as f64;
        let expect = 100.0 * (1.0 - (-0.5f64).exp());
        let band = 3.0 * expect.sqrt() / (n as f64).sqrt();
        assert!((mean - expect).abs() < band, "mean {mean}, expect {expect}, band {band}");
    }

    #[test]
    fn coupled_pair_with_equal_starts_and_params_stays_identical() {
        let net = birth_death();
        let params = ParameterSet::from_network(&net);
        let mut s = RngStream::new(3);
        let (a, b) = coupled_pair_exact(
            &net,
            &params,
            &params,
            net.init.clone(),
            net.init.clone(),
            0.0,
            10.0,
            &mut s,
            false,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crp_pair_with_equal_params_is_identical() {
        let net = birth_death();
        let params = ParameterSet::from_network(&net);
        let sample = RngStream::new(5).derive(0);
        let (minus, plus) =
            simulate_crp_pair_exact(&net, &params, &params, 10.0, &sample).unwrap();
        assert_eq!(minus, plus);
    }

    #[test]
    fn coupled_difference_is_zero_for_identical_starts() {
        let net = birth_death();
        let params = ParameterSet::from_network(&net);
        let mut s = RngStream::new(9);
        let d =
            coupled_difference_exact(&net, &params, vec![40], vec![40], 0.0, 10.0, &mut s).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn select_reaction_walks_cumulative_brackets() {
        let props = [0.0, 2.0, 0.0, 3.0];
        assert_eq!(select_reaction(&props, 5.0, 0.0), 1);
        assert_eq!(select_reaction(&props, 5.0, 0.39), 1);
        assert_eq!(select_reaction(&props, 5.0, 0.41), 3);
        assert_eq!(select_reaction(&props, 5.0, 0.999999), 3);
    }
}
