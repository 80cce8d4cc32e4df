//! End-to-end accuracy gate for the estimators, run against closed-form
//! birth-death sensitivities and frozen reference values for the larger
//! models. Each test prints one PASS/FAIL line (visible with
//! `--nocapture` or on failure) and asserts the same condition.
//!
//! Extended, longer-running variants of the toggle-switch and
//! repressilator checks are `#[ignore]`d; run them with
//! `cargo test --test acceptance -- --ignored`.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};
use taupath::estimate::{estimate, EstimateOptions, Method};
use taupath::exact::coupled_difference_exact;
use taupath::model::{ParameterSet, ReactionNetwork};
use taupath::rng::RngStream;
use taupath::stats::Moments;
use taupath::tauleap::coupled_difference_tau;

/// Exact birth-death sensitivity d/dtheta2 E[X(T)] at theta1=10,
/// theta2=0.1, x0=0.
fn bd_sensitivity(t: f64) -> f64 {
    let (theta1, theta2) = (10.0, 0.1);
    let e = (-theta2 * t).exp();
    -theta1 / (theta2 * theta2) * (1.0 - e) + theta1 / theta2 * t * e
}

/// Analytic centered difference of the birth-death mean in theta2 with
/// width h around 0.1: (g(0.1 + h/2) - g(0.1 - h/2)) / h.
fn bd_centered_difference(t: f64, h: f64) -> f64 {
    let g = |theta2: f64| 10.0 / theta2 * (1.0 - (-theta2 * t).exp());
    (g(0.1 + h / 2.0) - g(0.1 - h / 2.0)) / h
}

fn load_model(name: &str) -> ReactionNetwork {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read bundled model {path}: {e}"));
    ReactionNetwork::parse(&text).unwrap_or_else(|e| panic!("{name} does not parse: {e}"))
}

fn report(criterion: &str, ok: bool, detail: &str) {
    println!("{} {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{criterion}: {detail}");
}

#[test]
fn criterion_01_exact_integral_path_is_unbiased_on_birth_death() {
    let net = load_model("birth_death.model");
    let mut details = Vec::new();
    let mut ok = true;
    for (t_end, seed) in [(5.0, 101u64), (10.0, 102)] {
        let truth = bd_sensitivity(t_end);
        let mut opts = EstimateOptions::new(Method::EIpa, "theta2", t_end, 100_000);
        opts.seed = seed;
        let est = estimate(&net, &opts).unwrap();
        let gap = (est.mean - truth).abs();
        let band = 3.0 * est.stddev_of_estimator;
        ok &= gap <= band;
        details.push(format!(
            "T={t_end}: mean {:.3} vs {truth:.3}, |gap| {gap:.3} <= 3 sigma {band:.3}",
            est.mean
        ));
    }
    report("criterion 1 (exact integral-path unbiasedness)", ok, &details.join("; "));
}

#[test]
fn criterion_02_tau_integral_path_relative_error_stays_under_two_percent() {
    let net = load_model("birth_death.model");
    let mut details = Vec::new();
    let mut ok = true;
    for (t_end, seed) in [(5.0, 201u64), (10.0, 202)] {
        let truth = bd_sensitivity(t_end);
        let mut opts = EstimateOptions::new(Method::TauIpa, "theta2", t_end, 100_000);
        opts.tau_max = Some(0.5);
        opts.seed = seed;
        opts.reference = Some(truth);
        let est = estimate(&net, &opts).unwrap();
        let re = est.re_percent.unwrap();
        ok &= re <= 2.0;
        details.push(format!("T={t_end}: mean {:.3}, RE {re:.3}% <= 2%", est.mean));
    }
    report("criterion 2 (tau integral-path accuracy at tau_max 0.5)", ok, &details.join("; "));
}

#[test]
fn criterion_03_exact_finite_differences_match_the_analytic_centered_value() {
    let net = load_model("birth_death.model");
    let truth = bd_centered_difference(5.0, 0.1);
    let mut details = Vec::new();
    let mut ok = true;
    for (method, seed) in [(Method::ECfd, 301u64), (Method::ECrp, 302)] {
        let mut opts = EstimateOptions::new(method, "theta2", 5.0, 100_000);
        opts.seed = seed;
        let est = estimate(&net, &opts).unwrap();
        let gap = (est.mean - truth).abs();
        let band = 3.0 * est.stddev_of_estimator;
        ok &= gap <= band;
        details.push(format!(
            "{method}: mean {:.3} vs {truth:.3}, |gap| {gap:.3} <= 3 sigma {band:.3}",
            est.mean
        ));
    }
    report("criterion 3 (exact centered differences vs analytic value)", ok, &details.join("; "));
}

#[test]
fn criterion_04_tau_finite_differences_carry_the_expected_compound_bias() {
    let net = load_model("birth_death.model");
    let mut details = Vec::new();
    let mut ok = true;
    for (method, seed) in [(Method::TCfd, 401u64), (Method::TCrp, 402)] {
        let mut opts = EstimateOptions::new(method, "theta2", 5.0, 100_000);
        opts.tau_max = Some(0.5);
        opts.seed = seed;
        let est = estimate(&net, &opts).unwrap();
        ok &= (-88.5..=-84.5).contains(&est.mean);
        details.push(format!("{method}: mean {:.3} in [-88.5, -84.5]", est.mean));
    }
    report("criterion 4 (tau finite-difference compound bias)", ok, &details.join("; "));
}

#[test]
fn criterion_05_auxiliary_path_budget_is_respected() {
    let net = load_model("birth_death.model");
    let mut opts = EstimateOptions::new(Method::TauIpa, "theta2", 5.0, 10_000);
    opts.tau_max = Some(0.5);
    opts.seed = 501;
    let est = estimate(&net, &opts).unwrap();
    let rho = est.mean_rho_tot.unwrap();
    report(
        "criterion 5 (auxiliary budget control)",
        (9.0..=11.0).contains(&rho),
        &format!("mean auxiliary pairs {rho:.3} in [9, 11] at budget 10"),
    );
}

#[test]
fn criterion_06_bias_shrinks_with_the_step_size() {
    let net = load_model("birth_death.model");
    let truth = bd_sensitivity(10.0);
    let taus = [1.0, 0.5, 0.25, 0.125];
    let mut res = Vec::new();
    for (i, &tau) in taus.iter().enumerate() {
        let mut opts = EstimateOptions::new(Method::TauIpa, "theta2", 10.0, 100_000);
        opts.tau_max = Some(tau);
        opts.seed = 601 + i as u64;
        opts.reference = Some(truth);
        let est = estimate(&net, &opts).unwrap();
        res.push(est.re_percent.unwrap());
    }
    // Least-squares slope of RE against tau_max.
    let n = taus.len() as f64;
    let mx = taus.iter().sum::<f64>() / n;
    let my = res.iter().sum::<f64>() / n;
    let sxy: f64 = taus.iter().zip(&res).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = taus.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let halved = res[3] < res[0] / 2.0;
    report(
        "criterion 6 (tau-convergence trend)",
        halved && slope > 0.0,
        &format!(
            "RE% at tau {taus:?} = [{:.3}, {:.3}, {:.3}, {:.3}]; RE(0.125) < RE(1.0)/2: {halved}; \
             slope {slope:.3} > 0",
            res[0], res[1], res[2], res[3]
        ),
    );
}

fn toggle_gamma_check(samples: u64, criterion: &str) {
    let net = load_model("toggle_switch.model");
    let truth = 54.5721;
    let mut opts = EstimateOptions::new(Method::EIpa, "gamma", 10.0, samples);
    opts.seed = 701;
    let est = estimate(&net, &opts).unwrap();
    let gap = (est.mean - truth).abs();
    let band = 3.0 * est.stddev_of_estimator;
    report(
        criterion,
        gap <= band,
        &format!(
            "N={samples}: mean {:.3} vs {truth}, |gap| {gap:.3} <= 3 sigma {band:.3}",
            est.mean
        ),
    );
}

#[test]
fn criterion_07_toggle_switch_exponent_sensitivity() {
    toggle_gamma_check(10_000, "criterion 7 (toggle switch, reduced N)");
}

#[test]
#[ignore = "extended run (about a minute); enable with --ignored"]
fn criterion_07_extended_toggle_switch_at_full_sample_size() {
    toggle_gamma_check(100_000, "criterion 7 extended (toggle switch, N=100000)");
}

#[test]
fn criterion_08_all_methods_run_the_repressilator() {
    let net = load_model("repressilator.model");
    let mut details = Vec::new();
    for (i, method) in Method::ALL.into_iter().enumerate() {
        let mut opts = EstimateOptions::new(method, "alpha2", 10.0, 100);
        opts.seed = 801 + i as u64;
        if method.uses_tau_leap() {
            opts.tau_max = Some(0.01);
        }
        let est = estimate(&net, &opts)
            .unwrap_or_else(|e| panic!("criterion 8: {method} failed on the repressilator: {e}"));
        assert!(est.mean.is_finite());
        details.push(format!("{method} ok"));
    }
    report("criterion 8 (repressilator smoke, N=100)", true, &details.join(", "));
}

#[test]
#[ignore = "extended run (several minutes); enable with --ignored"]
fn criterion_08_extended_repressilator_sensitivity() {
    // Known discrepancy, kept failing on purpose: the tabulated reference
    // below is not reproducible from the bundled reaction set. Two
    // independent estimators agree on ~ +376 +- 17 for this configuration
    // (eIPA and eCFD), the full six-parameter sensitivity vector of the
    // bundled model is (alpha: -649, +376, -40; gamma: -2996, +231, -33),
    // and no relabeling of a cyclically symmetric ring can bridge the two
    // multisets. The reference instead coincides with d/dgamma1 = -2996 +- 35
    // (a protein's own-degradation sensitivity, pinned near -P/gamma for any
    // wiring), so it was most likely produced by a driver whose parameter
    // slots differ from the documented reaction set. The model file stays
    // as documented and this check stays anchored to the tabulated value.
    let net = load_model("repressilator.model");
    let truth = -2979.88;
    let mut opts = EstimateOptions::new(Method::EIpa, "alpha2", 10.0, 10_000);
    opts.seed = 802;
    let est = estimate(&net, &opts).unwrap();
    let gap = (est.mean - truth).abs();
    let band = 3.0 * est.stddev_of_estimator;
    report(
        "criterion 8 extended (repressilator, N=10000)",
        gap <= band,
        &format!("mean {:.1} vs {truth}, |gap| {gap:.1} <= 3 sigma {band:.1}", est.mean),
    );
}

#[test]
fn criterion_09_estimator_noise_decays_with_system_size() {
    let mut net = load_model("birth_death_volume.model");
    let vi = net.parameter_index("V").unwrap();
    let volumes = [1.0f64, 2.0, 4.0, 8.0];
    let mut rsds = Vec::new();
    for (i, &v) in volumes.iter().enumerate() {
        net.parameters[vi].value = v;
        let mut opts = EstimateOptions::new(Method::EIpa, "theta2", 10.0, 10_000);
        opts.m0 = v as u64;
        opts.seed = 901 + i as u64;
        let est = estimate(&net, &opts).unwrap();
        rsds.push(est.rsd.unwrap());
    }
    // Log-log least squares of RSD against V.
    let xs: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = rsds.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    report(
        "criterion 9 (noise decays like 1/sqrt(V))",
        (-0.65..=-0.35).contains(&slope),
        &format!(
            "RSD at V {volumes:?} = [{:.3}, {:.3}, {:.3}, {:.3}]; log-log slope {slope:.3} \
             in [-0.65, -0.35]",
            rsds[0], rsds[1], rsds[2], rsds[3]
        ),
    );
}

/// Distributional and structural property bundle. Each sub-check mirrors a
/// dedicated test in the property suite; this gate runs them at full scale
/// and reports a single line.
#[test]
fn criterion_10_property_bundle() {
    let mut failures: Vec<String> = Vec::new();

    // Poisson sampler chi-square at five means.
    for (i, &mean) in [0.1, 1.0, 10.0, 100.0, 1000.0].iter().enumerate() {
        let mut stream = RngStream::new(7000 + i as u64);
        let draws: Vec<u64> = (0..100_000).map(|_| stream.poisson(mean).unwrap()).collect();
        let p = chi_square_p(&draws, mean);
        if p <= 0.001 {
            failures.push(format!("poisson chi-square p {p:.5} at mean {mean}"));
        }
    }

    // Poisson-bridge consistency: interpolated leaps keep the one-shot law.
    {
        use taupath::tauleap::leap_with_interpolation;
        let net = load_model("birth_death.model");
        let params = ParameterSet::from_network(&net);
        for eta in [1u64, 2, 5] {
            let mut stream = RngStream::new(140 + eta);
            let mut m = Moments::default();
            for _ in 0..100_000 {
                let f =
                    leap_with_interpolation(&net, &params, &vec![100u64], 0.0, 0.5, eta, &mut stream)
                        .unwrap();
                m.push(f.end_state[0] as f64);
            }
            let se = (m.sample_variance() / 100_000.0).sqrt();
            if (m.mean() - 100.0).abs() > 3.0 * se || (m.sample_variance() - 10.0).abs() > 0.5 {
                failures.push(format!(
                    "bridge eta={eta}: mean {:.3}, var {:.3}",
                    m.mean(),
                    m.sample_variance()
                ));
            }
        }
    }

    // Coupled-difference leaf oracle, exact and tau kernels.
    {
        let net = load_model("birth_death.model");
        let params = ParameterSet::from_network(&net);
        let truth = (-1.0f64).exp();
        let mut m = Moments::default();
        let root = RngStream::new(1017);
        for i in 0..100_000u64 {
            let mut s = root.derive(i);
            m.push(
                coupled_difference_exact(&net, &params, vec![10], vec![11], 0.0, 10.0, &mut s)
                    .unwrap(),
            );
        }
        if (m.mean() - truth).abs() > 3.0 * m.estimator_stddev() {
            failures.push(format!("exact leaf oracle: mean {:.5} vs {truth:.5}", m.mean()));
        }
        let mut m = Moments::default();
        let root = RngStream::new(1018);
        for i in 0..100_000u64 {
            let mut s = root.derive(i);
            m.push(
                coupled_difference_tau(&net, &params, vec![10], vec![11], 0.0, 10.0, 0.5, &mut s)
                    .unwrap(),
            );
        }
        if (m.mean() - truth).abs() > 3.0 * m.estimator_stddev() + 0.02 * truth {
            failures.push(format!("tau leaf oracle: mean {:.5} vs {truth:.5}", m.mean()));
        }
    }

    // Coincidence absorption and zero-width identity. A pure-death pair is
    // certain to reach extinction, hence certain to couple; and stopping
    // at coincidence must agree with running the merged pair out.
    {
        use taupath::exact::{coupled_pair_exact, simulate_cfd_pair_exact};
        let text = "species: X\nparam d = 0.1\nreaction: X -> @ d * X\nobservable: X\ninit: 9\n";
        let dnet = ReactionNetwork::parse(text).unwrap();
        let dparams = ParameterSet::from_network(&dnet);
        for i in 0..100u64 {
            let mut s = RngStream::new(1031).derive(i);
            let (za, zb) = coupled_pair_exact(
                &dnet, &dparams, &dparams, vec![4], vec![9], 0.0, 200.0, &mut s, false,
            )
            .unwrap();
            if za != vec![0] || zb != vec![0] {
                failures.push(format!("pure-death pair not absorbed at zero (trial {i})"));
                break;
            }
        }
        let net = load_model("birth_death.model");
        let params = ParameterSet::from_network(&net);
        for i in 0..100u64 {
            let mut s1 = RngStream::new(1033).derive(i);
            let mut s2 = s1.clone();
            let stopped =
                coupled_difference_exact(&net, &params, vec![10], vec![13], 0.0, 5.0, &mut s1)
                    .unwrap();
            let (za, zb) = coupled_pair_exact(
                &net, &params, &params, vec![10], vec![13], 0.0, 5.0, &mut s2, false,
            )
            .unwrap();
            let merged = net.observe(&zb, &params).unwrap() - net.observe(&za, &params).unwrap();
            if stopped != merged {
                failures.push(format!("stop-at-coupling changed the difference (trial {i})"));
                break;
            }
        }
        for i in 0..50u64 {
            let mut s = RngStream::new(1032).derive(i);
            let (a, b) = simulate_cfd_pair_exact(&net, &params, &params, 5.0, &mut s).unwrap();
            if a != b {
                failures.push(format!("h=0 coupling produced distinct paths (trial {i})"));
                break;
            }
        }
    }

    // Seed determinism across worker counts.
    {
        let net = load_model("birth_death.model");
        let run = |workers| {
            let mut opts = EstimateOptions::new(Method::TauIpa, "theta2", 5.0, 2000);
            opts.tau_max = Some(0.5);
            opts.seed = 1040;
            opts.workers = workers;
            estimate(&net, &opts).unwrap()
        };
        let a = run(Some(1));
        let b = run(Some(3));
        if a.mean.to_bits() != b.mean.to_bits()
            || a.stddev_of_estimator.to_bits() != b.stddev_of_estimator.to_bits()
        {
            failures.push("estimate depends on worker count".into());
        }
    }

    // No negative state components: clamped overshoot lands at zero.
    {
        use taupath::tauleap::simulate_tauleap;
        let text = "species: X\nparam d = 1\nreaction: X -> @ d * X\nobservable: X\ninit: 3\n";
        let net = ReactionNetwork::parse(text).unwrap();
        let params = ParameterSet::from_network(&net);
        for i in 0..100u64 {
            let mut s = RngStream::new(1050).derive(i);
            let p = simulate_tauleap(&net, &params, vec![3], 0.0, 50.0, 50.0, &mut s).unwrap();
            if p.state != vec![0] {
                failures.push(format!("overshoot did not clamp to zero (trial {i})"));
                break;
            }
        }
    }

    // Symbolic-vs-finite-difference derivative agreement at 1e-4 relative.
    {
        let mut stream = RngStream::new(1060);
        'models: for name in ["toggle_switch.model", "repressilator.model"] {
            let net = load_model(name);
            let base = ParameterSet::from_network(&net);
            for _ in 0..200 {
                let state: Vec<u64> = (0..net.species.len())
                    .map(|_| 1 + (stream.next_uniform() * 50.0) as u64)
                    .collect();
                for theta in 0..base.values().len() {
                    let derivs = net.propensity_derivatives(theta);
                    let v = base.get(theta);
                    let eps = 1e-5 * v.abs().max(1.0);
                    let up = base.with_value(theta, v + eps);
                    let down = base.with_value(theta, v - eps);
                    for k in 0..net.num_reactions() {
                        let sym = derivs.eval(k, &state, &base).unwrap();
                        let fd = (net.propensity(k, &state, &up).unwrap()
                            - net.propensity(k, &state, &down).unwrap())
                            / (2.0 * eps);
                        if (sym - fd).abs() > 1e-4 * sym.abs().max(1e-6) {
                            failures.push(format!(
                                "{name}: derivative mismatch reaction {k} parameter {theta}: \
                                 {sym} vs {fd}"
                            ));
                            break 'models;
                        }
                    }
                }
            }
        }
    }

    report(
        "criterion 10 (property bundle)",
        failures.is_empty(),
        &if failures.is_empty() {
            "poisson law, bridge consistency, leaf oracles, absorption, h=0 identity, \
             worker determinism, clamping, symbolic derivatives"
                .to_string()
        } else {
            failures.join("; ")
        },
    );
}

/// Chi-square goodness-of-fit p-value against Poisson(mean); bins merged to
/// an expected count of at least five.
fn chi_square_p(draws: &[u64], mean: f64) -> f64 {
    let n = draws.len() as f64;
    let law = Poisson::new(mean).unwrap();
    let hi = (mean + 10.0 * mean.sqrt() + 30.0).ceil() as u64;
    let mut edges: Vec<(u64, u64, f64)> = Vec::new();
    let (mut lo, mut acc) = (0u64, 0.0f64);
    for k in 0..=hi {
        acc += law.pmf(k);
        if acc * n >= 5.0 {
            edges.push((lo, k, acc));
            lo = k + 1;
            acc = 0.0;
        }
    }
    let tail = 1.0 - edges.iter().map(|&(_, _, p)| p).sum::<f64>();
    let last = edges.last_mut().expect("at least one bin");
    last.1 = u64::MAX;
    last.2 += tail;

    let mut observed = vec![0.0f64; edges.len()];
    'draws: for &d in draws {
        for (i, &(a, b, _)) in edges.iter().enumerate() {
            if d >= a && d <= b {
                observed[i] += 1.0;
                continue 'draws;
            }
        }
    }
    let stat: f64 = edges
        .iter()
        .zip(&observed)
        .map(|(&(_, _, p), &obs)| (obs - p * n).powi(2) / (p * n))
        .sum();
    if edges.len() < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((edges.len() - 1) as f64).unwrap().cdf(stat)
}
