//! Property sweeps for the drift machinery: closed forms versus the
//! enumeration oracle, the far-out negative drift fit, certificate
//! non-negativity, and the g-drift bounds, all on randomized instances.

use shapestore_core::drift::{
    certificate_drift_check, expected_drift_f, expected_drift_g, jsq_drift_closed_form,
    jump_bound_check, pserp_drift_closed_form,
};
use shapestore_core::feasibility::{check_subset_condition, separating_functional};
use shapestore_core::net::{shape_magnitude, Configuration, StorageNetwork};
use shapestore_core::policy::{random_policy, Policy};
use shapestore_core::rational::{rat, Rat};
use shapestore_core::rng::CounterRng;
use shapestore_core::testgen::{random_net, random_positive_net};

fn draw_stream(seed: u64) -> impl FnMut() -> u64 {
    let rng = CounterRng::new(seed, 0);
    let mut ctr = 0u64;
    move || {
        ctr += 1;
        rng.draw(ctr)
    }
}

#[test]
fn closed_forms_equal_oracle_and_serp_is_constant() {
    let mut draw = draw_stream(41);
    let mut cases = 0;
    while cases < 250 {
        let n = 2 + (draw() % 5) as usize;
        let Some((net, alpha)) = random_positive_net(n, &mut draw) else {
            continue;
        };
        let x = Configuration((0..n).map(|_| draw() % 21).collect());
        let eps_den = 2 + (draw() % 6) as i64;
        let eps = alpha.min_entry().unwrap() * rat(1, eps_den);

        let jsq_oracle = expected_drift_f(&net, &Policy::Jsq, &x).unwrap().expected_delta_f;
        assert_eq!(jsq_drift_closed_form(&net, &alpha, &x).unwrap(), jsq_oracle);

        let pserp = Policy::pserp(&net, alpha.clone(), eps.clone()).unwrap();
        let report = expected_drift_f(&net, &pserp, &x).unwrap();
        assert_eq!(
            pserp_drift_closed_form(&net, &alpha, &eps, &x).unwrap(),
            report.expected_delta_f
        );

        let serp = Policy::serp(&net, alpha).unwrap();
        let serp_drift = expected_drift_f(&net, &serp, &x).unwrap();
        let expected = Rat::one() - Rat::new(1, n as i64).unwrap();
        assert_eq!(serp_drift.expected_delta_f, expected);
        assert_eq!(serp_drift.matches, Some(true));

        if !shape_magnitude(&x, &net).unwrap().is_zero() {
            jump_bound_check(&x, &net).unwrap();
        }
        cases += 1;
    }
}

/// Far from balance the JSQ and PSERP drifts go below `-c * sqrt(f)`. The
/// constants are existential, so the assertion is that a fit `(c, a)` with
/// `c > 0` exists over the sampled range, doubling `a` until it does.
#[test]
fn drift_turns_negative_far_out() {
    let mut draw = draw_stream(42);
    let mut nets = 0;
    while nets < 20 {
        let n = 2 + (draw() % 5) as usize;
        let Some((net, alpha)) = random_positive_net(n, &mut draw) else {
            continue;
        };
        if !net.is_connected() {
            continue;
        }
        let eps = alpha.min_entry().unwrap() * rat(1, 2);
        let pserp = Policy::pserp(&net, alpha.clone(), eps).unwrap();
        for policy in [Policy::Jsq, pserp] {
            let mut fitted = None;
            let mut a: u64 = 4;
            while a <= 64 {
                // Sample configurations with max deviation in [a, 4a].
                let mut worst: Option<f64> = None;
                let mut sampled = 0;
                let mut attempts = 0;
                while sampled < 40 && attempts < 4000 {
                    attempts += 1;
                    let x = Configuration((0..n).map(|_| draw() % (4 * a)).collect());
                    let f = shape_magnitude(&x, &net).unwrap();
                    let shape = shapestore_core::net::shape_of(&x, &net).unwrap();
                    let max_dev = shape.max_abs_scaled() as f64 / n as f64;
                    if max_dev < a as f64 {
                        continue;
                    }
                    sampled += 1;
                    let drift = expected_drift_f(&net, &policy, &x)
                        .unwrap()
                        .expected_delta_f
                        .to_f64();
                    let ratio = -drift / f.to_f64().sqrt();
                    worst = Some(worst.map_or(ratio, |w: f64| w.min(ratio)));
                }
                if let Some(c) = worst {
                    if c > 0.0 {
                        fitted = Some((c, a));
                        break;
                    }
                }
                a *= 2;
            }
            let (c, a) = fitted.unwrap_or_else(|| {
                panic!("no negative-drift fit found for {} on {net:?}", policy.kind())
            });
            assert!(c > 0.0, "c = {c}, a = {a}");
        }
        nets += 1;
    }
}

#[test]
fn certificates_dominate_every_policy_and_state() {
    let mut draw = draw_stream(43);
    let mut nets = 0;
    while nets < 15 {
        let n = 2 + (draw() % 4) as usize;
        let net = random_net(n, &mut draw);
        if net.validate().is_err() {
            continue;
        }
        let cond = check_subset_condition(&net).unwrap();
        if cond.slack.is_positive() {
            continue;
        }
        let cert = separating_functional(&net).unwrap();
        assert!(cert.b.iter().sum::<Rat>().is_zero());
        for trial in 0..30u64 {
            let x = Configuration((0..n).map(|_| draw() % 12).collect());
            let policy = random_policy(&net, trial);
            let v = certificate_drift_check(&net, &policy, &x, &cert.b).unwrap();
            assert!(!v.is_negative());
            let jsq_v = certificate_drift_check(&net, &Policy::Jsq, &x, &cert.b).unwrap();
            assert!(!jsq_v.is_negative());
        }
        nets += 1;
    }
}

#[test]
fn g_drift_bounds_hold_on_random_states() {
    let mut draw = draw_stream(44);
    let mut cases = 0;
    while cases < 60 {
        let n = 2 + (draw() % 4) as usize;
        let Some((net, alpha)) = random_positive_net(n, &mut draw) else {
            continue;
        };
        let x = Configuration((0..n).map(|_| draw() % 15).collect());
        if shape_magnitude(&x, &net).unwrap().is_zero() {
            continue;
        }
        let eps = alpha.min_entry().unwrap() * rat(1, 3);
        for policy in [
            Policy::Jsq,
            Policy::serp(&net, alpha.clone()).unwrap(),
            Policy::pserp(&net, alpha.clone(), eps.clone()).unwrap(),
        ] {
            // expected_drift_g internally asserts the concavity bound and the
            // per-outcome jump bound; a violation comes back as Err.
            let report = expected_drift_g(&net, &policy, &x).unwrap();
            assert!(report.max_jump_hi.to_f64() <= 4.0 + 1e-9);
        }
        cases += 1;
    }
}

#[test]
fn jsq_beats_every_sampled_policy() {
    let mut draw = draw_stream(45);
    let mut cases = 0;
    while cases < 400 {
        let n = 2 + (draw() % 5) as usize;
        let net = random_net(n, &mut draw);
        if net.validate().is_err() {
            continue;
        }
        let x = Configuration((0..n).map(|_| draw() % 21).collect());
        let policy = random_policy(&net, draw());
        shapestore_core::drift::jsq_optimality_check(&net, &x, &policy).unwrap();
        cases += 1;
    }

    // Tied case: on a balanced configuration every policy has the same drift.
    let net = StorageNetwork::new(
        3,
        vec![vec![0, 1], vec![0, 2], vec![1, 2]],
        vec![rat(1, 3), rat(1, 3), rat(1, 3)],
    );
    let x = Configuration(vec![4, 4, 4]);
    let policy = random_policy(&net, 0);
    let jsq = expected_drift_f(&net, &Policy::Jsq, &x).unwrap().expected_delta_f;
    let other = expected_drift_f(&net, &policy, &x).unwrap().expected_delta_f;
    assert_eq!(jsq, other);
    assert_eq!(jsq, rat(2, 3));
}
