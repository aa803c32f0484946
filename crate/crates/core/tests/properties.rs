use clinic_window::queue::{stationary, QueueSpec, ServiceLaw, WindowLadder, WindowMasses};
use clinic_window::reward::{net_reward, EconomicParams, RewardConvention, RewardOptions};
use clinic_window::showup::{DelayMap, ShowupFamily, ShowupModel};
use clinic_window::window::{optimal_window, InfinityReference, WindowGrid, WindowSearchOptions};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = ServiceLaw> {
    prop_oneof![
        Just(ServiceLaw::Exponential),
        Just(ServiceLaw::Deterministic)
    ]
}

fn family() -> impl Strategy<Value = ShowupFamily> {
    prop_oneof![
        (0.0..=1.0f64).prop_map(ShowupFamily::kopach),
        Just(ShowupFamily::pure_exponential()),
        (0.0..=1.0f64, 0.0..=1.0f64, 0.001..1.0f64)
            .prop_map(|(a, b, c)| { ShowupFamily::saturating(a.min(b), a.max(b), c) }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn showup_is_a_nonincreasing_probability(f in family(), d in 0.0..2000.0f64, step in 0.0..50.0f64) {
        let a = f.at_delay(d).unwrap();
        let b = f.at_delay(d + step).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn finite_distributions_normalize_and_conserve_flow(
        law in law(),
        lambda in 0.5..40.0f64,
        mu in 1.0..30.0f64,
        k in 1usize..400,
    ) {
        let spec = QueueSpec::finite(lambda, mu, k, law).unwrap();
        let d = stationary(&spec, 1e-12).unwrap();
        let p = d.probs();
        prop_assert_eq!(p.len(), k + 1);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((d.total() - 1.0).abs() < 1e-10);
        let flow = lambda * (1.0 - d.blocking_prob()) - mu * (1.0 - d.empty_prob());
        prop_assert!(flow.abs() < 1e-9 * mu.max(1.0), "flow residual {}", flow);
    }

    #[test]
    fn ladder_agrees_with_direct_solves(
        law in law(),
        lambda in 1.0..30.0f64,
        k_max in 1usize..300,
        pick in 0.0..1.0f64,
    ) {
        let mu = 20.0;
        let ladder = WindowLadder::new(law, lambda, mu, k_max).unwrap();
        let k = 1 + ((k_max - 1) as f64 * pick) as usize;
        let direct = stationary(&QueueSpec::finite(lambda, mu, k, law).unwrap(), 1e-12).unwrap();
        let lad = ladder.distribution(k).unwrap();
        for (a, b) in lad.probs().iter().zip(direct.probs()) {
            prop_assert!((a - b).abs() < 1e-11, "K={} {} vs {}", k, a, b);
        }
        let q: Vec<f64> = (0..k_max).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let swept = ladder.masses(&q).unwrap()[k - 1];
        let single = WindowMasses::from_distribution(&direct, &q).unwrap();
        prop_assert!((swept.shows - single.shows).abs() < 1e-11);
        prop_assert!((swept.blocking - single.blocking).abs() < 1e-11);
    }

    #[test]
    fn reward_bounded_by_throughput_and_ancillary(
        law in law(),
        lambda in 1.0..30.0f64,
        k in 1usize..200,
        f in family(),
        theta in 0.0..3.0f64,
        xi in 0.0..1.0f64,
        credit in any::<bool>(),
    ) {
        let mu = 20.0;
        let d = stationary(&QueueSpec::finite(lambda, mu, k, law).unwrap(), 1e-12).unwrap();
        let opts = RewardOptions {
            convention: if credit { RewardConvention::NoShowIdleCredit } else { RewardConvention::Literal },
            ..Default::default()
        };
        let m = ShowupModel::new(f, DelayMap::SlotsOverMu);
        let r = net_reward(&d, &EconomicParams::new(theta, xi), &m, opts).unwrap();
        let admitted = lambda * (1.0 - d.blocking_prob());
        prop_assert!(r.visit_revenue <= admitted + 1e-9);
        prop_assert!(r.visit_revenue >= 0.0);
        prop_assert!(r.ancillary_revenue <= mu * xi + 1e-9);
        let sum = r.visit_revenue + r.ancillary_revenue - r.rejection_cost - r.overtime_cost;
        prop_assert!((r.total - sum).abs() < 1e-12);
    }

    #[test]
    fn optimizer_argmax_holds(
        law in law(),
        lambda in 15.0..19.99f64,
        p in 0.0..=1.0f64,
        theta in 0.0..3.0f64,
        xi in 0.0..1.0f64,
        step in 1usize..40,
    ) {
        let opts = WindowSearchOptions {
            grid: WindowGrid::new(1, 400, step).unwrap(),
            reference: InfinityReference::Cap(400),
            ..Default::default()
        };
        let m = ShowupModel::new(ShowupFamily::kopach(p), DelayMap::SlotsOverMu);
        let r = optimal_window(law, lambda, 20.0, &EconomicParams::new(theta, xi), &m, &opts).unwrap();
        let best = r.trace.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(r.best_finite.1, best);
        let first = r.trace.iter().find(|t| t.1 == best).unwrap().0;
        prop_assert_eq!(r.best_finite.0, first);
        match r.k_star.finite() {
            Some(k) => {
                prop_assert_eq!(k, first);
                prop_assert!(r.trace.iter().all(|t| r.t_at_k_star >= t.1));
            }
            None => prop_assert!(r.t_at_infinity >= best - opts.infinity_tolerance * r.t_at_infinity.abs()),
        }
    }
}
