use proptest::prelude::*;
use wigner::spacetime::{
    boost, classify_interval, order_events, reversing_boost, FrameVelocity, IntervalKind, SpacetimeEvent,
};

fn coord() -> impl Strategy<Value = f64> {
    -50.0f64..50.0
}

fn event(id: &'static str) -> impl Strategy<Value = SpacetimeEvent> {
    (coord(), coord()).prop_map(move |(t, x)| SpacetimeEvent::new(id, t, x))
}

fn beta() -> impl Strategy<Value = FrameVelocity> {
    (-0.99f64..0.99).prop_map(|b| FrameVelocity::new(b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn interval_is_invariant(a in event("a"), b in event("b"), v in beta()) {
        let s2 = a.interval_to(&b);
        let s2b = boost(&a, v).interval_to(&boost(&b, v));
        let scale = (b.t - a.t).powi(2) + (b.x - a.x).powi(2);
        prop_assert!((s2b - s2).abs() <= 1e-9 * scale.max(1e-300) * v.gamma().powi(2));
    }

    #[test]
    fn boost_round_trips(a in event("a"), v in beta()) {
        let back = boost(&boost(&a, v), FrameVelocity::new(-v.beta()).unwrap());
        let tol = 1e-10 * (1.0 + a.t.abs() + a.x.abs()) * v.gamma().powi(2);
        prop_assert!((back.t - a.t).abs() <= tol);
        prop_assert!((back.x - a.x).abs() <= tol);
    }

    #[test]
    fn only_spacelike_pairs_reverse(a in event("a"), b in event("b"), v in beta()) {
        let dt = b.t - a.t;
        let dtb = boost(&b, v).t - boost(&a, v).t;
        if dt * dtb < 0.0 {
            prop_assert_eq!(classify_interval(&a, &b), IntervalKind::Spacelike);
        }
    }

    #[test]
    fn reversing_boost_reverses_spacelike_pairs(a in event("a"), b in event("b")) {
        match classify_interval(&a, &b) {
            IntervalKind::Spacelike => {
                // Pairs this close to the light cone need |β| ≥ 1 - 1e-15.
                prop_assume!((b.t - a.t).abs() < (b.x - a.x).abs() * (1.0 - 1e-9));
                let v = reversing_boost(&a, &b).unwrap();
                let dt = b.t - a.t;
                let dtb = boost(&b, v).t - boost(&a, v).t;
                if dt == 0.0 {
                    prop_assert!(dtb < 0.0);
                } else {
                    prop_assert!(dt * dtb < 0.0);
                }
            }
            _ => prop_assert!(reversing_boost(&a, &b).is_err()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn order_is_total_and_input_order_free(
        coords in prop::collection::vec((0i32..6, -20.0f64..20.0), 1..12),
        v in beta(),
        rot in 0usize..12,
    ) {
        // Integer times make exact ties common at β = 0.
        let events: Vec<SpacetimeEvent> = coords
            .iter()
            .enumerate()
            .map(|(i, &(t, x))| SpacetimeEvent::new(format!("e{i:02}"), t as f64, x))
            .collect();
        for frame in [FrameVelocity::REST, v] {
            let order = order_events(&events, frame);
            let mut shuffled = events.clone();
            shuffled.rotate_left(rot % events.len());
            shuffled.reverse();
            prop_assert_eq!(&order, &order_events(&shuffled, frame));
            prop_assert_eq!(order.ids.len(), events.len());
            for w in order.times.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-12);
            }
            // Sorting the already-sorted events changes nothing.
            let sorted: Vec<SpacetimeEvent> = order
                .ids
                .iter()
                .map(|id| events.iter().find(|e| &e.id == id).unwrap().clone())
                .collect();
            prop_assert_eq!(&order_events(&sorted, frame).ids, &order.ids);
        }
    }
}
