use fallgas::stats::MomentAccumulator;
use fallgas::{DensityProfile, FlightParams, ParabolicFlight, ScatterLaw};
use proptest::prelude::*;

fn flight(y0: f64, u_d: f64, g: f64) -> ParabolicFlight {
    ParabolicFlight::vertical(y0, u_d, FlightParams::new(g, 2).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn speed_squared_is_twice_g_depth(y0 in -50.0f64..-0.01, u in -1.0f64..1.0, g in 0.1f64..5.0, s in 0.0f64..1.0) {
        let f = flight(y0, u, g);
        let t = s * 3.0 * (-y0 / g).sqrt();
        let v = f.speed(t);
        let y = f.depth(t);
        prop_assert!((v * v - 2.0 * g * -y).abs() <= 1e-9 * (1.0 + v * v));
    }

    #[test]
    fn depth_never_exceeds_apex(y0 in -50.0f64..-0.01, u in -1.0f64..1.0, g in 0.1f64..5.0, s in 0.0f64..1.0) {
        let f = flight(y0, u, g);
        let t = s * 4.0 * (-y0 / g).sqrt();
        prop_assert!(f.apex_depth() <= 1e-12);
        prop_assert!(f.depth(t) <= f.apex_depth() + 1e-9 * (1.0 - y0));
    }

    #[test]
    fn arc_length_increases(y0 in -20.0f64..-0.1, u in -1.0f64..1.0, a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let f = flight(y0, u, 1.0);
        let (t1, t2) = if a < b { (a, b) } else { (b, a) };
        let (l1, l2) = (f.arc_length(t1), f.arc_length(t2));
        prop_assert!(l2 >= l1 - 1e-12);
        // the path is at least as long as its vertical travel
        prop_assert!(l2 - l1 >= (f.depth(t2) - f.depth(t1)).abs() - 1e-9);
    }

    #[test]
    fn hazard_is_additive(y0 in -20.0f64..-0.1, u in -1.0f64..1.0, lambda in 0.0f64..2.0, a in 0.0f64..1.5, b in 0.0f64..1.5) {
        let law = ScatterLaw::raw(DensityProfile::power_law(1.3, lambda).unwrap(), FlightParams::new(1.0, 2).unwrap());
        let f = law.flight_vertical(y0, u).unwrap();
        let (t1, t2) = if a < b { (a, b) } else { (b, a) };
        let whole = law.cumulative_hazard(&f, t2);
        let parts = law.cumulative_hazard(&f, t1) + law.hazard_between(&f, t1, t2);
        prop_assert!((whole - parts).abs() <= 1e-9 * (1.0 + whole));
        prop_assert!((law.survival(&f, t2) - (-whole).exp()).abs() <= 1e-12);
    }

    // For h = c|y|^l the flight from s*y0 is the flight from y0 with space
    // scaled by s and time by sqrt(s), so F scales by s^(l+1).
    #[test]
    fn power_law_hazard_scaling(y0 in -10.0f64..-0.1, u in -1.0f64..1.0, lambda in 0.0f64..2.0, s in 1.0f64..50.0, t in 0.01f64..2.0) {
        let law = ScatterLaw::raw(DensityProfile::power_law(0.7, lambda).unwrap(), FlightParams::new(1.5, 3).unwrap());
        let small = law.flight_vertical(y0, u).unwrap();
        let big = law.flight_vertical(s * y0, u).unwrap();
        let lhs = law.cumulative_hazard(&big, s.sqrt() * t);
        let rhs = s.powf(lambda + 1.0) * law.cumulative_hazard(&small, t);
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs), "{} vs {}", lhs, rhs);
        prop_assert!((big.depth(s.sqrt() * t) - s * small.depth(t)).abs() <= 1e-9 * s * (1.0 - y0));
    }

    #[test]
    fn accumulator_merge_matches_single_pass(xs in proptest::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let all: MomentAccumulator = xs.iter().copied().collect();
        let mut left: MomentAccumulator = xs[..cut].iter().copied().collect();
        let right: MomentAccumulator = xs[cut..].iter().copied().collect();
        left.merge(&right);
        prop_assert_eq!(left.count(), all.count());
        let scale = 1.0 + all.mean().abs();
        prop_assert!((left.mean() - all.mean()).abs() <= 1e-10 * scale);
        prop_assert!((left.variance() - all.variance()).abs() <= 1e-9 * (1.0 + all.variance()));
    }
}
