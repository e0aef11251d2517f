use std::sync::Arc;

use proptest::prelude::*;

use prevadim_core::cantor::Location;
use prevadim_core::energy::{energy_mc, NuSampler};
use prevadim_core::rng::stream;
use prevadim_core::{build_levels, horizon, CantorConfig, CantorLevels, Labeling, Partitioning, SurfaceGrid, WitnessFunction};

fn levels(depth: usize, lambda: f64) -> Arc<CantorLevels> {
    Arc::new(build_levels(&CantorConfig::tower(depth, lambda).unwrap()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn increments_are_bounded_by_the_shared_prefix(seed in any::<u64>(), lab in any::<u64>(), n in 0usize..3) {
        let lv = levels(3, 0.5);
        let w = WitnessFunction::new(lv.clone(), Labeling::from_seed(lab));
        let mut rng = stream(seed, 0, 0);
        let (x, y) = lv.sample_pair_with_shared_depth(n, &mut rng).unwrap();
        let diff = (w.eval_point(&x) - w.eval_point(&y)).abs();
        prop_assert!(diff <= 0.5f64.powi(n as i32));
    }

    #[test]
    fn located_codes_round_trip(seed in any::<u64>(), lambda in 0.05f64..0.95) {
        let lv = levels(2, lambda);
        let mut rng = stream(seed, 1, 0);
        let code = lv.sample_point(&mut rng).code;
        let p = lv.point_from_code(code.clone(), 0.5).unwrap();
        prop_assert_eq!(lv.locate(p.x).unwrap(), Location::Inside(code));
    }

    #[test]
    fn gap_points_have_set_flanks(x in 0.0f64..1.0) {
        let lv = levels(2, 0.5);
        if let Location::Gap(g) = lv.locate(x).unwrap() {
            prop_assert!(g.left < x && x < g.right);
            prop_assert!((lv.start_of(&lv.right_flank(&g)) - g.right).abs() < 1e-12);
        }
    }

    #[test]
    fn horizon_is_monotone_and_contracting(
        a in prop::collection::vec(-5.0f64..5.0, 36),
        b in prop::collection::vec(-5.0f64..5.0, 36),
    ) {
        let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
        let ha = horizon(&SurfaceGrid::from_heights(6, a.clone(), "a").unwrap()).unwrap();
        let hb = horizon(&SurfaceGrid::from_heights(6, b.clone(), "b").unwrap()).unwrap();
        let hh = horizon(&SurfaceGrid::from_heights(6, hi, "max").unwrap()).unwrap();
        let sup = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        for i in 0..6 {
            prop_assert!(ha[i] <= hh[i] && hb[i] <= hh[i]);
            prop_assert!((ha[i] - hb[i]).abs() <= sup);
        }
    }

    #[test]
    fn cylinder_masses(lambda in 0.05f64..0.95, depth in 1usize..4) {
        let lv = levels(depth, lambda);
        for k in 1..=depth {
            let m = lv.count(k) as f64 * lv.length(k);
            prop_assert!((m - lv.measure(k)).abs() <= 1e-12 * m.max(1.0));
            prop_assert!(lv.measure(k) >= lambda - 1e-12);
            prop_assert!(lv.measure(k) <= lv.measure(k - 1) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn energies_do_not_depend_on_partitions(seed in any::<u64>(), p in 2usize..6) {
        let lv = levels(2, 0.5);
        let one = energy_mc(&NuSampler(&lv), 0.5, 20_000, seed, Partitioning::new(1)).unwrap();
        let many = energy_mc(&NuSampler(&lv), 0.5, 20_000, seed, Partitioning::new(p)).unwrap();
        prop_assert_eq!(one.mean.to_bits(), many.mean.to_bits());
        prop_assert_eq!(one.stderr.to_bits(), many.stderr.to_bits());
    }
}
