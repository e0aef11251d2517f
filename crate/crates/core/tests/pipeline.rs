use std::sync::Arc;

use prevadim_core::rng::stream;
use prevadim_core::{box_count_curve, box_count_surface, build_levels, CantorConfig, FunctionHandle, Labeling, WitnessFunction};

fn witness(depth: usize, seed: u64) -> WitnessFunction {
    let lv = build_levels(&CantorConfig::tower(depth, 0.5).unwrap()).unwrap();
    WitnessFunction::new(Arc::new(lv), Labeling::from_seed(seed))
}

#[test]
fn surface_boxes_are_columns_times_curve_boxes() {
    let w = witness(2, 4);
    let curve = FunctionHandle::witness(w.clone());
    let surface = FunctionHandle::witness(w.surface_extend(2).unwrap());
    for j in 3..=6 {
        let delta = 0.5f64.powi(j);
        let c = box_count_curve(&curve, delta, 8).unwrap();
        let s = box_count_surface(&surface, delta, 8).unwrap();
        assert_eq!(s, c * (1.0 / delta).ceil() as u64, "delta {delta}");
    }
}

#[test]
fn graph_marginal_is_nu() {
    let w = witness(2, 17);
    let lv = w.levels().clone();
    let f = FunctionHandle::weierstrass(1, 0.5, 3.0);
    let n = 20_000;
    let mut rng = stream(5, 0, 0);
    let mut a: Vec<f64> = (0..n).map(|_| w.sample_graph(&f, &mut rng).unwrap().graph[0]).collect();
    let mut rng = stream(6, 0, 0);
    let mut b: Vec<f64> = (0..n).map(|_| lv.sample_nu(&mut rng)).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    // two-sample KS distance
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < n {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 - j as f64).abs() / n as f64);
    }
    let crit = 1.95 * (2.0 / n as f64).sqrt();
    assert!(d < crit, "KS {d} vs {crit}");
}

#[test]
fn graph_heights_are_witness_plus_f() {
    let w = witness(2, 1);
    let f = FunctionHandle::linear(vec![3.0]);
    let mut rng = stream(2, 0, 0);
    for _ in 0..1000 {
        let g = w.sample_graph(&f, &mut rng).unwrap();
        assert_eq!(g.graph[1], w.eval_point(&g.point) + 3.0 * g.graph[0]);
    }
}
