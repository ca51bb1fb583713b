use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;

use obstacle_recon::dataset::{parse_data_points, write_data_points, DataPoint, Truth};
use obstacle_recon::filter::{
    cluster_and_count, cluster_and_count_hashed, filter_by_support, FilterConfig,
};
use obstacle_recon::ray::{trace_ray, RayState};
use obstacle_recon::reconstruct::CandidateSolution;
use obstacle_recon::region::{adjacent_regions, region_of, MeshSpec};
use obstacle_recon::{Domain, Point3, SpeedField, StepControl};

fn cube(half: f64) -> Domain {
    Domain::new_box(
        Point3::new(-half, -half, -half),
        Point3::new(half, half, half),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_gradient_matches_finite_differences(
        a in -1.0..1.0f64, b in -1.0..1.0f64,
        x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64,
    ) {
        let f = SpeedField::affine_xy(a, b, 3.0).unwrap();
        let p = Point3::new(x, y, z);
        let g = f.gradient(&p).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut e = Point3::zeros();
            e[i] = h;
            let fd = (f.speed(&(p + e)).unwrap() - f.speed(&(p - e)).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn reversed_ray_returns_to_its_start(
        x in 0.0..1.0f64, y in 0.0..1.0f64,
        phi in 0.3..(PI - 0.3), theta in 0.0..TAU, t in 0.05..0.4f64,
    ) {
        let f = SpeedField::affine_xy(1.0, 1.0, 1.0).unwrap();
        let ctl = StepControl::default();
        let dom = cube(6.0);
        let p = Point3::new(x, y, 0.0);
        let fwd = trace_ray(RayState::new(p, phi, theta), t, &ctl, &dom, &f).unwrap();
        let back = trace_ray(RayState { t: 0.0, ..fwd.last().reversed() }, t, &ctl, &dom, &f).unwrap();
        prop_assert!((back.last().pos - p).norm() < 1e-5);
    }

    #[test]
    fn mirror_symmetry_about_the_diagonal(theta in 0.0..FRAC_PI_2, t in 0.1..0.8f64) {
        let f = SpeedField::affine_xy(1.0, 1.0, 1.0).unwrap();
        let ctl = StepControl::default();
        let dom = cube(10.0);
        let a = trace_ray(RayState::new(Point3::zeros(), FRAC_PI_2, theta), t, &ctl, &dom, &f).unwrap();
        let b = trace_ray(RayState::new(Point3::zeros(), FRAC_PI_2, FRAC_PI_2 - theta), t, &ctl, &dom, &f).unwrap();
        let (p, q) = (a.last().pos, b.last().pos);
        prop_assert!((p.x - q.y).abs() < 1e-6 && (p.y - q.x).abs() < 1e-6 && p.z.abs() < 1e-12);
    }

    #[test]
    fn adjacency_is_symmetric(n_v in 1usize..10, seed in any::<u64>()) {
        let mesh = MeshSpec::new(4.0, n_v).unwrap();
        let r = (seed % mesh.region_count() as u64) as usize;
        for s in adjacent_regions(r, &mesh) {
            prop_assert!(adjacent_regions(s, &mesh).contains(&r));
        }
    }

    #[test]
    fn every_point_has_one_region(x in -2.0..2.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64, n_v in 1usize..12) {
        let mesh = MeshSpec::new(4.0, n_v).unwrap();
        let id = region_of(&Point3::new(x, y, z), &mesh).unwrap();
        prop_assert!(id < mesh.region_count());
        let idx = mesh.indices_from_id(id);
        let b = mesh.cube_side();
        for (i, v) in [x, y, z].iter().enumerate() {
            let lo = -2.0 + (idx[i] - 1) as f64 * b;
            prop_assert!(*v >= lo - 1e-9 && *v <= lo + b + 1e-9);
        }
    }

    #[test]
    fn dataset_round_trip(rows in prop::collection::vec(
        (prop::array::uniform6(-10.0..10.0f64), 0.0..PI, 0.0..TAU, 0.0..5.0f64, "[A-Za-z0-9_]{1,6}", prop::option::of(prop::array::uniform5(-3.0..3.0f64))),
        0..12,
    )) {
        let points: Vec<DataPoint> = rows
            .into_iter()
            .map(|(c, phi, theta, t, period, truth)| DataPoint {
                transmitter: Point3::new(c[0], c[1], c[2]),
                receiver: Point3::new(c[3], c[4], c[5]),
                phi,
                theta,
                t,
                xi: 40_000.0,
                period,
                truth: truth.map(|v| Truth {
                    point: Point3::new(v[0], v[1], v[2]),
                    t_transmitter: v[3],
                    t_receiver: v[4],
                }),
            })
            .collect();
        let parsed = parse_data_points(&write_data_points(&points)).unwrap();
        prop_assert_eq!(parsed, points);
    }
}

/// Random candidates spread over a few pairs and two periods.
fn scene() -> impl Strategy<Value = (Vec<DataPoint>, Vec<CandidateSolution>)> {
    let data: Vec<DataPoint> = (0..6)
        .map(|k| DataPoint {
            transmitter: Point3::new(k as f64, 0.0, 0.0),
            receiver: Point3::new(0.0, k as f64 % 3.0, 0.0),
            phi: FRAC_PI_2,
            theta: 0.0,
            t: 1.0,
            xi: 1.0,
            period: if k < 4 { "A".into() } else { "B".into() },
            truth: None,
        })
        .collect();
    prop::collection::vec((0usize..6, -0.1..0.1f64, -0.1..0.1f64), 0..60).prop_map(move |raw| {
        let cands = raw
            .into_iter()
            .map(|(k, x, y)| CandidateSolution {
                data_point: k,
                point: Point3::new(x, y, 0.0),
                t_transmitter: 0.5,
                t_receiver: 0.5,
                receiver_phi: FRAC_PI_2,
                receiver_theta: 0.0,
                distance: 0.0,
                corrected_residual: 0.0,
            })
            .collect();
        (data.clone(), cands)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hashed_clustering_equals_naive((data, cands) in scene(), eps3 in 0.005..0.08f64) {
        let cfg = FilterConfig { eps3, ..FilterConfig::for_eps1(0.01) };
        prop_assert_eq!(
            cluster_and_count_hashed(&cands, &data, &cfg).unwrap(),
            cluster_and_count(&cands, &data, &cfg).unwrap()
        );
    }

    #[test]
    fn filter_ignores_input_order((data, cands) in scene(), seed in any::<u64>()) {
        let cfg = FilterConfig::for_eps1(0.01);
        let mut shuffled = cands.clone();
        let n = shuffled.len();
        if n > 1 {
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
        }
        let a = filter_by_support(&cluster_and_count(&cands, &data, &cfg).unwrap(), &cfg);
        let b = filter_by_support(&cluster_and_count(&shuffled, &data, &cfg).unwrap(), &cfg);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn retained_points_have_enough_pairs((data, cands) in scene()) {
        let cfg = FilterConfig::for_eps1(0.01);
        for c in cluster_and_count(&cands, &data, &cfg).unwrap() {
            let mut pairs: Vec<_> = c.members.iter().map(|&m| data[cands[m].data_point].pair_key(cfg.pair_quantum)).collect();
            pairs.sort();
            pairs.dedup();
            prop_assert_eq!(pairs.len(), c.count);
            prop_assert!(c.members.iter().all(|&m| (cands[m].point - c.representative).norm() <= cfg.eps3));
        }
    }
}

#[test]
fn region_numbering_is_injective() {
    for n_v in 1..=8 {
        let mesh = MeshSpec::new(1.0, n_v).unwrap();
        let mut seen = vec![false; mesh.region_count()];
        // indices are one-based
        for i in 1..=n_v {
            for j in 1..=n_v {
                for k in 1..=n_v {
                    let id = mesh.id_of([i, j, k]);
                    assert!(!seen[id], "duplicate id {id} for n_v = {n_v}");
                    seen[id] = true;
                    assert_eq!(mesh.indices_from_id(id), [i, j, k]);
                }
            }
        }
        assert!(seen.iter().all(|s| *s));
    }
}
