use std::f64::consts::PI;

use proptest::prelude::*;
use revlab::busemann::{busemann, lemma_constants, ray_directions, LemmaPlan, Ray};
use revlab::distance::{distance, DistancePlan};
use revlab::warp::{RadialCurvature, SurfaceModel, DEFAULT_TOL};

fn plane() -> SurfaceModel {
    SurfaceModel::new(RadialCurvature::plane(), 1e6, DEFAULT_TOL).unwrap()
}

fn cone() -> SurfaceModel {
    SurfaceModel::new(RadialCurvature::smoothed_cone(0.25).unwrap(), 1e6, DEFAULT_TOL).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn busemann_is_one_lipschitz(
        t1 in 0.5f64..6.0, th1 in -3.0f64..3.0,
        t2 in 0.5f64..6.0, th2 in -3.0f64..3.0,
    ) {
        let s = cone();
        let plan = DistancePlan::default();
        let ray = Ray::meridian(0.0);
        let a = busemann(&s, &ray, (t1, th1), None, &plan).unwrap();
        let b = busemann(&s, &ray, (t2, th2), None, &plan).unwrap();
        let d = distance(&s, (t1, th1), (t2, th2)).unwrap().d;
        prop_assert!((a.value - b.value).abs() <= d + a.eps + b.eps);
    }

    #[test]
    fn horizon_estimates_increase_and_stay_below_the_start_distance(
        t in 0.5f64..8.0, th in -3.1f64..3.1,
    ) {
        let s = plane();
        let e = busemann(&s, &Ray::meridian(0.0), (t, th), None, &DistancePlan::default()).unwrap();
        prop_assert!(e.converged);
        for w in e.history.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-9);
        }
        prop_assert!(e.history.iter().all(|h| h.1 <= e.upper + 1e-9));
        prop_assert!((e.value - t * th.cos()).abs() < e.eps + 1e-6);
    }
}

#[test]
fn lemma_constants_are_ordered() {
    let k = lemma_constants(&cone(), &LemmaPlan::default(), &DistancePlan::default()).unwrap();
    assert!((k.lambda0 - PI / 6.0).abs() < 1e-9);
    assert!(k.lambda0 > 0.0 && k.r1 > 0.0);
    assert!(k.r1 <= k.r2 && k.r2 < k.r3);
    assert!(k.tail_at_r1 < k.lambda0 && k.tail_below_r1 >= k.lambda0);
    assert!(k.r3_diagnostics.margin >= 0.0);
}

#[test]
fn ray_directions_have_diameter_at_most_pi() {
    let para = SurfaceModel::new(RadialCurvature::Paraboloid, 50.0, DEFAULT_TOL).unwrap();
    let plan = DistancePlan::default();
    let off_pole = ray_directions(&para, (2.0, 0.0), 24, None, &plan).unwrap();
    assert!(off_pole.diameter_lower <= off_pole.diameter_upper && off_pole.diameter_upper <= PI);
    assert!(off_pole.samples.iter().any(|s| !s.is_ray));
    let pole = ray_directions(&para, (0.0, 0.0), 24, None, &plan).unwrap();
    assert!(pole.samples.iter().all(|s| s.is_ray));
}
