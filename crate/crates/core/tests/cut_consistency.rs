use revlab::cutlocus::{cut_distance, CutCause};
use revlab::distance::distance;
use revlab::geodesic::{shoot, DEFAULT_TOL as GEO_TOL};
use revlab::warp::{RadialCurvature, SurfaceModel, DEFAULT_TOL};

fn paraboloid() -> SurfaceModel {
    SurfaceModel::new(RadialCurvature::Paraboloid, 50.0, DEFAULT_TOL).unwrap()
}

const T0: f64 = 2.0;
const PHI: f64 = 2.5;

#[test]
fn geodesic_minimizes_exactly_up_to_the_cut_point() {
    let s = paraboloid();
    let cut = cut_distance(&s, T0, PHI, None).unwrap();
    let s_cut = cut.s_cut.expect("paraboloid geodesic has a cut point");
    let eps = 1e-4 * s_cut;
    for frac in [0.3, 0.7, 1.0] {
        let len = frac * s_cut - eps;
        let end = *shoot(&s, T0, 0.0, PHI, len, GEO_TOL).unwrap().end();
        let d = distance(&s, (T0, 0.0), (end.t, end.theta)).unwrap().d;
        assert!((d - len).abs() < 1e-6 * (1.0 + len), "s = {len}: d = {d}");
    }
    for len in [s_cut + eps, 1.3 * s_cut] {
        let end = *shoot(&s, T0, 0.0, PHI, len, GEO_TOL).unwrap().end();
        let d = distance(&s, (T0, 0.0), (end.t, end.theta)).unwrap().d;
        assert!(d < len - 1e-9, "s = {len}: d = {d}");
    }
}

#[test]
fn crossing_cut_point_has_two_equal_minimizers() {
    let s = paraboloid();
    let cut = cut_distance(&s, T0, PHI, None).unwrap();
    assert_eq!(cut.cause, Some(CutCause::Crossing));
    let (t, th) = cut.point.unwrap();
    let r = distance(&s, (T0, 0.0), (t, th)).unwrap();
    assert_eq!(r.minimizers.len(), 2, "{:?}", r.minimizers);
    let (a, b) = (r.minimizers[0], r.minimizers[1]);
    assert!((a.length - b.length).abs() < 1e-8);
    assert!((a.phi0 - b.phi0).abs() > 1e-3);
    assert!((a.length - cut.s_cut.unwrap()).abs() < 1e-8 * (1.0 + a.length));
}

#[test]
fn cut_data_is_mirror_symmetric() {
    let s = paraboloid();
    for phi in [0.8, 1.6, 2.9] {
        let p = cut_distance(&s, T0, phi, None).unwrap();
        let m = cut_distance(&s, T0, -phi, None).unwrap();
        match (p.s_cut, m.s_cut) {
            (Some(a), Some(b)) => {
                assert!((a - b).abs() < 1e-9 * (1.0 + a));
                let (pa, pb) = (p.point.unwrap(), m.point.unwrap());
                assert!((pa.0 - pb.0).abs() < 1e-8 && (pa.1 + pb.1).abs() < 1e-8);
            }
            (None, None) => {}
            other => panic!("asymmetric: {other:?}"),
        }
    }
}
