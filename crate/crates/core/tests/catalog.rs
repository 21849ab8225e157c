use std::collections::BTreeMap;
use std::f64::consts::PI;

use revlab::cutlocus::{cut_locus, CutStructure};
use revlab::warp::{RadialCurvature, SurfaceModel, DEFAULT_TOL};

fn catalog() -> Vec<SurfaceModel> {
    ["plane", "hyperbolic", "paraboloid", "smoothed_cone", "bump", "spike"]
        .iter()
        .map(|k| SurfaceModel::catalog(k, &BTreeMap::new()).unwrap())
        .collect()
}

#[test]
fn fundamental_identity_on_every_grid_point() {
    for s in catalog() {
        let worst = s.identity_residuals().into_iter().map(|(_, r)| r).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{}: {worst}", s.name());
    }
}

#[test]
fn cohn_vossen_bound() {
    for s in catalog() {
        let c = s.total().c;
        assert!(c <= 2.0 * PI + 1e-6, "{}: c = {c}", s.name());
        assert!(s.total().certified, "{}", s.name());
    }
}

#[test]
fn signed_parts_sum_to_the_integral() {
    for s in catalog() {
        let t = s.total();
        assert!(t.i_plus >= 0.0 && t.i_minus <= 0.0);
        let scale = 1.0 + t.i_plus - t.i_minus;
        assert!((t.i_plus + t.i_minus - t.c_integral).abs() < 1e-9 * scale, "{}", s.name());
    }
}

// von Mangoldt surfaces have cut loci that are empty or a subray of the
// opposite meridian
#[test]
fn von_mangoldt_cut_structure() {
    let surfaces = [
        SurfaceModel::new(RadialCurvature::plane(), 20.0, DEFAULT_TOL).unwrap(),
        SurfaceModel::new(RadialCurvature::hyperbolic(), 6.0, DEFAULT_TOL).unwrap(),
        SurfaceModel::new(RadialCurvature::Paraboloid, 50.0, DEFAULT_TOL).unwrap(),
        SurfaceModel::new(RadialCurvature::smoothed_cone(0.25).unwrap(), 50.0, DEFAULT_TOL).unwrap(),
        SurfaceModel::new(RadialCurvature::bump(1.0, 0.5, 0.5, 0.0).unwrap(), 20.0, DEFAULT_TOL).unwrap(),
    ];
    for s in &surfaces {
        assert!(s.is_von_mangoldt(), "{}", s.name());
        let r = cut_locus(s, 1.5, 64).unwrap();
        assert!(
            matches!(r.structure, CutStructure::Empty | CutStructure::OppositeMeridianSubray),
            "{}: {:?}",
            s.name(),
            r.structure
        );
    }
}
