//! Radial curvature domination and randomized checks of the comparison
//! theorem for apex triangles.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cutlocus::{sector_admissible, SectorPlan, SectorReport};
use crate::distance::{comparison_triangle_with, triangle_from_apex_with, DistancePlan, TriangleData};
use crate::error::{bad_param, Error, Result};
use crate::warp::{Side, SurfaceModel};

/// Slack below zero still accepted as domination.
pub const DOMINATION_TOL: f64 = 1e-9;
/// Default slack of the angle inequalities, in radians.
pub const TCT_TOL: f64 = 1e-4;
const DOMINATION_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationCertificate {
    pub m: String,
    pub model: String,
    /// `min_t (G_M(t) - G_model(t))` over the samples.
    pub margin: f64,
    pub argmin_t: f64,
    pub samples: usize,
    pub certified: bool,
}

/// Compares the radial curvatures on both warp grids, both sides of every
/// breakpoint and a uniform grid.
pub fn radial_domination(m: &SurfaceModel, model: &SurfaceModel) -> Result<DominationCertificate> {
    let t_max = m.t_max();
    if (model.t_max() - t_max).abs() > 1e-12 * t_max {
        return Err(bad_param(
            "t_max",
            format!("surfaces must share a horizon, got {} and {}", t_max, model.t_max()),
        ));
    }
    let mut ts: Vec<f64> = (0..=DOMINATION_SAMPLES)
        .map(|i| t_max * i as f64 / DOMINATION_SAMPLES as f64)
        .chain(m.warp().grid().iter().copied())
        .chain(model.warp().grid().iter().copied())
        .chain(m.breakpoints().iter().copied())
        .chain(model.breakpoints().iter().copied())
        .filter(|t| (0.0..=t_max).contains(t))
        .collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let (gm, gs) = (m.curvature(), model.curvature());
    let mut margin = f64::INFINITY;
    let mut argmin_t = 0.0;
    for &t in &ts {
        for side in [Side::Left, Side::Right] {
            let d = gm.eval_sided(t, side) - gs.eval_sided(t, side);
            if d < margin {
                margin = d;
                argmin_t = t;
            }
        }
    }
    Ok(DominationCertificate {
        m: m.name().to_string(),
        model: model.name().to_string(),
        margin,
        argmin_t,
        samples: ts.len(),
        certified: margin >= -DOMINATION_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleMargins {
    pub apex: f64,
    pub x: f64,
    pub y: f64,
}

impl TriangleMargins {
    fn between(m: &TriangleData, cmp: &TriangleData) -> Self {
        Self {
            apex: m.angle_p - cmp.angle_p,
            x: m.angle_x - cmp.angle_x,
            y: m.angle_y - cmp.angle_y,
        }
    }

    pub fn min(&self) -> f64 {
        self.apex.min(self.x).min(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TctSample {
    pub a: f64,
    pub b: f64,
    pub delta_theta: f64,
    pub m: TriangleData,
    pub comparison: TriangleData,
    pub margins: TriangleMargins,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TctAnomaly {
    pub a: f64,
    pub b: f64,
    pub delta_theta: f64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginSummary {
    pub min: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TctReport {
    pub pairs: (String, String),
    pub n: usize,
    pub seed: u64,
    pub delta0: f64,
    pub tol: f64,
    pub domination: DominationCertificate,
    pub sector: SectorReport,
    pub violations: Vec<TctSample>,
    pub margins: MarginSummary,
    /// Largest `|margin|` over all angles; the equality case expects 0.
    pub max_abs_margin: f64,
    /// Triangles that did not fit the model sector or were refused.
    pub anomalies: Vec<TctAnomaly>,
    pub samples: Vec<TctSample>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

/// Apex triangles sampled in `M` and compared with their model triangles in
/// the sector `δ0`. Apex angles are uniform in `(0.05, δ0 - 0.05)`, side
/// lengths log-uniform in `[0.01, 1] · 0.8 T_max`.
#[allow(clippy::too_many_arguments)]
pub fn verify_tct(
    m: &SurfaceModel,
    model: &SurfaceModel,
    delta0: f64,
    n: usize,
    seed: u64,
    tol: f64,
    sector_plan: SectorPlan,
    plan: &DistancePlan,
) -> Result<TctReport> {
    if !(delta0 > 0.1 && delta0 <= PI) {
        return Err(bad_param("delta0", format!("must lie in (0.1, π], got {delta0}")));
    }
    let domination = radial_domination(m, model)?;
    if !domination.certified {
        return Err(Error::Gate(format!(
            "{} does not dominate {}: margin {} at t = {}",
            domination.m, domination.model, domination.margin, domination.argmin_t
        )));
    }
    let sector = sector_admissible(model, delta0, sector_plan)?;
    if !sector.admissible {
        return Err(Error::Gate(format!(
            "model sector of angle {delta0} is not certified free of cut points"
        )));
    }
    let hi = 0.8 * m.t_max();
    let lo = 0.01 * hi;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| {
            let a = lo * (hi / lo).powf(rng.gen::<f64>());
            let b = lo * (hi / lo).powf(rng.gen::<f64>());
            let dt = rng.gen_range(0.05..delta0 - 0.05);
            (a, b, dt)
        })
        .collect();
    let outcomes: Vec<std::result::Result<TctSample, TctAnomaly>> = draws
        .par_iter()
        .map(|&(a, b, dt)| {
            let anomaly = |e: Error| TctAnomaly {
                a,
                b,
                delta_theta: dt,
                error: e.to_string(),
            };
            let tm = triangle_from_apex_with(m, a, b, dt, plan).map_err(anomaly)?;
            match comparison_triangle_with(model, a, b, tm.c, delta0, plan) {
                Ok(cmp) => Ok(Ok(TctSample {
                    a,
                    b,
                    delta_theta: dt,
                    m: tm,
                    comparison: cmp,
                    margins: TriangleMargins::between(&tm, &cmp),
                })),
                Err(e @ (Error::NoSolutionInSector { .. } | Error::MonotonicityViolation { .. })) => {
                    Ok(Err(anomaly(e)))
                }
                Err(e) => Err(anomaly(e)),
            }
        })
        .map(|r: std::result::Result<_, TctAnomaly>| r.and_then(|x| x))
        .collect();
    let mut samples = Vec::new();
    let mut anomalies = Vec::new();
    for o in outcomes {
        match o {
            Ok(s) => samples.push(s),
            Err(a) => anomalies.push(a),
        }
    }
    let mut all: Vec<f64> = samples
        .iter()
        .flat_map(|s| [s.margins.apex, s.margins.x, s.margins.y])
        .collect();
    let max_abs_margin = all.iter().map(|v| v.abs()).fold(0.0, f64::max);
    all.sort_by(f64::total_cmp);
    let violations = samples.iter().filter(|s| s.margins.min() < -tol).copied().collect();
    Ok(TctReport {
        pairs: (m.name().to_string(), model.name().to_string()),
        n,
        seed,
        delta0,
        tol,
        domination,
        sector,
        violations,
        margins: MarginSummary {
            min: all.first().copied().unwrap_or(f64::NAN),
            p50: quantile(&all, 0.5),
            p95: quantile(&all, 0.95),
        },
        max_abs_margin,
        anomalies,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledTriangle {
    pub scale: f64,
    pub m: TriangleData,
    pub comparison: TriangleData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlexandrovReport {
    pub diagnostic_only: bool,
    pub rows: Vec<ScaledTriangle>,
    /// Whether the comparison apex angle is non-increasing in the scale.
    pub apex_non_increasing: bool,
}

/// Diagnostic: comparison angles of the apex triangle `(λa, λb, Δθ)` as
/// `λ` runs over `scales`.
pub fn alexandrov_monotonicity(
    m: &SurfaceModel,
    model: &SurfaceModel,
    triangle: (f64, f64, f64),
    delta0: f64,
    scales: &[f64],
    plan: &DistancePlan,
) -> Result<AlexandrovReport> {
    let (a, b, dt) = triangle;
    let mut sorted = scales.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = sorted
        .iter()
        .map(|&l| {
            let tm = triangle_from_apex_with(m, l * a, l * b, dt, plan)?;
            let cmp = comparison_triangle_with(model, l * a, l * b, tm.c, delta0, plan)?;
            Ok(ScaledTriangle {
                scale: l,
                m: tm,
                comparison: cmp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let apex_non_increasing = rows
        .windows(2)
        .all(|w| w[1].comparison.angle_p <= w[0].comparison.angle_p + 1e-9);
    Ok(AlexandrovReport {
        diagnostic_only: true,
        rows,
        apex_non_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{RadialCurvature, DEFAULT_TOL};

    fn surf(g: RadialCurvature) -> SurfaceModel {
        SurfaceModel::new(g, 10.0, DEFAULT_TOL).unwrap()
    }

    fn small_sector() -> SectorPlan {
        SectorPlan {
            n_radii: 2,
            n_angles: 4,
            fan: 16,
            ..SectorPlan::default()
        }
    }

    #[test]
    fn domination_examples() {
        let p = surf(RadialCurvature::plane());
        let h = surf(RadialCurvature::hyperbolic());
        let c = radial_domination(&p, &h).unwrap();
        assert!(c.certified && (c.margin - 1.0).abs() < 1e-12);
        let c = radial_domination(&h, &p).unwrap();
        assert!(!c.certified && (c.margin + 1.0).abs() < 1e-12);
        let para = SurfaceModel::new(RadialCurvature::Paraboloid, 10.0, DEFAULT_TOL).unwrap();
        assert!(radial_domination(&para, &p).unwrap().certified);
        assert!(!radial_domination(&p, &para).unwrap().certified);
    }

    #[test]
    fn horizons_must_match() {
        let p = surf(RadialCurvature::plane());
        let h = SurfaceModel::new(RadialCurvature::hyperbolic(), 5.0, DEFAULT_TOL).unwrap();
        assert!(radial_domination(&p, &h).is_err());
    }

    #[test]
    fn swapped_pair_is_refused() {
        let p = surf(RadialCurvature::plane());
        let h = surf(RadialCurvature::hyperbolic());
        let r = verify_tct(&h, &p, PI, 4, 1, TCT_TOL, small_sector(), &DistancePlan::default());
        assert!(matches!(r, Err(Error::Gate(_))));
    }

    #[test]
    fn plane_against_hyperbolic_few_triangles() {
        let p = surf(RadialCurvature::plane());
        let h = surf(RadialCurvature::hyperbolic());
        let r = verify_tct(&p, &h, PI, 6, 7, TCT_TOL, small_sector(), &DistancePlan::default()).unwrap();
        assert_eq!(r.samples.len() + r.anomalies.len(), 6);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
    }

    #[test]
    fn degenerate_triangle_opens_the_apex() {
        let p = surf(RadialCurvature::plane());
        let t = comparison_triangle_with(&p, 2.0, 3.0, 5.0 - 1e-9, PI, &DistancePlan::default()).unwrap();
        assert!(t.angle_p > PI - 1e-3, "{}", t.angle_p);
    }

    #[test]
    fn self_comparison_is_scale_invariant_in_angle() {
        let h = surf(RadialCurvature::hyperbolic());
        let r = alexandrov_monotonicity(&h, &h, (1.0, 2.0, 1.0), PI, &[0.5, 1.0, 2.0], &DistancePlan::default()).unwrap();
        for row in &r.rows {
            assert!((row.comparison.angle_p - 1.0).abs() < 1e-6);
        }
    }
}
