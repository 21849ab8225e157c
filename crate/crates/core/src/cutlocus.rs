//! Cut distances, cut loci and sector certificates.
//!
//! A geodesic from `q = (t0, 0)` with `φ0 ∈ (0, π)` and its mirror image
//! `-φ0` meet on the opposite meridian `θ = ±π` at equal length, so the first
//! crossing of `|θ| = π` is a cut candidate. The other candidate is the first
//! conjugate point. Both are located inside an accepted step by exact
//! re-integration.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{bad_param, Error, Result};
use crate::geodesic::{self, initial_state, trace, GeodesicPath, TraceEnd, CONJUGATE_XTOL};
use crate::roots::golden_min;
use crate::warp::SurfaceModel;

/// Default number of fan directions on each side of the meridian of `q`.
pub const DEFAULT_FAN: usize = 1024;
/// Cut points within this angle of `θ = π` count as on the opposite meridian.
pub const MERIDIAN_ATOL: f64 = 1e-6;
const CROSS_XTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutCause {
    Conjugate,
    Crossing,
}

/// Cut data of one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutDistance {
    pub phi0: f64,
    pub s_conj: Option<f64>,
    pub s_cross: Option<f64>,
    pub s_cut: Option<f64>,
    pub cause: Option<CutCause>,
    /// `(t, θ)` of the cut point with θ unwrapped.
    pub point: Option<(f64, f64)>,
}

fn check_base(surf: &SurfaceModel, t0: f64) -> Result<()> {
    if !(t0 > 0.0 && t0 < surf.t_max()) {
        return Err(bad_param("t0", format!("must lie in (0, T_max), got {t0}")));
    }
    Ok(())
}

/// Multiple of `T_max` used as arc-length horizon when none is given.
pub const DEFAULT_HORIZON_FACTOR: f64 = 4.0;

/// Cut distance along the geodesic from `(t0, 0)` with initial angle `phi0`
/// (`0 < |phi0| < π`). Without an explicit horizon the geodesic is followed
/// until it leaves the domain (or for `4 T_max`), and leaving without a
/// candidate means no cut point in the domain. An explicit horizon that the
/// geodesic cannot reach inside the domain is an error.
pub fn cut_distance(surf: &SurfaceModel, t0: f64, phi0: f64, horizon: Option<f64>) -> Result<CutDistance> {
    check_base(surf, t0)?;
    if !(phi0.abs() > 0.0 && phi0.abs() < PI) {
        return Err(bad_param("phi0", format!("must satisfy 0 < |phi0| < π, got {phi0}")));
    }
    let explicit = horizon.is_some();
    let horizon = horizon.unwrap_or(DEFAULT_HORIZON_FACTOR * surf.t_max());
    if !(horizon > 0.0) {
        return Err(bad_param("horizon", format!("must be positive, got {horizon}")));
    }
    let side = phi0.signum();
    let target = side * PI;
    let mut conj: Option<(f64, [f64; 6])> = None;
    let mut cross: Option<(f64, [f64; 6])> = None;
    let y0 = initial_state(surf, t0, 0.0, phi0);
    let end = trace(surf, y0, horizon, geodesic::DEFAULT_TOL, |v| {
        let (a, b) = (v.y0(), v.y1());
        if conj.is_none() && a[4] > 0.0 && b[4] <= 0.0 {
            conj = Some(v.locate(|y| y[4], CONJUGATE_XTOL));
        }
        if cross.is_none() && side * b[1] >= PI {
            cross = Some(if b[1] == target {
                (v.s1(), b)
            } else {
                v.locate(|y| y[1] - target, CROSS_XTOL)
            });
        }
        conj.is_some() && cross.is_some()
    })?;
    if let TraceEnd::Exited { s } = end {
        if conj.is_none() && cross.is_none() && explicit {
            return Err(Error::HorizonTooSmall { s });
        }
    }
    let cut = match (conj, cross) {
        (Some(c), Some(x)) if c.0 < x.0 => Some((c, CutCause::Conjugate)),
        (_, Some(x)) => Some((x, CutCause::Crossing)),
        (Some(c), None) => Some((c, CutCause::Conjugate)),
        (None, None) => None,
    };
    Ok(CutDistance {
        phi0,
        s_conj: conj.map(|c| c.0),
        s_cross: cross.map(|c| c.0),
        s_cut: cut.map(|((s, _), _)| s),
        cause: cut.map(|(_, c)| c),
        point: cut.map(|((_, y), _)| (y[0], y[1])),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutStructure {
    Empty,
    OppositeMeridianSubray,
    Other,
}

/// A cut point with θ wrapped to `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutPoint {
    pub t: f64,
    pub theta: f64,
    /// Arc length from `q`.
    pub s: f64,
    /// Number of fan geodesics arriving (2 for a mirrored crossing).
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutReport {
    pub base: (f64, f64),
    pub fan: usize,
    pub horizon: f64,
    /// Records for `φ0 = ±π (i + 1/2) / fan`, positive side first.
    pub records: Vec<CutDistance>,
    pub points: Vec<CutPoint>,
    pub structure: CutStructure,
    /// First cut point along the locus, refined in `φ0`.
    pub endpoint: Option<CutPoint>,
    pub endpoint_phi0: Option<f64>,
}

fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

fn point_of(rec: &CutDistance, multiplicity: usize) -> Option<CutPoint> {
    let (t, theta) = rec.point?;
    Some(CutPoint {
        t,
        theta: wrap_pi(theta),
        s: rec.s_cut?,
        multiplicity,
    })
}

fn on_opposite_meridian(p: &CutPoint) -> bool {
    PI - p.theta.abs() <= MERIDIAN_ATOL
}

/// Sweeps a fan of `fan` directions on each side of the meridian of
/// `q = (t0, 0)` and assembles the cut locus.
pub fn cut_locus(surf: &SurfaceModel, t0: f64, fan: usize) -> Result<CutReport> {
    check_base(surf, t0)?;
    if fan < 2 {
        return Err(bad_param("fan", "needs at least 2 directions"));
    }
    let phis: Vec<f64> = (0..fan).map(|i| PI * (i as f64 + 0.5) / fan as f64).collect();
    let signed: Vec<f64> = phis.iter().copied().chain(phis.iter().map(|p| -p)).collect();
    let records = signed
        .par_iter()
        .map(|&phi| cut_distance(surf, t0, phi, None))
        .collect::<Result<Vec<_>>>()?;
    let (pos, neg) = records.split_at(fan);

    let mut points = Vec::new();
    for (a, b) in pos.iter().zip(neg) {
        let mirrored = match (a.cause, b.cause, a.s_cut, b.s_cut) {
            (Some(CutCause::Crossing), Some(CutCause::Crossing), Some(sa), Some(sb)) => {
                (sa - sb).abs() <= 1e-8 * (1.0 + sa)
            }
            _ => false,
        };
        if mirrored {
            points.extend(point_of(a, 2));
        } else {
            points.extend(point_of(a, 1));
            points.extend(point_of(b, 1));
        }
    }
    let structure = if points.is_empty() {
        CutStructure::Empty
    } else if points.iter().all(on_opposite_meridian) {
        CutStructure::OppositeMeridianSubray
    } else {
        CutStructure::Other
    };

    let (endpoint, endpoint_phi0) = match refine_endpoint(surf, t0, &phis, pos) {
        Some((phi, p)) => (Some(p), Some(phi)),
        None => (None, None),
    };
    Ok(CutReport {
        base: (t0, 0.0),
        fan,
        horizon: DEFAULT_HORIZON_FACTOR * surf.t_max(),
        records,
        points,
        structure,
        endpoint,
        endpoint_phi0,
    })
}

/// Golden-section refinement of the smallest cut radius around the best
/// fan direction.
fn refine_endpoint(surf: &SurfaceModel, t0: f64, phis: &[f64], recs: &[CutDistance]) -> Option<(f64, CutPoint)> {
    let (k, _) = recs
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.point.map(|p| (k, p.0)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    if k + 1 == phis.len() {
        if let Some(p) = polar_limit(surf, t0) {
            if p.t <= recs[k].point?.0 {
                return Some((PI, p));
            }
        }
    }
    let lo = if k == 0 { 0.5 * phis[0] } else { phis[k - 1] };
    let hi = if k + 1 == phis.len() {
        0.5 * (phis[k] + PI)
    } else {
        phis[k + 1]
    };
    let radius = |phi: f64| match cut_distance(surf, t0, phi, None) {
        Ok(CutDistance { point: Some(p), .. }) => p.0,
        _ => f64::INFINITY,
    };
    let (phi, t) = golden_min(radius, lo, hi, 1e-9);
    let best = if t < recs[k].point?.0 { phi } else { phis[k] };
    let rec = cut_distance(surf, t0, best, None).ok()?;
    Some((best, point_of(&rec, 2)?))
}

/// Limit of the cut points as `φ0 → π`: the first conjugate point along the
/// meridian through the pole.
fn polar_limit(surf: &SurfaceModel, t0: f64) -> Option<CutPoint> {
    let path = GeodesicPath {
        states: Vec::new(),
        nu: 0.0,
        length: t0 + surf.t_max(),
        start: (t0, 0.0),
        phi0: PI,
        left_domain: None,
    };
    let s = geodesic::conjugate_point(surf, &path).ok()??;
    (s > t0).then_some(CutPoint {
        t: s - t0,
        theta: PI,
        s,
        multiplicity: 2,
    })
}

/// Sampling plan for sector certificates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorPlan {
    pub n_radii: usize,
    pub n_angles: usize,
    pub fan: usize,
    /// Largest sampled radius as a fraction of `T_max`.
    pub r_max_frac: f64,
}

impl Default for SectorPlan {
    fn default() -> Self {
        Self {
            n_radii: 8,
            n_angles: 16,
            fan: 256,
            r_max_frac: 0.8,
        }
    }
}

impl SectorPlan {
    /// Geometric radii, halving from `r_max_frac · T_max`.
    pub fn radii(&self, t_max: f64) -> Vec<f64> {
        let top = self.r_max_frac * t_max;
        (0..self.n_radii)
            .map(|k| top * 0.5f64.powi((self.n_radii - 1 - k) as i32))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorWitness {
    pub q: (f64, f64),
    pub cut: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorReport {
    pub delta: f64,
    pub admissible: bool,
    pub samples: usize,
    pub cut_points_checked: usize,
    pub witness: Option<SectorWitness>,
    pub plan: SectorPlan,
}

/// Cut loci of one point per sampled radius. Rotations carry them to every
/// sampled angle.
pub struct SectorSampler {
    plan: SectorPlan,
    loci: Vec<(f64, Vec<CutPoint>)>,
}

impl SectorSampler {
    pub fn new(surf: &SurfaceModel, plan: SectorPlan) -> Result<Self> {
        if plan.n_radii == 0 || plan.n_angles == 0 || !(plan.r_max_frac > 0.0 && plan.r_max_frac < 1.0) {
            return Err(bad_param("sector plan", "needs radii, angles and 0 < r_max_frac < 1"));
        }
        let loci = plan
            .radii(surf.t_max())
            .into_iter()
            .map(|r| Ok((r, cut_locus(surf, r, plan.fan)?.points)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { plan, loci })
    }

    pub fn check(&self, delta: f64) -> SectorReport {
        let mut witness = None;
        let mut checked = 0;
        'outer: for (r, pts) in &self.loci {
            for j in 0..self.plan.n_angles {
                let theta_q = delta * (j as f64 + 0.5) / self.plan.n_angles as f64;
                for p in pts {
                    checked += 1;
                    let th = (theta_q + p.theta).rem_euclid(2.0 * PI);
                    if th > 0.0 && th < delta {
                        witness = Some(SectorWitness {
                            q: (*r, theta_q),
                            cut: (p.t, th),
                        });
                        break 'outer;
                    }
                }
            }
        }
        SectorReport {
            delta,
            admissible: witness.is_none(),
            samples: self.loci.len() * self.plan.n_angles,
            cut_points_checked: checked,
            witness,
            plan: self.plan,
        }
    }
}

/// Sampling certificate that no sampled point of the sector `0 < θ < δ` has
/// a computed cut point inside the sector.
pub fn sector_admissible(surf: &SurfaceModel, delta: f64, plan: SectorPlan) -> Result<SectorReport> {
    if !(delta > 0.0 && delta <= PI) {
        return Err(bad_param("delta", format!("must lie in (0, π], got {delta}")));
    }
    Ok(SectorSampler::new(surf, plan)?.check(delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleDelta {
    pub delta0: f64,
    /// Largest admissible and smallest refused sampled δ.
    pub bracket: (f64, f64),
    pub plan: SectorPlan,
}

/// Largest sampled-admissible sector angle, by bisection over `(0, π]`.
pub fn max_admissible_delta(surf: &SurfaceModel, plan: SectorPlan, xtol: f64) -> Result<AdmissibleDelta> {
    let sampler = SectorSampler::new(surf, plan)?;
    if sampler.check(PI).admissible {
        return Ok(AdmissibleDelta {
            delta0: PI,
            bracket: (PI, PI),
            plan,
        });
    }
    let (mut lo, mut hi) = (0.0, PI);
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if sampler.check(mid).admissible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(AdmissibleDelta {
        delta0: lo,
        bracket: (lo, hi),
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{RadialCurvature, DEFAULT_TOL};

    fn paraboloid() -> SurfaceModel {
        SurfaceModel::new(RadialCurvature::Paraboloid, 50.0, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn plane_has_no_cut_points() {
        let s = SurfaceModel::new(RadialCurvature::plane(), 20.0, DEFAULT_TOL).unwrap();
        for phi in [0.1, 1.0, 2.0, 3.1, -1.5] {
            let c = cut_distance(&s, 2.0, phi, None).unwrap();
            assert_eq!(c.s_cut, None);
        }
        assert_eq!(cut_locus(&s, 2.0, 64).unwrap().structure, CutStructure::Empty);
    }

    #[test]
    fn paraboloid_cut_is_a_crossing_on_the_opposite_meridian() {
        // at T_max = 50 this direction only reaches θ ≈ 3.01 before leaving
        let s = SurfaceModel::new(RadialCurvature::Paraboloid, 100.0, DEFAULT_TOL).unwrap();
        let c = cut_distance(&s, 2.0, PI / 3.0, None).unwrap();
        assert_eq!(c.cause, Some(CutCause::Crossing));
        let (_, theta) = c.point.unwrap();
        assert!((theta - PI).abs() < 1e-6);
        let m = cut_distance(&s, 2.0, -PI / 3.0, None).unwrap();
        assert!((m.s_cut.unwrap() - c.s_cut.unwrap()).abs() < 1e-8);
    }

    #[test]
    fn long_horizon_is_refused_on_the_plane() {
        let s = SurfaceModel::new(RadialCurvature::plane(), 20.0, DEFAULT_TOL).unwrap();
        assert!(matches!(
            cut_distance(&s, 2.0, 1.0, Some(100.0)),
            Err(Error::HorizonTooSmall { .. })
        ));
    }

    #[test]
    fn paraboloid_locus_is_a_subray() {
        let s = paraboloid();
        let rep = cut_locus(&s, 2.0, 64).unwrap();
        assert_eq!(rep.structure, CutStructure::OppositeMeridianSubray);
        let end = rep.endpoint.unwrap();
        assert!(rep.points.iter().all(|p| p.t >= end.t - 1e-9));
    }

    #[test]
    fn sector_checks_on_plane_and_paraboloid() {
        let plan = SectorPlan {
            fan: 32,
            n_radii: 3,
            ..SectorPlan::default()
        };
        let s = SurfaceModel::new(RadialCurvature::plane(), 20.0, DEFAULT_TOL).unwrap();
        assert!(sector_admissible(&s, PI, plan).unwrap().admissible);
        let p = paraboloid();
        let rep = sector_admissible(&p, PI, plan).unwrap();
        assert!(rep.admissible, "{:?}", rep.witness);
        assert!(rep.cut_points_checked > 0);
    }

    #[test]
    fn strong_band_breaks_the_half_plane_sector() {
        let g = RadialCurvature::bump(4.0, 1.0, 0.2, 2.0).unwrap();
        let s = SurfaceModel::new(g, 12.0, DEFAULT_TOL).unwrap();
        let plan = SectorPlan {
            fan: 128,
            ..SectorPlan::default()
        };
        let rep = sector_admissible(&s, PI, plan).unwrap();
        assert!(!rep.admissible);
        let w = rep.witness.unwrap();
        assert!(w.q.1 > 0.0 && w.q.1 < PI && w.cut.1 > 0.0 && w.cut.1 < PI);
        let d = max_admissible_delta(&s, plan, 1e-3).unwrap();
        assert!(d.delta0 < PI && d.bracket.1 - d.bracket.0 <= 1e-3);
        assert!(sector_admissible(&s, d.bracket.0, plan).unwrap().admissible);
    }
}
