//! Distances and minimal geodesics by multi-start shooting.
//!
//! After reduction the source is `(t1, 0)` and the target `(t2, Δ)` with
//! `Δ ∈ [0, π]`. A geodesic leaving with `φ0 ∈ (0, π)` has strictly
//! increasing θ, so it meets each level `θ = Θ` at most once. The target is
//! reached through the levels `Δ + 2πk` (counter-clockwise) and
//! `2π - Δ + 2πk` (clockwise, by mirror symmetry). For every level the
//! residual `φ0 ↦ t(Θ) - t2` is scanned on a uniform grid of `φ0` and each
//! sign change is polished with Brent's method.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{bad_param, Error, Result};
use crate::geodesic::{self, angle_between, initial_state, trace, GeodesicPath, TraceEnd};
use crate::roots::brent;
use crate::warp::SurfaceModel;

const TWO_PI: f64 = 2.0 * PI;
/// Relative slack for "same length" minimizers.
pub const SAME_LENGTH_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistancePlan {
    pub n_scan: usize,
    pub scan_tol: f64,
    pub polish_tol: f64,
}

impl Default for DistancePlan {
    fn default() -> Self {
        Self {
            n_scan: 720,
            scan_tol: 1e-8,
            polish_tol: 1e-12,
        }
    }
}

/// A minimal geodesic from `x` to `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minimizer {
    /// Angle at `x` to the outward meridian, positive towards increasing θ.
    pub phi0: f64,
    pub nu: f64,
    pub length: f64,
    /// Unit tangent `(dt/ds, dθ/ds)` on arrival at `y`.
    pub end_dtds: f64,
    pub end_dthetads: f64,
    /// Total change of the unwrapped θ along the geodesic.
    pub winding: f64,
}

impl Minimizer {
    /// Re-integrates the geodesic from `x`.
    pub fn path(&self, surf: &SurfaceModel, x: (f64, f64)) -> Result<GeodesicPath> {
        if x.0 == 0.0 {
            let mut p = geodesic::meridian(surf, x.1 + self.winding);
            p.states.retain(|s| s.s <= self.length);
            p.length = self.length;
            return Ok(p);
        }
        geodesic::shoot(surf, x.0, x.1, self.phi0, self.length, geodesic::DEFAULT_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceResult {
    pub d: f64,
    /// Sorted by `phi0`.
    pub minimizers: Vec<Minimizer>,
}

/// Distance reduced to a source on `θ = 0` and a target at angle
/// `Δ ∈ [0, π]`; `sigma = -1` when the original target lay clockwise.
#[derive(Debug, Clone, Copy)]
struct Reduced {
    t1: f64,
    t2: f64,
    delta: f64,
    sigma: f64,
}

fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TWO_PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

fn reduce(x: (f64, f64), y: (f64, f64)) -> Reduced {
    let d = wrap_pi(y.1 - x.1);
    Reduced {
        t1: x.0,
        t2: y.0,
        delta: d.abs(),
        sigma: if d < 0.0 { -1.0 } else { 1.0 },
    }
}

impl Reduced {
    fn is_half_turn(&self) -> bool {
        self.delta == PI
    }

    /// Level `j`: even `j` reach the target counter-clockwise, odd `j` its
    /// mirror image.
    fn level(&self, j: usize) -> f64 {
        let k = (j / 2) as f64;
        if j.is_multiple_of(2) {
            self.delta + TWO_PI * k
        } else {
            TWO_PI - self.delta + TWO_PI * k
        }
    }

    fn levels_used(&self, j: usize) -> bool {
        !(self.is_half_turn() && j % 2 == 1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Arrival {
    s: f64,
    t: f64,
    u: f64,
    w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ShotEnd {
    High,
    Low,
    Failed,
}

#[derive(Debug, Clone)]
struct Shot {
    /// Arrivals at levels `0, 1, 2, ...` in order.
    arrivals: Vec<Arrival>,
    end: ShotEnd,
}

impl Shot {
    fn residual(&self, j: usize, t2: f64) -> f64 {
        match self.arrivals.get(j) {
            Some(a) => a.t - t2,
            None => match self.end {
                ShotEnd::High => f64::INFINITY,
                ShotEnd::Low => f64::NEG_INFINITY,
                ShotEnd::Failed => f64::NAN,
            },
        }
    }
}

/// Shoots from `(t1, 0)` and records arrivals at the levels up to
/// `max_level`, pruning once `t2` is out of reach within `budget`.
fn shoot_levels(
    surf: &SurfaceModel,
    r: &Reduced,
    phi0: f64,
    budget: f64,
    max_level: usize,
    tol: f64,
) -> Shot {
    let y0 = initial_state(surf, r.t1, 0.0, phi0);
    let mut arrivals = Vec::new();
    let mut next = 0usize;
    let mut end = ShotEnd::Failed;
    let xtol = 1e-3 * tol;
    let res = trace(surf, y0, budget, tol, |v| {
        let y1 = v.y1();
        while next <= max_level && r.level(next) <= y1[1] {
            let lv = r.level(next);
            let (s, y) = if y1[1] == lv {
                (v.s1(), y1)
            } else {
                v.locate(|y| y[1] - lv, xtol)
            };
            arrivals.push(Arrival {
                s,
                t: y[0],
                u: y[2],
                w: y[3],
            });
            next += 1;
        }
        if next > max_level {
            return true;
        }
        let room = budget - v.s1();
        if y1[0] - r.t2 > room {
            end = ShotEnd::High;
            return true;
        }
        if r.t2 - y1[0] > room {
            end = ShotEnd::Low;
            return true;
        }
        false
    });
    match res {
        Ok(TraceEnd::Exited { .. }) => end = ShotEnd::High,
        Ok(TraceEnd::Completed { y, .. }) => {
            end = if y[0] >= r.t2 {
                ShotEnd::High
            } else {
                ShotEnd::Low
            }
        }
        Ok(TraceEnd::Stopped) => {}
        Err(_) => end = ShotEnd::Failed,
    }
    Shot { arrivals, end }
}

fn check_point(surf: &SurfaceModel, name: &str, p: (f64, f64)) -> Result<()> {
    if !(p.0 >= 0.0 && p.0 <= surf.t_max()) || !p.1.is_finite() {
        return Err(bad_param(name, format!("point ({}, {}) is outside the domain", p.0, p.1)));
    }
    Ok(())
}

fn upper_bound(surf: &SurfaceModel, r: &Reduced) -> f64 {
    let fmin = surf.f(r.t1).0.min(surf.f(r.t2).0);
    (r.t1 + r.t2).min((r.t1 - r.t2).abs() + r.delta * fmin)
}

/// Trivial cases: coincident points, a pole endpoint, or a common meridian.
fn direct(r: &Reduced) -> Option<DistanceResult> {
    let meridian = |phi0: f64, length: f64, end_dtds: f64, winding: f64| DistanceResult {
        d: length,
        minimizers: vec![Minimizer {
            phi0,
            nu: 0.0,
            length,
            end_dtds,
            end_dthetads: 0.0,
            winding,
        }],
    };
    if r.t1 == 0.0 {
        return Some(meridian(0.0, r.t2, 1.0, 0.0));
    }
    if r.t2 == 0.0 {
        return Some(meridian(PI, r.t1, -1.0, 0.0));
    }
    if r.delta == 0.0 {
        if r.t1 == r.t2 {
            return Some(DistanceResult {
                d: 0.0,
                minimizers: vec![Minimizer {
                    phi0: 0.0,
                    nu: 0.0,
                    length: 0.0,
                    end_dtds: 1.0,
                    end_dthetads: 0.0,
                    winding: 0.0,
                }],
            });
        }
        return Some(if r.t2 > r.t1 {
            meridian(0.0, r.t2 - r.t1, 1.0, 0.0)
        } else {
            meridian(PI, r.t1 - r.t2, -1.0, 0.0)
        });
    }
    None
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    phi: f64,
    level: usize,
    length: f64,
    u: f64,
    w: f64,
}

/// Polishes a bracket `[lo, hi]` of the level-`j` residual; returns the
/// connecting geodesic if the root is genuine.
fn polish(
    surf: &SurfaceModel,
    r: &Reduced,
    j: usize,
    (lo, rlo): (f64, f64),
    (hi, rhi): (f64, f64),
    budget: f64,
    tol: f64,
) -> Option<Candidate> {
    let eval = |phi: f64| shoot_levels(surf, r, phi, budget, j, tol).residual(j, r.t2);
    let res = |phi: f64| {
        let v = eval(phi);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let phi = brent(res, lo, hi, rlo, rhi, 1e-15, 200);
    let shot = shoot_levels(surf, r, phi, budget, j, tol);
    let a = shot.arrivals.get(j)?;
    let resid = a.t - r.t2;
    let scale = 1.0 + r.t1.max(r.t2);
    if resid.abs() > 1e-7 * scale {
        // Near-polar minimizers are so ill-conditioned in φ0 that one ulp
        // moves the arrival by more than the tolerance. Accept a root that
        // sits on a continuous sign change a few ulps wide.
        let nb = |k: f64| eval(phi + k * 4.0 * f64::EPSILON * phi.max(1.0));
        let (l, h) = (nb(-1.0), nb(1.0));
        let continuous = [l, h].iter().all(|v| v.is_finite() && v.abs() <= 1e-3 * scale);
        if !(continuous && (l > 0.0) != (h > 0.0) && resid.abs() <= 1e-3 * scale) {
            return None;
        }
    }
    Some(Candidate {
        phi,
        level: j,
        // first-order correction for the residual radial miss
        length: a.s - a.u * resid,
        u: a.u,
        w: a.w,
    })
}

fn finish(surf: &SurfaceModel, r: &Reduced, cands: Vec<Candidate>) -> Option<DistanceResult> {
    let f1 = surf.f(r.t1).0;
    let mut mins: Vec<Minimizer> = Vec::new();
    for c in &cands {
        let theta = r.level(c.level);
        let mut push = |mirror: bool| {
            let m = if mirror { -1.0 } else { 1.0 };
            let s = r.sigma * m;
            mins.push(Minimizer {
                phi0: s * c.phi,
                nu: s * f1 * c.phi.sin(),
                length: c.length,
                end_dtds: c.u,
                end_dthetads: s * c.w,
                winding: s * theta,
            });
        };
        push(c.level % 2 == 1);
        if r.is_half_turn() {
            push(true);
        }
    }
    if r.is_half_turn() {
        // the broken meridian through the pole
        mins.push(Minimizer {
            phi0: PI,
            nu: 0.0,
            length: r.t1 + r.t2,
            end_dtds: 1.0,
            end_dthetads: 0.0,
            winding: r.sigma * PI,
        });
    }
    let d = mins.iter().map(|m| m.length).fold(f64::INFINITY, f64::min);
    if !d.is_finite() {
        return None;
    }
    mins.retain(|m| m.length <= d * (1.0 + SAME_LENGTH_RTOL) + 1e-15);
    mins.sort_by(|a, b| a.phi0.total_cmp(&b.phi0));
    mins.dedup_by(|a, b| (a.phi0 - b.phi0).abs() < 1e-9);
    Some(DistanceResult { d, minimizers: mins })
}

/// Distance between `x = (t1, θ1)` and `y = (t2, θ2)` with the default plan.
pub fn distance(surf: &SurfaceModel, x: (f64, f64), y: (f64, f64)) -> Result<DistanceResult> {
    distance_with(surf, x, y, &DistancePlan::default())
}

pub fn distance_with(
    surf: &SurfaceModel,
    x: (f64, f64),
    y: (f64, f64),
    plan: &DistancePlan,
) -> Result<DistanceResult> {
    check_point(surf, "x", x)?;
    check_point(surf, "y", y)?;
    let r = reduce(x, y);
    if let Some(out) = direct(&r) {
        return Ok(out);
    }
    let no_connection = || Error::NoConnectionFound {
        x_t: x.0,
        x_theta: x.1,
        y_t: y.0,
        y_theta: y.1,
    };
    let l_max = upper_bound(surf, &r);
    let budget = 1.5 * l_max + 1e-9;
    let n = plan.n_scan.max(8);
    let shots: Vec<Shot> = (1..n)
        .into_par_iter()
        .map(|i| shoot_levels(surf, &r, PI * i as f64 / n as f64, budget, usize::MAX, plan.scan_tol))
        .collect();
    // level 0 lies below π and always has the virtual sample at φ0 = π
    let top = shots.iter().map(|s| s.arrivals.len()).max().unwrap_or(0).max(1);

    let mut brackets = Vec::new();
    for j in 0..top {
        if !r.levels_used(j) {
            continue;
        }
        let mut samples = Vec::with_capacity(n + 1);
        samples.push((0.0, f64::INFINITY));
        for (i, shot) in shots.iter().enumerate() {
            samples.push((PI * (i + 1) as f64 / n as f64, shot.residual(j, r.t2)));
        }
        if r.level(j) < PI {
            samples.push((PI, -r.t2));
        }
        for w in samples.windows(2) {
            let ((a, ra), (b, rb)) = (w[0], w[1]);
            if ra.is_nan() || rb.is_nan() {
                continue;
            }
            if ra == 0.0 || (ra > 0.0) != (rb > 0.0) {
                brackets.push((j, (a, ra), (b, rb)));
            }
        }
    }
    let cands: Vec<Candidate> = brackets
        .par_iter()
        .filter_map(|&(j, lo, hi)| polish(surf, &r, j, lo, hi, budget, plan.polish_tol))
        .collect();
    finish(surf, &r, cands).ok_or_else(no_connection)
}

/// Distance by local continuation from a known minimizer of a nearby
/// problem: brackets the level of `hint` around its initial angle and
/// polishes. Returns `None` when no bracket is found.
pub fn distance_near(
    surf: &SurfaceModel,
    x: (f64, f64),
    y: (f64, f64),
    hint: &Minimizer,
    plan: &DistancePlan,
) -> Option<DistanceResult> {
    let r = reduce(x, y);
    if let Some(out) = direct(&r) {
        return Some(out);
    }
    let phi_h = r.sigma * hint.phi0;
    if !(phi_h > 0.0 && phi_h < PI) || hint.winding.abs() > PI + 1e-12 {
        return None;
    }
    let budget = 1.5 * upper_bound(surf, &r) + 1e-9;
    let eval = |phi: f64| shoot_levels(surf, &r, phi, budget, 0, plan.polish_tol).residual(0, r.t2);
    let r0 = eval(phi_h);
    if r0 == 0.0 {
        let c = polish(surf, &r, 0, (phi_h, r0), (phi_h, r0), budget, plan.polish_tol)?;
        return finish(surf, &r, vec![c]);
    }
    if r0.is_nan() {
        return None;
    }
    let mut step = 1e-3;
    while step < 1.0 {
        for dir in [1.0, -1.0] {
            let phi = (phi_h + dir * step).clamp(1e-12, PI - 1e-12);
            let v = eval(phi);
            if !v.is_nan() && (v > 0.0) != (r0 > 0.0) {
                let (lo, hi) = if phi < phi_h {
                    ((phi, v), (phi_h, r0))
                } else {
                    ((phi_h, r0), (phi, v))
                };
                let c = polish(surf, &r, 0, lo, hi, budget, plan.polish_tol)?;
                return finish(surf, &r, vec![c]);
            }
        }
        step *= 2.0;
    }
    None
}

/// Geodesic triangle with apex at the pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleData {
    /// `d(p, x)`
    pub a: f64,
    /// `d(p, y)`
    pub b: f64,
    /// `d(x, y)`
    pub c: f64,
    pub angle_p: f64,
    pub angle_x: f64,
    pub angle_y: f64,
    pub delta_theta: f64,
    /// Initial angle at `x` of the side `xy`.
    pub phi0: f64,
}

fn triangle_from(surf: &SurfaceModel, a: f64, b: f64, dtheta: f64, res: &DistanceResult) -> Result<TriangleData> {
    // prefer the side running counter-clockwise from x
    let m = res
        .minimizers
        .iter()
        .rev()
        .find(|m| m.phi0 >= 0.0)
        .unwrap_or(&res.minimizers[0]);
    let angle_x = angle_between(surf, a, (-1.0, 0.0), (m.phi0.cos(), m.phi0.sin() / surf.f(a).0))?;
    let angle_y = angle_between(surf, b, (-1.0, 0.0), (-m.end_dtds, -m.end_dthetads))?;
    Ok(TriangleData {
        a,
        b,
        c: res.d,
        angle_p: dtheta,
        angle_x,
        angle_y,
        delta_theta: dtheta,
        phi0: m.phi0,
    })
}

/// Places `x = (a, 0)`, `y = (b, Δθ)` and measures the triangle `p x y`.
pub fn triangle_from_apex(surf: &SurfaceModel, a: f64, b: f64, dtheta: f64) -> Result<TriangleData> {
    triangle_from_apex_with(surf, a, b, dtheta, &DistancePlan::default())
}

pub fn triangle_from_apex_with(
    surf: &SurfaceModel,
    a: f64,
    b: f64,
    dtheta: f64,
    plan: &DistancePlan,
) -> Result<TriangleData> {
    if !(a > 0.0 && b > 0.0 && a <= surf.t_max() && b <= surf.t_max()) {
        return Err(bad_param("a, b", "side lengths must lie in (0, T_max]"));
    }
    if !(dtheta > 0.0 && dtheta <= PI) {
        return Err(bad_param("delta_theta", format!("must lie in (0, π], got {dtheta}")));
    }
    let res = distance_with(surf, (a, 0.0), (b, dtheta), plan)?;
    triangle_from(surf, a, b, dtheta, &res)
}

/// Number of bracketing samples of `Δθ ↦ d` in [`comparison_triangle`].
pub const BRACKET_SAMPLES: usize = 8;

/// Finds `Δθ ∈ (0, δ0)` with `d((a, 0), (b, Δθ)) = c`.
pub fn comparison_triangle(surf: &SurfaceModel, a: f64, b: f64, c: f64, delta0: f64) -> Result<TriangleData> {
    comparison_triangle_with(surf, a, b, c, delta0, &DistancePlan::default())
}

pub fn comparison_triangle_with(
    surf: &SurfaceModel,
    a: f64,
    b: f64,
    c: f64,
    delta0: f64,
    plan: &DistancePlan,
) -> Result<TriangleData> {
    let slack = 1e-12 * (a + b + c);
    if !(a > 0.0 && b > 0.0 && c >= 0.0) || c > a + b + slack || a > b + c + slack || b > a + c + slack {
        return Err(bad_param("a, b, c", "side lengths violate the triangle inequality"));
    }
    if !(delta0 > 0.0 && delta0 <= PI) {
        return Err(bad_param("delta0", format!("must lie in (0, π], got {delta0}")));
    }
    if a > surf.t_max() || b > surf.t_max() {
        return Err(bad_param("a, b", "side lengths exceed T_max"));
    }
    let d0 = (a - b).abs();
    if c <= d0 {
        return triangle_degenerate(a, b, d0);
    }
    let n = BRACKET_SAMPLES;
    let mut samples: Vec<(f64, DistanceResult)> = Vec::with_capacity(n);
    for k in 1..=n {
        let dt = delta0 * k as f64 / n as f64;
        samples.push((dt, distance_with(surf, (a, 0.0), (b, dt), plan)?));
    }
    let edge = samples.last().unwrap().1.d;
    if edge < c {
        return Err(Error::NoSolutionInSector {
            a,
            b,
            c,
            delta0,
            d_at_edge: edge,
        });
    }
    let mut prev = d0;
    for (dt, res) in &samples {
        if res.d < prev - 1e-12 * (1.0 + prev) {
            return Err(Error::MonotonicityViolation { delta_theta: *dt });
        }
        prev = res.d;
    }
    let k = samples.iter().position(|(_, r)| r.d >= c).unwrap();
    let (lo, dlo, mut hint) = if k == 0 {
        (0.0, d0, samples[0].1.minimizers[0])
    } else {
        (samples[k - 1].0, samples[k - 1].1.d, samples[k - 1].1.minimizers[0])
    };
    let (hi, dhi) = (samples[k].0, samples[k].1.d);
    let mut failed = None;
    let f = |dt: f64| -> f64 {
        if dt <= 0.0 {
            return d0 - c;
        }
        let res = distance_near(surf, (a, 0.0), (b, dt), &hint, plan)
            .map(Ok)
            .unwrap_or_else(|| distance_with(surf, (a, 0.0), (b, dt), plan));
        match res {
            Ok(res) => {
                if res.minimizers[0].phi0 > 0.0 {
                    hint = res.minimizers[0];
                }
                res.d - c
            }
            Err(e) => {
                failed = Some(e);
                f64::NAN
            }
        }
    };
    let root = brent(f, lo, hi, dlo - c, dhi - c, 1e-13, 200);
    if let Some(e) = failed {
        return Err(e);
    }
    triangle_from_apex_with(surf, a, b, root, plan)
}

fn triangle_degenerate(a: f64, b: f64, c: f64) -> Result<TriangleData> {
    Ok(TriangleData {
        a,
        b,
        c,
        angle_p: 0.0,
        angle_x: if a > b { 0.0 } else { PI },
        angle_y: if b > a { 0.0 } else { PI },
        delta_theta: 0.0,
        phi0: if b > a { 0.0 } else { PI },
    })
}
