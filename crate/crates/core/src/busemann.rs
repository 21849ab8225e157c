//! Rays, Busemann functions, the lemma constants and the growth and
//! exhaustion checks built on them.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cutlocus::cut_distance;
use crate::distance::{distance_near, distance_with, DistancePlan, DistanceResult, Minimizer};
use crate::error::{bad_param, Error, Result};
use crate::geodesic::{self, shoot_until_exit};
use crate::roots::bisect_predicate;
use crate::warp::SurfaceModel;

/// A geodesic ray given by its start and initial angle to the outward
/// meridian. A ray from the pole is a meridian and `phi0` is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ray {
    pub start: (f64, f64),
    pub phi0: f64,
}

impl Ray {
    pub fn meridian(theta: f64) -> Self {
        Self {
            start: (0.0, theta),
            phi0: 0.0,
        }
    }

    pub fn from_pole(&self) -> bool {
        self.start.0 == 0.0
    }

    /// Point at arc length `s`.
    pub fn point(&self, surf: &SurfaceModel, s: f64) -> Result<(f64, f64)> {
        if s == 0.0 {
            return Ok(self.start);
        }
        if self.from_pole() {
            if s > surf.t_max() {
                return Err(Error::LeftDomain { s: surf.t_max() });
            }
            return Ok((s, self.start.1));
        }
        let p = geodesic::shoot(surf, self.start.0, self.start.1, self.phi0, s, geodesic::DEFAULT_TOL)?;
        let e = p.end();
        Ok((e.t, e.theta))
    }

    /// Arc length at which the ray leaves the domain (capped at `4 T_max`).
    pub fn max_length(&self, surf: &SurfaceModel) -> Result<f64> {
        if self.from_pole() {
            return Ok(surf.t_max());
        }
        let cap = 4.0 * surf.t_max();
        let p = shoot_until_exit(surf, self.start.0, self.start.1, self.phi0, cap, geodesic::DEFAULT_TOL)?;
        Ok(p.left_domain.unwrap_or(cap))
    }
}

/// Number of geometric arc-length samples in [`is_ray`].
pub const RAY_SAMPLES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayCertificate {
    pub ray: Ray,
    pub horizon: f64,
    /// `max |d(γ(0), γ(s)) - s|` over the samples.
    pub residual: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum RayCheck {
    Certified(RayCertificate),
    Rejected { first_failing_s: f64, residual: f64 },
}

impl RayCheck {
    pub fn is_certified(&self) -> bool {
        matches!(self, RayCheck::Certified(_))
    }
}

/// Checks `d(γ(0), γ(s)) = s` at `s = T_h 2^{-k}`, smallest `s` first.
pub fn is_ray(surf: &SurfaceModel, ray: &Ray, horizon: f64, tol: f64, plan: &DistancePlan) -> Result<RayCheck> {
    if !(horizon > 0.0) {
        return Err(bad_param("horizon", "must be positive"));
    }
    let mut worst: f64 = 0.0;
    for k in (0..RAY_SAMPLES).rev() {
        let s = horizon * 0.5f64.powi(k as i32);
        let y = ray.point(surf, s)?;
        let d = distance_with(surf, ray.start, y, plan)?.d;
        let r = (d - s).abs();
        worst = worst.max(r);
        if r > tol * (1.0 + s) {
            return Ok(RayCheck::Rejected {
                first_failing_s: s,
                residual: r,
            });
        }
    }
    Ok(RayCheck::Certified(RayCertificate {
        ray: *ray,
        horizon,
        residual: worst,
        samples: RAY_SAMPLES,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusemannEstimate {
    /// `b_T` at the last horizon used.
    pub value: f64,
    pub lower: f64,
    /// `d(x, γ(0))`.
    pub upper: f64,
    pub horizon: f64,
    pub increment: f64,
    pub eps: f64,
    pub converged: bool,
    /// `(T, b_T, φ0)` with `φ0` the initial angle of a minimal segment
    /// from `x` to `γ(T)`.
    pub history: Vec<(f64, f64, f64)>,
}

impl BusemannEstimate {
    /// The estimate, or `HorizonExhausted` if it did not converge.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::HorizonExhausted {
                horizon: self.horizon,
                increment: self.increment,
            })
        }
    }
}

fn pick(res: &DistanceResult) -> Minimizer {
    // deterministic choice among equal minimizers: the largest φ0
    *res.minimizers.last().unwrap()
}

/// Follows `T ↦ d(x, γ(T))` along a doubling schedule, continuing from the previous
/// minimizer when possible.
struct Follower<'a> {
    surf: &'a SurfaceModel,
    ray: &'a Ray,
    x: (f64, f64),
    plan: &'a DistancePlan,
    hint: Option<Minimizer>,
}

impl Follower<'_> {
    fn at(&mut self, t: f64) -> Result<(f64, f64)> {
        let y = self.ray.point(self.surf, t)?;
        let near = self
            .hint
            .as_ref()
            .and_then(|h| distance_near(self.surf, self.x, y, h, self.plan));
        let res = match near {
            Some(r) => r,
            None => distance_with(self.surf, self.x, y, self.plan)?,
        };
        let m = pick(&res);
        self.hint = Some(m);
        Ok((res.d, m.phi0))
    }
}

/// First horizon of the doubling schedule: the power of two at or above
/// `max(1, 2 d(x, γ(0)))`.
fn first_horizon(d0: f64) -> f64 {
    2f64.powi((2.0 * d0).max(1.0).log2().ceil() as i32)
}

/// Busemann function `F_γ(x) = lim (T - d(x, γ(T)))` by doubling `T` until
/// `b_{2T} - b_T < ε`. The default `ε` is `1e-5 (1 + d(x, γ(0)))`.
pub fn busemann(
    surf: &SurfaceModel,
    ray: &Ray,
    x: (f64, f64),
    eps: Option<f64>,
    plan: &DistancePlan,
) -> Result<BusemannEstimate> {
    let d0 = distance_with(surf, x, ray.start, plan)?.d;
    let eps = eps.unwrap_or(1e-5 * (1.0 + d0));
    let cap = ray.max_length(surf)?;
    let mut fol = Follower {
        surf,
        ray,
        x,
        plan,
        hint: None,
    };
    let mut t = first_horizon(d0).min(cap);
    let (d, phi) = fol.at(t)?;
    let mut history = vec![(t, t - d, phi)];
    let mut increment = f64::INFINITY;
    let mut converged = false;
    while t < cap {
        let t2 = (2.0 * t).min(cap);
        let (d, phi) = fol.at(t2)?;
        let b = t2 - d;
        increment = b - history.last().unwrap().1;
        history.push((t2, b, phi));
        t = t2;
        if increment < eps {
            converged = true;
            break;
        }
    }
    let value = history.last().unwrap().1;
    Ok(BusemannEstimate {
        value,
        lower: value,
        upper: d0,
        horizon: t,
        increment,
        eps,
        converged,
        history,
    })
}

/// Limit of the initial angles at `x` of minimal segments to `γ(2^i)`,
/// with Cauchy stopping at `1e-6` radians.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticDirection {
    pub phi0: f64,
    pub converged: bool,
    pub last_t: f64,
    pub last_change: f64,
}

pub const ASYMPTOTIC_CAUCHY: f64 = 1e-6;

pub fn asymptotic_direction(
    surf: &SurfaceModel,
    ray: &Ray,
    x: (f64, f64),
    plan: &DistancePlan,
) -> Result<AsymptoticDirection> {
    let cap = ray.max_length(surf)?;
    let mut fol = Follower {
        surf,
        ray,
        x,
        plan,
        hint: None,
    };
    let d0 = distance_with(surf, x, ray.start, plan)?.d;
    let mut t = first_horizon(d0).min(cap);
    let mut phi = fol.at(t)?.1;
    let mut change = f64::INFINITY;
    while t < cap {
        t = (2.0 * t).min(cap);
        let next = fol.at(t)?.1;
        change = (next - phi).abs();
        phi = next;
        if change < ASYMPTOTIC_CAUCHY {
            return Ok(AsymptoticDirection {
                phi0: phi,
                converged: true,
                last_t: t,
                last_change: change,
            });
        }
    }
    Ok(AsymptoticDirection {
        phi0: phi,
        converged: false,
        last_t: t,
        last_change: change,
    })
}

/// Sampling and search settings for [`lemma_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaPlan {
    pub r1_xtol: f64,
    /// Fan size for the ray search at each radius.
    pub r2_fan: usize,
    /// Geometric growth of the candidate radii for `r2` and `r3`.
    pub growth: f64,
    /// Relative bisection tolerance for `r2` and `r3`.
    pub rel_xtol: f64,
    /// The point `q̃ = (r3_q_factor · r2, 0)` used for `r3`.
    pub r3_q_factor: f64,
    pub r3_angles: usize,
    /// Multiples of a candidate radius that must also pass.
    pub beyond: [f64; 3],
}

impl Default for LemmaPlan {
    fn default() -> Self {
        Self {
            r1_xtol: 1e-9,
            r2_fan: 128,
            growth: 1.25,
            rel_xtol: 1e-3,
            r3_q_factor: 1.5,
            r3_angles: 8,
            beyond: [1.0, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R2Diagnostics {
    pub fan: usize,
    pub radii_checked: Vec<f64>,
    pub rays: usize,
    pub non_rays: usize,
    /// Closest approach to the pole over the sampled rays from radius `r2`.
    pub min_ray_radius: f64,
    pub extremal_phi0: f64,
    /// Distance-based certificate of the extremal ray.
    pub certificate: Option<RayCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R3Diagnostics {
    pub q: (f64, f64),
    pub angles: usize,
    pub radii_checked: Vec<f64>,
    /// Worst outward angle at `q̃` over samples beyond `r3`.
    pub worst_outward_angle: f64,
    /// `π/2 - Λ0 -` worst outward angle.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaConstants {
    pub c: f64,
    pub bound: f64,
    pub lambda0: f64,
    pub sin_lambda0: f64,
    pub r1: f64,
    pub tail_at_r1: f64,
    /// Tail just inside `r1`, at `r1 - r1_xtol`.
    pub tail_below_r1: f64,
    pub r2: f64,
    pub r2_diagnostics: R2Diagnostics,
    pub r3: f64,
    pub r3_diagnostics: R3Diagnostics,
    pub plan: LemmaPlan,
}

/// The largest `t < rho` with `f(t) = nu`: where a geodesic from radius
/// `rho` heading inward with Clairaut constant `nu` turns.
fn turning_radius(surf: &SurfaceModel, rho: f64, nu: f64) -> f64 {
    let grid = surf.warp().grid();
    let f = surf.warp().f_samples();
    let k = grid.partition_point(|&t| t < rho);
    let mut hi = rho;
    for j in (0..k).rev() {
        if f[j] <= nu {
            let lo = grid[j];
            let (_, h) = bisect_predicate(|t| surf.f(t).0 > nu, lo, hi, 1e-12);
            return h;
        }
        hi = grid[j];
    }
    0.0
}

/// Smallest radius on the geometric grid from `start` satisfying `ok`,
/// refined by bisection against the previous grid point.
fn monotone_search(
    start: f64,
    limit: f64,
    growth: f64,
    rel_xtol: f64,
    mut ok: impl FnMut(f64) -> Result<bool>,
) -> Result<Option<f64>> {
    let mut prev = start;
    let mut r = start;
    loop {
        if ok(r)? {
            break;
        }
        prev = r;
        r *= growth;
        if r > limit {
            return Ok(None);
        }
    }
    if r == start {
        return Ok(Some(r));
    }
    let (mut lo, mut hi) = (prev, r);
    while hi - lo > rel_xtol * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Rays among a fan from `(rho, 0)`, classified by the absence of a cut
/// point in the domain. Returns `(rays, non_rays, closest approach, φ0)`.
fn ray_fan(surf: &SurfaceModel, rho: f64, fan: usize) -> Result<(usize, usize, f64, f64)> {
    let f_rho = surf.f(rho).0;
    let recs: Vec<(f64, bool)> = (0..fan)
        .into_par_iter()
        .map(|i| {
            let phi = PI * (i as f64 + 0.5) / fan as f64;
            Ok((phi, cut_distance(surf, rho, phi, None)?.s_cut.is_none()))
        })
        .collect::<Result<_>>()?;
    let mut closest = f64::INFINITY;
    let mut extremal = 0.0;
    let mut rays = 0;
    for &(phi, ray) in &recs {
        if !ray {
            continue;
        }
        rays += 1;
        let tmin = if phi <= FRAC_PI_2 {
            rho
        } else {
            turning_radius(surf, rho, f_rho * phi.sin())
        };
        if tmin < closest {
            closest = tmin;
            extremal = phi;
        }
    }
    Ok((rays, fan - rays, closest, extremal))
}

/// Worst outward angle at `q` of minimal segments to `(rho, θ_j)`.
fn worst_outward_angle(surf: &SurfaceModel, q: f64, rho: f64, n: usize, plan: &DistancePlan) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 1..=n {
        let th = PI * j as f64 / n as f64;
        let res = distance_with(surf, (q, 0.0), (rho, th), plan)?;
        for m in &res.minimizers {
            worst = worst.max(m.phi0.abs());
        }
    }
    Ok(worst)
}

/// `Λ0 = (c - π)/3`, then `r1`, `r2` and `r3` by monotone searches with
/// sampling certificates.
pub fn lemma_constants(surf: &SurfaceModel, plan: &LemmaPlan, dplan: &DistancePlan) -> Result<LemmaConstants> {
    let (c, bound) = surf.total_curvature();
    if !(c - bound > PI) {
        return Err(Error::TotalCurvatureNotAbovePi { c, bound });
    }
    let lambda0 = (c - PI) / 3.0;
    let t_max = surf.t_max();

    if surf.tail_integral(0.0) < lambda0 {
        return Err(Error::Gate("tail integral is below Λ0 everywhere".into()));
    }
    let (_, r1) = bisect_predicate(|r| surf.tail_integral(r) < lambda0, 0.0, t_max, plan.r1_xtol);
    let tail_at_r1 = surf.tail_integral(r1);
    let tail_below_r1 = surf.tail_integral((r1 - plan.r1_xtol).max(0.0));

    let limit = 0.25 * t_max;
    let mut checked = Vec::new();
    let r2 = monotone_search(r1, limit, plan.growth, plan.rel_xtol, |r| {
        for k in plan.beyond {
            let rho = k * r;
            if rho >= t_max {
                continue;
            }
            checked.push(rho);
            if ray_fan(surf, rho, plan.r2_fan)?.2 <= r1 {
                return Ok(false);
            }
        }
        Ok(true)
    })?
    .ok_or_else(|| Error::Gate(format!("no radius below {limit} keeps sampled rays outside B(r1)")))?;
    let (rays, non_rays, closest, extremal) = ray_fan(surf, r2, plan.r2_fan)?;
    let ray = Ray {
        start: (r2, 0.0),
        phi0: extremal,
    };
    let horizon = ray.max_length(surf)?.min(64.0 * r2);
    let certificate = is_ray(surf, &ray, horizon, 1e-7, dplan).ok();
    let r2_diagnostics = R2Diagnostics {
        fan: plan.r2_fan,
        radii_checked: checked,
        rays,
        non_rays,
        min_ray_radius: closest,
        extremal_phi0: extremal,
        certificate,
    };

    let q = plan.r3_q_factor * r2;
    let bound_angle = FRAC_PI_2 - lambda0;
    let mut checked = Vec::new();
    let r3 = monotone_search(q * plan.growth, limit, plan.growth, plan.rel_xtol, |rho| {
        checked.push(rho);
        Ok(worst_outward_angle(surf, q, rho, plan.r3_angles, dplan)? <= bound_angle)
    })?
    .ok_or_else(|| Error::Gate(format!("no radius below {limit} satisfies the angle bound at q = {q}")))?;
    let mut worst: f64 = 0.0;
    for k in plan.beyond {
        let rho = k * r3;
        if rho < t_max {
            worst = worst.max(worst_outward_angle(surf, q, rho, plan.r3_angles, dplan)?);
        }
    }
    let r3_diagnostics = R3Diagnostics {
        q: (q, 0.0),
        angles: plan.r3_angles,
        radii_checked: checked,
        worst_outward_angle: worst,
        margin: bound_angle - worst,
    };
    Ok(LemmaConstants {
        c,
        bound,
        lambda0,
        sin_lambda0: lambda0.sin(),
        r1,
        tail_at_r1,
        tail_below_r1,
        r2,
        r2_diagnostics,
        r3,
        r3_diagnostics,
        plan: *plan,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionSample {
    /// Angle to the outward meridian at the base point (absolute θ at the
    /// pole).
    pub angle: f64,
    pub is_ray: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayDirectionSet {
    pub base: (f64, f64),
    pub horizon: f64,
    pub samples: Vec<DirectionSample>,
    pub diameter_lower: f64,
    pub diameter_upper: f64,
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

impl RayDirectionSet {
    pub fn ray_angles(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().filter(|s| s.is_ray).map(|s| s.angle)
    }

    /// Ray directions not within `delta` of any direction of `family`.
    pub fn uncovered(&self, family: &[f64], delta: f64) -> Vec<f64> {
        self.ray_angles()
            .filter(|&a| !family.iter().any(|&v| circular_gap(a, v) <= delta))
            .collect()
    }

    pub fn check_covering(&self, family: &[f64], delta: f64) -> Result<()> {
        let uncovered = self.uncovered(family, delta);
        if uncovered.is_empty() {
            Ok(())
        } else {
            Err(Error::CoveringFailed { uncovered })
        }
    }
}

/// Samples `resolution` directions at `p` and classifies them as rays up to
/// `horizon` (default `T_max - t`).
pub fn ray_directions(
    surf: &SurfaceModel,
    p: (f64, f64),
    resolution: usize,
    horizon: Option<f64>,
    plan: &DistancePlan,
) -> Result<RayDirectionSet> {
    if resolution < 2 {
        return Err(bad_param("resolution", "needs at least 2 directions"));
    }
    let angles: Vec<f64> = (0..resolution)
        .map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / resolution as f64)
        .collect();
    let horizon = horizon.unwrap_or(surf.t_max() - p.0);
    let samples: Vec<DirectionSample> = if p.0 == 0.0 {
        angles.iter().map(|&angle| DirectionSample { angle, is_ray: true }).collect()
    } else {
        angles
            .par_iter()
            .map(|&angle| {
                let cut = cut_distance(surf, p.0, angle, None)?;
                let is_ray = match cut.s_cut {
                    Some(s) if s < horizon => false,
                    _ => {
                        let ray = Ray { start: p, phi0: angle };
                        let h = horizon.min(ray.max_length(surf)?);
                        is_ray(surf, &ray, h, 1e-7, plan)?.is_certified()
                    }
                };
                Ok(DirectionSample { angle, is_ray })
            })
            .collect::<Result<_>>()?
    };
    let rays: Vec<f64> = samples.iter().filter(|s| s.is_ray).map(|s| s.angle).collect();
    let mut lower: f64 = 0.0;
    for (i, &a) in rays.iter().enumerate() {
        for &b in &rays[i + 1..] {
            lower = lower.max(circular_gap(a, b));
        }
    }
    let spacing = 2.0 * PI / resolution as f64;
    let upper = if rays.is_empty() { 0.0 } else { (lower + 2.0 * spacing).min(PI) };
    Ok(RayDirectionSet {
        base: p,
        horizon,
        samples,
        diameter_lower: lower,
        diameter_upper: upper,
    })
}

/// Directions at the pole of `Π(γ)`: for rays from the pole their own
/// meridian, otherwise the limiting angle of `γ(2^i)`.
pub fn pole_directions(surf: &SurfaceModel, ray: &Ray) -> Result<f64> {
    if ray.from_pole() {
        return Ok(ray.start.1);
    }
    let cap = ray.max_length(surf)?;
    let mut t = 1.0f64.min(cap);
    let mut th = ray.point(surf, t)?.1;
    while t < cap {
        t = (2.0 * t).min(cap);
        let next = ray.point(surf, t)?.1;
        let change = (next - th).abs();
        th = next;
        if change < ASYMPTOTIC_CAUCHY {
            break;
        }
    }
    Ok(th)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthSample {
    pub q: (f64, f64),
    pub f_q: f64,
    pub f_mid: f64,
    pub f_r2: f64,
    /// `F(q) - F(α(r2)) - (d(p, q) - r2) sin Λ0`.
    pub margin_from_r2: f64,
    /// `F(α(b)) - F(α(a)) - (b - a) sin Λ0` with `a` the midpoint, `b = d(p, q)`.
    pub margin_segment: f64,
    pub asymptotic_angle: f64,
    /// `π/2 - Λ0 -` asymptotic angle.
    pub margin_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub ray: Ray,
    pub delta0: f64,
    pub tol: f64,
    pub requested: usize,
    pub skipped_by_angle: usize,
    pub samples: Vec<GrowthSample>,
    pub violations: Vec<GrowthSample>,
    pub min_margin_from_r2: f64,
    pub min_margin_segment: f64,
    pub min_margin_angle: f64,
}

/// Samples `n` points `q` with `r2 < d(p, q) ≤ r_hi`, `α` the meridian from
/// the pole through `q`, and checks both growth inequalities and the
/// asymptotic-ray angle bound.
#[allow(clippy::too_many_arguments)]
pub fn growth_check(
    surf: &SurfaceModel,
    ray: &Ray,
    constants: &LemmaConstants,
    delta0: f64,
    n: usize,
    r_hi: f64,
    seed: u64,
    tol: f64,
    plan: &DistancePlan,
) -> Result<GrowthReport> {
    let r2 = constants.r2;
    if !(r_hi > r2 && r_hi <= surf.t_max()) {
        return Err(bad_param("r_hi", format!("must lie in (r2, T_max], got {r_hi}")));
    }
    let s = constants.sin_lambda0;
    let bound_angle = FRAC_PI_2 - constants.lambda0;
    let dir = pole_directions(surf, ray)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut skipped = 0;
    for _ in 0..n {
        let t = r2 * (r_hi / r2).powf(rng.gen::<f64>());
        let th = rng.gen_range(-PI..PI);
        if circular_gap(th, dir) > delta0 {
            skipped += 1;
            continue;
        }
        points.push((t, th));
    }
    let samples: Vec<GrowthSample> = points
        .par_iter()
        .map(|&(t, th)| {
            let fq = busemann(surf, ray, (t, th), None, plan)?;
            let mid = 0.5 * (r2 + t);
            let f_mid = busemann(surf, ray, (mid, th), None, plan)?.value;
            let f_r2 = busemann(surf, ray, (r2, th), None, plan)?.value;
            let sigma = asymptotic_direction(surf, ray, (t, th), plan)?;
            Ok(GrowthSample {
                q: (t, th),
                f_q: fq.value,
                f_mid,
                f_r2,
                margin_from_r2: fq.value - f_r2 - (t - r2) * s,
                margin_segment: fq.value - f_mid - (t - mid) * s,
                asymptotic_angle: sigma.phi0.abs(),
                margin_angle: bound_angle - sigma.phi0.abs(),
            })
        })
        .collect::<Result<_>>()?;
    let violations: Vec<GrowthSample> = samples
        .iter()
        .filter(|g| g.margin_from_r2 < -tol || g.margin_segment < -tol || g.margin_angle < -tol)
        .copied()
        .collect();
    let min = |f: fn(&GrowthSample) -> f64| samples.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(GrowthReport {
        ray: *ray,
        delta0,
        tol,
        requested: n,
        skipped_by_angle: skipped,
        min_margin_from_r2: min(|g| g.margin_from_r2),
        min_margin_segment: min(|g| g.margin_segment),
        min_margin_angle: min(|g| g.margin_angle),
        samples,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub r: f64,
    pub m: f64,
    pub argmin_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExhaustionViolation {
    pub r_from: f64,
    pub r_to: f64,
    pub m_from: f64,
    pub m_to: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionReport {
    pub rays: Vec<Ray>,
    pub n_theta: usize,
    pub tol: f64,
    /// Slope required between consecutive radii: `sin Λ0 - tol` with
    /// constants, otherwise strictly positive growth.
    pub required_slope: f64,
    pub series: Vec<SeriesPoint>,
    pub min_slope: f64,
    pub violations: Vec<ExhaustionViolation>,
    /// Violations of `m(R) ≥ (R - r2) sin Λ0 + m(r2) - tol`.
    pub floor_violations: Vec<f64>,
    pub unconverged: usize,
}

/// `m(R) = min_θ max_i F_{γ_i}(R, θ)` on each radius, with growth checks.
/// With `constants` the δ0-covering of the pole's ray directions by the
/// family is checked first.
#[allow(clippy::too_many_arguments)]
pub fn exhaustion_check(
    surf: &SurfaceModel,
    rays: &[Ray],
    radii: &[f64],
    n_theta: usize,
    constants: Option<&LemmaConstants>,
    delta0: f64,
    tol: f64,
    plan: &DistancePlan,
) -> Result<ExhaustionReport> {
    if rays.is_empty() || n_theta < 2 {
        return Err(bad_param("rays, n_theta", "need at least one ray and two angles"));
    }
    let mut radii = radii.to_vec();
    if let Some(k) = constants {
        let family = rays.iter().map(|r| pole_directions(surf, r)).collect::<Result<Vec<_>>>()?;
        ray_directions(surf, (0.0, 0.0), 360, None, plan)?.check_covering(&family, delta0)?;
        radii.push(k.r2);
    }
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    if radii.iter().any(|&r| !(r > 0.0 && r < surf.t_max())) {
        return Err(bad_param("radii", "must lie in (0, T_max)"));
    }
    let thetas: Vec<f64> = (1..=n_theta).map(|j| PI * (2.0 * j as f64 - n_theta as f64) / n_theta as f64).collect();
    let jobs: Vec<(usize, usize)> = (0..radii.len()).flat_map(|i| (0..n_theta).map(move |j| (i, j))).collect();
    let values = jobs
        .par_iter()
        .map(|&(i, j)| {
            let x = (radii[i], thetas[j]);
            let mut best = f64::NEG_INFINITY;
            let mut unconverged = 0;
            for ray in rays {
                let b = busemann(surf, ray, x, None, plan)?;
                unconverged += usize::from(!b.converged);
                best = best.max(b.value);
            }
            Ok((best, unconverged))
        })
        .collect::<Result<Vec<_>>>()?;
    let unconverged = values.iter().map(|v| v.1).sum();
    let series: Vec<SeriesPoint> = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let row = &values[i * n_theta..(i + 1) * n_theta];
            let (j, m) = row
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.0))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            SeriesPoint {
                r,
                m,
                argmin_theta: thetas[j],
            }
        })
        .collect();

    let (start, required) = match constants {
        Some(k) => (k.r2, k.sin_lambda0 - tol),
        None => (0.0, 0.0),
    };
    let grown: Vec<&SeriesPoint> = series.iter().filter(|p| p.r >= start).collect();
    let mut violations = Vec::new();
    let mut min_slope = f64::INFINITY;
    for w in grown.windows(2) {
        let slope = (w[1].m - w[0].m) / (w[1].r - w[0].r);
        min_slope = min_slope.min(slope);
        let bad = if constants.is_some() { slope < required } else { slope <= 0.0 };
        if bad {
            violations.push(ExhaustionViolation {
                r_from: w[0].r,
                r_to: w[1].r,
                m_from: w[0].m,
                m_to: w[1].m,
                slope,
            });
        }
    }
    let floor_violations = match (constants, grown.first()) {
        (Some(k), Some(base)) => grown
            .iter()
            .filter(|p| p.m < (p.r - k.r2) * k.sin_lambda0 + base.m - tol)
            .map(|p| p.r)
            .collect(),
        _ => Vec::new(),
    };
    Ok(ExhaustionReport {
        rays: rays.to_vec(),
        n_theta,
        tol,
        required_slope: required,
        series,
        min_slope,
        violations,
        floor_violations,
        unconverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{RadialCurvature, DEFAULT_TOL};

    fn plane(t_max: f64) -> SurfaceModel {
        SurfaceModel::new(RadialCurvature::plane(), t_max, DEFAULT_TOL).unwrap()
    }

    fn cone() -> SurfaceModel {
        SurfaceModel::new(RadialCurvature::smoothed_cone(0.25).unwrap(), 1e6, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn meridian_is_a_ray() {
        let s = plane(50.0);
        let c = is_ray(&s, &Ray::meridian(0.7), 40.0, 1e-9, &DistancePlan::default()).unwrap();
        match c {
            RayCheck::Certified(c) => assert!(c.residual < 1e-12),
            _ => panic!("{c:?}"),
        }
    }

    #[test]
    fn plane_lines_are_rays() {
        let s = plane(50.0);
        let ray = Ray {
            start: (2.0, 0.3),
            phi0: 2.0,
        };
        assert!(is_ray(&s, &ray, 30.0, 1e-8, &DistancePlan::default()).unwrap().is_certified());
    }

    #[test]
    fn busemann_on_the_ray_is_exact() {
        let s = cone();
        let b = busemann(&s, &Ray::meridian(0.0), (3.0, 0.0), None, &DistancePlan::default()).unwrap();
        assert!(b.converged);
        assert!((b.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn plane_busemann_is_projection() {
        let s = plane(1e6);
        let (t, th) = (2.0f64, 1.1f64);
        let b = busemann(&s, &Ray::meridian(0.0), (t, th), None, &DistancePlan::default()).unwrap();
        assert!(b.converged);
        assert!((b.value - t * th.cos()).abs() < b.eps + 1e-6, "{b:?}");
        assert!(b.history.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12));
        assert!(b.value <= b.upper);
    }

    #[test]
    fn short_horizon_is_flagged() {
        let s = plane(20.0);
        let b = busemann(&s, &Ray::meridian(0.0), (5.0, 2.0), None, &DistancePlan::default()).unwrap();
        assert!(!b.converged);
        assert!(matches!(b.require_converged(), Err(Error::HorizonExhausted { .. })));
    }

    #[test]
    fn plane_fails_the_curvature_gate() {
        let s = plane(50.0);
        assert!(matches!(
            lemma_constants(&s, &LemmaPlan::default(), &DistancePlan::default()),
            Err(Error::TotalCurvatureNotAbovePi { .. })
        ));
    }

    #[test]
    fn pole_directions_are_all_rays() {
        let s = plane(50.0);
        let set = ray_directions(&s, (0.0, 0.0), 16, None, &DistancePlan::default()).unwrap();
        assert!(set.samples.iter().all(|d| d.is_ray));
        assert!((set.diameter_lower - PI).abs() < 1e-12);
        assert!(set.check_covering(&[0.0], PI).is_ok());
        assert!(matches!(set.check_covering(&[0.0], 1.0), Err(Error::CoveringFailed { .. })));
    }

    #[test]
    fn turning_radius_on_the_plane() {
        let s = plane(50.0);
        let r = turning_radius(&s, 4.0, 2.0);
        assert!((r - 2.0).abs() < 1e-10);
    }
}
