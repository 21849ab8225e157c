//! Unit-speed geodesics of `dt² + f(t)² dθ²` and Jacobi fields along them.
//!
//! The state is `[t, θ, u, w, y, y']` with `u = dt/ds`, `w = dθ/ds` and `y`
//! the normal Jacobi field vanishing at the start:
//!
//! ```text
//! t' = u,  θ' = w,  u' = f f' w²,  w' = -2 (f'/f) u w,  y'' = -G(t) y
//! ```
//!
//! θ is never wrapped here.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{bad_param, Error, Result};
use crate::ode::{Dopri5, System, Tolerance};
use crate::warp::SurfaceModel;

pub const DEFAULT_TOL: f64 = 1e-11;
/// Bisection tolerance in arc length for conjugate points.
pub const CONJUGATE_XTOL: f64 = 1e-10;

pub(crate) type State = [f64; 6];

pub(crate) struct GeodesicSystem<'a> {
    pub surf: &'a SurfaceModel,
}

impl System<6> for GeodesicSystem<'_> {
    fn rhs(&self, _s: f64, y: &State, _end: bool) -> Option<State> {
        let (t, u, w) = (y[0], y[2], y[3]);
        if !(t > 0.0) {
            return None;
        }
        let (f, df) = self.surf.f(t);
        if !(f > 0.0) {
            return None;
        }
        let dw = if w == 0.0 { 0.0 } else { -2.0 * df / f * u * w };
        Some([u, w, f * df * w * w, dw, y[5], -self.surf.g(t) * y[4]])
    }
}

pub(crate) fn tolerance(tol: f64) -> Tolerance<6> {
    // w is controlled relatively only: it never changes sign and can be tiny.
    Tolerance {
        rtol: tol,
        atol: [tol, tol, tol, 0.0, tol, tol],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicState {
    pub s: f64,
    pub t: f64,
    pub theta: f64,
    pub dtds: f64,
    pub dthetads: f64,
}

impl GeodesicState {
    fn from_raw(s: f64, y: &State) -> Self {
        Self {
            s,
            t: y[0],
            theta: y[1],
            dtds: y[2],
            dthetads: y[3],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicPath {
    pub states: Vec<GeodesicState>,
    /// Clairaut constant `f² dθ/ds`.
    pub nu: f64,
    pub length: f64,
    pub start: (f64, f64),
    /// Initial angle to the outward meridian, positive towards increasing θ.
    pub phi0: f64,
    /// Arc length where the path left `[0, T_max]`, if it did.
    pub left_domain: Option<f64>,
}

impl GeodesicPath {
    pub fn end(&self) -> &GeodesicState {
        self.states.last().unwrap()
    }

    /// Worst `|u² + f² w² - 1|` over the samples.
    pub fn speed_drift(&self, surf: &SurfaceModel) -> f64 {
        self.states
            .iter()
            .map(|st| {
                let f = surf.f(st.t).0;
                (st.dtds * st.dtds + f * f * st.dthetads * st.dthetads - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Worst `|f² w - ν|` over the samples.
    pub fn clairaut_drift(&self, surf: &SurfaceModel) -> f64 {
        self.states
            .iter()
            .map(|st| {
                let f = surf.f(st.t).0;
                (f * f * st.dthetads - self.nu).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Read access to the last accepted step during a trace.
pub(crate) struct StepView<'s, 'a> {
    st: &'s Dopri5<'a, GeodesicSystem<'a>, 6>,
    /// Step end used by watchers; earlier than the integrator's when the
    /// step left the domain.
    end: f64,
}

impl StepView<'_, '_> {
    pub fn s1(&self) -> f64 {
        self.end
    }

    pub fn y0(&self) -> &State {
        self.st.prev_y()
    }

    pub fn y1(&self) -> State {
        if self.end == self.st.s() {
            *self.st.y()
        } else {
            self.st.resample(self.end - self.st.prev_s())
        }
    }

    /// Arc length and state where `g` changes sign inside the step. The caller
    /// checks the sign change at the step ends first.
    pub fn locate(&self, g: impl FnMut(&State) -> f64, xtol: f64) -> (f64, State) {
        let (tau, y) = self.st.locate(g, xtol);
        (self.st.prev_s() + tau, y)
    }
}

pub(crate) enum TraceEnd {
    /// Reached the requested length.
    Completed { s: f64, y: State },
    /// A watcher asked to stop.
    Stopped,
    /// Left `[0, T_max]` at `s`.
    Exited { s: f64 },
}

/// Initial state for a start at radius `t0` with angle `phi0` to the outward
/// meridian.
pub(crate) fn initial_state(surf: &SurfaceModel, t0: f64, theta0: f64, phi0: f64) -> State {
    let f = surf.f(t0).0;
    [t0, theta0, phi0.cos(), phi0.sin() / f, 0.0, 1.0]
}

/// Integrates from `y0` up to arc length `s_end`. After every accepted step
/// the watcher sees the step; returning `true` stops the trace.
pub(crate) fn trace(
    surf: &SurfaceModel,
    y0: State,
    s_end: f64,
    tol: f64,
    mut watch: impl FnMut(&StepView) -> bool,
) -> Result<TraceEnd> {
    let sys = GeodesicSystem { surf };
    let t_max = surf.t_max();
    let h0 = (0.01 * y0[0]).clamp(1e-6, 0.1).min(s_end);
    let mut st = Dopri5::new(&sys, 0.0, y0, h0, tolerance(tol))?;
    while st.s() < s_end {
        let cap = surf.step_cap(st.y()[0]);
        st.advance(s_end, cap).map_err(|e| match e {
            Error::StepUnderflow { s } => Error::StepUnderflow { s },
            other => other,
        })?;
        if st.y()[0] > t_max {
            let (tau, _) = st.locate(|y| y[0] - t_max, 1e-12);
            let s = st.prev_s() + tau;
            let view = StepView { st: &st, end: s };
            if watch(&view) {
                return Ok(TraceEnd::Stopped);
            }
            return Ok(TraceEnd::Exited { s });
        }
        let view = StepView { st: &st, end: st.s() };
        if watch(&view) {
            return Ok(TraceEnd::Stopped);
        }
    }
    Ok(TraceEnd::Completed {
        s: st.s(),
        y: *st.y(),
    })
}

fn check_start(surf: &SurfaceModel, t0: f64, length: f64) -> Result<()> {
    if !(t0 > 0.0 && t0 <= surf.t_max()) {
        return Err(bad_param("t0", format!("must lie in (0, T_max], got {t0}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(bad_param("length", format!("must be positive, got {length}")));
    }
    Ok(())
}

fn meridian_path(t0: f64, theta0: f64, outward: bool, length: f64, steps: usize) -> GeodesicPath {
    let sign = if outward { 1.0 } else { -1.0 };
    let states = (0..=steps)
        .map(|i| {
            let s = length * i as f64 / steps as f64;
            GeodesicState {
                s,
                t: t0 + sign * s,
                theta: theta0,
                dtds: sign,
                dthetads: 0.0,
            }
        })
        .collect();
    GeodesicPath {
        states,
        nu: 0.0,
        length,
        start: (t0, theta0),
        phi0: if outward { 0.0 } else { PI },
        left_domain: None,
    }
}

/// Shoots the geodesic from `(t0, θ0)` with angle `phi0` to the outward
/// meridian (`phi0 ∈ [-π, π]`, negative values head towards decreasing θ)
/// for arc length `length`, stopping early if it leaves the domain.
pub fn shoot_until_exit(
    surf: &SurfaceModel,
    t0: f64,
    theta0: f64,
    phi0: f64,
    length: f64,
    tol: f64,
) -> Result<GeodesicPath> {
    check_start(surf, t0, length)?;
    let f0 = surf.f(t0).0;
    let nu = f0 * phi0.sin();
    if phi0 == 0.0 || phi0.abs() == PI {
        let outward = phi0 == 0.0;
        if !outward && length > t0 {
            return Err(Error::PoleHit { s: t0 });
        }
        let mut path = meridian_path(t0, theta0, outward, length.min(surf.t_max() - t0).max(0.0), 64);
        if outward && t0 + length > surf.t_max() {
            path.left_domain = Some(surf.t_max() - t0);
        } else {
            path.length = length;
        }
        return Ok(path);
    }
    let y0 = initial_state(surf, t0, theta0, phi0);
    let mut states = vec![GeodesicState::from_raw(0.0, &y0)];
    let end = trace(surf, y0, length, tol, |v| {
        states.push(GeodesicState::from_raw(v.s1(), &v.y1()));
        false
    })?;
    let (length, left_domain) = match end {
        TraceEnd::Completed { s, .. } => (s, None),
        TraceEnd::Exited { s } => (s, Some(s)),
        TraceEnd::Stopped => unreachable!("watcher never stops"),
    };
    Ok(GeodesicPath {
        states,
        nu,
        length,
        start: (t0, theta0),
        phi0,
        left_domain,
    })
}

/// Like [`shoot_until_exit`] but leaving the domain is an error.
pub fn shoot(
    surf: &SurfaceModel,
    t0: f64,
    theta0: f64,
    phi0: f64,
    length: f64,
    tol: f64,
) -> Result<GeodesicPath> {
    let path = shoot_until_exit(surf, t0, theta0, phi0, length, tol)?;
    match path.left_domain {
        Some(s) => Err(Error::LeftDomain { s }),
        None => Ok(path),
    }
}

/// The meridian `θ = theta` from the pole up to `T_max`.
pub fn meridian(surf: &SurfaceModel, theta: f64) -> GeodesicPath {
    let mut p = meridian_path(0.0, theta, true, surf.t_max(), 256);
    p.start = (0.0, theta);
    p
}

struct MeridianJacobi<'a> {
    surf: &'a SurfaceModel,
    t0: f64,
    sign: f64,
}

impl System<2> for MeridianJacobi<'_> {
    fn rhs(&self, s: f64, y: &[f64; 2], _end: bool) -> Option<[f64; 2]> {
        // through the pole the meridian continues on the opposite side
        let t = (self.t0 + self.sign * s).abs();
        Some([y[1], -self.surf.g(t) * y[0]])
    }
}

/// First zero of the Jacobi field `y'' + G(t(s)) y = 0`, `y(0) = 0`,
/// `y'(0) = 1` along the path, if it occurs within the path.
pub fn conjugate_point(surf: &SurfaceModel, path: &GeodesicPath) -> Result<Option<f64>> {
    let (t0, theta0) = path.start;
    if path.nu == 0.0 {
        let sign = if path.phi0 == 0.0 { 1.0 } else { -1.0 };
        let sys = MeridianJacobi { surf, t0, sign };
        let mut st = Dopri5::new(&sys, 0.0, [0.0, 1.0], 1e-4, Tolerance::uniform(surf.tol()))?;
        while st.s() < path.length {
            let t = (t0 + sign * st.s()).abs();
            let mut cap = surf.step_cap(t);
            if sign < 0.0 && st.s() < t0 {
                cap = cap.min(t0 - st.s()).max(1e-9);
            }
            st.advance(path.length, cap)?;
            if st.y()[0] <= 0.0 {
                let (tau, _) = st.locate(|y| y[0], CONJUGATE_XTOL);
                return Ok(Some(st.prev_s() + tau));
            }
        }
        return Ok(None);
    }
    let y0 = initial_state(surf, t0, theta0, path.phi0);
    let mut found = None;
    let tol = surf.tol().max(1e-13);
    trace(surf, y0, path.length, tol, |v| {
        if v.y1()[4] <= 0.0 && v.y0()[4] > 0.0 {
            found = Some(v.locate(|y| y[4], CONJUGATE_XTOL).0);
            return true;
        }
        false
    })?;
    Ok(found)
}

/// Angle between tangent vectors `(dt, dθ)` at a point of radius `t` in the
/// metric `diag(1, f²)`.
pub fn angle_between(surf: &SurfaceModel, t: f64, v1: (f64, f64), v2: (f64, f64)) -> Result<f64> {
    let f = surf.f(t).0;
    let f2 = f * f;
    let n1 = (v1.0 * v1.0 + f2 * v1.1 * v1.1).sqrt();
    let n2 = (v2.0 * v2.0 + f2 * v2.1 * v2.1).sqrt();
    if n1 == 0.0 || n2 == 0.0 || !n1.is_finite() || !n2.is_finite() {
        return Err(Error::ZeroVector);
    }
    let c = (v1.0 * v2.0 + f2 * v1.1 * v2.1) / (n1 * n2);
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// `g`-norm of a tangent vector at radius `t`.
pub fn norm(surf: &SurfaceModel, t: f64, v: (f64, f64)) -> f64 {
    let f = surf.f(t).0;
    (v.0 * v.0 + f * f * v.1 * v.1).sqrt()
}

/// Signed angle of the unit tangent `(u, w)` at radius `t` to the outward
/// meridian.
pub fn direction_angle(surf: &SurfaceModel, t: f64, u: f64, w: f64) -> f64 {
    let f = surf.f(t).0;
    (f * w).atan2(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::{RadialCurvature, DEFAULT_TOL as WARP_TOL};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn plane() -> SurfaceModel {
        SurfaceModel::new(RadialCurvature::plane(), 100.0, WARP_TOL).unwrap()
    }

    #[test]
    fn plane_radial_line() {
        let s = plane();
        let p = shoot(&s, 1.0, 0.0, 0.0, 2.0, DEFAULT_TOL).unwrap();
        assert_eq!(p.end().t, 3.0);
        assert_eq!(p.end().theta, 0.0);
    }

    #[test]
    fn plane_perpendicular_chord() {
        let s = plane();
        let p = shoot(&s, 1.0, 0.0, PI / 2.0, 1.0, DEFAULT_TOL).unwrap();
        let e = p.end();
        assert!((e.t - 2f64.sqrt()).abs() < 1e-8, "{e:?}");
        assert!((e.theta - PI / 4.0).abs() < 1e-8);
        assert!((p.length - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_clairaut_drift() {
        let s = SurfaceModel::new(RadialCurvature::hyperbolic(), 10.0, WARP_TOL).unwrap();
        for phi in [0.3, 1.0, 1.7, 2.5, 3.0] {
            let p = shoot(&s, 1.0, 0.0, phi, 5.0, DEFAULT_TOL).unwrap();
            assert!(p.clairaut_drift(&s) < 1e-8, "phi={phi}");
            assert!(p.speed_drift(&s) < 1e-8);
        }
    }

    #[test]
    fn meridian_has_unit_speed() {
        let s = plane();
        let m = meridian(&s, 0.7);
        assert!(m.states.iter().all(|st| st.dtds == 1.0 && st.dthetads == 0.0));
        assert_eq!(m.speed_drift(&s), 0.0);
    }

    #[test]
    fn inward_meridian_hits_pole() {
        let s = plane();
        assert!(matches!(
            shoot(&s, 2.0, 0.0, PI, 3.0, DEFAULT_TOL),
            Err(Error::PoleHit { .. })
        ));
    }

    #[test]
    fn leaving_domain_is_reported() {
        let s = SurfaceModel::new(RadialCurvature::plane(), 5.0, WARP_TOL).unwrap();
        match shoot(&s, 1.0, 0.0, 0.5, 10.0, DEFAULT_TOL) {
            Err(Error::LeftDomain { s }) => {
                // |(1,0) + s (cos .5, sin .5)| = 5
                let want = -0.5f64.cos() + (0.5f64.cos().powi(2) + 24.0).sqrt();
                assert!((s - want).abs() < 1e-9, "{s} vs {want}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn plane_has_no_conjugate_points() {
        let s = plane();
        let p = shoot(&s, 1.0, 0.0, 2.0, 20.0, DEFAULT_TOL).unwrap();
        assert_eq!(conjugate_point(&s, &p).unwrap(), None);
    }

    #[test]
    fn bump_meridian_jacobi_is_sine_then_line() {
        // G = 1 on [0, 1]: y = sin s, then y = sin 1 + (s - 1) cos 1 > 0.
        let g = RadialCurvature::bump(1.0, 0.5, 0.5, 0.0).unwrap();
        let s = SurfaceModel::new(g, 10.0, WARP_TOL).unwrap();
        let m = meridian(&s, 0.0);
        assert_eq!(conjugate_point(&s, &m).unwrap(), None);
    }

    #[test]
    fn sphere_cap_conjugate_at_pi() {
        // G = 1 on [0, 3]; from t0 = 1.5 along a parallel-ish direction the
        // Jacobi field is sin s as long as the geodesic stays in the cap.
        let g = RadialCurvature::bump(1.0, 1.5, 1.5, 0.0).unwrap();
        let s = SurfaceModel::new(g, 3.0, WARP_TOL).unwrap();
        let p = shoot_until_exit(&s, 1.0, 0.0, PI / 2.0, 3.5, DEFAULT_TOL).unwrap();
        let max_t = p.states.iter().map(|st| st.t).fold(0.0, f64::max);
        assert!(max_t < 3.0);
        let sc = conjugate_point(&s, &p).unwrap().unwrap();
        assert!((sc - PI).abs() < 1e-8, "{sc}");
    }

    #[test]
    fn angle_examples() {
        let s = plane();
        assert_eq!(angle_between(&s, 2.0, (1.0, 0.3), (1.0, 0.3)).unwrap(), 0.0);
        assert!((angle_between(&s, 2.0, (1.0, 0.0), (0.0, 0.5)).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((norm(&s, 2.0, (0.0, 0.5)) - 1.0).abs() < 1e-15);
        assert_eq!(angle_between(&s, 2.0, (0.0, 0.0), (1.0, 0.0)), Err(Error::ZeroVector));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn mirrored_shots_are_mirrored(t0 in 0.2f64..5.0, phi in 0.05f64..3.1, len in 0.5f64..8.0) {
            let s = SurfaceModel::catalog("paraboloid", &BTreeMap::new()).unwrap();
            let a = shoot_until_exit(&s, t0, 0.0, phi, len, DEFAULT_TOL).unwrap();
            let b = shoot_until_exit(&s, t0, 0.0, -phi, len, DEFAULT_TOL).unwrap();
            prop_assert_eq!(a.states.len(), b.states.len());
            for (x, y) in a.states.iter().zip(&b.states) {
                prop_assert!((x.t - y.t).abs() < 1e-12);
                prop_assert!((x.theta + y.theta).abs() < 1e-12);
            }
        }

        #[test]
        fn invariants_hold_on_smoothed_cone(t0 in 0.1f64..10.0, phi in 0.0f64..PI, len in 0.5f64..20.0) {
            let s = SurfaceModel::new(RadialCurvature::smoothed_cone(0.25).unwrap(), 100.0, WARP_TOL).unwrap();
            let p = shoot_until_exit(&s, t0, 0.0, phi, len, DEFAULT_TOL).unwrap();
            prop_assert!(p.clairaut_drift(&s) < 1e-8 * p.length.max(1.0));
            prop_assert!(p.speed_drift(&s) < 1e-8 * p.length.max(1.0));
            prop_assert!(p.states.windows(2).all(|w| w[1].theta >= w[0].theta));
        }
    }
}
