//! Radial curvature, the warping function and total curvature.
//!
//! The warping function solves `f'' + G f = 0`, `f(0) = 0`, `f'(0) = 1`. It is
//! stored on the accepted step grid of the integrator together with `f'` and
//! interpolated by quintic Hermite pieces that use `f'' = -G f` at the knots,
//! so the interpolant reproduces `f`, `f'` and `f''` at every knot.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{bad_param, Error, Result};
use crate::ode::{Dopri5, StepStats, System, Tolerance};

pub const DEFAULT_TOL: f64 = 1e-12;
const TWO_PI: f64 = 2.0 * PI;

/// One-sided evaluation at a jump of `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Monotone piecewise cubic (Fritsch–Carlson) through tabulated `(t, G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    t: Vec<f64>,
    g: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(t: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if t.len() != g.len() || t.len() < 2 {
            return Err(bad_param("table", "need at least two (t, G) rows"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad_param("table", "t column must be strictly increasing"));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCurvature { t: t[i] });
        }
        let n = t.len();
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (g[k + 1] - g[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { t, g, d })
    }

    pub fn knots(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        let k = match self.t.partition_point(|&v| v <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.t[k + 1] - self.t[k];
        let s = (x - self.t[k]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.g[k] + h10 * h * self.d[k] + h01 * self.g[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn pchip_end(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Parameters of the spike family: a smoothed-cone base with negative spikes
/// of depth `h0 * growth^(n-1)` centred at `t_n = spacing * n`. Spike `n` has
/// half width `kappa / (h_n t_n growth^n)`, so the spikes add a summable
/// amount of curvature while their depths are unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeParams {
    pub base_a: f64,
    pub kappa: f64,
    pub h0: f64,
    pub growth: f64,
    pub spacing: f64,
}

impl Default for SpikeParams {
    fn default() -> Self {
        Self {
            base_a: 0.5,
            kappa: 0.05,
            h0: 4.0,
            growth: 2.0,
            spacing: 4.0,
        }
    }
}

impl SpikeParams {
    fn depth(&self, n: u32) -> f64 {
        self.h0 * self.growth.powi(n as i32 - 1)
    }

    fn half_width(&self, n: u32) -> f64 {
        let tn = self.spacing * n as f64;
        self.kappa / (self.depth(n) * tn * self.growth.powi(n as i32))
    }

    fn spike(&self, t: f64) -> f64 {
        let n = (t / self.spacing).round();
        if !(1.0..=1000.0).contains(&n) {
            return 0.0;
        }
        let n = n as u32;
        let w = self.half_width(n);
        let x = (t - self.spacing * n as f64) / w;
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let b = 1.0 - x * x;
        -self.depth(n) * b * b * b
    }
}

/// Radial curvature `G(t)` along a meridian.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialCurvature {
    /// `G = k`: the plane for `k = 0`, the hyperbolic plane for `k = -1`.
    Constant { k: f64 },
    /// Profile `z = r^2 / 2` in arc length.
    Paraboloid,
    /// Curvature of `f = a t + (1 - a) tanh t`.
    SmoothedCone { a: f64 },
    /// `G = amplitude` on `[center - w, center + w]`, `-trailing` on
    /// `(center + w, center + 3w]`, zero elsewhere.
    Bump {
        amplitude: f64,
        center: f64,
        half_width: f64,
        trailing: f64,
    },
    Spike(SpikeParams),
    Tabulated(Pchip),
}

impl RadialCurvature {
    pub fn plane() -> Self {
        Self::Constant { k: 0.0 }
    }

    pub fn hyperbolic() -> Self {
        Self::Constant { k: -1.0 }
    }

    pub fn smoothed_cone(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(bad_param("a", format!("must lie in (0, 1), got {a}")));
        }
        Ok(Self::SmoothedCone { a })
    }

    pub fn bump(amplitude: f64, center: f64, half_width: f64, trailing: f64) -> Result<Self> {
        if !amplitude.is_finite() || !trailing.is_finite() {
            return Err(bad_param("amplitude", "must be finite"));
        }
        if !(half_width > 0.0) {
            return Err(bad_param("w", format!("must be positive, got {half_width}")));
        }
        if !(center >= half_width) {
            return Err(bad_param("t0", "plateau must start at t >= 0"));
        }
        Ok(Self::Bump {
            amplitude,
            center,
            half_width,
            trailing,
        })
    }

    pub fn spike(p: SpikeParams) -> Result<Self> {
        if !(p.base_a > 0.0 && p.base_a <= 1.0) {
            return Err(bad_param("a", "must lie in (0, 1]"));
        }
        if !(p.kappa > 0.0 && p.h0 > 0.0) {
            return Err(bad_param("kappa", "kappa and h0 must be positive"));
        }
        if !(p.growth > 1.0) {
            return Err(bad_param("growth", "must exceed 1 so depths are unbounded"));
        }
        if !(p.spacing > 0.0) || p.half_width(1) >= 0.5 * p.spacing {
            return Err(bad_param("spacing", "spikes must not overlap"));
        }
        Ok(Self::Spike(p))
    }

    /// Builds a catalog curvature from a family name and numeric parameters.
    /// Unknown parameter names are rejected.
    pub fn from_params(kind: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match kind {
            "plane" | "hyperbolic" | "paraboloid" => &[],
            "constant" => &["k"],
            "smoothed_cone" => &["a"],
            "bump" => &["amplitude", "t0", "w", "trailing"],
            "spike" => &["a", "kappa", "h0", "growth", "spacing"],
            other => return Err(bad_param("kind", format!("unknown surface family `{other}`"))),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(bad_param(k, format!("not a parameter of `{kind}`")));
        }
        let get = |name: &str, default: f64| params.get(name).copied().unwrap_or(default);
        match kind {
            "plane" => Ok(Self::plane()),
            "hyperbolic" => Ok(Self::hyperbolic()),
            "paraboloid" => Ok(Self::Paraboloid),
            "constant" => {
                let k = params
                    .get("k")
                    .copied()
                    .ok_or_else(|| bad_param("k", "required"))?;
                if !k.is_finite() {
                    return Err(bad_param("k", "must be finite"));
                }
                Ok(Self::Constant { k })
            }
            "smoothed_cone" => Self::smoothed_cone(get("a", 0.25)),
            "bump" => Self::bump(get("amplitude", 1.0), get("t0", 0.5), get("w", 0.5), get("trailing", 0.0)),
            _ => {
                let d = SpikeParams::default();
                Self::spike(SpikeParams {
                    base_a: get("a", d.base_a),
                    kappa: get("kappa", d.kappa),
                    h0: get("h0", d.h0),
                    growth: get("growth", d.growth),
                    spacing: get("spacing", d.spacing),
                })
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { k } if *k == 0.0 => "plane",
            Self::Constant { k } if *k == -1.0 => "hyperbolic",
            Self::Constant { .. } => "constant",
            Self::Paraboloid => "paraboloid",
            Self::SmoothedCone { .. } => "smoothed_cone",
            Self::Bump { .. } => "bump",
            Self::Spike(_) => "spike",
            Self::Tabulated(_) => "tabulated",
        }
    }

    /// Family parameters, for reports.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match self {
            Self::Constant { k } => vec![("k", *k)],
            Self::Paraboloid => vec![],
            Self::SmoothedCone { a } => vec![("a", *a)],
            Self::Bump {
                amplitude,
                center,
                half_width,
                trailing,
            } => vec![
                ("amplitude", *amplitude),
                ("t0", *center),
                ("w", *half_width),
                ("trailing", *trailing),
            ],
            Self::Spike(p) => vec![
                ("a", p.base_a),
                ("kappa", p.kappa),
                ("h0", p.h0),
                ("growth", p.growth),
                ("spacing", p.spacing),
            ],
            Self::Tabulated(p) => vec![("knots", p.t.len() as f64)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Horizon used when a spec does not set `t_max`.
    pub fn default_t_max(&self) -> f64 {
        match self {
            Self::Constant { k } if *k == 0.0 => 100.0,
            Self::Constant { .. } => 10.0,
            Self::Paraboloid => 50.0,
            Self::SmoothedCone { .. } => 1e6,
            Self::Bump { center, half_width, .. } => (center + 3.0 * half_width).max(20.0),
            Self::Spike(_) => 40.0,
            Self::Tabulated(p) => *p.t.last().unwrap(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_sided(t, Side::Right)
    }

    /// Evaluates `G`, taking the one-sided limit at jumps.
    pub fn eval_sided(&self, t: f64, side: Side) -> f64 {
        match self {
            Self::Constant { k } => *k,
            Self::Paraboloid => {
                let s2 = 1.0 + paraboloid_radius(t).powi(2);
                1.0 / (s2 * s2)
            }
            Self::SmoothedCone { a } => smoothed_cone_curvature(*a, t),
            Self::Bump {
                amplitude,
                center,
                half_width,
                trailing,
            } => {
                let lo = center - half_width;
                let mid = center + half_width;
                let hi = center + 3.0 * half_width;
                let inside = |a: f64, b: f64| match side {
                    Side::Right => t >= a && t < b,
                    Side::Left => t > a && t <= b,
                };
                if inside(lo, mid) || (t == 0.0 && lo == 0.0) {
                    *amplitude
                } else if inside(mid, hi) {
                    -trailing
                } else {
                    0.0
                }
            }
            Self::Spike(p) => smoothed_cone_curvature(p.base_a, t) + p.spike(t),
            Self::Tabulated(p) => p.eval(t),
        }
    }

    /// Points in `(0, t_max)` where `G` or one of its low derivatives jumps,
    /// or where a narrow feature starts. Integrators stop at each of them.
    pub fn breakpoints(&self, t_max: f64) -> Vec<f64> {
        let mut out = match self {
            Self::Bump {
                center, half_width, ..
            } => vec![
                center - half_width,
                center + half_width,
                center + 3.0 * half_width,
            ],
            Self::Spike(p) => {
                let mut v = Vec::new();
                let mut n = 1u32;
                while p.spacing * (n as f64) - p.half_width(n) < t_max && n <= 1000 {
                    let tn = p.spacing * n as f64;
                    let w = p.half_width(n);
                    v.extend([tn - w, tn, tn + w]);
                    n += 1;
                }
                v
            }
            // the interpolant's second derivative jumps at every knot
            Self::Tabulated(p) => p.t.clone(),
            _ => Vec::new(),
        };
        out.retain(|&b| b > 0.0 && b < t_max);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Is `t` a breakpoint or does `G` have one-sided values that differ?
    fn differs_at(&self, t: f64) -> bool {
        self.eval_sided(t, Side::Left) != self.eval_sided(t, Side::Right)
    }
}

/// `r(t)` for the paraboloid `z = r^2/2`: inverts
/// `t(r) = (r sqrt(1 + r^2) + asinh r) / 2` by Newton's method from above.
pub fn paraboloid_radius(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let mut r = t.min((2.0 * t).sqrt());
    for _ in 0..100 {
        let s = (1.0 + r * r).sqrt();
        let g = 0.5 * (r * s + r.asinh()) - t;
        let step = g / s;
        r -= step;
        if step.abs() <= 1e-16 * r.max(1e-300) {
            break;
        }
    }
    r
}

fn smoothed_cone_curvature(a: f64, t: f64) -> f64 {
    if a == 1.0 {
        return 0.0;
    }
    let t = t.abs();
    // q = tanh(t) / t
    let q = if t < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 3.0 + 2.0 * t2 * t2 / 15.0
    } else {
        t.tanh() / t
    };
    let sech = 1.0 / t.cosh();
    2.0 * (1.0 - a) * sech * sech * q / (a + (1.0 - a) * q)
}

struct WarpSystem<'a> {
    g: &'a RadialCurvature,
    lo: f64,
    hi: f64,
}

impl WarpSystem<'_> {
    fn curvature(&self, t: f64) -> f64 {
        if t <= self.lo {
            self.g.eval_sided(self.lo, Side::Right)
        } else if t >= self.hi {
            self.g.eval_sided(self.hi, Side::Left)
        } else {
            self.g.eval(t)
        }
    }
}

impl System<2> for WarpSystem<'_> {
    fn rhs(&self, t: f64, y: &[f64; 2], _end: bool) -> Option<[f64; 2]> {
        let g = self.curvature(t);
        g.is_finite().then(|| [y[1], -g * y[0]])
    }
}

/// The solved warping function on its integration grid.
#[derive(Debug, Clone)]
pub struct WarpFunction {
    t: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    /// `f''` at each knot, from the right and from the left.
    ddf_right: Vec<f64>,
    ddf_left: Vec<f64>,
    coef: Vec<[f64; 6]>,
    pub tol: f64,
    pub stats: StepStats,
}

impl WarpFunction {
    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    pub fn f_samples(&self) -> &[f64] {
        &self.f
    }

    pub fn df_samples(&self) -> &[f64] {
        &self.df
    }

    /// `f''` at knot `k`, one-sided.
    pub fn ddf_sample(&self, k: usize, side: Side) -> f64 {
        match side {
            Side::Left => self.ddf_left[k],
            Side::Right => self.ddf_right[k],
        }
    }

    pub fn t_max(&self) -> f64 {
        *self.t.last().unwrap()
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.t.len();
        match self.t.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Returns `(f, f', f'')` at `t`. Negative `t` uses the odd extension and
    /// `t > T_max` a second-order Taylor extrapolation.
    pub fn eval2(&self, t: f64) -> (f64, f64, f64) {
        if t < 0.0 {
            let (f, df, ddf) = self.eval2(-t);
            return (-f, df, -ddf);
        }
        let n = self.t.len() - 1;
        if t > self.t[n] {
            let d = t - self.t[n];
            let s = self.ddf_left[n];
            return (self.f[n] + d * (self.df[n] + 0.5 * d * s), self.df[n] + d * s, s);
        }
        let k = self.interval(t);
        let h = self.t[k + 1] - self.t[k];
        let x = (t - self.t[k]) / h;
        let c = &self.coef[k];
        let f = c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * (c[4] + x * c[5]))));
        let d1 = c[1] + x * (2.0 * c[2] + x * (3.0 * c[3] + x * (4.0 * c[4] + x * 5.0 * c[5])));
        let d2 = 2.0 * c[2] + x * (6.0 * c[3] + x * (12.0 * c[4] + x * 20.0 * c[5]));
        (f, d1 / h, d2 / (h * h))
    }

    /// Returns `(f, f')` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (f, df, _) = self.eval2(t);
        (f, df)
    }

    pub fn f(&self, t: f64) -> f64 {
        self.eval2(t).0
    }
}

fn quintic(h: f64, f0: f64, d0: f64, s0: f64, f1: f64, d1: f64, s1: f64) -> [f64; 6] {
    let df = f1 - f0;
    let (hd0, hd1) = (h * d0, h * d1);
    let (hs0, hs1) = (h * h * s0, h * h * s1);
    [
        f0,
        hd0,
        0.5 * hs0,
        10.0 * df - 6.0 * hd0 - 4.0 * hd1 - 1.5 * hs0 + 0.5 * hs1,
        -15.0 * df + 8.0 * hd0 + 7.0 * hd1 + 1.5 * hs0 - hs1,
        6.0 * df - 3.0 * hd0 - 3.0 * hd1 - 0.5 * hs0 + 0.5 * hs1,
    ]
}

/// Solves the Jacobi initial value problem `f'' + G f = 0`, `f(0) = 0`,
/// `f'(0) = 1` on `[0, t_max]`, restarting at every breakpoint of `G`.
pub fn solve_warp(g: &RadialCurvature, t_max: f64, tol: f64) -> Result<WarpFunction> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(bad_param("t_max", format!("must be positive and finite, got {t_max}")));
    }
    if !(tol > 0.0 && tol < 1e-2) {
        return Err(bad_param("tol", format!("must lie in (0, 1e-2), got {tol}")));
    }
    let g0 = g.eval_sided(0.0, Side::Right);
    if !g0.is_finite() {
        return Err(Error::NonFiniteCurvature { t: 0.0 });
    }
    let mut edges = vec![0.0];
    edges.extend(g.breakpoints(t_max));
    edges.push(t_max);

    let tolerance = Tolerance {
        rtol: tol,
        atol: [tol * 1e-4, tol],
    };
    let mut ts = vec![0.0];
    let mut fs = vec![0.0];
    let mut dfs = vec![1.0];
    let mut stats = StepStats::default();
    let mut y = [0.0, 1.0];
    let mut h = 1e-4f64.min(0.5 * t_max);
    for seg in edges.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let sys = WarpSystem { g, lo, hi };
        let mut st = Dopri5::new(&sys, lo, y, h.min(hi - lo), tolerance)?;
        while st.s() < hi {
            if let Err(e) = st.advance(hi, f64::INFINITY) {
                return Err(match e {
                    Error::StepUnderflow { s } => {
                        let bad = [s, s + 1e-12 * s.max(1.0)]
                            .into_iter()
                            .find(|&t| !g.eval(t).is_finite());
                        match bad {
                            Some(t) => Error::NonFiniteCurvature { t },
                            None => e,
                        }
                    }
                    other => other,
                });
            }
            if st.y()[0] <= 0.0 {
                let (tau, _) = st.locate(|y| y[0], 1e-14);
                return Err(Error::WarpVanishes {
                    t: st.prev_s() + tau,
                });
            }
            ts.push(st.s());
            fs.push(st.y()[0]);
            dfs.push(st.y()[1]);
        }
        y = *st.y();
        h = st.step_size();
        stats.accepted += st.stats.accepted;
        stats.rejected += st.stats.rejected;
        stats.max_error = stats.max_error.max(st.stats.max_error);
    }

    let n = ts.len();
    let ddf_right: Vec<f64> = (0..n)
        .map(|k| -g.eval_sided(ts[k], Side::Right) * fs[k])
        .collect();
    let ddf_left: Vec<f64> = (0..n)
        .map(|k| -g.eval_sided(ts[k], Side::Left) * fs[k])
        .collect();
    let coef = (0..n - 1)
        .map(|k| {
            quintic(
                ts[k + 1] - ts[k],
                fs[k],
                dfs[k],
                ddf_right[k],
                fs[k + 1],
                dfs[k + 1],
                ddf_left[k + 1],
            )
        })
        .collect();
    Ok(WarpFunction {
        t: ts,
        f: fs,
        df: dfs,
        ddf_right,
        ddf_left,
        coef,
        tol,
        stats,
    })
}

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const GL5_X: [f64; 2] = [0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL5_W: [f64; 3] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Gauss–Legendre 8-point rule on `[a, b]` and the difference to the 5-point
/// rule as an error estimate.
fn gauss(a: f64, b: f64, mut g: impl FnMut(f64) -> f64) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut s8 = 0.0;
    for (x, w) in GL8_X.iter().zip(GL8_W) {
        s8 += w * (g(m - r * x) + g(m + r * x));
    }
    let mut s5 = GL5_W[0] * g(m);
    for (x, w) in GL5_X.iter().zip(&GL5_W[1..]) {
        s5 += w * (g(m - r * x) + g(m + r * x));
    }
    (r * s8, (r * (s8 - s5)).abs())
}

/// Whether the truncated integrals point to a finite total curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureStatus {
    Finite,
    DivergesNegative,
    DivergesPositive,
    /// Both signed parts look divergent; `c` is not labeled.
    Undetermined,
}

/// Total curvature with the cross-check between its two computations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TotalCurvature {
    /// `2π (1 - f'(T_max))`.
    pub c: f64,
    /// `2π ∫ G f dt` over `[0, T_max]`.
    pub c_integral: f64,
    pub bound: f64,
    /// `|c - c_integral| <= bound`.
    pub certified: bool,
    pub quadrature_error: f64,
    pub i_plus: f64,
    pub i_minus: f64,
    pub status: CurvatureStatus,
}

/// An immutable model surface `dt² + f(t)² dθ²` on `[0, T_max]`.
#[derive(Debug, Clone)]
pub struct SurfaceModel {
    curvature: RadialCurvature,
    warp: WarpFunction,
    t_max: f64,
    tol: f64,
    breakpoints: Vec<f64>,
    /// `∫ G f`, `∫ |G| f`, `∫ G+ f`, `∫ G- f` per grid interval.
    seg: Vec<[f64; 4]>,
    /// Suffix sums of `∫ |G| f`.
    abs_suffix: Vec<f64>,
    quad_err: f64,
    total: TotalCurvature,
    von_mangoldt: bool,
}

impl SurfaceModel {
    pub fn new(curvature: RadialCurvature, t_max: f64, tol: f64) -> Result<Self> {
        let warp = solve_warp(&curvature, t_max, tol)?;
        let breakpoints = curvature.breakpoints(t_max);
        let grid = warp.grid();
        let mut seg = Vec::with_capacity(grid.len() - 1);
        let mut quad_err = 0.0;
        for k in 0..grid.len() - 1 {
            let (a, b) = (grid[k], grid[k + 1]);
            let (i, e) = gauss(a, b, |t| curvature.eval(t) * warp.f(t));
            let (ia, _) = gauss(a, b, |t| curvature.eval(t).abs() * warp.f(t));
            let (ip, _) = gauss(a, b, |t| curvature.eval(t).max(0.0) * warp.f(t));
            let (im, _) = gauss(a, b, |t| curvature.eval(t).min(0.0) * warp.f(t));
            quad_err += e;
            seg.push([i, ia, ip, im]);
        }
        let mut abs_suffix = vec![0.0; grid.len()];
        for k in (0..grid.len() - 1).rev() {
            abs_suffix[k] = abs_suffix[k + 1] + seg[k][1];
        }
        let von_mangoldt = is_non_increasing(&curvature, grid);
        let mut s = Self {
            curvature,
            warp,
            t_max,
            tol,
            breakpoints,
            seg,
            abs_suffix,
            quad_err,
            total: TotalCurvature {
                c: 0.0,
                c_integral: 0.0,
                bound: 0.0,
                certified: false,
                quadrature_error: 0.0,
                i_plus: 0.0,
                i_minus: 0.0,
                status: CurvatureStatus::Finite,
            },
            von_mangoldt,
        };
        s.total = s.compute_total();
        Ok(s)
    }

    /// A catalog surface with its default horizon and tolerance.
    pub fn catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let g = RadialCurvature::from_params(name, params)?;
        let t_max = g.default_t_max();
        Self::new(g, t_max, DEFAULT_TOL)
    }

    pub fn curvature(&self) -> &RadialCurvature {
        &self.curvature
    }

    pub fn warp(&self) -> &WarpFunction {
        &self.warp
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn name(&self) -> &'static str {
        self.curvature.name()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn g(&self, t: f64) -> f64 {
        self.curvature.eval(t)
    }

    /// `(f, f')` of the interpolated warping function.
    pub fn f(&self, t: f64) -> (f64, f64) {
        self.warp.eval(t)
    }

    pub fn total(&self) -> &TotalCurvature {
        &self.total
    }

    pub fn is_von_mangoldt(&self) -> bool {
        self.von_mangoldt
    }

    /// Largest arc-length step that cannot jump over a breakpoint interval
    /// of `G` from radius `t`.
    pub fn step_cap(&self, t: f64) -> f64 {
        let b = &self.breakpoints;
        if b.is_empty() {
            return f64::INFINITY;
        }
        let p = b.partition_point(|&v| v <= t);
        let left = if p == 0 { 0.0 } else { b[p - 1] };
        let right = if p == b.len() { self.t_max } else { b[p] };
        let dist = (t - left).min(right - t);
        // width of the interval on the far side of the nearest breakpoint
        let far = if t - left < right - t {
            if p >= 2 {
                left - b[p - 2]
            } else if p == 1 {
                left
            } else {
                f64::INFINITY
            }
        } else if p + 1 < b.len() {
            b[p + 1] - right
        } else if p < b.len() {
            self.t_max - right
        } else {
            f64::INFINITY
        };
        dist.max(0.5 * (right - left).min(far))
    }

    fn compute_total(&self) -> TotalCurvature {
        let df = self.warp.df_samples();
        let n = df.len() - 1;
        let c = TWO_PI * (1.0 - df[n]);
        let int: f64 = self.seg.iter().map(|s| s[0]).sum();
        let i_plus: f64 = self.seg.iter().map(|s| s[2]).sum();
        let i_minus: f64 = self.seg.iter().map(|s| s[3]).sum();
        let c_integral = TWO_PI * int;
        let max_df = df.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        // Local tolerances summed over all accepted steps bound the IVP part.
        let steps = (self.warp.stats.accepted + 1) as f64;
        let bound = TWO_PI * (self.quad_err + steps * self.tol * max_df);
        TotalCurvature {
            c,
            c_integral,
            bound,
            certified: (c - c_integral).abs() <= bound,
            quadrature_error: TWO_PI * self.quad_err,
            i_plus: TWO_PI * i_plus,
            i_minus: TWO_PI * i_minus,
            status: self.status(),
        }
    }

    /// Flags a signed part as divergent when its last half-horizon carries at
    /// least a quarter of it and it exceeds one full turn.
    fn status(&self) -> CurvatureStatus {
        let grid = self.warp.grid();
        let half = grid.partition_point(|&t| t < 0.5 * self.t_max);
        let looks_divergent = |idx: usize| {
            let total: f64 = self.seg.iter().map(|s| s[idx]).sum::<f64>() * TWO_PI;
            let late: f64 = self.seg[half.min(self.seg.len())..]
                .iter()
                .map(|s| s[idx])
                .sum::<f64>()
                * TWO_PI;
            total.abs() > TWO_PI && late.abs() > 0.25 * total.abs()
        };
        match (looks_divergent(2), looks_divergent(3)) {
            (false, false) => CurvatureStatus::Finite,
            (false, true) => CurvatureStatus::DivergesNegative,
            (true, false) => CurvatureStatus::DivergesPositive,
            (true, true) => CurvatureStatus::Undetermined,
        }
    }

    /// `(c_limit, bound)`.
    pub fn total_curvature(&self) -> (f64, f64) {
        (self.total.c, self.total.bound)
    }

    /// `(I+, I-)`.
    pub fn signed_curvature_integrals(&self) -> (f64, f64) {
        (self.total.i_plus, self.total.i_minus)
    }

    /// `2π ∫_r^{T_max} |G| f dt`.
    pub fn tail_integral(&self, r: f64) -> f64 {
        let grid = self.warp.grid();
        if r <= 0.0 {
            return TWO_PI * self.abs_suffix[0];
        }
        if r >= self.t_max {
            return 0.0;
        }
        let k = self.warp.interval(r);
        let (part, _) = gauss(r, grid[k + 1], |t| self.curvature.eval(t).abs() * self.warp.f(t));
        TWO_PI * (part + self.abs_suffix[k + 1])
    }

    /// Per grid point `T`: `|2π(1 - f'(T)) - 2π ∫_0^T G f dt|`.
    pub fn identity_residuals(&self) -> Vec<(f64, f64)> {
        let grid = self.warp.grid();
        let df = self.warp.df_samples();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(grid.len());
        out.push((0.0, TWO_PI * (1.0 - df[0]).abs()));
        for k in 0..self.seg.len() {
            acc += self.seg[k][0];
            out.push((grid[k + 1], TWO_PI * ((1.0 - df[k + 1]) - acc).abs()));
        }
        out
    }

    /// Summary for reports.
    pub fn summary(&self) -> SurfaceSummary {
        SurfaceSummary {
            kind: self.name().to_string(),
            params: self.curvature.params(),
            t_max: self.t_max,
            tol: self.tol,
            grid_points: self.warp.grid().len(),
            total_curvature: self.total,
            von_mangoldt: self.von_mangoldt,
            max_identity_residual: self
                .identity_residuals()
                .iter()
                .fold(0.0, |m, &(_, r)| m.max(r)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSummary {
    pub kind: String,
    pub params: BTreeMap<String, f64>,
    pub t_max: f64,
    pub tol: f64,
    pub grid_points: usize,
    pub total_curvature: TotalCurvature,
    pub von_mangoldt: bool,
    pub max_identity_residual: f64,
}

fn is_non_increasing(g: &RadialCurvature, grid: &[f64]) -> bool {
    let mut prev = g.eval_sided(0.0, Side::Right);
    for &t in &grid[1..] {
        let mut vals = vec![g.eval_sided(t, Side::Left)];
        if g.differs_at(t) {
            vals.push(g.eval_sided(t, Side::Right));
        }
        for v in vals {
            if v > prev + 1e-9 * (1.0 + prev.abs()) {
                return false;
            }
            prev = v;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(g: RadialCurvature, t_max: f64) -> SurfaceModel {
        SurfaceModel::new(g, t_max, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn plane_warp_is_identity() {
        let s = model(RadialCurvature::plane(), 10.0);
        for (&t, (&f, &df)) in s
            .warp()
            .grid()
            .iter()
            .zip(s.warp().f_samples().iter().zip(s.warp().df_samples()))
        {
            assert!((f - t).abs() <= 1e-12 * t.max(1.0));
            assert!((df - 1.0).abs() <= 1e-12);
        }
        assert_eq!(s.total_curvature().0, 0.0);
    }

    #[test]
    fn hyperbolic_warp_matches_sinh() {
        let s = model(RadialCurvature::hyperbolic(), 10.0);
        let w = s.warp();
        let worst = w
            .grid()
            .iter()
            .zip(w.f_samples())
            .skip(1)
            .map(|(&t, &f)| ((f - t.sinh()) / t.sinh()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 10.0 * DEFAULT_TOL, "worst relative error {worst:e}");
    }

    #[test]
    fn interpolant_reproduces_knot_data() {
        let s = model(RadialCurvature::Paraboloid, 5.0);
        let w = s.warp();
        let g = w.grid();
        for (k, &t) in g.iter().enumerate().take(g.len() - 1).skip(1) {
            let (f, df, _) = w.eval2(t);
            assert!((f - w.f_samples()[k]).abs() <= 1e-14 * f.abs().max(1.0));
            assert!((df - w.df_samples()[k]).abs() <= 1e-13);
        }
        // midpoint check against the closed-form profile
        for k in 0..g.len() - 1 {
            let t = 0.5 * (g[k] + g[k + 1]);
            let r = paraboloid_radius(t);
            let (f, df) = w.eval(t);
            assert!((f - r).abs() < 1e-10 * r.max(1e-3), "t={t}");
            assert!((df - 1.0 / (1.0 + r * r).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn quintic_matches_endpoint_derivatives() {
        let c = quintic(0.5, 1.0, -2.0, 3.0, 0.25, 4.0, -1.0);
        let h = 0.5;
        let at = |x: f64| {
            let f = c.iter().rev().fold(0.0, |acc, ci| acc * x + ci);
            let d1 = c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x + 4.0 * c[4] * x.powi(3) + 5.0 * c[5] * x.powi(4);
            let d2 = 2.0 * c[2] + 6.0 * c[3] * x + 12.0 * c[4] * x * x + 20.0 * c[5] * x.powi(3);
            (f, d1 / h, d2 / (h * h))
        };
        let (f0, d0, s0) = at(0.0);
        let (f1, d1, s1) = at(1.0);
        for (got, want) in [(f0, 1.0), (d0, -2.0), (s0, 3.0), (f1, 0.25), (d1, 4.0), (s1, -1.0)] {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn positive_constant_curvature_vanishes_at_pi() {
        let err = SurfaceModel::new(RadialCurvature::Constant { k: 1.0 }, 4.0, DEFAULT_TOL).unwrap_err();
        match err {
            Error::WarpVanishes { t } => assert!((t - PI).abs() < 1e-9, "{t}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn smoothed_cone_total_curvature() {
        let s = model(RadialCurvature::smoothed_cone(0.25).unwrap(), 60.0);
        let (c, bound) = s.total_curvature();
        assert!((c - 1.5 * PI).abs() < 1e-9, "{c}");
        assert!(s.total().certified, "{:?}", s.total());
        assert!(bound < 1e-6);
        assert!(s.is_von_mangoldt());
    }

    #[test]
    fn smoothed_cone_curvature_matches_closed_form() {
        let a = 0.25;
        for &t in &[1e-6, 1e-3, 0.1, 1.0, 3.0, 10.0] {
            // -f''/f for f = a t + (1 - a) tanh t
            let th = f64::tanh(t);
            let sech2 = 1.0 / (t.cosh() * t.cosh());
            let want = 2.0 * (1.0 - a) * sech2 * th / (a * t + (1.0 - a) * th);
            let got = smoothed_cone_curvature(a, t);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300), "t={t}");
        }
        assert!((smoothed_cone_curvature(a, 0.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn paraboloid_radius_inverts_arc_length() {
        for &r in &[1e-8f64, 1e-3, 0.5, 1.0, 7.0, 10.0, 300.0] {
            let t = 0.5 * (r * (1.0 + r * r).sqrt() + f64::asinh(r));
            assert!((paraboloid_radius(t) - r).abs() <= 1e-13 * r.max(1.0), "r={r}");
        }
    }

    #[test]
    fn hyperbolic_signed_integrals_and_tail() {
        let s = model(RadialCurvature::hyperbolic(), 10.0);
        let (ip, im) = s.signed_curvature_integrals();
        assert_eq!(ip, 0.0);
        let want = -TWO_PI * (10f64.cosh() - 1.0);
        assert!(((im - want) / want).abs() < 1e-10, "{im} vs {want}");
        assert_eq!(s.total().status, CurvatureStatus::DivergesNegative);
        let s5 = model(RadialCurvature::hyperbolic(), 5.0);
        let want = TWO_PI * (5f64.cosh() - 1.0);
        assert!(((s5.tail_integral(0.0) - want) / want).abs() < 1e-10);
    }

    #[test]
    fn smoothed_cone_tail_is_tiny_at_ten() {
        let s = model(RadialCurvature::smoothed_cone(0.25).unwrap(), 60.0);
        let tail = s.tail_integral(10.0);
        // |G| f <= 2 (1-a) sech^2(t) * (a t + 1) / a t * ... < 8 e^{-2t} (t + 4)
        let envelope = TWO_PI * 8.0 * (-20f64).exp() * (10.0 + 4.0) * 2.0;
        assert!(tail > 0.0 && tail < envelope && tail < 1e-6, "{tail}");
    }

    #[test]
    fn spike_family_properties() {
        let s = SurfaceModel::catalog("spike", &BTreeMap::new()).unwrap();
        assert!(!s.is_von_mangoldt());
        let min_g = s
            .warp()
            .grid()
            .iter()
            .map(|&t| s.g(t))
            .fold(f64::INFINITY, f64::min);
        assert!(min_g < -1e3, "{min_g}");
        let (ip, im) = s.signed_curvature_integrals();
        assert!(ip > 0.0 && im < 0.0);
        assert!((ip + im - s.total().c_integral).abs() < 1e-9);
        assert_eq!(s.total().status, CurvatureStatus::Finite);
    }

    #[test]
    fn bump_plateau_reproduces_sine_then_line() {
        let s = model(RadialCurvature::bump(1.0, 0.5, 0.5, 0.0).unwrap(), 5.0);
        for &t in &[0.25, 0.5, 1.0] {
            assert!((s.f(t).0 - t.sin()).abs() < 1e-11);
        }
        for &t in &[1.5, 3.0] {
            let want = 1f64.sin() + (t - 1.0) * 1f64.cos();
            assert!((s.f(t).0 - want).abs() < 1e-11);
        }
        assert!(s.is_von_mangoldt());
    }

    #[test]
    fn pchip_is_monotone_on_monotone_data() {
        let p = Pchip::new(vec![0.0, 1.0, 2.0, 3.0, 10.0], vec![1.0, 0.9, 0.2, 0.19, 0.0]).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let v = p.eval(i as f64 * 0.01);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn step_cap_never_skips_a_breakpoint_interval() {
        let s = SurfaceModel::catalog("spike", &BTreeMap::new()).unwrap();
        let b = s.breakpoints();
        for w in b.windows(2) {
            let width = w[1] - w[0];
            for t in [w[0] - 1e-3, w[0] - 1e-12, w[0], w[0] + 0.25 * width] {
                assert!(s.step_cap(t) <= (w[1] - t).max(0.5 * width) + 1e-15, "t={t}");
            }
        }
    }

    #[test]
    fn von_mangoldt_flags() {
        assert!(model(RadialCurvature::hyperbolic(), 5.0).is_von_mangoldt());
        assert!(model(RadialCurvature::Paraboloid, 20.0).is_von_mangoldt());
        assert!(!model(RadialCurvature::bump(0.3, 2.0, 0.5, 0.0).unwrap(), 5.0).is_von_mangoldt());
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let mut p = BTreeMap::new();
        p.insert("b".to_string(), 1.0);
        assert!(matches!(
            RadialCurvature::from_params("smoothed_cone", &p),
            Err(Error::BadParameter { .. })
        ));
        assert!(RadialCurvature::smoothed_cone(1.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn tail_is_non_increasing(a in 0.05f64..0.95, r1 in 0.0f64..20.0, dr in 0.0f64..5.0) {
            let s = SurfaceModel::new(RadialCurvature::smoothed_cone(a).unwrap(), 30.0, 1e-10).unwrap();
            prop_assert!(s.tail_integral(r1 + dr) <= s.tail_integral(r1) * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn odd_extension_has_zero_second_derivative_at_pole(a in 0.05f64..0.95) {
            let s = SurfaceModel::new(RadialCurvature::smoothed_cone(a).unwrap(), 5.0, 1e-10).unwrap();
            let (f0, df0, ddf0) = s.warp().eval2(0.0);
            prop_assert_eq!(f0, 0.0);
            prop_assert_eq!(df0, 1.0);
            prop_assert!(ddf0.abs() < 1e-12);
        }

        #[test]
        fn identity_holds_on_random_cones(a in 0.05f64..0.95) {
            let s = SurfaceModel::new(RadialCurvature::smoothed_cone(a).unwrap(), 40.0, DEFAULT_TOL).unwrap();
            let worst = s.identity_residuals().iter().fold(0.0f64, |m, &(_, r)| m.max(r));
            prop_assert!(worst < 1e-8, "{}", worst);
            prop_assert!(s.total_curvature().0 <= TWO_PI);
        }
    }
}
