//! Embedded Dormand–Prince 5(4) stepping.
//!
//! The stepper keeps the start of the last accepted step so that callers can
//! re-integrate any sub-interval of it with a single Runge–Kutta step. Event
//! locations therefore carry the full fifth-order accuracy instead of the
//! accuracy of an interpolant.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// A first-order system `y' = F(s, y)`.
pub trait System<const N: usize> {
    /// Evaluates the right-hand side. `at_step_end` is set for the stages that
    /// sit on the right end of a step; it only matters for right-hand sides
    /// with jump discontinuities at step boundaries. Returns `None` when the
    /// state is outside the region where the system can be evaluated, which
    /// makes the stepper retry with a smaller step.
    fn rhs(&self, s: f64, y: &[f64; N], at_step_end: bool) -> Option<[f64; N]>;
}

/// Mixed absolute/relative error weights.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance<const N: usize> {
    pub rtol: f64,
    pub atol: [f64; N],
}

impl<const N: usize> Tolerance<N> {
    pub fn uniform(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: [tol; N],
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest accepted normalized error estimate.
    pub max_error: f64,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Result of a single trial step.
struct Trial<const N: usize> {
    y: [f64; N],
    dy_end: [f64; N],
    err: f64,
}

pub struct Dopri5<'a, S, const N: usize> {
    sys: &'a S,
    tol: Tolerance<N>,
    s: f64,
    y: [f64; N],
    dy: [f64; N],
    prev_s: f64,
    prev_y: [f64; N],
    prev_dy: [f64; N],
    h: f64,
    pub stats: StepStats,
}

impl<'a, S: System<N>, const N: usize> Dopri5<'a, S, N> {
    pub fn new(sys: &'a S, s0: f64, y0: [f64; N], h0: f64, tol: Tolerance<N>) -> Result<Self> {
        let dy = sys.rhs(s0, &y0, false).ok_or(Error::StepUnderflow { s: s0 })?;
        Ok(Self {
            sys,
            tol,
            s: s0,
            y: y0,
            dy,
            prev_s: s0,
            prev_y: y0,
            prev_dy: dy,
            h: h0,
            stats: StepStats::default(),
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn dy(&self) -> &[f64; N] {
        &self.dy
    }

    pub fn prev_s(&self) -> f64 {
        self.prev_s
    }

    pub fn prev_y(&self) -> &[f64; N] {
        &self.prev_y
    }

    pub fn prev_dy(&self) -> &[f64; N] {
        &self.prev_dy
    }

    /// Suggested size of the next step.
    pub fn step_size(&self) -> f64 {
        self.h
    }

    fn trial(&self, s: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Option<Trial<N>> {
        let sys = self.sys;
        let k2 = sys.rhs(s + C2 * h, &axpy(y, h, &[(A21, k1)]), false)?;
        let k3 = sys.rhs(s + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]), false)?;
        let k4 = sys.rhs(
            s + C4 * h,
            &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]),
            false,
        )?;
        let k5 = sys.rhs(
            s + C5 * h,
            &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            false,
        )?;
        let k6 = sys.rhs(
            s + h,
            &axpy(
                y,
                h,
                &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
            true,
        )?;
        let y_new = axpy(
            y,
            h,
            &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        if y_new.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let k7 = sys.rhs(s + h, &y_new, true)?;
        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.tol.atol[i] + self.tol.rtol * y[i].abs().max(y_new[i].abs());
            let r = if scale > 0.0 { e.abs() / scale } else { 0.0 };
            err = err.max(r);
        }
        if !err.is_finite() {
            return None;
        }
        Some(Trial {
            y: y_new,
            dy_end: k7,
            err,
        })
    }

    /// Takes one accepted step of size at most `h_cap`, never passing
    /// `s_limit`. A step that reaches the limit lands on it exactly.
    pub fn advance(&mut self, s_limit: f64, h_cap: f64) -> Result<()> {
        let room = s_limit - self.s;
        let h_cap = h_cap.min(room);
        if h_cap <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "no room to step from s = {} to {}",
                self.s, s_limit
            )));
        }
        let mut h = self.h.min(h_cap);
        let h_min = 1e-15 * self.s.abs().max(1.0);
        loop {
            if h < h_min && h < h_cap {
                return Err(Error::StepUnderflow { s: self.s });
            }
            match self.trial(self.s, &self.y, &self.dy, h) {
                Some(tr) if tr.err <= 1.0 => {
                    self.prev_s = self.s;
                    self.prev_y = self.y;
                    self.prev_dy = self.dy;
                    // A step clipped to land exactly on a target keeps the target.
                    self.s = if h == room { s_limit } else { self.s + h };
                    self.y = tr.y;
                    self.dy = tr.dy_end;
                    self.stats.accepted += 1;
                    self.stats.max_error = self.stats.max_error.max(tr.err);
                    let fac = if tr.err == 0.0 {
                        5.0
                    } else {
                        (0.9 * tr.err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    // Do not let a short clipped step shrink the next proposal.
                    self.h = (h * fac).max(if h == h_cap { self.h } else { 0.0 });
                    return Ok(());
                }
                Some(tr) => {
                    self.stats.rejected += 1;
                    h *= (0.9 * tr.err.powf(-0.2)).clamp(0.1, 0.5);
                }
                None => {
                    self.stats.rejected += 1;
                    h *= 0.25;
                }
            }
        }
    }

    /// Re-integrates from the start of the last accepted step over `tau`
    /// (`0 <= tau <= last step`) with a single step.
    pub fn resample(&self, tau: f64) -> [f64; N] {
        if tau <= 0.0 {
            return self.prev_y;
        }
        match self.trial(self.prev_s, &self.prev_y, &self.prev_dy, tau) {
            Some(tr) => tr.y,
            None => self.hermite(tau),
        }
    }

    /// Cubic Hermite interpolation across the last accepted step.
    pub fn hermite(&self, tau: f64) -> [f64; N] {
        let h = self.s - self.prev_s;
        if h <= 0.0 {
            return self.y;
        }
        let x = tau / h;
        let h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
        let h10 = x * (1.0 - x) * (1.0 - x);
        let h01 = x * x * (3.0 - 2.0 * x);
        let h11 = x * x * (x - 1.0);
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = h00 * self.prev_y[i]
                + h10 * h * self.prev_dy[i]
                + h01 * self.y[i]
                + h11 * h * self.dy[i];
        }
        out
    }

    /// Locates `tau` in the last accepted step where `g` changes sign, using
    /// Illinois-modified regula falsi on exact re-integrations. The caller
    /// guarantees `g(prev) * g(current) <= 0`.
    pub fn locate(&self, mut g: impl FnMut(&[f64; N]) -> f64, xtol: f64) -> (f64, [f64; N]) {
        let h = self.s - self.prev_s;
        let mut a = 0.0;
        let mut ga = g(&self.prev_y);
        let mut b = h;
        let mut yb = self.y;
        let mut gb = g(&self.y);
        if ga == 0.0 {
            return (0.0, self.prev_y);
        }
        if gb == 0.0 {
            return (h, yb);
        }
        let mut side = 0i8;
        for _ in 0..100 {
            if (b - a).abs() <= xtol {
                break;
            }
            let mut c = (a * gb - b * ga) / (gb - ga);
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            let yc = self.resample(c);
            let gc = g(&yc);
            if gc == 0.0 {
                return (c, yc);
            }
            if (gc > 0.0) == (gb > 0.0) {
                b = c;
                yb = yc;
                gb = gc;
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            } else {
                a = c;
                ga = gc;
                if side == -1 {
                    gb *= 0.5;
                }
                side = -1;
            }
        }
        (b, yb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl System<2> for Oscillator {
        fn rhs(&self, _s: f64, y: &[f64; 2], _end: bool) -> Option<[f64; 2]> {
            Some([y[1], -y[0]])
        }
    }

    #[test]
    fn oscillator_period_is_accurate() {
        let sys = Oscillator;
        let mut st = Dopri5::new(&sys, 0.0, [0.0, 1.0], 1e-3, Tolerance::uniform(1e-12)).unwrap();
        let end = 2.0 * std::f64::consts::PI;
        while st.s() < end {
            st.advance(end, f64::INFINITY).unwrap();
        }
        assert_eq!(st.s(), end);
        assert!(st.y()[0].abs() < 1e-10, "{:?}", st.y());
        assert!((st.y()[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn locate_finds_zero_of_sine() {
        let sys = Oscillator;
        let mut st = Dopri5::new(&sys, 0.0, [0.0, 1.0], 1e-3, Tolerance::uniform(1e-12)).unwrap();
        loop {
            st.advance(10.0, f64::INFINITY).unwrap();
            if st.y()[0] < 0.0 {
                break;
            }
        }
        let (tau, y) = st.locate(|y| y[0], 1e-14);
        let root = st.prev_s() + tau;
        assert!((root - std::f64::consts::PI).abs() < 1e-10, "{root}");
        assert!(y[0].abs() < 1e-10);
    }

    #[test]
    fn fifth_order_convergence_of_single_steps() {
        // Local error of one step scales like h^6 or better.
        let sys = Oscillator;
        let err = |h: f64| {
            let st = Dopri5::new(&sys, 0.0, [0.0, 1.0], h, Tolerance::uniform(1.0)).unwrap();
            (st.resample(h)[0] - h.sin()).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!(ratio > 40.0 && ratio < 160.0, "ratio {ratio}");
    }
}
