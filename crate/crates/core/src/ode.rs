//! Embedded Dormand-Prince 5(4) integrator for small autonomous-size systems.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// What the step callback asks the integrator to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Options<T> {
    pub rtol: T,
    pub atol: T,
    pub initial_step: Option<T>,
    pub max_step: T,
    pub max_steps: usize,
    /// Components are scaled in consecutive groups of this size, each group sharing the
    /// largest magnitude among its members. Phase-space pairs `(u, u')` use 2.
    pub group: usize,
}

impl<T: Real> Default for Options<T> {
    fn default() -> Self {
        Options {
            rtol: T::c(1e-12),
            atol: T::c(1e-300),
            initial_step: None,
            max_step: T::infinity(),
            max_steps: 2_000_000,
            group: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome<T, const D: usize> {
    pub t: T,
    pub y: [T; D],
    pub accepted: usize,
    pub rejected: usize,
    pub stopped: bool,
}

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

fn comb<T: Real, const D: usize>(y: &[T; D], h: T, terms: &[(f64, &[T; D])]) -> [T; D] {
    let mut out = *y;
    for (c, k) in terms {
        let c = T::c(*c) * h;
        for i in 0..D {
            out[i] += c * k[i];
        }
    }
    out
}

struct Stage<T, const D: usize> {
    y_new: [T; D],
    k7: [T; D],
    err: [T; D],
}

fn step<T: Real, const D: usize, F: FnMut(T, &[T; D]) -> [T; D]>(
    f: &mut F,
    t: T,
    y: &[T; D],
    k1: &[T; D],
    h: T,
) -> Stage<T, D> {
    let k2 = f(t + T::c(C2) * h, &comb(y, h, &[(A21, k1)]));
    let k3 = f(t + T::c(C3) * h, &comb(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + T::c(C4) * h, &comb(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + T::c(C5) * h, &comb(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + h, &comb(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y_new = comb(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y_new);
    let zero = [T::zero(); D];
    let err = comb(&zero, h, &[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
    Stage { y_new, k7, err }
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, calling `on_step(t, y, f(t, y))` at the
/// start point and after every accepted step.
pub fn integrate<T, const D: usize, F, C>(
    mut f: F,
    t0: T,
    y0: [T; D],
    t_end: T,
    opts: &Options<T>,
    mut on_step: C,
) -> Result<Outcome<T, D>>
where
    T: Real,
    F: FnMut(T, &[T; D]) -> [T; D],
    C: FnMut(T, &[T; D], &[T; D]) -> StepControl,
{
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    if on_step(t, &y, &k1) == StepControl::Stop {
        return Ok(Outcome { t, y, accepted, rejected, stopped: true });
    }
    let span = t_end - t0;
    let mut h = opts.initial_step.unwrap_or_else(|| initial_step(&y, &k1, span, opts));
    h = h.min(opts.max_step).min(span);
    let safety = T::c(0.9);
    let mut last_rejected = false;
    while t < t_end {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::Numerical(format!("integrator exceeded {} steps at t = {}", opts.max_steps, t)));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        if h <= T::epsilon() * t.abs() * T::c(4.0) || h < T::min_positive_value() {
            return Err(Error::StepUnderflow { t: t.f64() });
        }
        let stage = step(&mut f, t, &y, &k1, h);
        let mut norm = T::zero();
        let mut finite = true;
        let g = opts.group.max(1);
        for i in 0..D {
            let lo = i - i % g;
            let hi = (lo + g).min(D);
            let mut mag = T::zero();
            for j in lo..hi {
                mag = mag.max(y[j].abs()).max(stage.y_new[j].abs());
            }
            let e = stage.err[i] / (opts.atol + opts.rtol * mag);
            finite &= stage.y_new[i].is_finite();
            norm += e * e;
        }
        norm = (norm / T::n(D)).sqrt();
        if !finite || !norm.is_finite() {
            rejected += 1;
            h = h * T::c(0.2);
            last_rejected = true;
            continue;
        }
        if norm <= T::one() {
            t = if h == t_end - t { t_end } else { t + h };
            y = stage.y_new;
            k1 = stage.k7;
            accepted += 1;
            if on_step(t, &y, &k1) == StepControl::Stop {
                return Ok(Outcome { t, y, accepted, rejected, stopped: true });
            }
            let mut fac = if norm == T::zero() { T::c(5.0) } else { safety * norm.powf(T::c(-0.2)) };
            fac = fac.min(T::c(5.0)).max(T::c(0.2));
            if last_rejected {
                fac = fac.min(T::one());
            }
            h = (h * fac).min(opts.max_step);
            last_rejected = false;
        } else {
            rejected += 1;
            let fac = (safety * norm.powf(T::c(-0.2))).max(T::c(0.2));
            h = h * fac;
            last_rejected = true;
        }
    }
    Ok(Outcome { t, y, accepted, rejected, stopped: false })
}

fn initial_step<T: Real, const D: usize>(y: &[T; D], dy: &[T; D], span: T, opts: &Options<T>) -> T {
    let ny = y.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let nd = dy.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let h = if ny > T::zero() && nd > T::zero() {
        T::c(0.01) * opts.rtol.powf(T::c(0.2)) * ny / nd
    } else {
        T::c(1e-6) * span
    };
    h.min(span)
}

/// Classical fixed-step Dormand-Prince 5 stepping, used for order verification.
pub fn fixed_step<T, const D: usize, F>(mut f: F, t0: T, y0: [T; D], t_end: T, steps: usize) -> [T; D]
where
    T: Real,
    F: FnMut(T, &[T; D]) -> [T; D],
{
    let h = (t_end - t0) / T::n(steps);
    let mut y = y0;
    let mut t = t0;
    let mut k1 = f(t, &y);
    for _ in 0..steps {
        let stage = step(&mut f, t, &y, &k1, h);
        y = stage.y_new;
        k1 = stage.k7;
        t = t + h;
    }
    y
}

/// Quintic Hermite interpolation on `[t0, t1]` from values, first and second derivatives.
///
/// Returns the value and the first two derivatives at `t`.
#[allow(clippy::too_many_arguments)]
pub fn hermite5<T: Real>(t0: T, t1: T, u0: T, d0: T, s0: T, u1: T, d1: T, s1: T, t: T) -> (T, T, T) {
    let h = t1 - t0;
    let x = (t - t0) / h;
    let x2 = x * x;
    let x3 = x2 * x;
    let x4 = x3 * x;
    let x5 = x4 * x;
    let c = T::c;
    let h00 = T::one() - c(10.0) * x3 + c(15.0) * x4 - c(6.0) * x5;
    let h10 = x - c(6.0) * x3 + c(8.0) * x4 - c(3.0) * x5;
    let h20 = c(0.5) * x2 - c(1.5) * x3 + c(1.5) * x4 - c(0.5) * x5;
    let h11 = -c(4.0) * x3 + c(7.0) * x4 - c(3.0) * x5;
    let h21 = c(0.5) * x3 - x4 + c(0.5) * x5;
    let value = u1 + h00 * (u0 - u1) + h * (h10 * d0 + h11 * d1) + h * h * (h20 * s0 + h21 * s1);
    let g00 = -c(30.0) * x2 + c(60.0) * x3 - c(30.0) * x4;
    let g10 = T::one() - c(18.0) * x2 + c(32.0) * x3 - c(15.0) * x4;
    let g20 = x - c(4.5) * x2 + c(6.0) * x3 - c(2.5) * x4;
    let g11 = -c(12.0) * x2 + c(28.0) * x3 - c(15.0) * x4;
    let g21 = c(1.5) * x2 - c(4.0) * x3 + c(2.5) * x4;
    let deriv = g00 * (u0 - u1) / h + g10 * d0 + g11 * d1 + h * (g20 * s0 + g21 * s1);
    let q00 = -c(60.0) * x + c(180.0) * x2 - c(120.0) * x3;
    let q10 = -c(36.0) * x + c(96.0) * x2 - c(60.0) * x3;
    let q20 = T::one() - c(9.0) * x + c(18.0) * x2 - c(10.0) * x3;
    let q11 = -c(24.0) * x + c(84.0) * x2 - c(60.0) * x3;
    let q21 = c(3.0) * x - c(12.0) * x2 + c(10.0) * x3;
    let second = q00 * (u0 - u1) / (h * h) + (q10 * d0 + q11 * d1) / h + q20 * s0 + q21 * s1;
    (value, deriv, second)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn adaptive_accuracy_tracks_tolerance() {
        let mut errs = Vec::new();
        for rtol in [1e-6, 1e-8, 1e-10] {
            let opts = Options { rtol, atol: 1e-14, ..Options::default() };
            let out = integrate(oscillator, 0.0, [0.0, 1.0], 10.0, &opts, |_, _, _| StepControl::Continue).unwrap();
            errs.push((out.y[0] - 10.0f64.sin()).abs());
        }
        assert!(errs[0] < 1e-4 && errs[2] < 1e-8);
        assert!(errs[1] < errs[0] && errs[2] < errs[1]);
    }

    #[test]
    fn fixed_step_order_is_five() {
        let exact = 2.0f64.sin();
        let e1 = (fixed_step(oscillator, 0.0, [0.0, 1.0], 2.0, 20)[0] - exact).abs();
        let e2 = (fixed_step(oscillator, 0.0, [0.0, 1.0], 2.0, 40)[0] - exact).abs();
        let order = (e1 / e2).log2();
        assert!((order - 5.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn stop_callback_halts() {
        let opts = Options::default();
        let out = integrate(oscillator, 0.0, [0.0, 1.0], 10.0, &opts, |t, _, _| {
            if t > 1.0 { StepControl::Stop } else { StepControl::Continue }
        })
        .unwrap();
        assert!(out.stopped && out.t > 1.0 && out.t < 10.0);
    }

    #[test]
    fn hermite_reproduces_quintics() {
        let p = |x: f64| 1.0 + 2.0 * x - x * x + 0.5 * x.powi(3) - 0.3 * x.powi(4) + 0.1 * x.powi(5);
        let dp = |x: f64| 2.0 - 2.0 * x + 1.5 * x * x - 1.2 * x.powi(3) + 0.5 * x.powi(4);
        let ddp = |x: f64| -2.0 + 3.0 * x - 3.6 * x * x + 2.0 * x.powi(3);
        let (a, b) = (0.3, 1.7);
        for t in [0.3, 0.5, 1.0, 1.33, 1.7] {
            let (v, d, dd) = hermite5(a, b, p(a), dp(a), ddp(a), p(b), dp(b), ddp(b), t);
            assert!((v - p(t)).abs() < 1e-13);
            assert!((d - dp(t)).abs() < 1e-12);
            assert!((dd - ddp(t)).abs() < 1e-11);
        }
    }
}
