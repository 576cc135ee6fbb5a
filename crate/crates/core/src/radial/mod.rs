//! Radial solutions as functions of the geodesic radius `t`.
//!
//! A radial `u` solves `u'' + (N-1) coth(t) u' + lambda u + |u|^{p-1} u = 0` with
//! `u(0) = s`, `u'(0) = 0`. Decaying solutions behave like `exp(-c_+ t)`; every other
//! trajectory ends on the slow branch `exp(-c_- t)`.

mod decay;
mod profile;
mod shoot;

pub use decay::{decay_check, fit_decay_rate, DecayReport};
pub use profile::{ExpTail, RadialFunction, RadialProfile};
pub use shoot::{
    classify_grid, effective_nodes, find_nodal_solution, log_grid, nonexistence_scan, ode_residual, shoot, transitions, ScanEntry,
    ScanReport, ShootingResult, Transition,
};

use crate::params::Params;
use crate::scalar::Real;
use crate::tolerances;
use serde::{Deserialize, Serialize};

/// `|u|^{p-1} u`.
#[inline]
pub fn nonlinearity<T: Real>(u: T, p: T) -> T {
    if u == T::zero() {
        T::zero()
    } else {
        u.abs().powf(p - T::one()) * u
    }
}

/// `f(u) = -lambda u - |u|^{p-1} u`, so that the radial equation reads `u'' + (N-1) coth(t) u' = f(u)`.
#[inline]
pub fn forcing<T: Real>(u: T, params: &Params<T>) -> T {
    -params.lambda * u - nonlinearity(u, params.p)
}

/// `f'(u) = -lambda - p |u|^{p-1}`.
#[inline]
pub fn forcing_derivative<T: Real>(u: T, params: &Params<T>) -> T {
    let a = u.abs();
    let nl = if a == T::zero() { T::zero() } else { params.p * a.powf(params.p - T::one()) };
    -params.lambda - nl
}

/// Right-hand side `(u', u'')` of the radial equation for `t > 0`.
pub fn radial_ode_rhs<T: Real>(t: T, state: [T; 2], params: &Params<T>) -> [T; 2] {
    let [u, v] = state;
    let damping = T::n(params.dim - 1) / t.tanh();
    [v, -damping * v + forcing(u, params)]
}

/// Taylor start `u(t) = s + a t^2 + b t^4` near the pole. Returns `(u, u', du/ds, d/dt du/ds)`.
pub fn series_start<T: Real>(s: T, t: T, params: &Params<T>) -> [T; 4] {
    let n = T::n(params.dim);
    let f = forcing(s, params);
    let df = forcing_derivative(s, params);
    let a = f / (T::c(2.0) * n);
    let third = T::c(2.0) * (n - T::one()) / T::c(3.0);
    let b = (df * a - third * a) / (T::c(4.0) * (n + T::c(2.0)));
    // derivatives of a and b with respect to s
    let da = df / (T::c(2.0) * n);
    let t2 = t * t;
    [
        s + a * t2 + b * t2 * t2,
        T::c(2.0) * a * t + T::c(4.0) * b * t2 * t,
        T::one() + da * t2,
        T::c(2.0) * da * t,
    ]
}

/// Outcome of a single shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Decays at the rate `c_+` of finite-energy solutions.
    DecayingSolution,
    /// Exceeded the blow-up threshold.
    BlowUp,
    /// Ends on the slow branch after at least one sign change.
    SignChangeThenGrowth,
    /// Ends on the slow branch without changing sign.
    Growth,
    /// Neither rate identified up to the largest integration radius.
    Undetermined,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::DecayingSolution => "decaying-solution",
            Classification::BlowUp => "blow-up",
            Classification::SignChangeThenGrowth => "sign-change-then-growth",
            Classification::Growth => "growth",
            Classification::Undetermined => "undetermined",
        }
    }
}

/// Numerical settings for shooting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialConfig {
    /// Upper end of the series start interval.
    pub t0: f64,
    /// Initial integration radius for classification.
    pub t_max: f64,
    /// Classification radius is doubled up to this value.
    pub t_max_limit: f64,
    pub rtol: f64,
    /// `|u(T)|` below this, relative to `max(1, |s|)`, counts as decayed.
    pub decay_amplitude: f64,
    /// `|u|` above this, relative to `max(1, |s|)`, counts as blow-up.
    pub blow_up: f64,
    /// Allowed relative mismatch of the fitted rate.
    pub slope_rel: f64,
    /// Radius at which the far-field branch of a trajectory is read off.
    pub probe_t: f64,
    /// Lower end of the shooting scan.
    pub s_min: f64,
    /// Scans stop once `s` exceeds this.
    pub s_limit: f64,
    pub points_per_decade: usize,
    pub max_bisections: usize,
    /// The forward trajectory is trusted while its relative sensitivity to `s` stays below this.
    pub match_threshold: f64,
    pub quad_rel: f64,
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig {
            t0: 1e-3,
            t_max: 25.0,
            t_max_limit: 200.0,
            rtol: tolerances::ODE_RTOL,
            decay_amplitude: tolerances::DECAY_AMPLITUDE,
            blow_up: tolerances::BLOW_UP,
            slope_rel: tolerances::DECAY_SLOPE_REL,
            probe_t: 16.0,
            s_min: 1e-2,
            s_limit: 1e40,
            points_per_decade: 12,
            max_bisections: 80,
            match_threshold: 1e-8,
            quad_rel: tolerances::QUAD_REL,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_of_trivial_state_vanishes() {
        let p = Params::new(3, 3.0, 0.0).unwrap();
        assert_eq!(radial_ode_rhs(1.0, [0.0, 0.0], &p), [0.0, 0.0]);
    }

    #[test]
    fn series_satisfies_equation() {
        let p = Params::new(4, 2.5, 1.3).unwrap();
        let s = 1.7;
        let t: f64 = 1e-2;
        let h = 1e-4;
        let u = |x: f64| series_start(s, x, &p)[0];
        let upp = (u(t + h) - 2.0 * u(t) + u(t - h)) / (h * h);
        let y = series_start(s, t, &p);
        let r = upp + 3.0 / t.tanh() * y[1] - forcing(y[0], &p);
        assert!(r.abs() < 1e-5, "{r}");
    }

    #[test]
    fn cartesian_laplacian_matches_radial_form() {
        // f(t) = exp(-t^2) evaluated through the ball coordinates with the Cartesian operator.
        let n = 3usize;
        let f = |x: &[f64; 3]| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let t = 2.0 * r.atanh();
            (-t * t).exp()
        };
        let x = [0.21, -0.13, 0.3];
        let h = 1e-4;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let w = (1.0 - r2) / 2.0;
        let mut lap = 0.0;
        let mut radial_deriv = 0.0;
        for i in 0..3 {
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            lap += (f(&a) - 2.0 * f(&x) + f(&b)) / (h * h);
            radial_deriv += x[i] * (f(&a) - f(&b)) / (2.0 * h);
        }
        let cart = w * w * lap + (n as f64 - 2.0) * w * radial_deriv;
        let t = 2.0 * r2.sqrt().atanh();
        let fp = -2.0 * t * (-t * t).exp();
        let fpp = (4.0 * t * t - 2.0) * (-t * t).exp();
        let radial = fpp + (n as f64 - 1.0) / t.tanh() * fp;
        assert!((cart - radial).abs() < 1e-5, "{cart} vs {radial}");
    }
}
