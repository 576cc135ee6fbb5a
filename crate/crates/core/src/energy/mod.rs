//! Energy functionals, the Nehari constraint and related integrals.
//!
//! Radial integrals use the volume element `|S^{N-1}| sinh(t)^{N-1} dt` of geodesic polar
//! coordinates. Profiles with an exponential tail have the tail integrated in closed form.

mod cap;
mod galerkin;
mod sobolev;

pub use cap::{ball_mass, cap_mass, CapQuadrature};
pub use galerkin::{galerkin_ground_state, galerkin_nodal, GalerkinOptions, GalerkinResult};
pub use sobolev::{estimate_sobolev_constant, rayleigh_quotient, SobolevConfig, SobolevEstimate, ORACLE_AGREEMENT};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::quadrature::{adaptive, AdaptiveOptions, GaussLegendre, QuadResult};
use crate::radial::{ExpTail, RadialFunction, RadialProfile};
use crate::scalar::{sphere_area, Real};
use serde::Serialize;

/// The three integrals entering `I_lambda` and derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport<T> {
    /// `int |grad u|^2 dV`
    pub gradient_term: T,
    /// `int u^2 dV`
    pub mass_term: T,
    /// `int |u|^{p+1} dV`
    pub nonlinear_term: T,
    #[serde(rename = "I_lambda")]
    pub i_lambda: T,
    /// `gradient_term - lambda mass_term - nonlinear_term`
    pub nehari_residual: T,
    pub quadrature_error_estimate: T,
}

impl<T: Real> EnergyReport<T> {
    pub fn from_terms(gradient_term: T, mass_term: T, nonlinear_term: T, params: &Params<T>, error: T) -> Self {
        let quadratic = gradient_term - params.lambda * mass_term;
        EnergyReport {
            gradient_term,
            mass_term,
            nonlinear_term,
            i_lambda: quadratic / T::c(2.0) - nonlinear_term / (params.p + T::one()),
            nehari_residual: quadratic - nonlinear_term,
            quadrature_error_estimate: error,
        }
    }

    /// `int (|grad u|^2 - lambda u^2) dV`.
    pub fn quadratic_term(&self, lambda: T) -> T {
        self.gradient_term - lambda * self.mass_term
    }
}

/// `ln sinh t` without overflow.
pub(crate) fn ln_sinh<T: Real>(t: T) -> T {
    if t > T::c(20.0) {
        t - T::LN_2() + (-(T::c(-2.0) * t).exp()).ln_1p()
    } else {
        t.sinh().ln()
    }
}

/// `|v|^q sinh(t)^m`, evaluated in log form.
#[inline]
pub(crate) fn weighted<T: Real>(v: T, q: T, m: usize, t: T) -> T {
    if v == T::zero() || t <= T::zero() {
        return if m == 0 && v != T::zero() { v.abs().powf(q) } else { T::zero() };
    }
    (q * v.abs().ln() + T::n(m) * ln_sinh(t)).exp()
}

/// `int_T^inf |A exp(-c (t - T))|^q sinh(t)^m dt`, exact for `q c > m`.
pub(crate) fn tail_moment<T: Real>(amplitude: T, rate: T, q: T, m: usize, start: T) -> Result<T> {
    if amplitude == T::zero() {
        return Ok(T::zero());
    }
    let qc = q * rate;
    if qc <= T::n(m) {
        return Err(Error::Numerical(format!("tail integral diverges: rate {qc} <= {m}")));
    }
    let la = q * amplitude.abs().ln() - T::n(m) * T::LN_2();
    let mut sum = T::zero();
    let mut binom = T::one();
    for j in 0..=m {
        let k = T::n(m) - T::n(2 * j);
        let term = binom * (la + k * start).exp() / (qc - k);
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        binom = binom * T::n(m - j) / T::n(j + 1);
    }
    Ok(sum)
}

/// `int_0^inf g(t, u(t), u'(t)) sinh(t)^{N-1} dt` over the panels of `u`, without the sphere factor.
pub(crate) fn radial_quad<T, F, G>(u: &F, g: G, rel_tol: T) -> QuadResult<T>
where
    T: Real,
    F: RadialFunction<T> + ?Sized,
    G: Fn(T, T, T) -> T,
{
    let bp = u.breakpoints();
    let rule = GaussLegendre::new(10);
    adaptive(
        |t| {
            let (v, d) = u.value(t);
            g(t, v, d)
        },
        &bp,
        &rule,
        AdaptiveOptions::rel(rel_tol),
    )
}

/// Gradient, mass and nonlinear integrals of `u` with exponent `q` in the last one.
pub(crate) fn moments<T, F>(u: &F, dim: usize, q: T, rel_tol: T) -> Result<([T; 3], T)>
where
    T: Real,
    F: RadialFunction<T> + ?Sized,
{
    let m = dim - 1;
    let two = T::c(2.0);
    let parts = [
        radial_quad(u, |t, _, d| weighted(d, two, m, t), rel_tol),
        radial_quad(u, |t, v, _| weighted(v, two, m, t), rel_tol),
        radial_quad(u, |t, v, _| weighted(v, q, m, t), rel_tol),
    ];
    let mut vals = [T::zero(); 3];
    let mut err = T::zero();
    for (i, r) in parts.iter().enumerate() {
        if !r.converged || !r.value.is_finite() {
            return Err(Error::Quadrature { estimate: r.value.f64(), error: r.error.f64() });
        }
        vals[i] = r.value;
        err += r.error;
    }
    if let Some(ExpTail { start, amplitude, rate }) = u.tail() {
        vals[0] += tail_moment(amplitude * rate, rate, two, m, start)?;
        vals[1] += tail_moment(amplitude, rate, two, m, start)?;
        vals[2] += tail_moment(amplitude, rate, q, m, start)?;
    }
    let w = sphere_area::<T>(dim);
    Ok(([vals[0] * w, vals[1] * w, vals[2] * w], err * w))
}

/// `I_lambda(u)` and its ingredients.
pub fn energy<T, F>(u: &F, params: &Params<T>, rel_tol: T) -> Result<EnergyReport<T>>
where
    T: Real,
    F: RadialFunction<T> + ?Sized,
{
    let ([g, m, n], err) = moments(u, params.dim, params.p + T::one(), rel_tol)?;
    Ok(EnergyReport::from_terms(g, m, n, params, err))
}

/// Scaling factor `t*` putting `t* u` on the Nehari manifold, with the scaled profile.
pub fn nehari_project<T: Real>(u: &RadialProfile<T>, params: &Params<T>, rel_tol: T) -> Result<(RadialProfile<T>, T)> {
    let r = energy(u, params, rel_tol)?;
    let quad = r.quadratic_term(params.lambda);
    if !(quad > T::zero()) || !(r.nonlinear_term > T::zero()) {
        return Err(Error::NotProjectable(format!(
            "quadratic term {quad} and nonlinear term {} must both be positive",
            r.nonlinear_term
        )));
    }
    let factor = (quad / r.nonlinear_term).powf(T::one() / (params.p - T::one()));
    Ok((u.scaled(factor), factor))
}

/// `int |u|^{p+1} dV / int (|grad u|^2 - lambda u^2) dV`, zero for `u = 0`.
pub fn f_lambda<T, F>(u: &F, params: &Params<T>, rel_tol: T) -> Result<T>
where
    T: Real,
    F: RadialFunction<T> + ?Sized,
{
    let r = energy(u, params, rel_tol)?;
    let quad = r.quadratic_term(params.lambda);
    if r.nonlinear_term == T::zero() && r.gradient_term == T::zero() {
        return Ok(T::zero());
    }
    if quad == T::zero() {
        return Err(Error::Numerical("f_lambda: vanishing quadratic term".into()));
    }
    Ok(r.nonlinear_term / quad)
}

/// Positive or negative part `max(+-u, 0)` of a profile, with its zeros as panel boundaries.
#[derive(Debug, Clone)]
pub struct SignPart<'a, T> {
    profile: &'a RadialProfile<T>,
    positive: bool,
    breakpoints: Vec<T>,
}

impl<'a, T: Real> SignPart<'a, T> {
    pub fn new(profile: &'a RadialProfile<T>, positive: bool) -> Self {
        let mut breakpoints = profile.panel_boundaries();
        breakpoints.extend(profile.zeros());
        breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        breakpoints.dedup();
        SignPart { profile, positive, breakpoints }
    }

    fn keep(&self, v: T) -> bool {
        if self.positive {
            v > T::zero()
        } else {
            v < T::zero()
        }
    }
}

impl<T: Real> RadialFunction<T> for SignPart<'_, T> {
    fn value(&self, t: T) -> (T, T) {
        let (v, d) = self.profile.value(t);
        if self.keep(v) {
            (v.abs(), if self.positive { d } else { -d })
        } else {
            (T::zero(), T::zero())
        }
    }

    fn breakpoints(&self) -> Vec<T> {
        self.breakpoints.clone()
    }

    fn tail(&self) -> Option<ExpTail<T>> {
        self.profile
            .exp_tail()
            .filter(|tl| self.keep(tl.amplitude))
            .map(|tl| ExpTail { amplitude: tl.amplitude.abs(), ..tl })
    }
}

/// A radial function given by closures, supported on `[0, end]`.
pub struct FnRadial<V> {
    pub f: V,
    pub breakpoints: Vec<f64>,
}

impl<T: Real, V: Fn(T) -> (T, T) + Sync> RadialFunction<T> for FnRadial<V> {
    fn value(&self, t: T) -> (T, T) {
        (self.f)(t)
    }

    fn breakpoints(&self) -> Vec<T> {
        self.breakpoints.iter().map(|b| T::c(*b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn closed_form_exponential() {
        let params = Params::new(3, 3.0, 0.0).unwrap();
        let a = 2.5;
        let bp: Vec<f64> = (0..=80).map(|i| i as f64 * 0.5).collect();
        let u = FnRadial { f: move |t: f64| ((-a * t).exp(), -a * (-a * t).exp()), breakpoints: bp };
        let r = energy(&u, &params, 1e-12).unwrap();
        let w = 4.0 * std::f64::consts::PI;
        let reference = |q: f64, c: f64| {
            w * c * integrate(|t: f64| (-q * a * t).exp() * t.sinh().powi(2), 0.0, 40.0, 1e-13).value
        };
        assert!((r.gradient_term - reference(2.0, a * a)).abs() < 1e-9);
        assert!((r.mass_term - reference(2.0, 1.0)).abs() < 1e-9);
        assert!((r.nonlinear_term - reference(4.0, 1.0)).abs() < 1e-9);
        // sinh^2 = (cosh 2t - 1)/2 gives int_0^inf e^{-2at} sinh^2 = 1/(4a(a^2-1))
        let exact = w / (4.0 * a * (a * a - 1.0));
        assert!((r.mass_term - exact).abs() < 1e-9);
    }

    #[test]
    fn tail_moment_matches_quadrature() {
        let (amp, rate, q, m, start) = (0.3f64, 2.2f64, 2.0f64, 4usize, 3.0f64);
        let exact = tail_moment(amp, rate, q, m, start).unwrap();
        let num = integrate(
            |t: f64| (amp * (-rate * (t - start)).exp()).powf(q) * t.sinh().powi(m as i32),
            start,
            start + 80.0,
            1e-13,
        )
        .value;
        assert!(((exact - num) / num).abs() < 1e-11);
        assert!(tail_moment(1.0, 1.0, 2.0, 3, 0.0).is_err());
    }

    #[test]
    fn zero_function_has_zero_energy() {
        let params = Params::new(4, 2.0, 1.0).unwrap();
        let u = FnRadial { f: |_t: f64| (0.0, 0.0), breakpoints: vec![0.0, 5.0] };
        let r = energy(&u, &params, 1e-10).unwrap();
        assert_eq!((r.gradient_term, r.mass_term, r.nonlinear_term, r.i_lambda), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(f_lambda(&u, &params, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn bookkeeping_identity_is_exact() {
        let params = Params::new(4, 2.0, 1.0).unwrap();
        let r = EnergyReport::from_terms(3.0, 0.7, 1.1, &params, 0.0);
        assert_eq!(r.i_lambda, (3.0 - 1.0 * 0.7) / 2.0 - 1.1 / 3.0);
    }
}
