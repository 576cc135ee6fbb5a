//! Conformal change between the ball metric and the flat metric on the unit ball.
//!
//! With `phi = 2 / (1 - |x|^2)` and `v = phi^{(N-2)/2} u`, the hyperbolic equation for `u`
//! becomes `-Delta v - lambda~ phi^2 v = phi^t |v|^{p-1} v` with
//! `lambda~ = lambda - N(N-2)/4` and `t = N - (N-2)(p+1)/2`.

use crate::energy;
use crate::error::{Error, Result};
use crate::params::Params;
use crate::quadrature::{adaptive, AdaptiveOptions, GaussLegendre};
use crate::radial::{nonlinearity, RadialFunction, RadialProfile};
use crate::scalar::{norm_sq, sphere_area, Field, Real};
use crate::tolerances::BOUNDARY_MARGIN;
use serde::Serialize;

/// Exponents of the flat form of the equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformalWeight<T> {
    /// Power of `phi` in front of the nonlinearity.
    pub exponent_t: T,
    pub lambda_tilde: T,
}

impl<T: Field> ConformalWeight<T> {
    pub fn new(params: &Params<T>) -> Self {
        let n = T::from_usize_exact(params.dim);
        let two = T::from_usize_exact(2);
        let m = n.clone() - two.clone();
        let exponent_t = n.clone() - m.clone() * (params.p.clone() + T::one()) / two.clone();
        let lambda_tilde = params.lambda.clone() - n * m / (two.clone() * two);
        ConformalWeight { exponent_t, lambda_tilde }
    }

    /// `t = 0`, i.e. `p = (N+2)/(N-2)`.
    pub fn is_critical(&self) -> bool {
        self.exponent_t.near(&T::zero())
    }

    /// `lambda~ <= 0`, i.e. `lambda <= N(N-2)/4`.
    pub fn at_or_below_conformal(&self) -> bool {
        self.lambda_tilde <= T::zero() || self.lambda_tilde.near(&T::zero())
    }
}

/// `2 / (1 - |x|^2)`, refusing points within the boundary margin.
pub fn conformal_factor<T: Real>(x: &[T]) -> Result<T> {
    let n2 = norm_sq(x);
    let n = n2.sqrt();
    if !(n < T::one() - T::c(BOUNDARY_MARGIN)) {
        return Err(if n < T::one() { Error::NearBoundary { norm: n.f64() } } else { Error::OutsideBall { norm: n.f64() } });
    }
    Ok(T::c(2.0) / ((T::one() - n) * (T::one() + n)))
}

fn weight_power<T: Real>(dim: usize) -> T {
    (T::n(dim) - T::c(2.0)) / T::c(2.0)
}

/// `v(x) = phi(x)^{(N-2)/2} u(x)`.
pub fn to_euclidean<T, F>(u: F, params: &Params<T>) -> impl Fn(&[T]) -> Result<T>
where
    T: Real,
    F: Fn(&[T]) -> T,
{
    let k = weight_power::<T>(params.dim);
    move |x: &[T]| Ok(conformal_factor(x)?.powf(k) * u(x))
}

/// `u(x) = phi(x)^{-(N-2)/2} v(x)`.
pub fn from_euclidean<T, F>(v: F, params: &Params<T>) -> impl Fn(&[T]) -> Result<T>
where
    T: Real,
    F: Fn(&[T]) -> T,
{
    let k = weight_power::<T>(params.dim);
    move |x: &[T]| Ok(v(x) / conformal_factor(x)?.powf(k))
}

/// The radial profile as a function on ball coordinates.
pub fn on_ball<T: Real>(profile: &RadialProfile<T>) -> impl Fn(&[T]) -> T + Sync + '_ {
    move |x: &[T]| profile.eval(T::c(2.0) * norm_sq(x).sqrt().atanh())
}

/// Pointwise residual of the flat equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatResidual<T> {
    /// `-Delta v - lambda~ phi^2 v - phi^t |v|^{p-1} v`
    pub residual: T,
    /// `sum_i |d_ii v| + |lambda~ phi^2 v| + |phi^t |v|^p|`.
    pub scale: T,
}

impl<T: Real> FlatResidual<T> {
    pub fn relative(&self) -> T {
        if self.scale > T::zero() {
            self.residual.abs() / self.scale
        } else {
            self.residual.abs()
        }
    }
}

/// Residual of `-Delta v - lambda~ phi^2 v = phi^t |v|^{p-1} v` at `x` by centred differences with step `h`.
pub fn flat_residual<T, F>(v: &F, x: &[T], params: &Params<T>, h: T) -> Result<FlatResidual<T>>
where
    T: Real,
    F: Fn(&[T]) -> Result<T>,
{
    let w = ConformalWeight::new(params);
    let phi = conformal_factor(x)?;
    let v0 = v(x)?;
    let mut lap = T::zero();
    let mut partials = T::zero();
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let a = v(&y)?;
        y[i] = x[i] - h;
        let b = v(&y)?;
        y[i] = x[i];
        let dii = (a - T::c(2.0) * v0 + b) / (h * h);
        lap += dii;
        partials += dii.abs();
    }
    let terms = [-lap, -w.lambda_tilde * phi * phi * v0, -phi.powf(w.exponent_t) * nonlinearity(v0, params.p)];
    Ok(FlatResidual { residual: terms.iter().copied().sum(), scale: partials + terms[1].abs() + terms[2].abs() })
}

/// Both functionals of one radial function and their relative gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyEquivalence<T> {
    #[serde(rename = "I_lambda")]
    pub i_lambda: T,
    #[serde(rename = "J_lambda")]
    pub j_lambda: T,
    /// `|I - J| / (1 + |I|)`
    pub relative_gap: T,
    pub quadrature_error: T,
}

/// `I_lambda(u)` by hyperbolic quadrature in `t` and `J_lambda(v)` by flat quadrature in
/// `sigma = -ln(1 - r)`, where `r = |x|`.
pub fn energy_equivalence_check<T, F>(u: &F, params: &Params<T>, rel_tol: T) -> Result<EnergyEquivalence<T>>
where
    T: Real,
    F: RadialFunction<T> + ?Sized,
{
    let hyper = energy::energy(u, params, rel_tol)?;
    let (j, err) = flat_energy(u, params, rel_tol)?;
    let gap = (hyper.i_lambda - j).abs() / (T::one() + hyper.i_lambda.abs());
    Ok(EnergyEquivalence {
        i_lambda: hyper.i_lambda,
        j_lambda: j,
        relative_gap: gap,
        quadrature_error: err + hyper.quadrature_error_estimate,
    })
}

/// Furthest `sigma` integrated; the integrand decays like `exp(-(2 c_+ - N + 1) sigma)`.
const SIGMA_MAX: f64 = 80.0;

/// `J_lambda` of `v = phi^{(N-2)/2} u` for radial `u`, with its error estimate.
pub fn flat_energy<T, F>(u: &F, params: &Params<T>, rel_tol: T) -> Result<(T, T)>
where
    T: Real,
    F: RadialFunction<T> + ?Sized,
{
    let n = params.dim;
    let w = ConformalWeight::new(params);
    let k = weight_power::<T>(n);
    let p = params.p;
    let integrand = |sigma: T| -> T {
        let e = (-sigma).exp();
        let r = -(-sigma).exp_m1();
        let phi = T::c(2.0) / (e * (T::one() + r));
        let t = sigma + r.ln_1p();
        let (val, d) = u.value(t);
        if val == T::zero() && d == T::zero() {
            return T::zero();
        }
        let v = phi.powf(k) * val;
        let dv = phi.powf(k + T::one()) * (d + k * r * val);
        let density = (dv * dv - w.lambda_tilde * phi * phi * v * v) / T::c(2.0)
            - phi.powf(w.exponent_t) * v.abs().powf(p + T::one()) / (p + T::one());
        density * r.powi(n as i32 - 1) * e
    };
    let to_sigma = |t: T| (t.exp_m1() / T::c(2.0)).ln_1p();
    let mut bp: Vec<T> = u.breakpoints().into_iter().map(to_sigma).collect();
    let mut s = bp.last().copied().unwrap_or(T::zero()).ceil();
    let end = if u.tail().is_some() { T::c(SIGMA_MAX) } else { bp.last().copied().unwrap_or(T::zero()) };
    while s < end {
        bp.push(s);
        s += T::one();
    }
    bp.push(end);
    bp.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    bp.dedup();
    let rule = GaussLegendre::new(10);
    let res = adaptive(integrand, &bp, &rule, AdaptiveOptions::rel(rel_tol));
    if !res.converged || !res.value.is_finite() {
        return Err(Error::Quadrature { estimate: res.value.f64(), error: res.error.f64() });
    }
    let omega = sphere_area::<T>(n);
    Ok((res.value * omega, res.error * omega))
}
