//! Parameter maps and solution transport to the Hardy-Sobolev-Maz'ya equation
//!
//! `-Delta u - eta u / |y|^2 = |u|^{p_t - 1} u / |y|^t` on `R^n = R^k x R^{n-k}`
//!
//! and the Grushin equation
//!
//! `Delta_y phi + (1 + alpha)^2 |y|^{2 alpha} Delta_z phi + |phi|^{q-1} phi = 0`, `q = (Q+2)/(Q-2)`.
//!
//! Both are cylindrically symmetric in `y`. Writing `r = |y|`, the pair `(r, z)` is a point of
//! the upper half-space, and the half-space is identified with the ball through the involution
//! [`cayley`] (height first). A ball solution `u` is pulled back as `u o M`, whose value at
//! `(r, z)` only depends on the hyperbolic distance to the point `(1, 0)`, the preimage of the
//! origin.

use crate::error::{Error, Result};
use crate::geometry::cayley;
use crate::params::Params;
use crate::quadrature::{adaptive, AdaptiveOptions, GaussLegendre};
use crate::radial::RadialProfile;
use crate::scalar::{norm_sq, sphere_area, Field, Real};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

fn two<T: Field>() -> T {
    T::one() + T::one()
}

fn four<T: Field>() -> T {
    two::<T>() * two::<T>()
}

/// Parameters `(n, k, eta, t)` of the Hardy-Sobolev-Maz'ya equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HSMParams<T> {
    pub n: usize,
    pub k: usize,
    pub eta: T,
    pub t: T,
}

impl<T: Field> HSMParams<T> {
    pub fn new(n: usize, k: usize, eta: T, t: T) -> Result<Self> {
        let hp = HSMParams { n, k, eta, t };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.k >= self.n {
            return Err(Error::InvalidParams(format!("need 2 <= k < n, got n = {}, k = {}", self.n, self.k)));
        }
        if self.t < T::zero() || self.t >= two() {
            return Err(Error::InvalidParams(format!("need 0 <= t < 2, got t = {}", self.t)));
        }
        if self.eta < T::zero() {
            return Err(Error::InvalidParams(format!("need eta >= 0, got {}", self.eta)));
        }
        if self.k == 2 {
            if self.eta != T::zero() {
                return Err(Error::InvalidParams(format!("k = 2 requires eta = 0, got {}", self.eta)));
            }
        } else if self.eta >= self.hardy_bound() {
            return Err(Error::InvalidParams(format!(
                "need eta < (k-2)^2/4 = {}, got {}",
                self.hardy_bound(),
                self.eta
            )));
        }
        Ok(())
    }

    /// `(k-2)^2 / 4`.
    pub fn hardy_bound(&self) -> T {
        let m = T::from_usize_exact(self.k) - two();
        m.clone() * m / four()
    }

    /// `p_t = (n + 2 - 2t) / (n - 2)`.
    pub fn p_t(&self) -> T {
        let n = T::from_usize_exact(self.n);
        (n.clone() + two() - two::<T>() * self.t.clone()) / (n - two())
    }

    /// `N = n - k + 1`.
    pub fn hyperbolic_dim(&self) -> usize {
        self.n - self.k + 1
    }

    /// `eta + ((n-k)^2 - (k-2)^2) / 4`.
    pub fn lambda(&self) -> T {
        let nk = T::from_usize_exact(self.n - self.k);
        self.eta.clone() + nk.clone() * nk / four() - self.hardy_bound()
    }
}

impl<T: Field + ToPrimitive> HSMParams<T> {
    pub fn to_f64(&self) -> HSMParams<f64> {
        HSMParams { n: self.n, k: self.k, eta: to_f64(&self.eta), t: to_f64(&self.t) }
    }
}

fn to_f64<T: ToPrimitive>(x: &T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Maps HSM parameters to `(N, p, lambda)`; `k = 2, eta = 0` lands on the excluded endpoint.
pub fn hsm_to_hyperbolic<T: Field>(hp: &HSMParams<T>) -> Result<Params<T>> {
    hp.validate()?;
    if hp.k == 2 {
        return Err(Error::Borderline(format!(
            "k = 2, eta = 0 gives lambda = ((N-1)/2)^2 with N = {}",
            hp.hyperbolic_dim()
        )));
    }
    let params = Params::new(hp.hyperbolic_dim(), hp.p_t(), hp.lambda())?;
    if let Some(crit) = params.critical_exponent() {
        if params.p >= crit {
            return Err(Error::Numerical(format!("mapped exponent {} is not subcritical", params.p)));
        }
    }
    Ok(params)
}

/// Recovers `(n, eta, t)` from `(N, p, lambda)` for a given `k`.
pub fn hyperbolic_to_hsm<T: Field>(params: &Params<T>, k: usize) -> Result<HSMParams<T>> {
    let n = params.dim + k - 1;
    if n <= 2 {
        return Err(Error::InvalidParams(format!("n = {n} must exceed 2")));
    }
    let nf = T::from_usize_exact(n);
    let t = (nf.clone() + two() - params.p.clone() * (nf - two())) / two();
    let nk = T::from_usize_exact(n - k);
    let m = T::from_usize_exact(k) - two();
    let eta = params.lambda.clone() - (nk.clone() * nk - m.clone() * m) / four();
    HSMParams::new(n, k, eta, t)
}

/// Parameters `(alpha, k, h)` of the Grushin equation on `R^k x R^h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrushinParams<T> {
    pub alpha: T,
    pub k: usize,
    pub h: usize,
}

impl<T: Field> GrushinParams<T> {
    pub fn new(alpha: T, k: usize, h: usize) -> Result<Self> {
        let gp = GrushinParams { alpha, k, h };
        gp.validate()?;
        Ok(gp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha <= T::zero() {
            return Err(Error::InvalidParams(format!("need alpha > 0, got {}", self.alpha)));
        }
        if self.k < 1 || self.h < 1 {
            return Err(Error::InvalidParams(format!("need k, h >= 1, got k = {}, h = {}", self.k, self.h)));
        }
        Ok(())
    }

    /// Homogeneous dimension `Q = k + h (1 + alpha)`.
    pub fn q(&self) -> T {
        T::from_usize_exact(self.k) + T::from_usize_exact(self.h) * (T::one() + self.alpha.clone())
    }

    /// `(Q + 2) / (Q - 2)`.
    pub fn exponent(&self) -> T {
        let q = self.q();
        (q.clone() + two()) / (q - two())
    }

    /// `N = h + 1`.
    pub fn hyperbolic_dim(&self) -> usize {
        self.h + 1
    }

    /// `(h^2 - ((k-2)/(alpha+1))^2) / 4`.
    pub fn lambda(&self) -> T {
        let h = T::from_usize_exact(self.h);
        let m = (T::from_usize_exact(self.k) - two()) / (T::one() + self.alpha.clone());
        (h.clone() * h - m.clone() * m) / four()
    }
}

impl<T: Field + ToPrimitive> GrushinParams<T> {
    pub fn to_f64(&self) -> GrushinParams<f64> {
        GrushinParams { alpha: to_f64(&self.alpha), k: self.k, h: self.h }
    }
}

/// Maps Grushin parameters to `(N, p, lambda)`; `k = 2` lands on the excluded endpoint.
pub fn grushin_to_hyperbolic<T: Field>(gp: &GrushinParams<T>) -> Result<Params<T>> {
    gp.validate()?;
    if gp.k == 2 {
        return Err(Error::Borderline(format!(
            "k = 2 gives lambda = h^2/4 = ((N-1)/2)^2 with N = {}",
            gp.hyperbolic_dim()
        )));
    }
    let params = Params::new(gp.hyperbolic_dim(), gp.exponent(), gp.lambda())?;
    if let Some(crit) = params.critical_exponent() {
        if params.p >= crit {
            return Err(Error::Numerical(format!("mapped exponent {} is not subcritical", params.p)));
        }
    }
    Ok(params)
}

/// `u o M` at the half-space point `(r, z)` with `|z| = rho`, and its `r` and `rho` derivatives.
///
/// `M` is an isometry sending `(1, 0)` to the origin, so the value is `u(d)` with
/// `sinh^2(d/2) = ((r-1)^2 + rho^2) / (4r)`.
fn pullback<T: Real>(u: &RadialProfile<T>, r: T, rho: T) -> (T, T, T) {
    let delta = (r - T::one()).powi(2) + rho * rho;
    let d = T::c(2.0) * (delta / (T::c(4.0) * r)).sqrt().asinh();
    let (v, dv, ddv) = u.eval2(d);
    // u'(d) / sinh d, continued by u''(0) at the centre.
    let g = if d > T::c(1e-6) { dv / d.sinh() } else { ddv };
    let dr = (r - T::one()) / r - delta / (T::c(2.0) * r * r);
    (v, g * dr, g * rho / r)
}

/// The pulled-back value computed through the explicit map `M`; used to cross-check [`pullback`].
pub fn pullback_via_map<T: Real>(u: &RadialProfile<T>, r: T, z: &[T]) -> Result<T> {
    let mut hs = Vec::with_capacity(z.len() + 1);
    hs.push(r);
    hs.extend_from_slice(z);
    let x = cayley(&hs)?;
    let norm = norm_sq(&x).sqrt();
    if norm >= T::one() {
        return Err(Error::OutsideBall { norm: norm.f64() });
    }
    Ok(u.eval(T::c(2.0) * norm.atanh()))
}

fn split_radii<T: Real>(y: &[T], z: &[T]) -> Result<(T, T)> {
    let r = norm_sq(y).sqrt();
    if !(r > T::zero()) {
        return Err(Error::SingularSet);
    }
    Ok((r, norm_sq(z).sqrt()))
}

/// A cylindrically symmetric function on `R^k x R^m` minus `{y = 0}`.
pub trait Cylindrical<T: Real>: Sync {
    /// Dimension `k` of the `y` block.
    fn y_dim(&self) -> usize;
    /// Dimension `m` of the `z` block.
    fn z_dim(&self) -> usize;
    /// Value and derivatives in `s = |y|` and `rho = |z|`.
    fn profile(&self, s: T, rho: T) -> (T, T, T);

    fn eval(&self, y: &[T], z: &[T]) -> Result<T> {
        if y.len() != self.y_dim() {
            return Err(Error::DimensionMismatch { expected: self.y_dim(), got: y.len() });
        }
        if z.len() != self.z_dim() {
            return Err(Error::DimensionMismatch { expected: self.z_dim(), got: z.len() });
        }
        let (s, rho) = split_radii(y, z)?;
        Ok(self.profile(s, rho).0)
    }

    /// Evaluation at `x = (y, z)`.
    fn eval_point(&self, x: &[T]) -> Result<T> {
        let k = self.y_dim();
        if x.len() != k + self.z_dim() {
            return Err(Error::DimensionMismatch { expected: k + self.z_dim(), got: x.len() });
        }
        self.eval(&x[..k], &x[k..])
    }
}

/// `|y|^{-(n-2)/2} (u o M)(|y|, z)`, a solution of the HSM equation.
#[derive(Debug, Clone)]
pub struct HsmSolution<'a, T> {
    profile: &'a RadialProfile<T>,
    params: HSMParams<T>,
    weight: T,
}

impl<'a, T: Real> HsmSolution<'a, T> {
    pub fn params(&self) -> &HSMParams<T> {
        &self.params
    }
}

impl<T: Real> Cylindrical<T> for HsmSolution<'_, T> {
    fn y_dim(&self) -> usize {
        self.params.k
    }

    fn z_dim(&self) -> usize {
        self.params.n - self.params.k
    }

    fn profile(&self, s: T, rho: T) -> (T, T, T) {
        let (v, vr, vrho) = pullback(self.profile, s, rho);
        let f = s.powf(-self.weight);
        (f * v, f * (vr - self.weight * v / s), f * vrho)
    }
}

pub fn transport_to_hsm<'a, T: Real>(u: &'a RadialProfile<T>, hp: &HSMParams<T>) -> Result<HsmSolution<'a, T>> {
    let params = hsm_to_hyperbolic(hp)?;
    if u.dim() != params.dim {
        return Err(Error::DimensionMismatch { expected: params.dim, got: u.dim() });
    }
    let weight = (T::n(hp.n) - T::c(2.0)) / T::c(2.0);
    Ok(HsmSolution { profile: u, params: hp.clone(), weight })
}

/// `c s^{-(Q-2)/2} (u o M)(s^{1+alpha}, z)` with `s = |y|` and `c = (1+alpha)^{(Q-2)/2}`,
/// a solution of the Grushin equation.
#[derive(Debug, Clone)]
pub struct GrushinSolution<'a, T> {
    profile: &'a RadialProfile<T>,
    params: GrushinParams<T>,
    beta: T,
    weight: T,
    scale: T,
}

impl<'a, T: Real> GrushinSolution<'a, T> {
    pub fn params(&self) -> &GrushinParams<T> {
        &self.params
    }

    /// The amplitude `(1+alpha)^{(Q-2)/2}`.
    pub fn scale(&self) -> T {
        self.scale
    }
}

impl<T: Real> Cylindrical<T> for GrushinSolution<'_, T> {
    fn y_dim(&self) -> usize {
        self.params.k
    }

    fn z_dim(&self) -> usize {
        self.params.h
    }

    fn profile(&self, s: T, rho: T) -> (T, T, T) {
        let r = s.powf(self.beta);
        let (v, vr, vrho) = pullback(self.profile, r, rho);
        let f = self.scale * s.powf(-self.weight);
        (f * v, f * (self.beta * r / s * vr - self.weight * v / s), f * vrho)
    }
}

pub fn transport_to_grushin<'a, T: Real>(
    u: &'a RadialProfile<T>,
    gp: &GrushinParams<T>,
) -> Result<GrushinSolution<'a, T>> {
    let params = grushin_to_hyperbolic(gp)?;
    if u.dim() != params.dim {
        return Err(Error::DimensionMismatch { expected: params.dim, got: u.dim() });
    }
    let beta = T::one() + gp.alpha;
    let weight = (gp.q() - T::c(2.0)) / T::c(2.0);
    Ok(GrushinSolution { profile: u, params: gp.clone(), beta, weight, scale: beta.powf(weight) })
}

/// Pointwise residual of a PDE together with the sum of the magnitudes of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeResidual<T> {
    pub residual: T,
    pub scale: T,
}

impl<T: Real> PdeResidual<T> {
    pub fn relative(&self) -> T {
        if self.scale > T::zero() {
            self.residual.abs() / self.scale
        } else {
            self.residual.abs()
        }
    }
}

/// Centred second differences `d_ii f(x)` for each coordinate.
fn second_differences<T: Real, F: Fn(&[T]) -> Result<T>>(f: &F, x: &[T], h: T) -> Result<(T, Vec<T>)> {
    let f0 = f(x)?;
    let mut y = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let a = f(&y)?;
        y[i] = x[i] - h;
        let b = f(&y)?;
        y[i] = x[i];
        out.push((a - T::c(2.0) * f0 + b) / (h * h));
    }
    Ok((f0, out))
}

/// Residual of `-Delta u - eta u/|y|^2 - |u|^{p_t-1} u / |y|^t` at `x = (y, z)` by centred differences.
pub fn hsm_residual<T: Real>(sol: &HsmSolution<'_, T>, x: &[T], h: T) -> Result<PdeResidual<T>> {
    let hp = sol.params();
    let f = |p: &[T]| sol.eval_point(p);
    let (u, dii) = second_differences(&f, x, h)?;
    let r2 = norm_sq(&x[..hp.k]);
    let lap: T = dii.iter().copied().sum();
    let hardy = hp.eta * u / r2;
    let source = u.abs().powf(hp.p_t() - T::one()) * u / r2.sqrt().powf(hp.t);
    let scale = dii.iter().map(|v| v.abs()).sum::<T>() + hardy.abs() + source.abs();
    Ok(PdeResidual { residual: -lap - hardy - source, scale })
}

/// Residual of `Delta_y phi + (1+alpha)^2 |y|^{2 alpha} Delta_z phi + |phi|^{q-1} phi` at `x = (y, z)`.
pub fn grushin_residual<T: Real>(sol: &GrushinSolution<'_, T>, x: &[T], h: T) -> Result<PdeResidual<T>> {
    let gp = sol.params();
    let f = |p: &[T]| sol.eval_point(p);
    let (phi, dii) = second_differences(&f, x, h)?;
    let r2 = norm_sq(&x[..gp.k]);
    let coef = (T::one() + gp.alpha).powi(2) * r2.powf(gp.alpha);
    let lap_y: T = dii[..gp.k].iter().copied().sum();
    let lap_z: T = dii[gp.k..].iter().copied().sum();
    let source = phi.abs().powf(gp.exponent() - T::one()) * phi;
    let scale = dii[..gp.k].iter().map(|v| v.abs()).sum::<T>()
        + coef * dii[gp.k..].iter().map(|v| v.abs()).sum::<T>()
        + source.abs();
    Ok(PdeResidual { residual: lap_y + coef * lap_z + source, scale })
}

/// Panel boundaries in `rho` at fixed `r` matching the profile's grid in the geodesic distance.
fn rho_breaks<T: Real>(u: &RadialProfile<T>, r: T) -> Vec<T> {
    let mut out = vec![T::zero()];
    for d in u.panel_boundaries() {
        let rho2 = T::c(2.0) * r * (d.cosh() - T::one()) - (r - T::one()).powi(2);
        if rho2 > T::zero() {
            let rho = rho2.sqrt();
            if rho > *out.last().unwrap() {
                out.push(rho);
            }
        }
    }
    out
}

/// `int_{a < |y| < A} |grad_y f|^2 + c(|y|) |grad_z f|^2 dy dz` for a cylindrical `f`, where `c` is
/// the `z`-gradient coefficient.
fn truncated_norm<T, C, W>(sol: &C, profile: &RadialProfile<T>, radius: W, zcoef: impl Fn(T) -> T + Sync, a: T, big_a: T, rel_tol: T) -> Result<T>
where
    T: Real,
    C: Cylindrical<T>,
    W: Fn(T) -> T + Sync,
{
    if !(a > T::zero() && big_a > a) {
        return Err(Error::InvalidParams("need 0 < a < A".into()));
    }
    let (k, m) = (sol.y_dim(), sol.z_dim());
    let rule = GaussLegendre::<T>::new(10);
    let opts = AdaptiveOptions::rel(rel_tol);
    let density = |s: T, rho: T| {
        let (_, ds, drho) = sol.profile(s, rho);
        (ds * ds + zcoef(s) * drho * drho) * s.powi(k as i32 - 1) * rho.powi(m as i32 - 1)
    };
    let mut failed = false;
    let inner = |s: T, failed: &mut bool| {
        let mut breaks = rho_breaks(profile, radius(s));
        let last = *breaks.last().unwrap();
        let reach = last.max(T::one());
        if reach > last {
            breaks.push(reach);
        }
        let body = adaptive(|rho| density(s, rho), &breaks, &rule, opts);
        // rho = reach / w on (0, 1].
        let tail = adaptive(
            |w: T| if w > T::zero() { density(s, reach / w) * reach / (w * w) } else { T::zero() },
            &[T::zero(), T::c(0.5), T::one()],
            &rule,
            opts,
        );
        *failed |= !(body.value.is_finite() && tail.value.is_finite());
        body.value + tail.value
    };
    let outer = adaptive(|s| inner(s, &mut failed), &[a, big_a], &rule, opts);
    if failed || !outer.value.is_finite() {
        return Err(Error::Numerical("non-finite norm density".into()));
    }
    Ok(sphere_area::<T>(k) * sphere_area::<T>(m) * outer.value)
}

/// Dirichlet norm `int |grad u|^2` of an HSM solution over `{a < |y| < A}`.
pub fn hsm_truncated_norm<T: Real>(sol: &HsmSolution<'_, T>, a: T, big_a: T, rel_tol: T) -> Result<T> {
    truncated_norm(sol, sol.profile, |s| s, |_| T::one(), a, big_a, rel_tol)
}

/// Grushin norm `int |grad_y phi|^2 + (1+alpha)^2 |y|^{2 alpha} |grad_z phi|^2` over `{a < |y| < A}`.
pub fn grushin_truncated_norm<T: Real>(sol: &GrushinSolution<'_, T>, a: T, big_a: T, rel_tol: T) -> Result<T> {
    let beta = sol.beta;
    let alpha = sol.params.alpha;
    truncated_norm(sol, sol.profile, |s| s.powf(beta), |s| beta * beta * s.powf(T::c(2.0) * alpha), a, big_a, rel_tol)
}

/// One row `(y_1..y_k, z_1..z_m, value)` per sample point; points on `{y = 0}` are skipped.
pub fn sample_points<T: Real, C: Cylindrical<T>>(sol: &C, points: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let mut rows = Vec::with_capacity(points.len());
    for x in points {
        match sol.eval_point(x) {
            Ok(v) => {
                let mut row = x.clone();
                row.push(v);
                rows.push(row);
            }
            Err(Error::SingularSet) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{find_nodal_solution, RadialConfig};
    use crate::Rational;

    fn q(a: i64, b: i64) -> Rational {
        Rational::new(a, b)
    }

    #[test]
    fn hsm_examples() {
        let hp = HSMParams::new(6, 3, q(0, 1), q(1, 1)).unwrap();
        let p = hsm_to_hyperbolic(&hp).unwrap();
        assert_eq!((p.dim, p.p, p.lambda), (4, q(3, 2), q(2, 1)));
        let hp = HSMParams::new(5, 2, q(0, 1), q(0, 1)).unwrap();
        assert_eq!(hp.p_t(), q(7, 3));
        assert_eq!(hp.lambda(), q(9, 4));
        assert!(matches!(hsm_to_hyperbolic(&hp), Err(Error::Borderline(_))));
        assert!(HSMParams::new(5, 2, q(1, 10), q(0, 1)).is_err());
        assert!(HSMParams::new(6, 4, q(1, 1), q(0, 1)).is_err());
        assert!(HSMParams::new(6, 3, q(0, 1), q(2, 1)).is_err());
        assert!(HSMParams::new(6, 6, q(0, 1), q(0, 1)).is_err());
    }

    #[test]
    fn grushin_examples() {
        let gp = GrushinParams::new(q(1, 1), 1, 3).unwrap();
        assert_eq!(gp.q(), q(7, 1));
        let p = grushin_to_hyperbolic(&gp).unwrap();
        // lambda = (9 - (1/2)^2)/4
        assert_eq!((p.dim, p.p, p.lambda), (4, q(9, 5), q(35, 16)));
        let gp = GrushinParams::new(q(1, 2), 2, 3).unwrap();
        assert!(matches!(grushin_to_hyperbolic(&gp), Err(Error::Borderline(_))));
        assert!(GrushinParams::new(q(0, 1), 1, 1).is_err());
    }

    #[test]
    fn hsm_round_trip() {
        for n in 4..12 {
            for k in 3..n {
                for t in [q(0, 1), q(1, 3), q(3, 2)] {
                    let hp = HSMParams::new(n, k, q(k as i64 - 2, 8), t).unwrap();
                    let p = hsm_to_hyperbolic(&hp).unwrap();
                    assert_eq!(hyperbolic_to_hsm(&p, k).unwrap(), hp);
                }
            }
        }
    }

    fn solution(dim: usize, p: f64, lambda: f64, k: usize) -> RadialProfile<f64> {
        let params = Params::new(dim, p, lambda).unwrap();
        find_nodal_solution(k, &params, &RadialConfig::default()).unwrap().profile
    }

    #[test]
    fn pullback_agrees_with_map() {
        let u = solution(4, 1.5, 2.0, 1);
        for (r, z) in [(1.0f64, [0.0f64, 0.0, 0.0]), (0.3, [0.5, -1.0, 0.2]), (4.0, [2.0, 0.0, 1.0])] {
            let (v, _, _) = pullback(&u, r, norm_sq(&z).sqrt());
            let w = pullback_via_map(&u, r, &z).unwrap();
            assert!((v - w).abs() < 1e-9 * (1.0 + v.abs()), "{v} {w}");
        }
    }

    #[test]
    fn pullback_gradient_matches_differences() {
        let u = solution(4, 1.5, 2.0, 1);
        let hp = HSMParams::new(6, 3, 0.0, 1.0).unwrap();
        let sol = transport_to_hsm(&u, &hp).unwrap();
        let gp = GrushinParams::new(1.0, 1, 3).unwrap();
        let v = solution(4, 1.8, 2.1875, 1);
        let gsol = transport_to_grushin(&v, &gp).unwrap();
        let h = 1e-6;
        for (s, rho) in [(0.7, 0.4), (1.3, 2.0), (2.5, 0.1)] {
            for prof in [&sol as &dyn Cylindrical<f64>, &gsol] {
                let (_, ds, drho) = prof.profile(s, rho);
                let fs = (prof.profile(s + h, rho).0 - prof.profile(s - h, rho).0) / (2.0 * h);
                let fr = (prof.profile(s, rho + h).0 - prof.profile(s, rho - h).0) / (2.0 * h);
                assert!((ds - fs).abs() < 1e-6 * (1.0 + ds.abs()), "{ds} {fs}");
                assert!((drho - fr).abs() < 1e-6 * (1.0 + drho.abs()), "{drho} {fr}");
            }
        }
    }

    #[test]
    fn transported_functions_solve_their_equations() {
        let u = solution(4, 1.5, 2.0, 1);
        let hp = HSMParams::new(6, 3, 0.0, 1.0).unwrap();
        let sol = transport_to_hsm(&u, &hp).unwrap();
        let v = solution(4, 1.8, 2.1875, 1);
        let gp = GrushinParams::new(1.0, 1, 3).unwrap();
        let gsol = transport_to_grushin(&v, &gp).unwrap();
        for x in [[0.5, 0.2, -0.1, 0.3, 0.0, 0.4], [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.1, 1.2, 0.3, -1.0, 2.0, 0.5]] {
            let r = hsm_residual(&sol, &x, 1e-4).unwrap();
            assert!(r.relative() < 1e-4, "{r:?}");
            let g = grushin_residual(&gsol, &x[..4], 1e-4).unwrap();
            assert!(g.relative() < 1e-4, "{g:?}");
        }
    }

    #[test]
    fn symmetry_sign_change_and_singular_set() {
        let u = solution(4, 1.5, 2.0, 1);
        let hp = HSMParams::new(6, 3, 0.0, 1.0).unwrap();
        let sol = transport_to_hsm(&u, &hp).unwrap();
        let a = sol.eval(&[0.6, 0.0, 0.8], &[0.3, 0.1, 0.0]).unwrap();
        let b = sol.eval(&[0.0, -1.0, 0.0], &[0.0, 0.3, -0.1]).unwrap();
        assert!((a - b).abs() < 1e-14 * a.abs().max(1.0));
        assert_eq!(sol.eval(&[0.0; 3], &[1.0, 0.0, 0.0]), Err(Error::SingularSet));
        let vals: Vec<f64> = (1..40).map(|i| sol.eval(&[1.0, 0.0, 0.0], &[0.25 * i as f64, 0.0, 0.0]).unwrap()).collect();
        assert!(vals.iter().any(|v| *v > 0.0) && vals.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn truncated_norms_are_finite_and_positive() {
        let u = solution(4, 1.5, 2.0, 0);
        let hp = HSMParams::new(6, 3, 0.0, 1.0).unwrap();
        let sol = transport_to_hsm(&u, &hp).unwrap();
        let n1 = hsm_truncated_norm(&sol, 0.5, 2.0, 1e-6).unwrap();
        let n2 = hsm_truncated_norm(&sol, 0.25, 4.0, 1e-6).unwrap();
        assert!(n1 > 0.0 && n2 > n1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hsm_maps_are_subcritical_and_invertible(
                n in 4usize..30, kf in 0.0f64..1.0, num in 0i64..100, tn in 0i64..40,
            ) {
                let k = 3 + ((n - 3) as f64 * kf) as usize;
                prop_assume!(k < n);
                let eta = q((k as i64 - 2).pow(2), 4) * q(num, 100);
                let hp = HSMParams::new(n, k, eta, q(tn, 20)).unwrap();
                let p = hsm_to_hyperbolic(&hp).unwrap();
                prop_assert!(p.p > q(1, 1));
                if let Some(c) = p.critical_exponent() {
                    prop_assert!(p.p < c);
                }
                prop_assert!(p.lambda < p.spectral_bottom());
                prop_assert_eq!(hyperbolic_to_hsm(&p, k).unwrap(), hp);
            }

            #[test]
            fn grushin_maps_are_subcritical(
                an in 1i64..200, ad in 1i64..50, k in 1usize..12, h in 1usize..12,
            ) {
                prop_assume!(k != 2);
                let gp = GrushinParams::new(q(an, ad), k, h).unwrap();
                let p = grushin_to_hyperbolic(&gp).unwrap();
                prop_assert!(p.p > q(1, 1));
                if let Some(c) = p.critical_exponent() {
                    prop_assert!(p.p < c);
                }
                prop_assert!(p.lambda < p.spectral_bottom());
            }
        }
    }
}
