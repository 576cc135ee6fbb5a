//! `L^q` masses of functions on caps and geodesic balls.
//!
//! Integrals use geodesic polar coordinates about a centre. For a cap the rays start at
//! the origin, which never lies in a cap; a ray in direction `w` enters the cap at
//! `|x| = w.a - sqrt((w.a)^2 - 1)` and stays inside up to the ideal boundary.

use super::weighted;
use crate::error::{Error, Result};
use crate::geometry::{Cap, DiscPoint, Isometry};
use crate::params::Params;
use crate::quadrature::{adaptive, AdaptiveOptions, GaussLegendre};
use crate::scalar::{dot, norm_sq, Real};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Quadrature settings for [`cap_mass`] and [`ball_mass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapQuadrature {
    /// Gauss-Legendre nodes per polar angle of the direction sphere; azimuths get twice as many.
    pub angle_nodes: usize,
    /// Relative tolerance of the adaptive radial and polar integrals.
    pub rel_tol: f64,
    /// Geodesic radius at which rays are truncated.
    pub t_max: f64,
}

impl Default for CapQuadrature {
    fn default() -> Self {
        CapQuadrature { angle_nodes: 24, rel_tol: 1e-10, t_max: 2.0 * (1.0 - 1e-8f64).atanh() }
    }
}

/// Product rule on the unit sphere `S^m` in `R^{m+1}`. Weights sum to its area.
pub(crate) fn sphere_rule<T: Real>(m: usize, order: usize) -> Vec<(Vec<T>, T)> {
    match m {
        0 => vec![(vec![T::one()], T::one()), (vec![-T::one()], T::one())],
        1 => {
            let k = 2 * order.max(2);
            let w = T::c(2.0) * T::PI() / T::n(k);
            (0..k)
                .map(|j| {
                    let phi = T::c(2.0) * T::PI() * T::n(j) / T::n(k);
                    (vec![phi.cos(), phi.sin()], w)
                })
                .collect()
        }
        _ => {
            let rule = GaussLegendre::<T>::new(order.max(2));
            let sub = sphere_rule::<T>(m - 1, order);
            let half = T::PI() / T::c(2.0);
            let mut out = Vec::with_capacity(rule.len() * sub.len());
            for (x, wx) in rule.nodes().iter().zip(rule.weights()) {
                let psi = half * (*x + T::one());
                let (s, c) = psi.sin_cos();
                let w = *wx * half * s.powi(m as i32 - 1);
                for (eta, we) in &sub {
                    let mut v = Vec::with_capacity(m + 1);
                    v.push(c);
                    v.extend(eta.iter().map(|e| *e * s));
                    out.push((v, w * *we));
                }
            }
            out
        }
    }
}

/// Householder reflection sending `e_1` to the unit vector `axis`.
fn frame<T: Real>(axis: &[T]) -> impl Fn(&[T]) -> Vec<T> + Sync + '_ {
    let mut v = axis.iter().map(|a| -*a).collect::<Vec<T>>();
    v[0] += T::one();
    let vv = norm_sq(&v);
    move |x: &[T]| {
        if vv <= T::epsilon() {
            return x.to_vec();
        }
        let k = T::c(2.0) * dot(&v, x) / vv;
        x.iter().zip(&v).map(|(xi, vi)| *xi - k * *vi).collect()
    }
}

fn quad_error<T: Real>(value: T, error: T) -> Error {
    Error::Quadrature { estimate: value.f64(), error: error.f64() }
}

/// `int_a^b g(t) sinh(t)^m dt` adaptively, with unit panels.
fn ray<T: Real, G: FnMut(T) -> T>(mut g: G, a: T, b: T, m: usize, q: T, rel: T) -> Result<T> {
    if b <= a {
        return Ok(T::zero());
    }
    let mut bp = vec![a];
    let mut x = a.floor() + T::one();
    while x < b {
        bp.push(x);
        x += T::one();
    }
    bp.push(b);
    let rule = GaussLegendre::new(10);
    let r = adaptive(|t| weighted(g(t), q, m, t), &bp, &rule, AdaptiveOptions::rel(rel));
    if !r.converged || !r.value.is_finite() {
        return Err(quad_error(r.value, r.error));
    }
    Ok(r.value)
}

fn check_dim<T: Real>(dim: usize, params: &Params<T>) -> Result<()> {
    if dim != params.dim {
        return Err(Error::DimensionMismatch { expected: params.dim, got: dim });
    }
    Ok(())
}

/// `int_A |u|^q dV` over the cap `A`, for `u` given on ball coordinates.
pub fn cap_mass<T, F>(u: &F, cap: &Cap<T>, params: &Params<T>, q: T, quad: &CapQuadrature) -> Result<T>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    let n = cap.dim();
    check_dim(n, params)?;
    let na = norm_sq(cap.center()).sqrt();
    let axis: Vec<T> = cap.center().iter().map(|v| *v / na).collect();
    let rot = frame(&axis);
    let rel = T::c(quad.rel_tol);
    let t_max = T::c(quad.t_max);
    let theta_max = (T::one() / na).acos();
    let eta = sphere_rule::<T>(n - 2, quad.angle_nodes);
    let m = n - 1;

    let shell = |theta: T| -> Result<T> {
        let (s, c) = theta.sin_cos();
        let ca = na * c;
        let disc = ca * ca - T::one();
        if disc <= T::zero() {
            return Ok(T::zero());
        }
        let rho = ca - disc.sqrt();
        if rho >= T::one() {
            return Ok(T::zero());
        }
        let t1 = T::c(2.0) * rho.atanh();
        let parts: Vec<Result<T>> = eta
            .par_iter()
            .map(|(e, w)| {
                let mut local = Vec::with_capacity(n);
                local.push(c);
                local.extend(e.iter().map(|v| *v * s));
                let dir = rot(&local);
                let val = ray(
                    |t| {
                        let r = (t / T::c(2.0)).tanh();
                        let x: Vec<T> = dir.iter().map(|d| *d * r).collect();
                        u(&x)
                    },
                    t1,
                    t_max,
                    m,
                    q,
                    rel,
                )?;
                Ok(val * *w)
            })
            .collect();
        let mut acc = T::zero();
        for p in parts {
            acc += p?;
        }
        Ok(acc * s.powi(n as i32 - 2))
    };

    let mut failure = None;
    let rule = GaussLegendre::new(10);
    let bp: Vec<T> = (0..=8).map(|j| theta_max * T::n(j) / T::c(8.0)).collect();
    let r = adaptive(
        |theta| match shell(theta) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        },
        &bp,
        &rule,
        AdaptiveOptions::rel(rel),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !r.converged || !r.value.is_finite() {
        return Err(quad_error(r.value, r.error));
    }
    Ok(r.value)
}

/// `int_{B(c, R)} |u|^q dV` over the geodesic ball of radius `R` about `c`.
pub fn ball_mass<T, F>(
    u: &F,
    center: &DiscPoint<T>,
    radius: T,
    params: &Params<T>,
    q: T,
    quad: &CapQuadrature,
) -> Result<T>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    let n = center.dim();
    check_dim(n, params)?;
    let tau = Isometry::translation(center);
    let rel = T::c(quad.rel_tol);
    let end = radius.min(T::c(quad.t_max));
    let dirs = sphere_rule::<T>(n - 1, quad.angle_nodes);
    let parts: Vec<Result<T>> = dirs
        .par_iter()
        .map(|(dir, w)| {
            let mut bad = None;
            let val = ray(
                |t| {
                    let r = (t / T::c(2.0)).tanh();
                    let x: Vec<T> = dir.iter().map(|d| *d * r).collect();
                    match tau.apply_raw(&x) {
                        Ok(y) => u(&y),
                        Err(e) => {
                            bad.get_or_insert(e);
                            T::zero()
                        }
                    }
                },
                T::zero(),
                end,
                n - 1,
                q,
                rel,
            );
            if let Some(e) = bad {
                return Err(e);
            }
            Ok(val? * *w)
        })
        .collect();
    let mut acc = T::zero();
    for p in parts {
        acc += p?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cap_isometry, distance};
    use crate::quadrature::integrate;
    use crate::scalar::sphere_area;

    fn bump(t: f64, rho: f64) -> f64 {
        let x = t / rho;
        if x >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - x * x)).exp()
        }
    }

    fn quad() -> CapQuadrature {
        CapQuadrature { angle_nodes: 24, rel_tol: 1e-11, ..Default::default() }
    }

    #[test]
    fn sphere_rules_have_the_right_area() {
        for m in 0..5 {
            let total: f64 = sphere_rule::<f64>(m, 16).iter().map(|(_, w)| w).sum();
            let exact = sphere_area::<f64>(m + 1);
            assert!(((total - exact) / exact).abs() < 1e-12, "S^{m}: {total} vs {exact}");
        }
    }

    #[test]
    fn zero_function_has_zero_mass() {
        let params = Params::new(3, 3.0, 0.0).unwrap();
        let cap = Cap::from_direction(&[0.0, 1.0, 0.0], 1.5).unwrap();
        let m = cap_mass(&|_x: &[f64]| 0.0, &cap, &params, 4.0, &quad()).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn cap_exhausts_a_compact_support() {
        let params = Params::new(3, 3.0, 0.0).unwrap();
        let p = DiscPoint::new(vec![0.6, 0.2, -0.1]).unwrap();
        let rho = 0.8;
        let u = |x: &[f64]| {
            let d = distance(&DiscPoint::new(x.to_vec()).unwrap(), &p).unwrap();
            bump(d, rho)
        };
        let cap = Cap::from_direction(p.coords(), 3.0).unwrap();
        let total = 4.0 * std::f64::consts::PI
            * integrate(|t: f64| bump(t, rho).powi(4) * t.sinh().powi(2), 0.0, rho, 1e-13).value;
        let m = cap_mass(&u, &cap, &params, 4.0, &quad()).unwrap();
        assert!(((m - total) / total).abs() < 1e-6, "{m} vs {total}");
        let b = ball_mass(&u, &p, 1.0, &params, 4.0, &quad()).unwrap();
        assert!(((b - total) / total).abs() < 1e-6, "{b} vs {total}");
    }

    #[test]
    fn cap_mass_is_isometry_invariant() {
        let params = Params::new(3, 3.0, 0.0).unwrap();
        let p = DiscPoint::new(vec![0.3, 0.5, 0.1]).unwrap();
        let u = |x: &[f64]| {
            let d = distance(&DiscPoint::new(x.to_vec()).unwrap(), &p).unwrap();
            (-d * d).exp()
        };
        let c1 = Cap::from_direction(&[0.2, 1.0, 0.3], 1.2).unwrap();
        let c2 = Cap::from_direction(&[-1.0, 0.4, 0.5], 0.7).unwrap();
        let tau = cap_isometry(&c1, &c2).unwrap();
        let inv = tau.inverse();
        let moved = |y: &[f64]| u(&inv.apply_raw(y).unwrap());
        let a = cap_mass(&u, &c1, &params, 2.0, &quad()).unwrap();
        let b = cap_mass(&moved, &c2, &params, 2.0, &quad()).unwrap();
        assert!(a > 1e-3);
        assert!(((a - b) / a).abs() < 1e-5, "{a} vs {b}");
    }
}
