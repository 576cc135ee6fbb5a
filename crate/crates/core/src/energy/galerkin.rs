//! Piecewise linear radial Galerkin approximations of least-energy solutions.
//!
//! On `[a, b]` with a Dirichlet condition at `b` (and at `a > 0`) the discrete equation
//! `A u = F(u)`, with `A` the stiffness minus `lambda` times the mass matrix, is solved by
//! the Petviashvili iteration `u <- M(u)^{p/(p-1)} A^{-1} F(u)`, where
//! `M(u) = <A u, u> / <F(u), u>`. Sign-changing solutions with `k` nodes are approximated
//! by minimising the sum of piecewise ground-state energies over the node positions.

use crate::error::{Error, Result};
use crate::params::Params;
use crate::quadrature::GaussLegendre;
use crate::radial::{forcing, nonlinearity, RadialProfile};
use crate::scalar::{sphere_area, Real};
use serde::{Deserialize, Serialize};

/// Discretisation and iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GalerkinOptions {
    /// Outer radius with a Dirichlet condition.
    pub t_max: f64,
    /// Elements per piece.
    pub elements: usize,
    /// Exponential grading towards the left end of every piece, 0 for a uniform mesh.
    pub grading: f64,
    pub max_iter: usize,
    /// Relative change of the iterate at convergence.
    pub tol: f64,
    /// Combine meshes of `n` and `2n` elements by Richardson extrapolation.
    pub richardson: bool,
}

impl Default for GalerkinOptions {
    fn default() -> Self {
        GalerkinOptions { t_max: 25.0, elements: 2000, grading: 12.0, max_iter: 2000, tol: 1e-9, richardson: true }
    }
}

/// A discrete least-energy solution.
#[derive(Debug, Clone, Serialize)]
pub struct GalerkinResult<T> {
    #[serde(rename = "I_lambda")]
    pub energy: T,
    /// Rayleigh quotient `int (|grad u|^2 - lambda u^2) / (int |u|^{p+1})^{2/(p+1)}`.
    pub quotient: T,
    pub nonlinear_term: T,
    /// Interior nodes of the minimiser, empty for the ground state.
    pub nodes: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub profile: RadialProfile<T>,
}

struct Piece<T> {
    t: Vec<T>,
    u: Vec<T>,
    /// `<A u, u>` and `int |u|^{p+1}`, both without the sphere factor.
    quad: T,
    nonlin: T,
    iterations: usize,
    converged: bool,
}

fn mesh<T: Real>(a: T, b: T, n: usize, beta: T) -> Vec<T> {
    (0..=n)
        .map(|i| {
            let x = T::n(i) / T::n(n);
            if beta <= T::zero() {
                a + (b - a) * x
            } else {
                a + (b - a) * (beta * x).exp_m1() / beta.exp_m1()
            }
        })
        .collect()
}

/// Element data: quadrature points as `(xi, weight * sinh(t)^{N-1})`.
struct Elements<T> {
    t: Vec<T>,
    pts: Vec<Vec<(T, T)>>,
}

impl<T: Real> Elements<T> {
    fn new(t: Vec<T>, dim: usize) -> Self {
        let rule = GaussLegendre::<T>::new(4);
        let pts = t
            .windows(2)
            .map(|w| {
                let h = w[1] - w[0];
                rule.nodes()
                    .iter()
                    .zip(rule.weights())
                    .map(|(x, wx)| {
                        let xi = (*x + T::one()) / T::c(2.0);
                        let s = (w[0] + h * xi).sinh();
                        (xi, *wx * h / T::c(2.0) * s.powi(dim as i32 - 1))
                    })
                    .collect()
            })
            .collect();
        Elements { t, pts }
    }

    /// Tridiagonal `(diag, upper)` of stiffness minus `lambda` times mass.
    fn operator(&self, lambda: T) -> (Vec<T>, Vec<T>) {
        let n = self.t.len();
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n - 1];
        for (i, pts) in self.pts.iter().enumerate() {
            let h = self.t[i + 1] - self.t[i];
            let (mut w, mut ll, mut lr, mut rr) = (T::zero(), T::zero(), T::zero(), T::zero());
            for (xi, wq) in pts {
                let (l, r) = (T::one() - *xi, *xi);
                w += *wq;
                ll += *wq * l * l;
                lr += *wq * l * r;
                rr += *wq * r * r;
            }
            let k = w / (h * h);
            d[i] += k - lambda * ll;
            d[i + 1] += k - lambda * rr;
            e[i] += -k - lambda * lr;
        }
        (d, e)
    }

    /// Load vector of `|u|^{p-1} u` and `int |u|^{p+1}`.
    fn load(&self, u: &[T], p: T) -> (Vec<T>, T) {
        let mut f = vec![T::zero(); u.len()];
        let mut n = T::zero();
        for (i, pts) in self.pts.iter().enumerate() {
            for (xi, wq) in pts {
                let v = u[i] * (T::one() - *xi) + u[i + 1] * *xi;
                let g = nonlinearity(v, p);
                f[i] += *wq * g * (T::one() - *xi);
                f[i + 1] += *wq * g * *xi;
                n += *wq * g * v;
            }
        }
        (f, n)
    }

    /// Tridiagonal of `int p |u|^{p-1} phi_i phi_j`.
    fn jacobian(&self, u: &[T], p: T) -> (Vec<T>, Vec<T>) {
        let mut d = vec![T::zero(); u.len()];
        let mut e = vec![T::zero(); u.len() - 1];
        for (i, pts) in self.pts.iter().enumerate() {
            for (xi, wq) in pts {
                let (l, r) = (T::one() - *xi, *xi);
                let v = u[i] * l + u[i + 1] * r;
                let g = if v == T::zero() { T::zero() } else { p * v.abs().powf(p - T::one()) * *wq };
                d[i] += g * l * l;
                d[i + 1] += g * r * r;
                e[i] += g * l * r;
            }
        }
        (d, e)
    }
}

fn apply<T: Real>(d: &[T], e: &[T], u: &[T]) -> Vec<T> {
    (0..d.len())
        .map(|i| {
            let mut v = d[i] * u[i];
            if i > 0 {
                v += e[i - 1] * u[i - 1];
            }
            if i + 1 < d.len() {
                v += e[i] * u[i + 1];
            }
            v
        })
        .collect()
}

/// Solves the symmetric tridiagonal system restricted to `lo..=hi`. Without `definite`
/// only vanishing pivots are refused.
fn solve<T: Real>(d: &[T], e: &[T], f: &[T], lo: usize, hi: usize, definite: bool) -> Result<Vec<T>> {
    let m = hi + 1 - lo;
    let mut c = vec![T::zero(); m];
    let mut y = vec![T::zero(); m];
    let bad = |piv: T| if definite { piv <= T::zero() } else { piv == T::zero() || !piv.is_finite() };
    let mut piv = d[lo];
    if bad(piv) {
        return Err(Error::Numerical("Galerkin operator is not positive definite".into()));
    }
    y[0] = f[lo] / piv;
    for j in 1..m {
        let off = e[lo + j - 1];
        c[j - 1] = off / piv;
        piv = d[lo + j] - off * c[j - 1];
        if bad(piv) {
            return Err(Error::Numerical("Galerkin operator is not positive definite".into()));
        }
        y[j] = (f[lo + j] - off * y[j - 1]) / piv;
    }
    for j in (0..m - 1).rev() {
        let next = y[j + 1];
        y[j] -= c[j] * next;
    }
    let mut out = vec![T::zero(); d.len()];
    out[lo..=hi].copy_from_slice(&y);
    Ok(out)
}

/// Golden-section minimiser of a unimodal `f` on `[a, b]`.
fn golden<T: Real, F: FnMut(T) -> T>(mut f: F, mut a: T, mut b: T, tol: T) -> T {
    let phi = (T::c(5.0).sqrt() - T::one()) / T::c(2.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    (a + b) / T::c(2.0)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Positive least-energy solution on `[a, b]`.
fn piece<T: Real>(a: T, b: T, params: &Params<T>, opts: &GalerkinOptions, n: usize) -> Result<Piece<T>> {
    let el = Elements::new(mesh(a, b, n, T::c(opts.grading)), params.dim);
    let (d, e) = el.operator(params.lambda);
    let lo = if a > T::zero() { 1 } else { 0 };
    let hi = n - 1;
    let p = params.p;
    // Start from a conformal bubble with the decay rate c_+, at the scale minimising the
    // discrete quotient.
    let power = (T::n(params.dim) - T::c(2.0)).max(T::zero()) / T::c(2.0);
    let rate = params.decay_rate();
    let trial = |delta: T| -> Vec<T> {
        el.t
            .iter()
            .map(|t| {
                let r = ((*t - a) / T::c(2.0)).tanh();
                let edge = if lo == 1 { r / (delta + r) } else { T::one() };
                let c = T::one() - r * r;
                edge * c.powf(rate) * (delta * delta + r * r).powf(-power) * (b - *t) / (b - a)
            })
            .collect()
    };
    let quotient = |u: &[T]| {
        let (_, nl) = el.load(u, p);
        dot(&apply(&d, &e, u), u) / nl.powf(T::c(2.0) / (p + T::one()))
    };
    let delta = golden(|x| quotient(&trial(x.exp())), T::c(-16.0), T::c(1.0), T::c(1e-3)).exp();
    let mut u = trial(delta);
    let mut converged = false;
    let mut iterations = 0;
    let tol = T::c(opts.tol);
    let floor = T::c(1e-6);
    let newton = |mut u: Vec<T>| -> Option<(Vec<T>, usize)> {
        let mut last = T::infinity();
        for it in 1..=50 {
            let (f, _) = el.load(&u, p);
            let au = apply(&d, &e, &u);
            let r: Vec<T> = f.iter().zip(&au).map(|(a, b)| *a - *b).collect();
            let (jd, je) = el.jacobian(&u, p);
            let nd: Vec<T> = d.iter().zip(&jd).map(|(a, b)| *a - *b).collect();
            let ne: Vec<T> = e.iter().zip(&je).map(|(a, b)| *a - *b).collect();
            let delta = solve(&nd, &ne, &r, lo, hi, false).ok()?;
            let v: Vec<T> = u.iter().zip(&delta).map(|(a, b)| *a + *b).collect();
            let change = (dot(&apply(&d, &e, &delta), &delta) / dot(&apply(&d, &e, &v), &v)).sqrt();
            if !change.is_finite() || change > T::c(0.5) {
                return None;
            }
            u = v;
            // Below `floor` a step that fails to halve the previous one is rounding noise.
            if change < tol || (change < floor && change > last / T::c(2.0)) {
                return Some((u, it));
            }
            if it > 3 && change > last {
                return None;
            }
            last = change;
        }
        None
    };
    // Preconditioned conjugate gradients on the quotient until the residual is small, then
    // Newton on `A u = F(u)` from the Nehari rescaling.
    let expo = T::one() / (p + T::one());
    let mut gate = T::c(1e-2);
    let mut dir: Vec<T> = Vec::new();
    let mut prev: Option<(Vec<T>, Vec<T>)> = None;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let (_, nl) = el.load(&u, p);
        let norm = nl.powf(-expo);
        u.iter_mut().for_each(|x| *x *= norm);
        let (f, _) = el.load(&u, p);
        let au = apply(&d, &e, &u);
        let a_u = dot(&au, &u);
        let grad: Vec<T> = au.iter().zip(&f).map(|(x, y)| *x - a_u * *y).collect();
        let g = solve(&d, &e, &grad, lo, hi, true)?;
        let res = (dot(&grad, &g).max(T::zero()) / a_u).sqrt();
        if res < gate {
            let c = a_u.powf(T::one() / (p - T::one()));
            if let Some((v, k)) = newton(u.iter().map(|x| *x * c).collect()) {
                u = v;
                iterations += k;
                converged = true;
                break;
            }
            gate = gate / T::c(10.0);
        }
        let beta = match &prev {
            Some((pg, pgrad)) => {
                let num = grad.iter().zip(&g).zip(pg).map(|((r, x), y)| *r * (*x - *y)).sum::<T>();
                (num / dot(pgrad, pg)).max(T::zero())
            }
            None => T::zero(),
        };
        dir = if dir.is_empty() {
            g.iter().map(|x| -*x).collect()
        } else {
            g.iter().zip(&dir).map(|(x, y)| -*x + beta * *y).collect()
        };
        if dot(&grad, &dir) >= T::zero() {
            dir = g.iter().map(|x| -*x).collect();
        }
        let along = |alpha: T| -> Vec<T> { u.iter().zip(&dir).map(|(x, y)| *x + alpha * *y).collect() };
        let phi = |alpha: T| quotient(&along(alpha));
        let mut hi_a = T::one();
        let (mut f_hi, mut f_2hi) = (phi(hi_a), phi(T::c(2.0) * hi_a));
        let mut guard = 0;
        while f_2hi < f_hi && guard < 40 {
            hi_a = hi_a * T::c(2.0);
            f_hi = f_2hi;
            f_2hi = phi(T::c(2.0) * hi_a);
            guard += 1;
        }
        let step = golden(phi, T::zero(), T::c(2.0) * hi_a, hi_a * T::c(1e-6));
        u = along(step);
        prev = Some((g, grad));
    }
    if !converged {
        let (_, nl) = el.load(&u, p);
        let c = (dot(&apply(&d, &e, &u), &u) / nl).powf(T::one() / (p - T::one()));
        u.iter_mut().for_each(|x| *x *= c);
    }
    let quad = dot(&apply(&d, &e, &u), &u);
    let (_, nonlin) = el.load(&u, p);
    Ok(Piece { t: el.t, u, quad, nonlin, iterations, converged })
}

/// Energy terms of a nodal configuration with the given interior nodes.
fn assemble<T: Real>(nodes: &[T], params: &Params<T>, opts: &GalerkinOptions, n: usize) -> Result<Vec<Piece<T>>> {
    let mut ends = vec![T::zero()];
    ends.extend_from_slice(nodes);
    ends.push(T::c(opts.t_max));
    ends.windows(2).map(|w| piece(w[0], w[1], params, opts, n)).collect()
}

fn totals<T: Real>(pieces: &[Piece<T>], params: &Params<T>) -> (T, T, T) {
    let w = sphere_area::<T>(params.dim);
    let q = pieces.iter().map(|p| p.quad).sum::<T>() * w;
    let nl = pieces.iter().map(|p| p.nonlin).sum::<T>() * w;
    let e = q / T::c(2.0) - nl / (params.p + T::one());
    (e, q, nl)
}

fn energy_of<T: Real>(nodes: &[T], params: &Params<T>, opts: &GalerkinOptions, n: usize) -> Result<T> {
    Ok(totals(&assemble(nodes, params, opts, n)?, params).0)
}

fn result<T: Real>(nodes: Vec<T>, params: &Params<T>, opts: &GalerkinOptions) -> Result<GalerkinResult<T>> {
    let n = opts.elements.max(4);
    let pieces = assemble(&nodes, params, opts, n)?;
    let (mut energy, mut quad, mut nonlin) = totals(&pieces, params);
    let mut converged = pieces.iter().all(|p| p.converged);
    let mut iterations = pieces.iter().map(|p| p.iterations).max().unwrap_or(0);
    if opts.richardson {
        let fine = assemble(&nodes, params, opts, 2 * n)?;
        let (e2, q2, n2) = totals(&fine, params);
        let x = |c: T, f: T| (T::c(4.0) * f - c) / T::c(3.0);
        energy = x(energy, e2);
        quad = x(quad, q2);
        nonlin = x(nonlin, n2);
        converged &= fine.iter().all(|p| p.converged);
        iterations = iterations.max(fine.iter().map(|p| p.iterations).max().unwrap_or(0));
    }
    let quotient = quad / nonlin.powf(T::c(2.0) / (params.p + T::one()));
    Ok(GalerkinResult { energy, quotient, nonlinear_term: nonlin, nodes, iterations, converged, profile: profile(&pieces, params) })
}

/// Joins the pieces with alternating signs; derivatives from the discrete slopes.
fn profile<T: Real>(pieces: &[Piece<T>], params: &Params<T>) -> RadialProfile<T> {
    let m = T::n(params.dim - 1);
    let (mut t, mut u, mut du, mut ddu) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (j, pc) in pieces.iter().enumerate() {
        let sign = if j % 2 == 0 { T::one() } else { -T::one() };
        let k = pc.t.len();
        for i in 0..k {
            let slope = |a: usize, b: usize| (pc.u[b] - pc.u[a]) / (pc.t[b] - pc.t[a]);
            let d = if i == 0 && pc.t[0] == T::zero() {
                T::zero()
            } else if i == 0 {
                slope(0, 1)
            } else if i + 1 == k {
                slope(k - 2, k - 1)
            } else {
                slope(i - 1, i + 1)
            };
            let v = sign * pc.u[i];
            let dd = if pc.t[i] == T::zero() {
                forcing(v, params) / T::n(params.dim)
            } else {
                forcing(v, params) - m / pc.t[i].tanh() * sign * d
            };
            t.push(pc.t[i]);
            u.push(v);
            du.push(sign * d);
            ddu.push(dd);
        }
    }
    let s = u[0];
    RadialProfile::new(params.dim, s, t, u, du, ddu, None, None)
}

/// Discrete positive ground state on `[0, t_max]`.
pub fn galerkin_ground_state<T: Real>(params: &Params<T>, opts: &GalerkinOptions) -> Result<GalerkinResult<T>> {
    galerkin_nodal(0, params, opts)
}

/// Least sum of piecewise ground-state energies over configurations with `k` interior nodes.
///
/// Node positions are optimised by cyclic golden-section searches in `ln t`.
pub fn galerkin_nodal<T: Real>(k: usize, params: &Params<T>, opts: &GalerkinOptions) -> Result<GalerkinResult<T>> {
    params.validate()?;
    if !(params.lambda < params.spectral_bottom()) {
        return Err(Error::InvalidParams("the quadratic form needs lambda below the spectral bottom".into()));
    }
    if k == 0 {
        return result(Vec::new(), params, opts);
    }
    let n = (opts.elements / 2).max(200);
    let t_max = T::c(opts.t_max);
    let floor = T::c(1e-4);
    let mut nodes: Vec<T> = (1..=k).map(|j| T::n(j) * T::c(2.0) / T::n(k + 1)).collect();
    for _sweep in 0..8 {
        let before = nodes.clone();
        for j in 0..k {
            let lo = if j == 0 { floor } else { nodes[j - 1] * T::c(1.0001) };
            let hi = if j + 1 == k { t_max * T::c(0.9) } else { nodes[j + 1] * T::c(0.9999) };
            let mut failure = None;
            let mut trial = nodes.clone();
            let best = golden(
                |x| {
                    trial[j] = x.exp();
                    energy_of(&trial, params, opts, n).unwrap_or_else(|e| {
                        failure.get_or_insert(e);
                        T::infinity()
                    })
                },
                lo.ln(),
                hi.ln(),
                T::c(1e-5),
            );
            if let Some(e) = failure {
                return Err(e);
            }
            nodes[j] = best.exp();
        }
        let moved = nodes.iter().zip(&before).fold(T::zero(), |m, (x, y)| m.max((*x / *y).ln().abs()));
        if moved < T::c(1e-5) {
            break;
        }
    }
    result(nodes, params, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solver_inverts_operator() {
        let d: Vec<f64> = vec![4.0, 5.0, 6.0, 7.0];
        let e = vec![1.0, -2.0, 0.5];
        let x: Vec<f64> = vec![0.0, 1.0, -2.0, 3.0];
        let f = apply(&d, &e, &x);
        let y = solve(&d, &e, &f, 1, 3, true).unwrap();
        for (a, b) in x.iter().zip(&y).skip(1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_ground_state_is_on_the_discrete_nehari_manifold() {
        let params = Params::new(3, 3.0, 0.0).unwrap();
        let opts = GalerkinOptions { elements: 400, richardson: false, ..Default::default() };
        let r: GalerkinResult<f64> = galerkin_ground_state(&params, &opts).unwrap();
        assert!(r.converged);
        let w = sphere_area::<f64>(3);
        let q = r.quotient * r.nonlinear_term.powf(0.5);
        assert!(((q - r.nonlinear_term) / q).abs() < 1e-8);
        assert!((r.energy - r.nonlinear_term / 4.0).abs() < 1e-6 * r.energy);
        assert!(r.profile.s() > 0.0 && w > 0.0);
    }
}
