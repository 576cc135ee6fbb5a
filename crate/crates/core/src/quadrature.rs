//! Gauss-Legendre rules and adaptive panel integration.

use crate::scalar::Real;

/// An `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = T::c(-x);
            nodes[n - 1 - i] = T::c(x);
            weights[i] = T::c(w);
            weights[n - 1 - i] = T::c(w);
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T) -> T {
        let half = (b - a) / T::c(2.0);
        let mid = (a + b) / T::c(2.0);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += *w * f(mid + half * *x);
        }
        acc * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub converged: bool,
    pub evaluations: usize,
}

/// Options for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_depth: usize,
    pub max_panels: usize,
}

impl<T: Real> Default for AdaptiveOptions<T> {
    fn default() -> Self {
        AdaptiveOptions { rel_tol: T::c(1e-10), abs_tol: T::c(1e-300), max_depth: 40, max_panels: 200_000 }
    }
}

impl<T: Real> AdaptiveOptions<T> {
    pub fn rel(rel_tol: T) -> Self {
        AdaptiveOptions { rel_tol, ..Default::default() }
    }
}

/// Fixed rule on every panel between consecutive breakpoints, with the error estimated by
/// comparing against the same rule on bisected panels.
pub fn panels<T: Real, F: FnMut(T) -> T>(mut f: F, breakpoints: &[T], rule: &GaussLegendre<T>) -> QuadResult<T> {
    let mut value = T::zero();
    let mut error = T::zero();
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = (a + b) / T::c(2.0);
        let coarse = rule.integrate(&mut f, a, b);
        let fine = rule.integrate(&mut f, a, m) + rule.integrate(&mut f, m, b);
        value += fine;
        error += (fine - coarse).abs();
    }
    QuadResult { value, error, converged: true, evaluations: 3 * rule.len() * breakpoints.len() }
}

/// Globally adaptive Gauss-Legendre integration over the given initial panels.
///
/// A panel is accepted once the rule and its bisected version agree to within the
/// relative tolerance, measured against the panel value or the panel's share of the
/// running total.
pub fn adaptive<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    breakpoints: &[T],
    rule: &GaussLegendre<T>,
    opts: AdaptiveOptions<T>,
) -> QuadResult<T> {
    let total_len = match (breakpoints.first(), breakpoints.last()) {
        (Some(a), Some(b)) if *b > *a => *b - *a,
        _ => return QuadResult { value: T::zero(), error: T::zero(), converged: true, evaluations: 0 },
    };
    let mut evaluations = 0usize;
    let mut stack: Vec<(T, T, T, usize)> = Vec::new();
    let mut scale = T::zero();
    for w in breakpoints.windows(2).rev() {
        if w[1] > w[0] {
            let v = rule.integrate(&mut f, w[0], w[1]);
            evaluations += rule.len();
            scale += v.abs();
            stack.push((w[0], w[1], v, 0));
        }
    }
    let mut value = T::zero();
    let mut error = T::zero();
    let mut converged = true;
    let mut panels_done = 0usize;
    while let Some((a, b, coarse, depth)) = stack.pop() {
        let m = (a + b) / T::c(2.0);
        let left = rule.integrate(&mut f, a, m);
        let right = rule.integrate(&mut f, m, b);
        evaluations += 2 * rule.len();
        let fine = left + right;
        let err = (fine - coarse).abs();
        scale = scale.max(fine.abs());
        let share = scale * (b - a) / total_len;
        let tol = opts.rel_tol * fine.abs().max(share).max(T::zero()) + opts.abs_tol * (b - a) / total_len;
        panels_done += 1;
        if err <= tol || depth >= opts.max_depth || panels_done + stack.len() >= opts.max_panels {
            // A kink can exhaust the depth while its error is already below roundoff of the total.
            if err > tol && err > T::epsilon() * scale {
                converged = false;
            }
            value += fine;
            error += err;
        } else {
            stack.push((m, b, right, depth + 1));
            stack.push((a, m, left, depth + 1));
        }
    }
    QuadResult { value, error, converged, evaluations }
}

/// Adaptive integration of a smooth function over `[a, b]`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(f: F, a: T, b: T, rel_tol: T) -> QuadResult<T> {
    let rule = GaussLegendre::new(10);
    adaptive(f, &[a, b], &rule, AdaptiveOptions::rel(rel_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in 1..12 {
            let rule = GaussLegendre::<f64>::new(n);
            let wsum: f64 = rule.weights().iter().sum();
            assert!((wsum - 2.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let v = rule.integrate(|x| x.powi(deg as i32) + x.powi((deg - deg % 2) as i32), 0.0, 1.0);
            let exact = 1.0 / (deg + 1) as f64 + 1.0 / (deg - deg % 2 + 1) as f64;
            assert!((v - exact).abs() < 1e-13, "n = {n}: {v} vs {exact}");
        }
    }

    #[test]
    fn adaptive_resolves_peaked_integrands() {
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12);
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!(r.converged);
        assert!(((r.value - exact) / exact).abs() < 1e-11);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = integrate(|x: f64| x.powf(-0.3), 0.0, 1.0, 1e-10);
        assert!((r.value - 1.0 / 0.7).abs() < 1e-8);
    }

    #[test]
    fn panels_report_error_estimates() {
        let rule = GaussLegendre::new(4);
        let bp: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let r = panels(|x: f64| x.exp(), &bp, &rule);
        assert!((r.value - (3.0f64.exp() - 1.0)).abs() < 1e-12);
        assert!(r.error < 1e-8);
    }

    #[test]
    fn single_precision_rule() {
        let rule = GaussLegendre::<f32>::new(5);
        let v = rule.integrate(|x| x.sin(), 0.0, std::f32::consts::PI);
        assert!((v - 2.0).abs() < 1e-5);
    }
}
