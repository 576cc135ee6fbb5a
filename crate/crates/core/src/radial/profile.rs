use crate::ode::hermite5;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Exponential continuation `u(t) = amplitude * exp(-rate (t - start))` for `t >= start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTail<T> {
    pub start: T,
    pub amplitude: T,
    pub rate: T,
}

impl<T: Real> ExpTail<T> {
    pub fn value(&self, t: T) -> (T, T) {
        let v = self.amplitude * (-(self.rate) * (t - self.start)).exp();
        (v, -self.rate * v)
    }
}

/// The conformal image of the Euclidean bubble, `B(t) = sign C (delta / (2 D(t)))^k` with
/// `D = delta^2 cosh^2(t/2) + sinh^2(t/2)`; `ln_c = ln C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub(crate) struct Core<T> {
    pub sign: T,
    pub ln_c: T,
    pub delta: T,
    pub k: T,
}

impl<T: Real> Core<T> {
    /// The exact solution for `lambda = N(N-2)/4` at the critical exponent with `B(0) = s`.
    pub fn new(s: T, dim: usize) -> Self {
        let n = T::n(dim);
        let k = (n - T::c(2.0)) / T::c(2.0);
        let ln_c = k / T::c(2.0) * (n * (n - T::c(2.0))).ln();
        // C (2 delta)^{-k} = |s|
        let delta = ((ln_c - s.abs().ln()) / k).exp() / T::c(2.0);
        Core { sign: s.signum(), ln_c, delta, k }
    }

    pub fn eval(&self, t: T) -> (T, T) {
        let (b, db, _) = self.eval2(t);
        (b, db)
    }

    pub fn eval2(&self, t: T) -> (T, T, T) {
        let (sh, ch) = ((t / T::c(2.0)).sinh(), (t / T::c(2.0)).cosh());
        let d2 = self.delta * self.delta;
        let d = d2 * ch * ch + sh * sh;
        let b = self.sign * (self.ln_c + self.k * (self.delta.ln() - T::LN_2() - d.ln())).exp();
        let r1 = (d2 + T::one()) * t.sinh() / T::c(2.0) / d;
        let r2 = (d2 + T::one()) * t.cosh() / T::c(2.0) / d;
        let k = self.k;
        (b, -k * b * r1, b * ((k + k * k) * r1 * r1 - k * r2))
    }

    pub fn scaled(&self, c: T) -> Self {
        Core { sign: self.sign * c.signum(), ln_c: self.ln_c + c.abs().ln(), ..*self }
    }
}

/// Deviation `w = u - B` from an analytic bubble, with its own interpolation data.
///
/// Intervals where `B` dwarfs `u` interpolate `u` directly, since `B + w` cancels there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Split<T> {
    core: Core<T>,
    w: Vec<T>,
    dw: Vec<T>,
    ddw: Vec<T>,
    active: Vec<bool>,
}

impl<T: Real> Split<T> {
    fn new(core: Core<T>, t: &[T], u: &[T], du: &[T], w: Vec<T>, dw: Vec<T>, ddw: Vec<T>) -> Self {
        let ok: Vec<bool> = (0..t.len())
            .map(|i| core.eval(t[i]).0.abs() <= T::c(2.0) * (u[i].abs() + du[i].abs()))
            .collect();
        let active = ok.windows(2).map(|p| p[0] && p[1]).collect();
        Split { core, w, dw, ddw, active }
    }
}

/// A radial function `u(t)` of the geodesic radius `t`.
pub trait RadialFunction<T: Real>: Sync {
    /// Value and `t`-derivative.
    fn value(&self, t: T) -> (T, T);

    /// Increasing panel boundaries starting at 0. The function is either supported in the
    /// last panel's closure or continued by [`RadialFunction::tail`].
    fn breakpoints(&self) -> Vec<T>;

    fn tail(&self) -> Option<ExpTail<T>> {
        None
    }
}

/// A numerically computed radial profile sampled on an adaptive grid.
///
/// Between nodes the profile is the quintic Hermite interpolant of `(u, u', u'')`. A node
/// may appear twice where two integration segments meet; each copy belongs to its own
/// segment. Past the last node the profile follows its exponential tail, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile<T> {
    dim: usize,
    s: T,
    t: Vec<T>,
    u: Vec<T>,
    du: Vec<T>,
    ddu: Vec<T>,
    tail: Option<ExpTail<T>>,
    matched_at: Option<T>,
    split: Option<Split<T>>,
}

impl<T: Real> RadialProfile<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        s: T,
        t: Vec<T>,
        u: Vec<T>,
        du: Vec<T>,
        ddu: Vec<T>,
        tail: Option<ExpTail<T>>,
        matched_at: Option<T>,
    ) -> Self {
        assert!(t.len() >= 2 && t.len() == u.len() && t.len() == du.len() && t.len() == ddu.len());
        RadialProfile { dim, s, t, u, du, ddu, tail, matched_at, split: None }
    }

    /// Interpolates `u = B + w` with `w` taken from the given node data instead of `u` itself.
    pub(crate) fn with_core(mut self, core: Core<T>, w: Vec<T>, dw: Vec<T>, ddw: Vec<T>) -> Self {
        assert!(w.len() == self.t.len() && dw.len() == w.len() && ddw.len() == w.len());
        self.split = Some(Split::new(core, &self.t, &self.u, &self.du, w, dw, ddw));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at the origin.
    pub fn s(&self) -> T {
        self.s
    }

    pub fn grid(&self) -> &[T] {
        &self.t
    }

    pub fn values(&self) -> &[T] {
        &self.u
    }

    pub fn derivatives(&self) -> &[T] {
        &self.du
    }

    pub fn second_derivatives(&self) -> &[T] {
        &self.ddu
    }

    pub fn exp_tail(&self) -> Option<ExpTail<T>> {
        self.tail
    }

    /// Where the forward and backward integration segments were joined, if they were.
    pub fn matched_at(&self) -> Option<T> {
        self.matched_at
    }

    pub fn end(&self) -> T {
        *self.t.last().expect("non-empty grid")
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn interval(&self, t: T) -> usize {
        let n = self.t.len();
        let mut i = self.t.partition_point(|x| *x <= t).saturating_sub(1);
        if i >= n - 1 {
            i = n - 2;
        }
        while i > 0 && self.t[i + 1] <= self.t[i] {
            i -= 1;
        }
        i
    }

    /// Value, first and second derivative at `t`.
    pub fn eval2(&self, t: T) -> (T, T, T) {
        if t > self.end() {
            return match &self.tail {
                Some(tail) => {
                    let (v, d) = tail.value(t);
                    (v, d, -tail.rate * d)
                }
                None => (T::zero(), T::zero(), T::zero()),
            };
        }
        let i = self.interval(t.max(T::zero()));
        self.eval_in(i, t)
    }

    pub fn eval(&self, t: T) -> T {
        self.eval2(t).0
    }

    pub fn max_abs(&self) -> T {
        self.u.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Number of sign changes along the grid.
    pub fn node_count(&self) -> usize {
        sign_changes(&self.u)
    }

    /// Zeros of the interpolant, located by bisection inside each sign-change interval.
    pub fn zeros(&self) -> Vec<T> {
        let mut out = Vec::new();
        for i in 0..self.t.len() - 1 {
            let (a, b) = (self.u[i], self.u[i + 1]);
            if self.t[i + 1] <= self.t[i] || !(a * b < T::zero()) {
                continue;
            }
            let (mut lo, mut hi) = (self.t[i], self.t[i + 1]);
            let sa = a.signum();
            for _ in 0..200 {
                let mid = (lo + hi) / T::c(2.0);
                if mid <= lo || mid >= hi {
                    break;
                }
                let v = self.eval_in(i, mid).0;
                if v.signum() == sa {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push((lo + hi) / T::c(2.0));
        }
        out
    }

    /// `c * u`.
    pub fn scaled(&self, c: T) -> Self {
        let map = |v: &Vec<T>| v.iter().map(|x| *x * c).collect::<Vec<T>>();
        RadialProfile {
            dim: self.dim,
            s: self.s * c,
            t: self.t.clone(),
            u: map(&self.u),
            du: map(&self.du),
            ddu: map(&self.ddu),
            tail: self.tail.map(|tl| ExpTail { amplitude: tl.amplitude * c, ..tl }),
            matched_at: self.matched_at,
            split: self.split.as_ref().map(|sp| Split {
                core: sp.core.scaled(c),
                w: map(&sp.w),
                dw: map(&sp.dw),
                ddw: map(&sp.ddw),
                active: sp.active.clone(),
            }),
        }
    }

    /// Interpolant of interval `i` evaluated at `t`.
    fn eval_in(&self, i: usize, t: T) -> (T, T, T) {
        let j = i + 1;
        match &self.split {
            Some(sp) if sp.active[i] => {
                let (w, dw, ddw) =
                    hermite5(self.t[i], self.t[j], sp.w[i], sp.dw[i], sp.ddw[i], sp.w[j], sp.dw[j], sp.ddw[j], t);
                let (b, db, ddb) = sp.core.eval2(t);
                (b + w, db + dw, ddb + ddw)
            }
            _ => hermite5(self.t[i], self.t[j], self.u[i], self.du[i], self.ddu[i], self.u[j], self.du[j], self.ddu[j], t),
        }
    }

    /// The same profile resampled with `factor` sub-intervals per grid interval.
    pub fn refined(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let n = self.t.len();
        let mut idx: Vec<(usize, T)> = Vec::new();
        for i in 0..n - 1 {
            idx.push((i, self.t[i]));
            if self.t[i + 1] <= self.t[i] {
                continue;
            }
            for k in 1..factor {
                idx.push((i, self.t[i] + (self.t[i + 1] - self.t[i]) * T::n(k) / T::n(factor)));
            }
        }
        idx.push((n - 1, self.t[n - 1]));
        let node = |i: usize, x: T, a: &[T], d: &[T], s: &[T]| {
            if i + 1 >= n || x == self.t[i] {
                (a[i], d[i], s[i])
            } else {
                hermite5(self.t[i], self.t[i + 1], a[i], d[i], s[i], a[i + 1], d[i + 1], s[i + 1], x)
            }
        };
        let unzip = |v: Vec<(T, T, T)>| {
            let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
            for (x, y, z) in v {
                a.push(x);
                b.push(y);
                c.push(z);
            }
            (a, b, c)
        };
        let full: Vec<(T, T, T)> = idx
            .iter()
            .map(|&(i, x)| if i + 1 >= n || x == self.t[i] { (self.u[i], self.du[i], self.ddu[i]) } else { self.eval_in(i, x) })
            .collect();
        let (u, du, ddu) = unzip(full);
        let t: Vec<T> = idx.iter().map(|p| p.1).collect();
        let split = self.split.as_ref().map(|sp| {
            let (w, dw, ddw) = unzip(idx.iter().map(|&(i, x)| node(i, x, &sp.w, &sp.dw, &sp.ddw)).collect());
            Split::new(sp.core, &t, &u, &du, w, dw, ddw)
        });
        RadialProfile { dim: self.dim, s: self.s, t, u, du, ddu, tail: self.tail, matched_at: self.matched_at, split }
    }

    /// Distinct grid points, suitable as quadrature panel boundaries.
    pub fn panel_boundaries(&self) -> Vec<T> {
        let mut out: Vec<T> = Vec::with_capacity(self.t.len());
        for &x in &self.t {
            if out.last().map_or(true, |l| x > *l) {
                out.push(x);
            }
        }
        out
    }
}

pub(crate) fn sign_changes<T: Real>(u: &[T]) -> usize {
    let mut count = 0;
    let mut last = T::zero();
    for &v in u {
        if v != T::zero() {
            if last != T::zero() && v.signum() != last.signum() {
                count += 1;
            }
            last = v;
        }
    }
    count
}

impl<T: Real> RadialFunction<T> for RadialProfile<T> {
    fn value(&self, t: T) -> (T, T) {
        let (v, d, _) = self.eval2(t);
        (v, d)
    }

    fn breakpoints(&self) -> Vec<T> {
        self.panel_boundaries()
    }

    fn tail(&self) -> Option<ExpTail<T>> {
        self.tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RadialProfile<f64> {
        let t: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let u = t.iter().map(|x| (-x).exp() * x.cos()).collect();
        let du = t.iter().map(|x| -(-x).exp() * (x.cos() + x.sin())).collect();
        let ddu = t.iter().map(|x| 2.0 * (-x).exp() * x.sin()).collect();
        RadialProfile::new(3, 1.0, t, u, du, ddu, None, None)
    }

    #[test]
    fn interpolation_and_zeros() {
        let p = sample();
        let x: f64 = 1.1;
        assert!((p.eval(x) - (-x).exp() * x.cos()).abs() < 1e-7);
        let z = p.zeros();
        assert_eq!(z.len(), p.node_count());
        assert!((z[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-7);
    }

    #[test]
    fn duplicate_nodes_select_their_own_segment() {
        let t: Vec<f64> = vec![0.0, 1.0, 1.0, 2.0];
        let u = vec![0.0, 1.0, 1.0, 2.0];
        let du = vec![1.0, 1.0, 1.0, 1.0];
        let ddu = vec![0.0; 4];
        let p = RadialProfile::new(3, 0.0, t, u, du, ddu, None, None);
        assert!((p.eval(0.5) - 0.5).abs() < 1e-15);
        assert!((p.eval(1.5) - 1.5).abs() < 1e-15);
        assert!((p.eval(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(p.panel_boundaries(), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn scaling_and_refinement() {
        let p = sample();
        let q = p.scaled(-2.0);
        assert!((q.eval(0.7) + 2.0 * p.eval(0.7)).abs() < 1e-14);
        let r = p.refined(3);
        assert_eq!(r.len(), (p.len() - 1) * 3 + 1);
        assert!((r.eval(2.3) - p.eval(2.3)).abs() < 1e-9);
    }

    #[test]
    fn core_solves_conformal_equation() {
        for (n, s) in [(3usize, 2.0), (5, -40.0), (7, 3.0e20)] {
            let c = Core::<f64>::new(s, n);
            let p = (n as f64 + 2.0) / (n as f64 - 2.0);
            let lc = (n * (n - 2)) as f64 / 4.0;
            assert!((c.eval(0.0).0 - s).abs() <= 1e-13 * s.abs());
            for t in [1e-9, 1e-3, 0.4, 3.0, 20.0] {
                let (b, db, ddb) = c.eval2(t);
                let terms = [ddb, (n as f64 - 1.0) / t.tanh() * db, lc * b, b.abs().powf(p - 1.0) * b];
                let scale: f64 = terms.iter().map(|x| x.abs()).sum();
                assert!(terms.iter().sum::<f64>().abs() <= 1e-10 * scale, "N={n} s={s} t={t}");
            }
        }
    }
}
