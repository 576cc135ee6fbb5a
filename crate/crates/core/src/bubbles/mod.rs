//! Cut-off Aubin-Talenti profiles, their scaling laws and Palais-Smale sequences built from them.
//!
//! `Bubble` evaluates `v_eps(x) = phi(|x - x0|) (eps / (eps^2 + |x - x0|^2))^{(N-2)/2}` with a
//! smooth cutoff `phi`. The extremal `V_1(x) = (N(N-2))^{(N-2)/4} (1 + |x|^2)^{-(N-2)/2}` of the
//! Euclidean Sobolev inequality is available through [`aubin_talenti`].

mod estimates;
mod sequences;

pub use estimates::{loglog_fit, verify_bubble_estimates, BubbleEstimateReport, EstimateRow, ScalingFit, SLOPE_TOLERANCE};
pub use sequences::{
    make_concentrating_sequence, make_translated_sequence, quantization_check, superposition_energy,
    ConcentrationEntry, ConcentrationReport, PSSequenceSpec, PSTerm, QuantizationEntry, QuantizationReport,
    SuperpositionOptions, TranslationEntry, TranslationReport,
};

use crate::error::{Error, Result};
use crate::geometry::DiscPoint;
use crate::quadrature::GaussLegendre;
use crate::scalar::{dist_sq, gamma_half_integer, sphere_area, Real};
use crate::tolerances::BOUNDARY_MARGIN;
use serde::{Deserialize, Serialize};

/// `exp(-1/s)` for `s > 0`, zero otherwise.
fn mollifier<T: Real>(s: T) -> T {
    if s <= T::zero() {
        T::zero()
    } else {
        (-s.recip()).exp()
    }
}

/// Smooth step from 0 (`s <= 0`) to 1 (`s >= 1`) and its derivative.
fn smooth_step<T: Real>(s: T) -> (T, T) {
    if s <= T::zero() {
        return (T::zero(), T::zero());
    }
    if s >= T::one() {
        return (T::one(), T::zero());
    }
    let a = mollifier(s);
    let b = mollifier(T::one() - s);
    let da = a / (s * s);
    let db = -b / ((T::one() - s) * (T::one() - s));
    let sum = a + b;
    (a / sum, (da * b - a * db) / (sum * sum))
}

/// `(N(N-2))^{(N-2)/4}`, the factor making `V_1` a solution of `-Delta V = V^{2*-1}`.
pub fn talenti_constant<T: Real>(dim: usize) -> T {
    let n = T::n(dim);
    (n * (n - T::c(2.0))).powf((n - T::c(2.0)) / T::c(4.0))
}

/// Closed form of the Euclidean Sobolev constant, `pi N (N-2) (Gamma(N/2) / Gamma(N))^{2/N}`.
pub fn sobolev_constant<T: Real>(dim: usize) -> T {
    let n = T::n(dim);
    let ratio = gamma_half_integer::<T>(dim) / gamma_half_integer::<T>(2 * dim);
    T::PI() * n * (n - T::c(2.0)) * ratio.powf(T::c(2.0) / n)
}

/// `2* = 2N / (N - 2)`.
pub fn critical_power<T: Real>(dim: usize) -> T {
    T::c(2.0) * T::n(dim) / (T::n(dim) - T::c(2.0))
}

/// `V_eps(rho) = eps^{-(N-2)/2} V_1(rho / eps)` with its first two derivatives.
pub fn aubin_talenti<T: Real>(dim: usize, eps: T, rho: T) -> [T; 3] {
    let k = (T::n(dim) - T::c(2.0)) / T::c(2.0);
    let c = talenti_constant::<T>(dim) * eps.powf(k);
    let q = eps * eps + rho * rho;
    let v = c * q.powf(-k);
    let d1 = -T::c(2.0) * k * c * rho * q.powf(-k - T::one());
    let d2 = -T::c(2.0) * k * c * (q.powf(-k - T::one()) - T::c(2.0) * (k + T::one()) * rho * rho * q.powf(-k - T::c(2.0)));
    [v, d1, d2]
}

/// A cut-off concentration profile centred at `x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble<T> {
    epsilon: T,
    center: DiscPoint<T>,
    inner: T,
    outer: T,
}

impl<T: Real> Bubble<T> {
    pub const DEFAULT_INNER: f64 = 0.25;
    pub const DEFAULT_OUTER: f64 = 0.5;

    /// Bubble with the default cutoff radii.
    pub fn new(epsilon: T, center: DiscPoint<T>) -> Result<Self> {
        Self::with_cutoff(epsilon, center, T::c(Self::DEFAULT_INNER), T::c(Self::DEFAULT_OUTER))
    }

    /// The cutoff is 1 on `|x - x0| <= inner` and 0 on `|x - x0| >= outer`; the support
    /// must stay inside the ball.
    pub fn with_cutoff(epsilon: T, center: DiscPoint<T>, inner: T, outer: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("bubble scale {epsilon} must be positive")));
        }
        if !(T::zero() < inner && inner < outer && outer < T::one()) {
            return Err(Error::InvalidParams(format!("cutoff radii need 0 < {inner} < {outer} < 1")));
        }
        if center.dim() < 3 {
            return Err(Error::InvalidParams(format!("bubbles need N >= 3, got {}", center.dim())));
        }
        if center.norm() + outer >= T::one() - T::c(BOUNDARY_MARGIN) {
            return Err(Error::InvalidParams(format!(
                "cutoff support |x0| + R = {} reaches the boundary",
                center.norm() + outer
            )));
        }
        Ok(Bubble { epsilon, center, inner, outer })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// `mu = eps^2`.
    pub fn mu(&self) -> T {
        self.epsilon * self.epsilon
    }

    pub fn center(&self) -> &DiscPoint<T> {
        &self.center
    }

    pub fn inner(&self) -> T {
        self.inner
    }

    pub fn outer(&self) -> T {
        self.outer
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    fn power(&self) -> T {
        (T::n(self.dim()) - T::c(2.0)) / T::c(2.0)
    }

    /// Cutoff at distance `rho` from the centre, with its derivative.
    pub fn cutoff(&self, rho: T) -> (T, T) {
        let w = self.outer - self.inner;
        let (s, ds) = smooth_step((rho - self.inner) / w);
        (T::one() - s, -ds / w)
    }

    /// Profile and its derivative at distance `rho` from the centre.
    pub fn radial(&self, rho: T) -> (T, T) {
        let (phi, dphi) = self.cutoff(rho);
        if phi == T::zero() && dphi == T::zero() {
            return (T::zero(), T::zero());
        }
        let k = self.power();
        let q = self.mu() + rho * rho;
        let u = (self.epsilon / q).powf(k);
        let du = -T::c(2.0) * k * rho * u / q;
        (phi * u, dphi * u + phi * du)
    }

    /// `v_eps` at raw coordinates.
    pub fn eval(&self, x: &[T]) -> T {
        self.radial(dist_sq(x, self.center.coords()).sqrt()).0
    }

    /// `w_mu(x) = phi(x) / (mu + |x - x0|^2)^{(N-2)/2}`, so that `v_eps = mu^{(N-2)/4} w_mu`.
    pub fn w_mu(&self, x: &[T]) -> T {
        let r2 = dist_sq(x, self.center.coords());
        let (phi, _) = self.cutoff(r2.sqrt());
        phi / (self.mu() + r2).powf(self.power())
    }
}

/// `v_eps(x)` for the bubble `b`.
pub fn bubble_eval<T: Real>(b: &Bubble<T>, x: &DiscPoint<T>) -> T {
    debug_assert_eq!(b.dim(), x.dim());
    b.eval(x.coords())
}

/// Gradient and critical integrals of `V_eps` over `R^N` and the resulting constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandardBubble<T> {
    #[serde(rename = "N")]
    pub dim: usize,
    /// `int |grad V|^2`
    pub gradient_term: T,
    /// `int |V|^{2*}`
    pub critical_term: T,
    #[serde(rename = "S_estimate")]
    pub s_estimate: T,
    #[serde(rename = "J_value")]
    pub j_value: T,
    #[serde(rename = "S_closed_form")]
    pub s_closed_form: T,
    /// `|J - S^{N/2}/N| / J`
    pub identity_gap: T,
    /// Change of the `S` estimate when the quadrature is refined twofold.
    pub refinement_change: T,
}

/// Panels of the fixed Gauss-Legendre rule used for `V_eps`.
const BUBBLE_PANELS: usize = 32;

/// Largest accepted `|J - S^{N/2}/N| / J`.
pub const BUBBLE_IDENTITY_TOL: f64 = 1e-8;

/// `(int |grad V_eps|^2, int |V_eps|^{2*})` over `R^N` with `rho = eps tan(theta)` and
/// `panels` Gauss-Legendre panels in `theta`.
pub fn bubble_integrals<T: Real>(dim: usize, eps: T, panels: usize) -> (T, T) {
    let rule = GaussLegendre::<T>::new(10);
    let q = critical_power::<T>(dim);
    let half = T::FRAC_PI_2();
    let (mut g, mut c) = (T::zero(), T::zero());
    for j in 0..panels {
        let a = half * T::n(j) / T::n(panels);
        let b = half * T::n(j + 1) / T::n(panels);
        g += rule.integrate(
            |th: T| {
                let rho = eps * th.tan();
                let jac = eps / (th.cos() * th.cos());
                let [_, d, _] = aubin_talenti(dim, eps, rho);
                d * d * rho.powi(dim as i32 - 1) * jac
            },
            a,
            b,
        );
        c += rule.integrate(
            |th: T| {
                let rho = eps * th.tan();
                let jac = eps / (th.cos() * th.cos());
                let [v, _, _] = aubin_talenti(dim, eps, rho);
                v.abs().powf(q) * rho.powi(dim as i32 - 1) * jac
            },
            a,
            b,
        );
    }
    let w = sphere_area::<T>(dim);
    (g * w, c * w)
}

/// `J(V) = 1/2 int |grad V|^2 - 1/2* int |V|^{2*}` from its two integrals.
pub fn critical_energy<T: Real>(dim: usize, gradient_term: T, critical_term: T) -> T {
    gradient_term / T::c(2.0) - critical_term / critical_power::<T>(dim)
}

fn quotient<T: Real>(dim: usize, g: T, c: T) -> T {
    g / c.powf(T::c(2.0) / critical_power::<T>(dim))
}

/// Sobolev quotient and energy of `V_1`, checking `J(V_1) = S^{N/2} / N`.
pub fn standard_bubble_energy<T: Real>(dim: usize) -> Result<StandardBubble<T>> {
    if dim < 3 {
        return Err(Error::InvalidParams(format!("bubbles need N >= 3, got {dim}")));
    }
    let (g, c) = bubble_integrals::<T>(dim, T::one(), BUBBLE_PANELS);
    let (g2, c2) = bubble_integrals::<T>(dim, T::one(), 2 * BUBBLE_PANELS);
    if !(g.is_finite() && c.is_finite() && c > T::zero()) {
        return Err(Error::Quadrature { estimate: g.f64(), error: f64::NAN });
    }
    let s = quotient(dim, g, c);
    let s2 = quotient(dim, g2, c2);
    let j = critical_energy(dim, g, c);
    let n = T::n(dim);
    let gap = (j - s.powf(n / T::c(2.0)) / n).abs() / j;
    if gap > T::c(BUBBLE_IDENTITY_TOL) {
        return Err(Error::Numerical(format!("J(V_1) and S^(N/2)/N differ by {gap}")));
    }
    Ok(StandardBubble {
        dim,
        gradient_term: g,
        critical_term: c,
        s_estimate: s,
        j_value: j,
        s_closed_form: sobolev_constant(dim),
        identity_gap: gap,
        refinement_change: (s2 - s).abs() / s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin_bubble(dim: usize, eps: f64) -> Bubble<f64> {
        Bubble::new(eps, DiscPoint::origin(dim)).unwrap()
    }

    #[test]
    fn cutoff_is_a_smooth_plateau() {
        let b = origin_bubble(5, 0.1);
        assert_eq!(b.cutoff(0.0).0, 1.0);
        assert_eq!(b.cutoff(0.25).0, 1.0);
        assert_eq!(b.cutoff(0.5).0, 0.0);
        assert!((b.cutoff(0.375).0 - 0.5).abs() < 1e-15);
        let mut last = 1.0;
        for i in 0..=200 {
            let r = 0.25 + 0.25 * i as f64 / 200.0;
            let (v, d) = b.cutoff(r);
            assert!((0.0..=1.0).contains(&v) && v <= last && d <= 0.0);
            last = v;
            let h = 1e-6;
            if i > 0 && i < 200 {
                let fd = (b.cutoff(r + h).0 - b.cutoff(r - h).0) / (2.0 * h);
                assert!((fd - d).abs() < 1e-6 * (1.0 + d.abs()), "r={r} {fd} {d}");
            }
        }
    }

    #[test]
    fn bubble_values() {
        for dim in 3..8 {
            let eps = 0.03;
            let b = origin_bubble(dim, eps);
            let x0 = DiscPoint::origin(dim);
            let expect = eps.powf(-(dim as f64 - 2.0) / 2.0);
            assert!((bubble_eval(&b, &x0) - expect).abs() < 1e-12 * expect);
            let mut x = vec![0.0; dim];
            x[0] = 0.51;
            assert_eq!(bubble_eval(&b, &DiscPoint::new(x).unwrap()), 0.0);
            let mut last = f64::INFINITY;
            for i in 0..=100 {
                let v = b.radial(0.25 * i as f64 / 100.0).0;
                assert!(v < last);
                last = v;
            }
        }
    }

    #[test]
    fn w_mu_substitution() {
        let c = DiscPoint::new(vec![0.1, -0.2, 0.05, 0.0, 0.1]).unwrap();
        let b: Bubble<f64> = Bubble::new(0.02, c).unwrap();
        let k = b.mu().powf(0.75);
        for i in 0..50 {
            let s = i as f64 / 50.0;
            let x = [0.1 + 0.4 * s, -0.2 + 0.1 * s, 0.05, 0.2 * s, 0.1];
            let a = b.eval(&x);
            let w = k * b.w_mu(&x);
            assert!((a - w).abs() <= 4.0 * f64::EPSILON * a.abs().max(f64::MIN_POSITIVE), "{a} {w}");
        }
    }

    #[test]
    fn bad_bubbles_are_rejected() {
        let c = DiscPoint::new(vec![0.6, 0.0, 0.0]).unwrap();
        assert!(Bubble::new(0.1, c).is_err());
        assert!(Bubble::new(0.0, DiscPoint::origin(3)).is_err());
        assert!(Bubble::with_cutoff(0.1, DiscPoint::origin(3), 0.5, 0.4).is_err());
        assert!(Bubble::new(0.1, DiscPoint::<f64>::origin(2)).is_err());
    }

    #[test]
    fn talenti_profile_solves_the_critical_equation() {
        for dim in 3..9 {
            let q = critical_power::<f64>(dim) - 1.0;
            for &eps in &[0.1, 1.0, 10.0] {
                for i in 1..40 {
                    let rho = 0.05 * eps * i as f64;
                    let [v, d, dd] = aubin_talenti(dim, eps, rho);
                    let res = dd + (dim as f64 - 1.0) / rho * d + v.powf(q);
                    let scale = dd.abs() + ((dim as f64 - 1.0) / rho * d).abs() + v.powf(q);
                    assert!(res.abs() < 1e-10 * scale, "N={dim} eps={eps} rho={rho}");
                }
            }
        }
    }

    #[test]
    fn standard_energy_matches_closed_form() {
        for dim in 3..9 {
            let r = standard_bubble_energy::<f64>(dim).unwrap();
            assert!(r.identity_gap < 1e-8);
            assert!(r.refinement_change < 1e-8);
            assert!((r.s_estimate - r.s_closed_form).abs() < 1e-10 * r.s_closed_form, "{r:?}");
        }
        let s4 = standard_bubble_energy::<f64>(4).unwrap().s_estimate;
        assert!((s4 - 8.0 * std::f64::consts::PI / 6f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn energy_is_scale_invariant() {
        let dim = 5;
        let (g1, c1) = bubble_integrals::<f64>(dim, 1.0, 32);
        let j1 = critical_energy(dim, g1, c1);
        for &eps in &[0.1, 10.0] {
            let (g, c) = bubble_integrals::<f64>(dim, eps, 32);
            assert!((critical_energy(dim, g, c) - j1).abs() < 1e-8 * j1);
        }
    }
}
