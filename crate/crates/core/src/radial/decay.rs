use super::profile::RadialProfile;
use crate::energy;
use crate::error::Result;
use crate::params::Params;
use crate::scalar::{sphere_area, Real};
use crate::tolerances;
use serde::Serialize;

/// Least-squares rate `r` of `|u| ~ exp(-r t)` over the last quarter of the profile.
///
/// `None` if the profile vanishes or changes sign there.
pub fn fit_decay_rate<T: Real>(profile: &RadialProfile<T>) -> Option<T> {
    let end = profile.end();
    let start = end * T::c(0.75);
    let m = 64usize;
    let mut pts = Vec::with_capacity(m);
    let mut sign = T::zero();
    for i in 0..m {
        let t = start + (end - start) * T::n(i) / T::n(m - 1);
        let v = profile.eval(t);
        if v == T::zero() || !v.is_finite() {
            return None;
        }
        if sign != T::zero() && v.signum() != sign {
            return None;
        }
        sign = v.signum();
        pts.push((t, v.abs().ln()));
    }
    let n = T::n(m);
    let mt = pts.iter().map(|p| p.0).sum::<T>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum::<T>();
    let sxx = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum::<T>();
    if sxx <= T::zero() {
        return None;
    }
    Some(-sxy / sxx)
}

/// Pointwise decay diagnostics of a computed solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport<T> {
    /// Start of the tail window (last quarter of the grid).
    pub tail_start: T,
    pub sup_tail_value: T,
    /// Largest metric gradient magnitude `|u'(t)|` over the tail window.
    pub sup_tail_gradient: T,
    /// Both tail suprema are below the decay amplitude and below their values on the rest of the grid.
    pub sup_decay_ok: bool,
    /// `sup |u| / ((1-|x|^2)/2)^{(N-2)/2}` when `lambda <= N(N-2)/4`.
    pub weighted_ratio: Option<T>,
    /// The same supremum on the twice refined grid.
    pub weighted_ratio_refined: Option<T>,
    /// `sqrt(int |grad u|^2 dV)`.
    pub h1_norm: T,
    /// Smallest relative margin `(bound - |u|) / bound` of the radial embedding bound over the grid.
    pub radial_bound_margin: T,
    pub radial_bound_violations: usize,
}

impl<T: Real> DecayReport<T> {
    pub fn passed(&self) -> bool {
        self.sup_decay_ok && self.radial_bound_violations == 0
    }

    /// Relative change of the weighted ratio under refinement.
    pub fn weighted_ratio_change(&self) -> Option<T> {
        match (self.weighted_ratio, self.weighted_ratio_refined) {
            (Some(a), Some(b)) if a > T::zero() => Some((b - a).abs() / a),
            (Some(_), Some(_)) => Some(T::zero()),
            _ => None,
        }
    }
}

fn weighted_sup<T: Real>(profile: &RadialProfile<T>, dim: usize) -> T {
    let k = T::n(dim - 2) / T::c(2.0);
    profile
        .grid()
        .iter()
        .zip(profile.values())
        .map(|(t, u)| {
            let c = (*t / T::c(2.0)).cosh();
            u.abs() * (T::c(2.0) * c * c).powf(k)
        })
        .fold(T::zero(), T::max)
}

/// Checks tail decay, the weighted bound for `lambda <= N(N-2)/4` and the radial
/// embedding bound `|u| <= |S^{N-1}|^{-1/2} ||u|| ((1-|x|^2)/2)^{(N-1)/2} |x|^{-N/2}`.
pub fn decay_check<T: Real>(profile: &RadialProfile<T>, params: &Params<T>) -> Result<DecayReport<T>> {
    let n = params.dim;
    let grid = profile.grid();
    let (u, du) = (profile.values(), profile.derivatives());
    let tail_start = profile.end() * T::c(0.75);
    let (mut tail_v, mut tail_g, mut head_v, mut head_g) = (T::zero(), T::zero(), T::zero(), T::zero());
    for i in 0..grid.len() {
        if grid[i] >= tail_start {
            tail_v = tail_v.max(u[i].abs());
            tail_g = tail_g.max(du[i].abs());
        } else {
            head_v = head_v.max(u[i].abs());
            head_g = head_g.max(du[i].abs());
        }
    }
    let eps = T::c(tolerances::DECAY_AMPLITUDE) * profile.s().abs().max(T::one());
    let sup_decay_ok = tail_v < eps && tail_g < eps && tail_v <= head_v && tail_g <= head_g;

    let (weighted_ratio, weighted_ratio_refined) = if params.lambda <= params.conformal_threshold() {
        (Some(weighted_sup(profile, n)), Some(weighted_sup(&profile.refined(2), n)))
    } else {
        (None, None)
    };

    let report = energy::energy(profile, params, T::c(tolerances::QUAD_REL))?;
    let h1_norm = report.gradient_term.max(T::zero()).sqrt();
    let pref = h1_norm / sphere_area::<T>(n).sqrt();
    let mut margin = T::one();
    let mut violations = 0;
    for (t, v) in grid.iter().zip(u) {
        if *t <= T::zero() {
            continue;
        }
        let half = *t / T::c(2.0);
        let c = half.cosh();
        let w = T::one() / (T::c(2.0) * c * c);
        let x = half.tanh();
        let bound = pref * w.powf(T::n(n - 1) / T::c(2.0)) / x.powf(T::n(n) / T::c(2.0));
        if bound > T::zero() {
            let m = (bound - v.abs()) / bound;
            margin = margin.min(m);
            if m < T::zero() {
                violations += 1;
            }
        }
    }
    Ok(DecayReport {
        tail_start,
        sup_tail_value: tail_v,
        sup_tail_gradient: tail_g,
        sup_decay_ok,
        weighted_ratio,
        weighted_ratio_refined,
        h1_norm,
        radial_bound_margin: margin,
        radial_bound_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_exponential() {
        let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
        let u: Vec<f64> = t.iter().map(|x| 3.0 * (-1.7 * x).exp()).collect();
        let du = u.iter().map(|v| -1.7 * v).collect();
        let ddu = u.iter().map(|v| 1.7 * 1.7 * v).collect();
        let p = RadialProfile::new(3, 3.0, t, u, du, ddu, None, None);
        assert!((fit_decay_rate(&p).unwrap() - 1.7).abs() < 1e-9);
    }

    #[test]
    fn zero_profile_passes() {
        let p = RadialProfile::new(3, 0.0, vec![0.0, 10.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], None, None);
        let params = Params::new(3, 3.0, 0.0).unwrap();
        let r = decay_check(&p, &params).unwrap();
        assert!(r.passed());
        assert_eq!(r.weighted_ratio, Some(0.0));
        assert_eq!(r.radial_bound_violations, 0);
    }
}
