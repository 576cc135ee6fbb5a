//! Scaling laws of the cut-off bubble as `mu = eps^2 -> 0`, checked by log-log regression.

use super::{critical_power, sobolev_constant, talenti_constant, Bubble};
use crate::error::{Error, Result};
use crate::geometry::DiscPoint;
use crate::quadrature::{adaptive, AdaptiveOptions, GaussLegendre};
use crate::scalar::{sphere_area, Real};
use serde::Serialize;

/// Largest accepted distance between a fitted and a predicted exponent.
pub const SLOPE_TOLERANCE: f64 = 0.05;

const QUAD_REL: f64 = 1e-12;
const MAX_CONDITION: f64 = 1e8;

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit<T> {
    pub slope: T,
    pub intercept: T,
    pub std_error: T,
    /// Normal-approximation 95% interval for the slope.
    pub ci95: (T, T),
    /// Condition number of the design matrix `[1, ln x]`.
    pub condition_number: T,
}

/// Fits `ln y = a + b ln x`.
pub fn loglog_fit<T: Real>(x: &[T], y: &[T]) -> Result<LogLogFit<T>> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidParams(format!("need at least 3 paired samples, got {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > T::zero() && v.is_finite())) {
        return Err(Error::InvalidParams("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
    let n = T::n(x.len());
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let sxx: T = lx.iter().map(|a| (*a - mx) * (*a - mx)).sum();
    let sxy: T = lx.iter().zip(&ly).map(|(a, b)| (*a - mx) * (*b - my)).sum();
    let sx2: T = lx.iter().map(|a| *a * *a).sum();
    let sx: T = lx.iter().copied().sum();
    let tr = n + sx2;
    let det = n * sx2 - sx * sx;
    let disc = (tr * tr / T::c(4.0) - det).max(T::zero()).sqrt();
    let lo = tr / T::c(2.0) - disc;
    let hi = tr / T::c(2.0) + disc;
    let condition_number = if lo > T::zero() { (hi / lo).sqrt() } else { T::infinity() };
    if !(condition_number < T::c(MAX_CONDITION)) || !(sxx > T::zero()) {
        return Err(Error::IllConditioned(format!("design matrix condition number {condition_number}")));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: T = lx.iter().zip(&ly).map(|(a, b)| (*b - intercept - slope * *a).powi(2)).sum();
    let std_error = if x.len() > 2 { (ssr / (n - T::c(2.0)) / sxx).sqrt() } else { T::zero() };
    let half = T::c(1.96) * std_error;
    Ok(LogLogFit { slope, intercept, std_error, ci95: (slope - half, slope + half), condition_number })
}

/// Fitted exponent of one estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit<T> {
    pub estimate: String,
    pub predicted: T,
    #[serde(flatten)]
    pub fit: LogLogFit<T>,
    /// The predicted order is the leading term in this dimension.
    pub applicable: bool,
    pub within_tolerance: bool,
}

/// Quantities of `v_eps` at one `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRow<T> {
    pub mu: T,
    /// `int |grad v_eps|^2 dx`
    pub gradient: T,
    /// Its defect from the full-space value.
    pub gradient_deviation: T,
    /// `int (2/(1-|x|^2))^2 v_eps^2 dx`
    pub weighted_mass: T,
    /// `int |v_eps|^{2*} dx`
    pub critical_mass: T,
    pub critical_deviation: T,
    /// `int |v_eps| dx`
    pub l1: T,
    /// `int |v_eps|^{2*-1} dx`
    pub l_critical_minus_one: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubbleEstimateReport<T> {
    #[serde(rename = "N")]
    pub dim: usize,
    /// Limit of the gradient and critical integrals of the unnormalised profile.
    pub gradient_limit: T,
    pub critical_limit: T,
    /// `(N(N-2))^{(N-2)/4}`; the normalised limits are `S^{N/2}`.
    pub normalization: T,
    #[serde(rename = "S_pow_N_half")]
    pub s_pow_n_half: T,
    pub rows: Vec<EstimateRow<T>>,
    pub fits: Vec<ScalingFit<T>>,
    pub tolerance: T,
    pub all_within_tolerance: bool,
}

fn quad<T: Real, F: Fn(T) -> T>(f: F, bp: &[T]) -> Result<T> {
    let rule = GaussLegendre::new(10);
    let r = adaptive(f, bp, &rule, AdaptiveOptions::rel(T::c(QUAD_REL)));
    if !r.converged || !r.value.is_finite() {
        return Err(Error::Quadrature { estimate: r.value.f64(), error: r.error.f64() });
    }
    Ok(r.value)
}

/// `|S^{N-1}| int f(rho) rho^{N-1} d rho` over the panels `bp`.
fn shell<T: Real, F: Fn(T) -> T>(f: F, bp: &[T], dim: usize) -> Result<T> {
    Ok(quad(|rho| f(rho) * rho.powi(dim as i32 - 1), bp)? * sphere_area::<T>(dim))
}

/// Same over `[a, inf)` with `rho = a / s`.
fn outer_shell<T: Real, F: Fn(T) -> T>(f: F, a: T, dim: usize) -> Result<T> {
    let bp: Vec<T> = (0..=8).map(|j| T::n(j) / T::c(8.0)).collect();
    let v = quad(
        |s: T| {
            if s <= T::zero() {
                return T::zero();
            }
            let rho = a / s;
            f(rho) * rho.powi(dim as i32 - 1) * a / (s * s)
        },
        &bp,
    )?;
    Ok(v * sphere_area::<T>(dim))
}

/// Panel boundaries on `[0, b]` resolving the scale `eps`.
fn graded<T: Real>(eps: T, marks: &[T], b: T) -> Vec<T> {
    let mut bp = vec![T::zero()];
    let mut x = eps / T::c(16.0);
    while x < b {
        bp.push(x);
        x = x * T::c(2.0);
    }
    bp.extend(marks.iter().copied().filter(|m| *m < b));
    bp.push(b);
    bp.sort_by(|a, c| a.partial_cmp(c).expect("finite"));
    bp.dedup();
    bp
}

fn row<T: Real>(dim: usize, mu: T) -> Result<EstimateRow<T>> {
    let eps = mu.sqrt();
    let b = Bubble::new(eps, DiscPoint::origin(dim))?;
    let (r, big_r) = (b.inner(), b.outer());
    let q = critical_power::<T>(dim);
    let k = (T::n(dim) - T::c(2.0)) / T::c(2.0);
    let full = |rho: T| -> (T, T) {
        let s = mu + rho * rho;
        let u = (eps / s).powf(k);
        (u, -T::c(2.0) * k * rho * u / s)
    };
    let marks: Vec<T> = (0..=8).map(|j| r + (big_r - r) * T::n(j) / T::c(8.0)).collect();
    let inner_bp = graded(eps, &marks, big_r);
    let cut_bp: Vec<T> = marks.clone();

    let gradient = shell(|rho| b.radial(rho).1.powi(2), &inner_bp, dim)?;
    let gradient_deviation = shell(|rho| full(rho).1.powi(2) - b.radial(rho).1.powi(2), &cut_bp, dim)?
        + outer_shell(|rho| full(rho).1.powi(2), big_r, dim)?;
    let weighted_mass = shell(
        |rho| {
            let phi = T::c(2.0) / (T::one() - rho * rho);
            (phi * b.radial(rho).0).powi(2)
        },
        &inner_bp,
        dim,
    )?;
    let critical_mass = shell(|rho| b.radial(rho).0.powf(q), &inner_bp, dim)?;
    let critical_deviation = shell(
        |rho| {
            let (phi, _) = b.cutoff(rho);
            full(rho).0.powf(q) * (T::one() - phi.powf(q))
        },
        &cut_bp,
        dim,
    )? + outer_shell(|rho| full(rho).0.powf(q), big_r, dim)?;
    let l1 = shell(|rho| b.radial(rho).0, &inner_bp, dim)?;
    let l_critical_minus_one = shell(|rho| b.radial(rho).0.powf(q - T::one()), &inner_bp, dim)?;
    Ok(EstimateRow {
        mu,
        gradient,
        gradient_deviation,
        weighted_mass,
        critical_mass,
        critical_deviation,
        l1,
        l_critical_minus_one,
    })
}

/// Computes the cut-off bubble integrals over `mu_grid` and fits their orders in `mu`.
///
/// The grid must hold at least three values spanning two decades with `sqrt(mu)` below the
/// inner cutoff radius.
pub fn verify_bubble_estimates<T: Real>(dim: usize, mu_grid: &[T]) -> Result<BubbleEstimateReport<T>> {
    if dim < 3 {
        return Err(Error::InvalidParams(format!("bubbles need N >= 3, got {dim}")));
    }
    if mu_grid.len() < 3 {
        return Err(Error::InvalidParams(format!("mu grid has {} points, need at least 3", mu_grid.len())));
    }
    let inner = T::c(Bubble::<T>::DEFAULT_INNER);
    if mu_grid.iter().any(|m| !(*m > T::zero() && m.sqrt() < inner)) {
        return Err(Error::InvalidParams("mu grid values must lie in (0, r^2)".into()));
    }
    let lo = mu_grid.iter().copied().fold(T::infinity(), T::min);
    let hi = mu_grid.iter().copied().fold(T::zero(), T::max);
    if (hi / lo).log10() < T::c(2.0) - T::c(1e-9) {
        return Err(Error::InvalidParams(format!("mu grid spans {} decades, need 2", (hi / lo).log10())));
    }
    let rows = mu_grid.iter().map(|m| row(dim, *m)).collect::<Result<Vec<_>>>()?;
    let n = T::n(dim);
    let c = talenti_constant::<T>(dim);
    let s_pow = sobolev_constant::<T>(dim).powf(n / T::c(2.0));
    let q = critical_power::<T>(dim);
    let tol = T::c(SLOPE_TOLERANCE);
    let mus: Vec<T> = rows.iter().map(|r| r.mu).collect();
    let series: [(&str, T, bool, fn(&EstimateRow<T>) -> T); 5] = [
        ("gradient_deviation", (n - T::c(2.0)) / T::c(2.0), true, |r| r.gradient_deviation.abs()),
        ("weighted_mass", T::one(), dim >= 5, |r| r.weighted_mass),
        ("critical_deviation", n / T::c(2.0), true, |r| r.critical_deviation.abs()),
        ("l1", (n - T::c(2.0)) / T::c(4.0), true, |r| r.l1),
        ("l_critical_minus_one", (n - T::c(2.0)) / T::c(4.0), true, |r| r.l_critical_minus_one),
    ];
    let mut fits = Vec::with_capacity(series.len());
    for (name, predicted, applicable, get) in series {
        let ys: Vec<T> = rows.iter().map(get).collect();
        let fit = loglog_fit(&mus, &ys)?;
        let within = (fit.slope - predicted).abs() <= tol;
        fits.push(ScalingFit { estimate: name.to_string(), predicted, fit, applicable, within_tolerance: within });
    }
    let all = fits.iter().all(|f| !f.applicable || f.within_tolerance);
    Ok(BubbleEstimateReport {
        dim,
        gradient_limit: s_pow / c.powi(2),
        critical_limit: s_pow / c.powf(q),
        normalization: c,
        s_pow_n_half: s_pow,
        rows,
        fits,
        tolerance: tol,
        all_within_tolerance: all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_power_law() {
        let x: Vec<f64> = (0..7).map(|i| 10f64.powf(-6.0 + 0.5 * i as f64)).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(1.25)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope - 1.25).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(f.std_error < 1e-10 && f.condition_number > 1.0);
        assert!(loglog_fit(&x[..2], &y[..2]).is_err());
        assert!(loglog_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn short_grids_are_rejected() {
        assert!(verify_bubble_estimates(5, &[1e-4, 1e-3, 5e-3]).is_err());
        assert!(verify_bubble_estimates(5, &[1e-5, 1e-3]).is_err());
        assert!(verify_bubble_estimates(5, &[-1.0, 1e-3, 1e-5]).is_err());
    }

    #[test]
    fn limits_are_approached() {
        let r = verify_bubble_estimates::<f64>(5, &[1e-6, 1e-5, 1e-4]).unwrap();
        let last = r.rows[0];
        assert!(((last.gradient + last.gradient_deviation) - r.gradient_limit).abs() < 1e-9 * r.gradient_limit);
        assert!(((last.critical_mass + last.critical_deviation) - r.critical_limit).abs() < 1e-9 * r.critical_limit);
        assert!((last.gradient * r.normalization.powi(2) - r.s_pow_n_half).abs() < 1e-3 * r.s_pow_n_half);
    }
}
