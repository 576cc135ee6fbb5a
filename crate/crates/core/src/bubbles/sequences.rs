//! Palais-Smale sequences built from translated solutions and concentrating bubbles.
//!
//! Components of one term sit on a common line through the origin, so every superposition
//! is invariant under rotations about that axis. Its energy is integrated cell by cell over
//! the hyperbolic Voronoi cells of the component centres, each in geodesic polar
//! coordinates `(t, theta)` about its own centre, with `theta` measured from the axis.

use super::{critical_power, standard_bubble_energy, talenti_constant, Bubble};
use crate::energy::energy;
use crate::error::{Error, Result};
use crate::geometry::DiscPoint;
use crate::params::Params;
use crate::quadrature::{adaptive, AdaptiveOptions, GaussLegendre};
use crate::radial::RadialProfile;
use crate::scalar::{dist_sq, dot, norm_sq, sphere_area, Real};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;

/// Quadrature settings for superposition integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionOptions {
    pub rel_tol: f64,
    /// Orders of magnitude of decay of the energy density covered past the farthest centre.
    pub decay_digits: f64,
    /// Centres closer than this hyperbolic distance are flagged as overlapping.
    pub min_separation: f64,
}

impl Default for SuperpositionOptions {
    fn default() -> Self {
        SuperpositionOptions { rel_tol: 1e-9, decay_digits: 16.0, min_separation: 2.0 }
    }
}

/// Components of the `n`-th term of a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PSTerm<T> {
    /// Centres `b` of the copies `U o tau_b^{-1}`.
    pub translations: Vec<DiscPoint<T>>,
    pub bubbles: Vec<Bubble<T>>,
}

/// A sequence `u + sum_j U o tau_{b_j}^{-1} + sum_k (bubble_k on the ball)` and its predicted level.
///
/// A bubble `b` enters on the ball as `c_N ((1 - |x|^2)/2)^{(N-2)/2} v_eps(x)` with
/// `c_N = (N(N-2))^{(N-2)/4}`, whose energy tends to `J(V_1) = S^{N/2} / N`.
#[derive(Debug, Clone, Serialize)]
pub struct PSSequenceSpec<T> {
    pub params: Params<T>,
    /// Weak limit `u`, centred at the origin.
    #[serde(skip)]
    pub base_solution: Option<RadialProfile<T>>,
    /// Profile `U` of the translated components.
    #[serde(skip)]
    pub translated_solution: Option<RadialProfile<T>>,
    pub terms: Vec<PSTerm<T>>,
    /// `I(u) + sum I(U) + sum J(V_1)`
    pub level: T,
    pub base_energy: Option<T>,
    pub translated_energy: Option<T>,
    pub bubble_energy: Option<T>,
}

const PROFILE_REL: f64 = 1e-11;

/// Unit axis through all centres of a term, `e_1` if they all sit at the origin.
fn common_axis<T: Real>(dim: usize, centres: &[&[T]]) -> Result<Vec<T>> {
    let mut axis = None;
    for c in centres {
        let n2 = norm_sq(c);
        if n2 == T::zero() {
            continue;
        }
        match &axis {
            None => axis = Some(c.iter().map(|v| *v / n2.sqrt()).collect::<Vec<T>>()),
            Some(a) => {
                let p = dot(c, a);
                let perp = (n2 - p * p).max(T::zero()).sqrt();
                if perp > T::c(1e-10) * n2.sqrt().max(T::one()) {
                    return Err(Error::InvalidParams("term components are not on a common axis".into()));
                }
            }
        }
    }
    Ok(axis.unwrap_or_else(|| {
        let mut e = vec![T::zero(); dim];
        e[0] = T::one();
        e
    }))
}

impl<T: Real> PSSequenceSpec<T> {
    pub fn new(
        params: Params<T>,
        base_solution: Option<RadialProfile<T>>,
        translated_solution: Option<RadialProfile<T>>,
        terms: Vec<PSTerm<T>>,
    ) -> Result<Self> {
        params.validate()?;
        let dim = params.dim;
        if terms.is_empty() {
            return Err(Error::InvalidParams("sequence has no terms".into()));
        }
        for p in base_solution.iter().chain(translated_solution.iter()) {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
            }
        }
        let (nt, nb) = (terms[0].translations.len(), terms[0].bubbles.len());
        for term in &terms {
            if term.translations.len() != nt || term.bubbles.len() != nb {
                return Err(Error::InvalidParams("terms differ in their number of components".into()));
            }
            for b in &term.translations {
                if b.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: b.dim() });
                }
            }
            for b in &term.bubbles {
                if b.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: b.dim() });
                }
            }
            let centres: Vec<&[T]> = term
                .translations
                .iter()
                .map(|b| b.coords())
                .chain(term.bubbles.iter().map(|b| b.center().coords()))
                .collect();
            common_axis(dim, &centres)?;
        }
        if nt > 0 && translated_solution.is_none() {
            return Err(Error::InvalidParams("translations need a translated profile".into()));
        }
        if nb > 0 && !params.is_critical() {
            return Err(Error::InvalidParams("bubbles need the critical exponent".into()));
        }
        let rel = T::c(PROFILE_REL);
        let base_energy = base_solution.as_ref().map(|u| energy(u, &params, rel).map(|e| e.i_lambda)).transpose()?;
        let translated_energy = if nt > 0 {
            translated_solution.as_ref().map(|u| energy(u, &params, rel).map(|e| e.i_lambda)).transpose()?
        } else {
            None
        };
        let bubble_energy = if nb > 0 { Some(standard_bubble_energy::<T>(dim)?.j_value) } else { None };
        let level = base_energy.unwrap_or(T::zero())
            + translated_energy.map_or(T::zero(), |e| e * T::n(nt))
            + bubble_energy.map_or(T::zero(), |e| e * T::n(nb));
        Ok(PSSequenceSpec {
            params,
            base_solution,
            translated_solution,
            terms,
            level,
            base_energy,
            translated_energy,
            bubble_energy,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The `n`-th superposition as a function on ball coordinates.
    pub fn evaluator(&self, n: usize) -> impl Fn(&[T]) -> T + Sync + '_ {
        let term = &self.terms[n];
        let dim = self.params.dim;
        let k = (T::n(dim) - T::c(2.0)) / T::c(2.0);
        let c = talenti_constant::<T>(dim);
        move |x: &[T]| {
            let x2 = norm_sq(x);
            let mut v = T::zero();
            if let Some(u) = &self.base_solution {
                v += u.eval(T::c(2.0) * x2.sqrt().atanh());
            }
            if let Some(u) = &self.translated_solution {
                for b in &term.translations {
                    let q = dist_sq(x, b.coords()) / ((T::one() - x2) * (T::one() - b.norm_sq()));
                    v += u.eval(T::c(2.0) * q.sqrt().asinh());
                }
            }
            for b in &term.bubbles {
                let m = (T::one() - x2) / T::c(2.0);
                v += c * m.powf(k) * b.eval(x);
            }
            v
        }
    }

    /// Flat description of term `n` along its axis.
    fn axial(&self, n: usize) -> Result<Axial<'_, T>> {
        let term = &self.terms[n];
        let dim = self.params.dim;
        let centres: Vec<&[T]> = term
            .translations
            .iter()
            .map(|b| b.coords())
            .chain(term.bubbles.iter().map(|b| b.center().coords()))
            .collect();
        let axis = common_axis(dim, &centres)?;
        let pos = |c: &[T]| dot(c, &axis);
        let mut radial = Vec::new();
        if let Some(u) = &self.base_solution {
            radial.push((u, T::zero()));
        }
        if let Some(u) = &self.translated_solution {
            for b in &term.translations {
                radial.push((u, T::c(2.0) * pos(b.coords()).atanh()));
            }
        }
        let bubbles: Vec<(&Bubble<T>, T)> = term.bubbles.iter().map(|b| (b, pos(b.center().coords()))).collect();
        let mut centres: Vec<T> = radial
            .iter()
            .map(|(_, s)| *s)
            .chain(bubbles.iter().map(|(_, x)| T::c(2.0) * x.atanh()))
            .collect();
        centres.sort_by(|a, b| a.partial_cmp(b).expect("finite centres"));
        centres.dedup_by(|a, b| (*a - *b).abs() < T::c(1e-9));
        Ok(Axial { params: &self.params, radial, bubbles, centres })
    }
}

/// Components of one term as positions on the axis.
struct Axial<'a, T> {
    params: &'a Params<T>,
    /// Profiles with the signed geodesic position of their centre.
    radial: Vec<(&'a RadialProfile<T>, T)>,
    /// Bubbles with the signed Euclidean coordinate of their centre.
    bubbles: Vec<(&'a Bubble<T>, T)>,
    /// Distinct centres, sorted.
    centres: Vec<T>,
}

/// Distance from `(t, theta)` to the axis point at signed position `s`, with the orthonormal
/// components `(d_t, d_theta / sinh t)` of its gradient.
fn axis_distance<T: Real>(t: T, theta: T, s: T) -> (T, T, T) {
    if s == T::zero() {
        return (t, T::one(), T::zero());
    }
    let (s, theta, flip) = if s < T::zero() { (-s, T::PI() - theta, -T::one()) } else { (s, theta, T::one()) };
    let half = (theta / T::c(2.0)).sin();
    let h2 = half * half;
    let q = ((t - s) / T::c(2.0)).sinh().powi(2) + t.sinh() * s.sinh() * h2;
    let d = T::c(2.0) * q.sqrt().asinh();
    let sd = d.sinh();
    if sd == T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    let dt = ((t - s).sinh() + T::c(2.0) * t.cosh() * s.sinh() * h2) / sd;
    let dth = s.sinh() * theta.sin() / sd;
    (d, dt, flip * dth)
}

/// Points of `grid` thinned to panels growing by at most 25% or `0.25`.
fn thin<T: Real>(grid: &[T], end: T) -> Vec<T> {
    let mut out = vec![T::zero()];
    for &x in grid {
        if x >= end {
            break;
        }
        let last = *out.last().expect("non-empty");
        if x > last && (x >= last * T::c(1.25) || x - last >= T::c(0.25)) {
            out.push(x);
        }
    }
    out
}

impl<T: Real> Axial<'_, T> {
    /// Value and orthonormal gradient components of the superposition in the frame centred
    /// at axis position `sigma`.
    fn sample(&self, sigma: T, t: T, theta: T) -> (T, T, T) {
        let dim = self.params.dim;
        let (mut v, mut gt, mut gth) = (T::zero(), T::zero(), T::zero());
        for (u, s) in &self.radial {
            let (d, dt, dth) = axis_distance(t, theta, *s - sigma);
            let (a, da) = crate::radial::RadialFunction::value(*u, d);
            v += a;
            gt += da * dt;
            gth += da * dth;
        }
        if self.bubbles.is_empty() {
            return (v, gt, gth);
        }
        let k = (T::n(dim) - T::c(2.0)) / T::c(2.0);
        let c = talenti_constant::<T>(dim);
        let a = (sigma / T::c(2.0)).tanh();
        let r = (t / T::c(2.0)).tanh();
        let (sn, cs) = theta.sin_cos();
        let (zr, zi) = (r * cs, r * sn);
        let (d0, _, _) = axis_distance(t, theta, -sigma);
        for (b, x0) in &self.bubbles {
            let reach = T::c(2.0) * (x0.abs() + b.outer()).atanh();
            if d0 >= reach {
                continue;
            }
            // w = (z + a) / (1 + a z)
            let (nr, ni) = (zr + a, zi);
            let (dr, di) = (T::one() + a * zr, a * zi);
            let den = dr * dr + di * di;
            let (wr, wi) = ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den);
            let (pr, pi) = (wr - *x0, wi);
            let rho = (pr * pr + pi * pi).sqrt();
            let (bv, bd) = b.radial(rho);
            if bv == T::zero() && bd == T::zero() {
                continue;
            }
            let m = (T::one() - wr * wr - wi * wi) / T::c(2.0);
            let mk = m.powf(k);
            v += c * mk * bv;
            let g0 = -c * k * mk / m * bv;
            let g1 = if rho > T::zero() { c * mk * bd / rho } else { T::zero() };
            let (gx, gy) = (g0 * wr + g1 * pr, g0 * wi + g1 * pi);
            // conj(f'(z)) (gx + i gy), f'(z) = (1 - a^2) / (1 + a z)^2
            let (er, ei) = (dr * dr - di * di, T::c(2.0) * dr * di);
            let e2 = er * er + ei * ei;
            let scale = T::one() - a * a;
            let (fr, fi) = (scale * er / e2, -scale * ei / e2);
            let (hx, hy) = (fr * gx + fi * gy, fr * gy - fi * gx);
            let h = T::one() / (T::c(2.0) * (t / T::c(2.0)).cosh().powi(2));
            gt += h * (hx * cs + hy * sn);
            gth += h * (hy * cs - hx * sn);
        }
        (v, gt, gth)
    }

    /// Radius past which the density is negligible, in a frame centred at `sigma`.
    fn reach(&self, sigma: T, opts: &SuperpositionOptions) -> T {
        let (_, cp) = self.params.decay_rates();
        let n = T::n(self.params.dim);
        let gamma = (T::c(2.0) * cp - (n - T::one())).max(T::c(0.1));
        let far = self.centres.iter().map(|s| (*s - sigma).abs()).fold(T::zero(), T::max);
        let span = T::c(opts.decay_digits) * T::LN_10() / gamma;
        (far + span).min(T::c(650.0) / (n - T::one()).max(T::one()))
    }

    /// Radial panel boundaries resolving the components centred at `sigma`.
    fn features(&self, sigma: T, end: T) -> Vec<T> {
        let mut bp = Vec::new();
        for (u, s) in &self.radial {
            if (*s - sigma).abs() < T::c(1e-9) {
                bp.extend(thin(&u.panel_boundaries(), end));
            }
        }
        for (b, x0) in &self.bubbles {
            let s = T::c(2.0) * x0.atanh();
            if (s - sigma).abs() < T::c(1e-9) {
                let stretch = T::c(2.0) / (T::one() - *x0 * *x0);
                let mut x = stretch * b.epsilon() / T::c(16.0);
                let top = stretch * b.outer() * T::c(2.0);
                while x < top {
                    bp.push(x);
                    x = x * T::c(2.0);
                }
                for j in 0..=8 {
                    bp.push(stretch * (b.inner() + (b.outer() - b.inner()) * T::n(j) / T::c(8.0)));
                }
            }
        }
        let mut x = T::zero();
        while x < end {
            bp.push(x);
            x += T::one();
        }
        bp.push(end);
        bp.retain(|x| *x >= T::zero() && *x <= end);
        bp.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        bp.dedup();
        bp
    }

    /// `int over the cell of centre i of density(v, |grad v|^2) dV`, truncated at geodesic
    /// radius `limit` about the centre.
    fn cell<D>(&self, i: usize, density: &D, limit: Option<T>, opts: &SuperpositionOptions) -> Result<(T, T)>
    where
        D: Fn(T, T) -> T,
    {
        let sigma = self.centres[i];
        let right = self.centres.get(i + 1).map(|s| (*s - sigma) / T::c(2.0));
        let left = if i > 0 { Some((sigma - self.centres[i - 1]) / T::c(2.0)) } else { None };
        let end = limit.unwrap_or_else(|| self.reach(sigma, opts));
        let exit = |theta: T| -> T {
            let c = theta.cos();
            let mut te = end;
            if let Some(h) = right {
                let th = h.tanh();
                if c > th {
                    te = te.min((th / c).atanh());
                }
            }
            if let Some(h) = left {
                let th = h.tanh();
                if -c > th {
                    te = te.min((th / -c).atanh());
                }
            }
            te
        };
        let features = self.features(sigma, end);
        let rel = T::c(opts.rel_tol);
        let rule = GaussLegendre::<T>::new(10);
        let m = self.params.dim - 1;
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let ray = |theta: T| -> T {
            let te = exit(theta);
            let mut bp: Vec<T> = features.iter().copied().filter(|x| *x < te).collect();
            bp.push(te);
            let r = adaptive(
                |t: T| {
                    if t <= T::zero() {
                        return T::zero();
                    }
                    let (v, gt, gth) = self.sample(sigma, t, theta);
                    let e = density(v, gt * gt + gth * gth);
                    if e == T::zero() {
                        e
                    } else {
                        e * t.sinh().powi(m as i32)
                    }
                },
                &bp,
                &rule,
                AdaptiveOptions::rel(rel),
            );
            if !r.converged || !r.value.is_finite() {
                failure.borrow_mut().get_or_insert(Error::Quadrature { estimate: r.value.f64(), error: r.error.f64() });
            }
            r.value * theta.sin().powi(m as i32 - 1)
        };
        let mut tb: Vec<T> = (0..=8).map(|j| T::PI() * T::n(j) / T::c(8.0)).collect();
        if let Some(h) = right {
            tb.push(h.tanh().acos());
        }
        if let Some(h) = left {
            tb.push(T::PI() - h.tanh().acos());
        }
        tb.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        tb.dedup();
        let r = adaptive(ray, &tb, &rule, AdaptiveOptions::rel(rel));
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        if !r.converged || !r.value.is_finite() {
            return Err(Error::Quadrature { estimate: r.value.f64(), error: r.error.f64() });
        }
        let w = sphere_area::<T>(m);
        Ok((r.value * w, r.error * w))
    }

    fn integrate<D: Fn(T, T) -> T>(&self, density: &D, opts: &SuperpositionOptions) -> Result<(T, T)> {
        let (mut v, mut e) = (T::zero(), T::zero());
        for i in 0..self.centres.len() {
            let (a, b) = self.cell(i, density, None, opts)?;
            v += a;
            e += b;
        }
        Ok((v, e))
    }

    /// Smallest distance between distinct centres.
    fn separation(&self) -> Option<T> {
        self.centres.windows(2).map(|w| w[1] - w[0]).fold(None, |m, d| Some(m.map_or(d, |x: T| x.min(d))))
    }
}

/// `I_lambda` of the `n`-th superposition with its quadrature error estimate.
pub fn superposition_energy<T: Real>(spec: &PSSequenceSpec<T>, n: usize, opts: &SuperpositionOptions) -> Result<(T, T)> {
    if n >= spec.len() {
        return Err(Error::InvalidParams(format!("term {n} out of range 0..{}", spec.len())));
    }
    let ax = spec.axial(n)?;
    if ax.centres.is_empty() {
        return Ok((T::zero(), T::zero()));
    }
    let p = spec.params.p;
    let lambda = spec.params.lambda;
    let density = |v: T, g2: T| {
        let nl = if v == T::zero() { T::zero() } else { v.abs().powf(p + T::one()) / (p + T::one()) };
        (g2 - lambda * v * v) / T::c(2.0) - nl
    };
    ax.integrate(&density, opts)
}

/// Sequence of copies of `U` centred at `centres`, moving away from the origin.
pub fn make_translated_sequence<T: Real>(
    params: &Params<T>,
    profile: &RadialProfile<T>,
    centres: &[DiscPoint<T>],
) -> Result<PSSequenceSpec<T>> {
    let mut last = T::zero();
    for c in centres {
        let d = c.geodesic_radius();
        if d < last {
            return Err(Error::InvalidParams("centres must move away from the origin".into()));
        }
        last = d;
    }
    let terms = centres.iter().map(|c| PSTerm { translations: vec![c.clone()], bubbles: Vec::new() }).collect();
    PSSequenceSpec::new(params.clone(), None, Some(profile.clone()), terms)
}

/// Bubbles at `x0` with the scales `eps_list`, strictly decreasing.
pub fn make_concentrating_sequence<T: Real>(
    params: &Params<T>,
    x0: &DiscPoint<T>,
    eps_list: &[T],
) -> Result<PSSequenceSpec<T>> {
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParams("scales must decrease".into()));
    }
    let terms = eps_list
        .iter()
        .map(|e| Ok(PSTerm { translations: Vec::new(), bubbles: vec![Bubble::new(*e, x0.clone())?] }))
        .collect::<Result<Vec<_>>>()?;
    PSSequenceSpec::new(params.clone(), None, None, terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizationEntry<T> {
    pub n: usize,
    #[serde(rename = "I_lambda")]
    pub energy: T,
    pub level: T,
    /// `|I - level| / |level|`
    pub gap: T,
    pub quadrature_error: T,
    /// Smallest hyperbolic distance between distinct centres.
    pub separation: Option<T>,
    pub min_epsilon: Option<T>,
    pub overlapping: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationReport<T> {
    pub level: T,
    pub entries: Vec<QuantizationEntry<T>>,
    /// Gaps do not increase along the sequence, up to quadrature error.
    pub monotone: bool,
    pub max_gap: T,
}

/// Energy of every term against the predicted level.
pub fn quantization_check<T: Real>(spec: &PSSequenceSpec<T>, opts: &SuperpositionOptions) -> Result<QuantizationReport<T>> {
    let entries = (0..spec.len())
        .into_par_iter()
        .map(|n| {
            let (e, err) = superposition_energy(spec, n, opts)?;
            let ax = spec.axial(n)?;
            let separation = ax.separation();
            let min_epsilon = spec.terms[n].bubbles.iter().map(|b| b.epsilon()).fold(None, |m, e| Some(m.map_or(e, |x: T| x.min(e))));
            Ok(QuantizationEntry {
                n,
                energy: e,
                level: spec.level,
                gap: (e - spec.level).abs() / spec.level.abs(),
                quadrature_error: err,
                separation,
                min_epsilon,
                overlapping: separation.map_or(false, |s| s < T::c(opts.min_separation)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = entries.windows(2).all(|w| {
        let slack = (w[0].quadrature_error + w[1].quadrature_error) / spec.level.abs();
        w[1].gap <= w[0].gap + slack
    });
    let max_gap = entries.iter().map(|e| e.gap).fold(T::zero(), T::max);
    Ok(QuantizationReport { level: spec.level, entries, monotone, max_gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TranslationEntry<T> {
    pub n: usize,
    /// `d(0, b_n)`
    pub distance: T,
    #[serde(rename = "I_lambda")]
    pub energy: T,
    /// `|I(u_n) - I(U)| / |I(U)|`
    pub energy_gap: T,
    /// `int_{B(0, R)} |u_n|^{p+1} dV`
    pub origin_mass: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationReport<T> {
    pub radius: T,
    pub entries: Vec<TranslationEntry<T>>,
    pub max_energy_gap: T,
    pub mass_decreasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationEntry<T> {
    pub n: usize,
    pub epsilon: T,
    #[serde(rename = "I_lambda")]
    pub energy: T,
    /// `|I(v_n) - J(V_1)| / J(V_1)`
    pub energy_gap: T,
    /// Share of `int |v_n|^{2*} dV` outside the Euclidean ball of radius `sqrt(eps)` about `x0`.
    pub outside_fraction: T,
    /// `c_N^2 int |grad v_eps|^2 dx`, tending to `S^{N/2}`.
    pub gradient_term: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport<T> {
    #[serde(rename = "J_V1")]
    pub bubble_energy: T,
    #[serde(rename = "S_pow_N_half")]
    pub s_pow_n_half: T,
    pub entries: Vec<ConcentrationEntry<T>>,
    pub energy_gap_decreasing: bool,
    pub outside_decreasing: bool,
}

fn euclidean_shell<T: Real, F: Fn(T) -> T>(f: F, eps: T, a: T, b: T, dim: usize, rel: T) -> Result<T> {
    let mut bp = vec![a];
    let mut x = (eps / T::c(16.0)).max(a);
    while x < b {
        if x > a {
            bp.push(x);
        }
        x = x * T::c(2.0);
    }
    bp.push(b);
    let rule = GaussLegendre::new(10);
    let r = adaptive(|rho: T| f(rho) * rho.powi(dim as i32 - 1), &bp, &rule, AdaptiveOptions::rel(rel));
    if !r.converged || !r.value.is_finite() {
        return Err(Error::Quadrature { estimate: r.value.f64(), error: r.error.f64() });
    }
    Ok(r.value * sphere_area::<T>(dim))
}

impl<T: Real> PSSequenceSpec<T> {
    /// Energies of the terms and their `L^{p+1}` mass in the geodesic ball `B(0, radius)`.
    pub fn translation_report(&self, radius: T, opts: &SuperpositionOptions) -> Result<TranslationReport<T>> {
        let target = self
            .translated_energy
            .ok_or_else(|| Error::InvalidParams("sequence has no translated component".into()))?;
        let q = self.params.p + T::one();
        let entries = (0..self.len())
            .into_par_iter()
            .map(|n| {
                let (e, _) = superposition_energy(self, n, opts)?;
                let ax = self.axial(n)?;
                let origin = Axial { params: ax.params, radial: ax.radial.clone(), bubbles: Vec::new(), centres: vec![T::zero()] };
                let mass = |v: T, _g2: T| if v == T::zero() { v } else { v.abs().powf(q) };
                let (m, _) = origin.cell(0, &mass, Some(radius), opts)?;
                let distance = self.terms[n].translations.iter().map(|b| b.geodesic_radius()).fold(T::zero(), T::max);
                Ok(TranslationEntry { n, distance, energy: e, energy_gap: (e - target).abs() / target.abs(), origin_mass: m })
            })
            .collect::<Result<Vec<_>>>()?;
        let max_energy_gap = entries.iter().map(|e| e.energy_gap).fold(T::zero(), T::max);
        let mass_decreasing = entries.windows(2).all(|w| w[1].origin_mass <= w[0].origin_mass);
        Ok(TranslationReport { radius, entries, max_energy_gap, mass_decreasing })
    }

    /// Energies, concentration and gradient terms of single-bubble terms.
    pub fn concentration_report(&self, opts: &SuperpositionOptions) -> Result<ConcentrationReport<T>> {
        let target = self.bubble_energy.ok_or_else(|| Error::InvalidParams("sequence has no bubble".into()))?;
        let dim = self.params.dim;
        let c = talenti_constant::<T>(dim);
        let q = critical_power::<T>(dim);
        let rel = T::c(opts.rel_tol);
        let entries = (0..self.len())
            .into_par_iter()
            .map(|n| {
                let b = self.terms[n].bubbles.first().ok_or_else(|| Error::InvalidParams("term without bubble".into()))?;
                let (e, _) = superposition_energy(self, n, opts)?;
                let eps = b.epsilon();
                let cut = eps.sqrt().min(b.outer());
                let crit = |rho: T| b.radial(rho).0.powf(q);
                let total = euclidean_shell(crit, eps, T::zero(), b.outer(), dim, rel)?;
                let outside = euclidean_shell(crit, eps, cut, b.outer(), dim, rel)?;
                let grad = euclidean_shell(|rho: T| b.radial(rho).1.powi(2), eps, T::zero(), b.outer(), dim, rel)?;
                Ok(ConcentrationEntry {
                    n,
                    epsilon: eps,
                    energy: e,
                    energy_gap: (e - target).abs() / target,
                    outside_fraction: outside / total,
                    gradient_term: c * c * grad,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let energy_gap_decreasing = entries.windows(2).all(|w| w[1].energy_gap <= w[0].energy_gap);
        let outside_decreasing = entries.windows(2).all(|w| w[1].outside_fraction <= w[0].outside_fraction);
        Ok(ConcentrationReport {
            bubble_energy: target,
            s_pow_n_half: target * T::n(dim),
            entries,
            energy_gap_decreasing,
            outside_decreasing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;
    use crate::radial::{find_nodal_solution, RadialConfig};

    fn ground_state() -> (Params<f64>, RadialProfile<f64>) {
        let params = Params::new(3, 3.0, 0.0).unwrap();
        let u = find_nodal_solution(0, &params, &RadialConfig::default()).unwrap().profile;
        (params, u)
    }

    fn on_axis(dim: usize, t: f64) -> DiscPoint<f64> {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        DiscPoint::from_geodesic(&e, t).unwrap()
    }

    fn frame_point(sigma: f64, t: f64, theta: f64) -> DiscPoint<f64> {
        let a = (sigma / 2.0).tanh();
        let r = (t / 2.0).tanh();
        let (zr, zi) = (r * theta.cos(), r * theta.sin());
        let (nr, ni) = (zr + a, zi);
        let (dr, di) = (1.0 + a * zr, a * zi);
        let den = dr * dr + di * di;
        DiscPoint::new(vec![(nr * dr + ni * di) / den, (ni * dr - nr * di) / den, 0.0]).unwrap()
    }

    #[test]
    fn axis_distance_matches_the_ball_metric() {
        for &sigma in &[0.0, 0.7, -1.3] {
            for &s in &[0.0, 2.0, -0.5, 3.5] {
                for i in 1..12 {
                    let t = 0.37 * i as f64;
                    for j in 0..9 {
                        let th = std::f64::consts::PI * (j as f64 + 0.3) / 9.0;
                        let (d, dt, dth) = axis_distance(t, th, s - sigma);
                        let exact = distance(&frame_point(sigma, t, th), &on_axis(3, s)).unwrap();
                        assert!((d - exact).abs() < 1e-9 * (1.0 + exact), "{d} {exact}");
                        let h = 1e-6;
                        let ft = (axis_distance(t + h, th, s - sigma).0 - axis_distance(t - h, th, s - sigma).0) / (2.0 * h);
                        let fth = (axis_distance(t, th + h, s - sigma).0 - axis_distance(t, th - h, s - sigma).0)
                            / (2.0 * h)
                            / t.sinh();
                        assert!((ft - dt).abs() < 1e-6 && (fth - dth).abs() < 1e-6, "{ft} {dt} {fth} {dth}");
                    }
                }
            }
        }
    }

    #[test]
    fn bubble_samples_match_the_evaluator() {
        let params = Params::<f64>::new(3, 5.0, 0.5).unwrap();
        let b = Bubble::new(0.2, on_axis(3, 0.4)).unwrap();
        let spec = PSSequenceSpec::new(params, None, None, vec![PSTerm { translations: vec![], bubbles: vec![b] }]).unwrap();
        let ax = spec.axial(0).unwrap();
        let f = spec.evaluator(0);
        let sigma = ax.centres[0];
        for i in 1..10 {
            let t = 0.1 * i as f64;
            for j in 0..7 {
                let th = std::f64::consts::PI * (j as f64 + 0.5) / 7.0;
                let (v, gt, gth) = ax.sample(sigma, t, th);
                assert!((v - f(frame_point(sigma, t, th).coords())).abs() < 1e-10 * (1.0 + v.abs()));
                let h = 1e-6;
                let ft = (ax.sample(sigma, t + h, th).0 - ax.sample(sigma, t - h, th).0) / (2.0 * h);
                let fth = (ax.sample(sigma, t, th + h).0 - ax.sample(sigma, t, th - h).0) / (2.0 * h) / t.sinh();
                assert!((ft - gt).abs() < 1e-5 * (1.0 + gt.abs()), "{ft} {gt}");
                assert!((fth - gth).abs() < 1e-5 * (1.0 + gth.abs()), "{fth} {gth}");
            }
        }
    }

    #[test]
    fn translated_terms_keep_their_energy() {
        let (params, u) = ground_state();
        let target = energy(&u, &params, 1e-12).unwrap().i_lambda;
        let seq = make_translated_sequence(&params, &u, &[DiscPoint::origin(3), on_axis(3, 3.0), on_axis(3, 8.0)]).unwrap();
        let rep = seq.translation_report(1.0, &SuperpositionOptions::default()).unwrap();
        assert!((seq.level - target).abs() < 1e-12 * target);
        assert!(rep.max_energy_gap < 1e-6, "{rep:?}");
        assert!(rep.mass_decreasing && rep.entries[2].origin_mass < 1e-6 * rep.entries[0].origin_mass);
        let f = seq.evaluator(0);
        assert!((f(&[0.3, 0.1, 0.0]) - u.eval(2.0 * 0.1f64.sqrt().atanh())).abs() < 1e-14);
    }

    #[test]
    fn separated_copies_add_up() {
        let (params, u) = ground_state();
        let term = |d: f64| PSTerm { translations: vec![on_axis(3, -d / 2.0), on_axis(3, d / 2.0)], bubbles: vec![] };
        let spec = PSSequenceSpec::new(params, None, Some(u), vec![term(1.5), term(6.0), term(12.0)]).unwrap();
        let q = quantization_check(&spec, &SuperpositionOptions::default()).unwrap();
        assert!(q.monotone && q.entries[2].gap < 1e-2, "{q:?}");
        assert!(q.entries[0].overlapping && !q.entries[2].overlapping);
    }

    #[test]
    fn concentrating_energies_approach_the_bubble_level() {
        let params = Params::<f64>::new(3, 5.0, 0.5).unwrap();
        let seq = make_concentrating_sequence(&params, &DiscPoint::origin(3), &[1e-1, 1e-2, 1e-3]).unwrap();
        let r = seq.concentration_report(&SuperpositionOptions::default()).unwrap();
        assert!(r.energy_gap_decreasing && r.outside_decreasing, "{r:?}");
        let dev: Vec<f64> = r.entries.iter().map(|e| (e.gradient_term - r.s_pow_n_half).abs()).collect();
        assert!(dev[2] < dev[1] && dev[1] < dev[0], "{dev:?}");
        assert!((dev[1] / dev[2] - 10.0).abs() < 0.5, "{dev:?}");
    }

    #[test]
    fn invalid_sequences_are_rejected() {
        let (params, u) = ground_state();
        let off = DiscPoint::new(vec![0.0, 0.5, 0.0]).unwrap();
        let bad = PSTerm { translations: vec![on_axis(3, 1.0), off], bubbles: vec![] };
        assert!(PSSequenceSpec::new(params.clone(), None, Some(u.clone()), vec![bad]).is_err());
        let bubble = PSTerm { translations: vec![], bubbles: vec![Bubble::new(0.1, DiscPoint::origin(3)).unwrap()] };
        assert!(PSSequenceSpec::new(params.clone(), None, None, vec![bubble]).is_err());
        assert!(make_translated_sequence(&params, &u, &[on_axis(3, 2.0), on_axis(3, 1.0)]).is_err());
        let crit = Params::new(3, 5.0, 0.5).unwrap();
        assert!(make_concentrating_sequence(&crit, &DiscPoint::origin(3), &[1e-2, 1e-1]).is_err());
    }
}
