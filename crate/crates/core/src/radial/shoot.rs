use super::decay::fit_decay_rate;
use super::profile::{Core, ExpTail, RadialFunction, RadialProfile};
use super::{forcing, radial_ode_rhs, series_start, Classification, RadialConfig};
use crate::energy;
use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::params::Params;
use crate::scalar::Real;
use rayon::prelude::*;
use serde::Serialize;

/// A classified trajectory with its profile and energy.
#[derive(Debug, Clone, Serialize)]
pub struct ShootingResult<T> {
    pub s: T,
    pub classification: Classification,
    pub node_count: usize,
    /// Fitted exponential rate of the tail, if a clean fit was possible.
    pub decay_rate: Option<T>,
    /// `I_lambda` of the profile over its computed range.
    pub energy: T,
    /// `int (|u'|^2 - lambda u^2) dV`.
    pub lambda_norm: T,
    /// Shooting bracket `[lo, hi]` around `s` when found by bisection.
    pub bracket: Option<(T, T)>,
    /// Relative derivative mismatch where the forward and backward segments meet.
    pub match_defect: Option<T>,
    #[serde(skip)]
    pub profile: RadialProfile<T>,
}

struct Track<T> {
    t: Vec<T>,
    u: Vec<T>,
    du: Vec<T>,
    ddu: Vec<T>,
    zeros: usize,
    blown: bool,
    last: [T; 2],
    core: Option<Core<T>>,
    /// `(w, w', w'')` per recorded node when integrating around `core`.
    split: Vec<[T; 3]>,
}

fn start_radius<T: Real>(s: T, params: &Params<T>, cfg: &RadialConfig) -> T {
    let f = forcing(s, params).abs();
    let t0 = T::c(cfg.t0);
    if f > T::zero() {
        t0.min(T::c(0.01) * (s.abs() / f).sqrt())
    } else {
        t0
    }
}

fn options<T: Real>(cfg: &RadialConfig) -> ode::Options<T> {
    ode::Options { rtol: T::c(cfg.rtol), max_step: T::c(0.5), group: 2, ..ode::Options::default() }
}

fn core_for<T: Real>(s: T, params: &Params<T>) -> Option<Core<T>> {
    (params.dim >= 3 && params.is_critical() && s != T::zero()).then(|| Core::new(s, params.dim))
}

/// `|b + w|^{p-1}(b + w) - |b|^{p-1} b` without cancellation for small `w / b`.
fn nonlinear_increment<T: Real>(b: T, w: T, p: T) -> T {
    if b == T::zero() {
        return super::nonlinearity(w, p);
    }
    let r = w / b;
    if r.abs() < T::c(0.5) {
        super::nonlinearity(b, p) * (p * r.ln_1p()).exp_m1()
    } else {
        super::nonlinearity(b + w, p) - super::nonlinearity(b, p)
    }
}

/// Forward integration from the pole to `t_end`.
///
/// At the critical exponent the deviation `w = u - B` from the conformal bubble is
/// integrated instead of `u`, so that large `s` keep full relative accuracy in `w`.
/// `stop(t, y)` receives `(u, u')` and may end the integration early.
fn track<T: Real, S>(s: T, params: &Params<T>, cfg: &RadialConfig, t_end: T, record: bool, mut stop: S) -> Result<Track<T>>
where
    S: FnMut(T, &[T; 2]) -> bool,
{
    let t0 = start_radius(s, params, cfg);
    let core = core_for(s, params);
    let n = T::n(params.dim);
    let y = series_start(s, t0, params);
    let mut y0 = [y[0], y[1]];
    if core.is_some() {
        let lt = params.lambda_tilde();
        let a = -lt * s / (T::c(2.0) * n);
        let b2 = (-params.conformal_threshold() * s - super::nonlinearity(s, params.p)) / (T::c(2.0) * n);
        let slope = params.p * s.abs().powf(params.p - T::one());
        let b = (-params.lambda * a - lt * b2 - slope * a - T::c(2.0) * a * (n - T::one()) / T::c(3.0))
            / (T::c(4.0) * (n + T::c(2.0)));
        let t2 = t0 * t0;
        y0[0] = a * t2 + b * t2 * t2;
        y0[1] = T::c(2.0) * a * t0 + T::c(4.0) * b * t2 * t0;
    }
    let m = T::n(params.dim - 1);
    let lt = params.lambda_tilde();
    let rhs = |t: T, y: &[T; 2]| {
        let d = m / t.tanh();
        match &core {
            None => [y[1], -d * y[1] + forcing(y[0], params)],
            Some(c) => {
                let (b, _) = c.eval(t);
                [y[1], -d * y[1] - params.lambda * y[0] - lt * b - nonlinear_increment(b, y[0], params.p)]
            }
        }
    };
    let full = |t: T, y: &[T; 2]| -> [T; 2] {
        match &core {
            None => *y,
            Some(c) => {
                let (b, db) = c.eval(t);
                [b + y[0], db + y[1]]
            }
        }
    };
    let limit = T::c(cfg.blow_up) * s.abs().max(T::one());
    let opts = ode::Options { initial_step: Some(t0 * T::c(0.5)), ..options(cfg) };
    let mut tr = Track {
        t: Vec::new(),
        u: Vec::new(),
        du: Vec::new(),
        ddu: Vec::new(),
        zeros: 0,
        blown: false,
        last: full(t0, &y0),
        core: None,
        split: Vec::new(),
    };
    if record {
        tr.t.push(T::zero());
        tr.u.push(s);
        tr.du.push(T::zero());
        tr.ddu.push(forcing(s, params) / n);
    }
    let mut prev_sign = s.signum();
    let mut split: Vec<[T; 3]> = Vec::new();
    if record && core.is_some() {
        split.push([T::zero(), T::zero(), -params.lambda_tilde() * s / n]);
    }
    // state `(t, u, u')` where the bubble starts to dominate and `u` is integrated directly
    let mut handover: Option<(T, [T; 2])> = None;
    let mut visit = |t: T, v: [T; 2], ddu: T, w: Option<[T; 3]>| {
        if record {
            tr.t.push(t);
            tr.u.push(v[0]);
            tr.du.push(v[1]);
            tr.ddu.push(ddu);
            if let Some(c) = &core {
                split.push(w.unwrap_or_else(|| {
                    let (b, db, ddb) = c.eval2(t);
                    [v[0] - b, v[1] - db, ddu - ddb]
                }));
            }
        }
        if v[0] != T::zero() {
            if v[0].signum() != prev_sign {
                tr.zeros += 1;
            }
            prev_sign = v[0].signum();
        }
        tr.last = v;
        if v[0].abs() > limit {
            tr.blown = true;
            return StepControl::Stop;
        }
        if stop(t, &v) {
            StepControl::Stop
        } else {
            StepControl::Continue
        }
    };
    match &core {
        None => {
            ode::integrate(rhs, t0, y0, t_end, &opts, |t, y, dy| visit(t, *y, dy[1], None))?;
        }
        Some(c) => {
            ode::integrate(rhs, t0, y0, t_end, &opts, |t, y, dy| {
                let v = full(t, y);
                let ddu = radial_ode_rhs(t, v, params)[1];
                let control = visit(t, v, ddu, Some([y[0], y[1], dy[1]]));
                if control == StepControl::Continue && c.eval(t).0.abs() > v[0].abs() + v[1].abs() {
                    handover = Some((t, v));
                    return StepControl::Stop;
                }
                control
            })?;
        }
    }
    if let Some((t1, v1)) = handover {
        let direct = |t: T, y: &[T; 2]| radial_ode_rhs(t, *y, params);
        let mut first = true;
        ode::integrate(direct, t1, v1, t_end, &options(cfg), |t, y, dy| {
            if std::mem::take(&mut first) {
                return StepControl::Continue;
            }
            visit(t, *y, dy[1], None)
        })?;
    }
    tr.core = core;
    tr.split = split;
    Ok(tr)
}

fn track_profile<T: Real>(s: T, dim: usize, tr: Track<T>) -> RadialProfile<T> {
    let profile = RadialProfile::new(dim, s, tr.t, tr.u, tr.du, tr.ddu, None, None);
    match tr.core {
        Some(c) => {
            let (w, dw, ddw) = unzip3(&tr.split);
            profile.with_core(c, w, dw, ddw)
        }
        None => profile,
    }
}

fn unzip3<T: Copy>(v: &[[T; 3]]) -> (Vec<T>, Vec<T>, Vec<T>) {
    (v.iter().map(|x| x[0]).collect(), v.iter().map(|x| x[1]).collect(), v.iter().map(|x| x[2]).collect())
}

struct Probe<T> {
    n_eff: usize,
    slow: T,
}

fn probe<T: Real>(s: T, params: &Params<T>, cfg: &RadialConfig) -> Result<Probe<T>> {
    let tr = track(s, params, cfg, T::c(cfg.probe_t), false, |_, _| false)?;
    let (cm, cp) = params.decay_rates();
    let [u, v] = tr.last;
    let slow = (v + cp * u) / (cp - cm);
    let extra = usize::from(!tr.blown && slow != T::zero() && slow.signum() != u.signum());
    Ok(Probe { n_eff: tr.zeros + extra, slow })
}

/// Number of sign changes the trajectory from `u(0) = s` eventually makes.
///
/// The zeros seen up to the probe radius are counted, plus one if the slow far-field
/// component has the opposite sign of the current value.
pub fn effective_nodes<T: Real>(s: T, params: &Params<T>, cfg: &RadialConfig) -> Result<usize> {
    if s == T::zero() {
        return Ok(0);
    }
    Ok(probe(s, params, cfg)?.n_eff)
}

/// `n` log-spaced values from `s_min` to `s_max`.
pub fn log_grid<T: Real>(s_min: f64, s_max: f64, n: usize) -> Vec<T> {
    if n < 2 {
        return vec![T::c(s_min)];
    }
    let (a, b) = (s_min.ln(), s_max.ln());
    (0..n).map(|i| T::c((a + (b - a) * i as f64 / (n - 1) as f64).exp())).collect()
}

/// A change of the effective node count between neighbouring grid values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition<T> {
    pub s_lo: T,
    pub s_hi: T,
    pub from: usize,
    pub to: usize,
}

/// Effective node count changes over a log-spaced grid of `n` values in `[s_min, s_max]`.
pub fn transitions<T: Real>(
    params: &Params<T>,
    cfg: &RadialConfig,
    s_min: f64,
    s_max: f64,
    n: usize,
) -> Result<Vec<Transition<T>>> {
    let grid = log_grid::<T>(s_min, s_max, n);
    let counts: Vec<usize> = grid.par_iter().map(|s| effective_nodes(*s, params, cfg)).collect::<Result<_>>()?;
    Ok(grid
        .windows(2)
        .zip(counts.windows(2))
        .filter(|(_, c)| c[0] != c[1])
        .map(|(s, c)| Transition { s_lo: s[0], s_hi: s[1], from: c[0], to: c[1] })
        .collect())
}

/// Decaying radial solution with exactly `k` sign changes and `u(0) > 0`.
///
/// Scans `s` upward from `cfg.s_min`, one decade at a time, for the first point where the
/// effective node count exceeds `k`, then bisects that transition and rebuilds the profile.
pub fn find_nodal_solution<T: Real>(k: usize, params: &Params<T>, cfg: &RadialConfig) -> Result<ShootingResult<T>> {
    params.validate()?;
    let ppd = cfg.points_per_decade.max(1);
    let mut prev: Option<(T, usize)> = None;
    let mut decade = 0usize;
    loop {
        let pts: Vec<T> = (0..ppd)
            .map(|j| T::c(cfg.s_min * 10f64.powf((decade * ppd + j) as f64 / ppd as f64)))
            .take_while(|s| s.f64() <= cfg.s_limit)
            .collect();
        if pts.is_empty() {
            break;
        }
        let counts: Vec<usize> = pts.par_iter().map(|s| effective_nodes(*s, params, cfg)).collect::<Result<_>>()?;
        for (s, c) in pts.into_iter().zip(counts) {
            match prev {
                None if c > k => {
                    return Err(Error::NotFound(format!(
                        "already {c} effective nodes at s = {s}, more than the requested {k}"
                    )))
                }
                Some((lo, cl)) if cl <= k && c > k => return refine(k, lo, s, params, cfg),
                _ => {}
            }
            prev = Some((s, c));
        }
        decade += 1;
    }
    Err(Error::NotFound(format!("no solution with {k} nodes for s up to {:e}", cfg.s_limit)))
}

fn refine<T: Real>(k: usize, lo: T, hi: T, params: &Params<T>, cfg: &RadialConfig) -> Result<ShootingResult<T>> {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..cfg.max_bisections {
        let mid = (lo + hi) / T::c(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if effective_nodes(mid, params, cfg)? <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (pl, ph) = (probe(lo, params, cfg)?, probe(hi, params, cfg)?);
    let mut s = (lo + hi) / T::c(2.0);
    if pl.slow.signum() != ph.slow.signum() {
        let sec = lo + (hi - lo) * pl.slow / (pl.slow - ph.slow);
        if sec.is_finite() && sec >= lo && sec <= hi {
            s = sec;
        }
    }
    let mut result = build_solution(s, lo, hi, params, cfg)?;
    if result.node_count != k {
        return Err(Error::Numerical(format!(
            "profile at s = {s} has {} nodes, expected {k}",
            result.node_count
        )));
    }
    result.bracket = Some((lo, hi));
    Ok(result)
}

/// Smallest radius considered for joining the forward and backward segments.
const MATCH_FROM: f64 = 1.0;

struct Backward<T> {
    t: Vec<T>,
    u: Vec<T>,
    du: Vec<T>,
    ddu: Vec<T>,
    end: [T; 2],
}

/// Integrates inward from `(a, -c_+ a)` at `t_far` down to `t_cut`.
fn backward<T: Real>(a: T, t_far: T, t_cut: T, params: &Params<T>, cfg: &RadialConfig, record: bool) -> Result<Backward<T>> {
    let cp = params.decay_rate();
    let span = t_far - t_cut;
    let rhs = |tau: T, y: &[T; 2]| {
        let d = radial_ode_rhs(t_far - tau, *y, params);
        [-d[0], -d[1]]
    };
    let mut out = Backward { t: Vec::new(), u: Vec::new(), du: Vec::new(), ddu: Vec::new(), end: [a, -cp * a] };
    let opts = options(cfg);
    let end = ode::integrate(rhs, T::zero(), [a, -cp * a], span, &opts, |tau, y, dy| {
        if record {
            out.t.push(if tau == span { t_cut } else { t_far - tau });
            out.u.push(y[0]);
            out.du.push(y[1]);
            out.ddu.push(-dy[1]);
        }
        StepControl::Continue
    })?;
    out.end = [end.y[0], end.y[1]];
    Ok(out)
}

/// Illinois regula falsi on a sign-change bracket; stops when `|f| <= tol` or `f` fails.
fn illinois<T: Real, F: Fn(T) -> Option<T>>(mut a: T, mut b: T, mut fa: T, mut fb: T, tol: T, f: &F) -> T {
    let mut side = 0i8;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c == a || c == b {
            break;
        }
        let Some(fc) = f(c) else { break };
        if fc.abs() <= tol {
            return c;
        }
        if (fc < T::zero()) == (fb < T::zero()) {
            b = c;
            fb = fc;
            if side == -1 {
                fa = fa / T::c(2.0);
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb = fb / T::c(2.0);
            }
            side = 1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

/// Scans tail amplitudes of both signs on a log grid around `reference`, solves
/// `pick(A) = target` in every sign change and returns the root with the smallest defect.
#[allow(clippy::too_many_arguments)]
fn bracket_amplitude<T: Real, P, D>(
    reference: T,
    t_far: T,
    t_cut: T,
    params: &Params<T>,
    cfg: &RadialConfig,
    pick: &P,
    target: T,
    defect: &D,
) -> Option<T>
where
    P: Fn(&Backward<T>) -> T + Sync,
    D: Fn(&Backward<T>) -> T + Sync,
{
    let per_decade = 8i32;
    let grid: Vec<T> = [-1.0, 1.0]
        .iter()
        .flat_map(|sg| {
            (-60 * per_decade..=12 * per_decade).map(move |j| T::c(sg * 10f64.powf(j as f64 / per_decade as f64)))
        })
        .map(|f| f * reference)
        .collect();
    let miss = |a: T| backward(a, t_far, t_cut, params, cfg, false).ok().map(|b| pick(&b) - target);
    let values: Vec<Option<T>> = grid.par_iter().map(|a| miss(*a)).collect();
    let mut best: Option<(T, T)> = None;
    for i in 0..grid.len() - 1 {
        let (Some(ml), Some(mh)) = (values[i], values[i + 1]) else { continue };
        if grid[i].signum() != grid[i + 1].signum() || !(ml * mh <= T::zero()) {
            continue;
        }
        let a = illinois(grid[i], grid[i + 1], ml, mh, target.abs() * T::c(1e-13), &miss);
        if let Ok(b) = backward(a, t_far, t_cut, params, cfg, false) {
            let d = defect(&b);
            if d.is_finite() && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((a, d));
            }
        }
    }
    best.map(|(a, _)| a)
}

/// Forward and backward segments are joined at the first radius past [`MATCH_FROM`] where
/// the trajectory from `s` and those from the bracket ends `lo`, `hi` drift apart by more
/// than `cfg.match_threshold`.
fn build_solution<T: Real>(s: T, lo: T, hi: T, params: &Params<T>, cfg: &RadialConfig) -> Result<ShootingResult<T>> {
    let (_, cp) = params.decay_rates();
    let t_limit = T::c(cfg.t_max_limit);
    let ends = [lo, hi]
        .par_iter()
        .map(|x| track(*x, params, cfg, t_limit, true, |_, _| false).map(|tr| track_profile(*x, params.dim, tr)))
        .collect::<Result<Vec<_>>>()?;
    let threshold = T::c(cfg.match_threshold);
    let from = T::c(MATCH_FROM);
    let fwd = track(s, params, cfg, t_limit, true, |t, y| {
        if t < from {
            return false;
        }
        let scale = y[0].hypot(y[1] / cp);
        ends.iter().any(|e| {
            let (v, d) = e.value(t);
            (y[0] - v).hypot((y[1] - d) / cp) > threshold * scale
        })
    })?;
    if fwd.blown {
        return Err(Error::Numerical(format!("trajectory from s = {s} blew up")));
    }
    let n = fwd.t.len();
    let t_cut = fwd.t[n - 1];
    let (uc, vc) = (fwd.u[n - 1], fwd.du[n - 1]);
    let t_far = t_cut + T::c(1e30f64.ln()) / cp;
    let decay = (-(cp) * (t_far - t_cut)).exp();
    let use_value = uc.abs() * cp >= T::c(0.1) * vc.abs();
    let target = if use_value { uc } else { vc };
    let pick = |b: &Backward<T>| if use_value { b.end[0] } else { b.end[1] };
    let mut a0 = if use_value { uc * decay } else { -vc / cp * decay };
    let mut m0 = pick(&backward(a0, t_far, t_cut, params, cfg, false)?) - target;
    let mut a1 = a0 * T::c(1.0 + 1e-3);
    let mut m1 = pick(&backward(a1, t_far, t_cut, params, cfg, false)?) - target;
    let tol = T::c(1e-14) * target.abs();
    for _ in 0..60 {
        if m1.abs() <= tol || m1 == m0 {
            break;
        }
        let a2 = a1 - m1 * (a1 - a0) / (m1 - m0);
        a0 = a1;
        m0 = m1;
        a1 = a2;
        m1 = match backward(a1, t_far, t_cut, params, cfg, false) {
            Ok(b) => pick(&b) - target,
            Err(_) => break,
        };
    }
    let defect_of = |b: &Backward<T>| {
        if use_value {
            (b.end[1] - vc).abs() / (vc.abs() + cp * uc.abs())
        } else {
            (b.end[0] - uc).abs() * cp / (vc.abs() + cp * uc.abs())
        }
    };
    let secant_ok = m1.is_finite() && m1.abs() <= T::c(1e-10) * target.abs();
    if !secant_ok || defect_of(&backward(a1, t_far, t_cut, params, cfg, false)?) > T::c(1e-6) {
        let reference = (uc.abs() + vc.abs() / cp) * decay;
        if let Some(a) = bracket_amplitude(reference, t_far, t_cut, params, cfg, &pick, target, &defect_of) {
            a1 = a;
        } else if !secant_ok {
            return Err(Error::Numerical(format!("tail matching at t = {t_cut} did not converge")));
        }
    }
    let back = backward(a1, t_far, t_cut, params, cfg, true)?;
    let defect = defect_of(&back);
    let (core, mut split) = (fwd.core, fwd.split);
    let (mut t, mut u, mut du, mut ddu) = (fwd.t, fwd.u, fwd.du, fwd.ddu);
    for i in (0..back.t.len()).rev() {
        t.push(back.t[i]);
        u.push(back.u[i]);
        du.push(back.du[i]);
        ddu.push(back.ddu[i]);
        if let Some(c) = &core {
            let (b, db, ddb) = c.eval2(back.t[i]);
            split.push([back.u[i] - b, back.du[i] - db, back.ddu[i] - ddb]);
        }
    }
    let tail = ExpTail { start: t_far, amplitude: a1, rate: cp };
    let mut profile = RadialProfile::new(params.dim, s, t, u, du, ddu, Some(tail), Some(t_cut));
    if let Some(c) = core {
        let (w, dw, ddw) = unzip3(&split);
        profile = profile.with_core(c, w, dw, ddw);
    }
    let rate = fit_decay_rate(&profile);
    let classification = match rate {
        Some(r) if (r - cp).abs() <= T::c(cfg.slope_rel) * cp => Classification::DecayingSolution,
        _ => Classification::Undetermined,
    };
    finish(s, classification, rate, profile, Some(defect), params, cfg)
}

fn finish<T: Real>(
    s: T,
    classification: Classification,
    decay_rate: Option<T>,
    profile: RadialProfile<T>,
    match_defect: Option<T>,
    params: &Params<T>,
    cfg: &RadialConfig,
) -> Result<ShootingResult<T>> {
    let report = energy::energy(&profile, params, T::c(cfg.quad_rel))?;
    Ok(ShootingResult {
        s,
        classification,
        node_count: profile.node_count(),
        decay_rate,
        energy: report.i_lambda,
        lambda_norm: report.gradient_term - params.lambda * report.mass_term,
        bracket: None,
        match_defect,
        profile,
    })
}

fn classify<T: Real>(profile: &RadialProfile<T>, params: &Params<T>, cfg: &RadialConfig) -> (Option<Classification>, Option<T>) {
    let (cm, cp) = params.decay_rates();
    let tol = T::c(cfg.slope_rel) * cp;
    let end = profile.values()[profile.len() - 1].abs();
    let small = end < T::c(cfg.decay_amplitude) * profile.s().abs().max(T::one());
    let rate = fit_decay_rate(profile);
    let class = match rate {
        Some(r) if (r - cp).abs() <= tol && small => Some(Classification::DecayingSolution),
        Some(r) if r <= cm + tol => Some(if profile.node_count() > 0 {
            Classification::SignChangeThenGrowth
        } else {
            Classification::Growth
        }),
        _ => None,
    };
    (class, rate)
}

/// Integrates from `u(0) = s` and classifies the trajectory.
///
/// The radius is doubled from `cfg.t_max` up to `cfg.t_max_limit` until the tail rate is
/// identified.
pub fn shoot<T: Real>(s: T, params: &Params<T>, cfg: &RadialConfig) -> Result<ShootingResult<T>> {
    params.validate()?;
    if s == T::zero() {
        let tm = T::c(cfg.t_max);
        let z = vec![T::zero(); 2];
        let profile = RadialProfile::new(params.dim, s, vec![T::zero(), tm], z.clone(), z.clone(), z, None, None);
        return finish(s, Classification::DecayingSolution, None, profile, None, params, cfg);
    }
    let mut t_end = T::c(cfg.t_max);
    let limit = T::c(cfg.t_max_limit);
    loop {
        let tr = track(s, params, cfg, t_end, true, |_, _| false)?;
        let blown = tr.blown;
        let profile = track_profile(s, params.dim, tr);
        if blown {
            return finish(s, Classification::BlowUp, None, profile, None, params, cfg);
        }
        let (class, rate) = classify(&profile, params, cfg);
        if let Some(c) = class {
            return finish(s, c, rate, profile, None, params, cfg);
        }
        if t_end >= limit {
            return finish(s, Classification::Undetermined, rate, profile, None, params, cfg);
        }
        t_end = (t_end * T::c(2.0)).min(limit);
    }
}

/// One row of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanEntry<T> {
    pub s: T,
    pub classification: Classification,
    pub node_count: usize,
    pub energy: T,
    pub decay_rate: Option<T>,
}

/// Per-`s` classifications in grid order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport<T> {
    pub entries: Vec<ScanEntry<T>>,
    /// Entries classified as decaying with at least one sign change.
    pub decaying_sign_changing: usize,
    pub undetermined: usize,
}

/// Classifies every trajectory of the grid, in parallel, keeping grid order.
pub fn classify_grid<T: Real>(params: &Params<T>, s_grid: &[T], cfg: &RadialConfig) -> Result<ScanReport<T>> {
    let entries: Vec<ScanEntry<T>> = s_grid
        .par_iter()
        .map(|s| {
            shoot(*s, params, cfg).map(|r| ScanEntry {
                s: *s,
                classification: r.classification,
                node_count: r.node_count,
                energy: r.energy,
                decay_rate: r.decay_rate,
            })
        })
        .collect::<Result<_>>()?;
    let decaying_sign_changing = entries
        .iter()
        .filter(|e| e.classification == Classification::DecayingSolution && e.node_count > 0)
        .count();
    let undetermined = entries.iter().filter(|e| e.classification == Classification::Undetermined).count();
    Ok(ScanReport { entries, decaying_sign_changing, undetermined })
}

/// Scan certifying that no trajectory of the grid is a decaying sign-changing solution.
///
/// Requires the critical exponent.
pub fn nonexistence_scan<T: Real>(params: &Params<T>, s_grid: &[T], cfg: &RadialConfig) -> Result<ScanReport<T>> {
    params.validate()?;
    if !params.is_critical() {
        return Err(Error::InvalidParams("the nonexistence scan needs the critical exponent".into()));
    }
    classify_grid(params, s_grid, cfg)
}

/// Largest normalised residual of the radial equation at interval midpoints.
///
/// The second derivative comes from the quintic interpolant; each term is scaled by the
/// sum of the magnitudes of all terms of the equation at that point.
pub fn ode_residual<T: Real>(profile: &RadialProfile<T>, params: &Params<T>) -> T {
    let t = profile.grid();
    let m = T::n(params.dim - 1);
    let mut worst = T::zero();
    for i in 0..t.len() - 1 {
        if t[i + 1] <= t[i] {
            continue;
        }
        let x = (t[i] + t[i + 1]) / T::c(2.0);
        let (v, d, dd) = profile.eval2(x);
        let damp = m / x.tanh() * d;
        let lin = params.lambda * v;
        let nl = super::nonlinearity(v, params.p);
        let scale = dd.abs() + damp.abs() + lin.abs() + nl.abs();
        if scale > T::zero() {
            worst = worst.max((dd + damp + lin + nl).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, p: f64, l: f64) -> Params<f64> {
        Params::new(n, p, l).unwrap()
    }

    #[test]
    fn zero_shot_is_trivial() {
        let r = shoot(0.0, &p(3, 3.0, 0.0), &RadialConfig::default()).unwrap();
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.node_count, 0);
        assert_eq!(r.profile.max_abs(), 0.0);
    }

    #[test]
    fn odd_symmetry() {
        let pr = p(3, 3.0, 0.0);
        let cfg = RadialConfig::default();
        let a = shoot(2.0, &pr, &cfg).unwrap();
        let b = shoot(-2.0, &pr, &cfg).unwrap();
        assert_eq!(a.profile.grid(), b.profile.grid());
        for (x, y) in a.profile.values().iter().zip(b.profile.values()) {
            assert_eq!(*x, -*y);
        }
        assert_eq!(a.classification, b.classification);
    }

    #[test]
    fn small_data_grows_without_sign_change() {
        let r = shoot(0.1, &p(4, 3.0, 2.1), &RadialConfig::default()).unwrap();
        assert_eq!(r.classification, Classification::Growth);
        let (cm, _) = p(4, 3.0, 2.1).decay_rates();
        assert!((r.decay_rate.unwrap() - cm).abs() < 0.05 * cm);
    }

    #[test]
    fn ground_state_three_dimensional() {
        let pr = p(3, 3.0, 0.0);
        let cfg = RadialConfig::default();
        let r = find_nodal_solution(0, &pr, &cfg).unwrap();
        assert_eq!(r.classification, Classification::DecayingSolution);
        assert_eq!(r.node_count, 0);
        assert!(ode_residual(&r.profile, &pr) < 1e-8);
        assert!(r.match_defect.unwrap() < 1e-6);
    }
}
