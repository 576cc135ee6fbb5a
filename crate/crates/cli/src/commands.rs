//! The subcommands. Each returns a JSON result and the tables to write next to it.

use crate::config::{parse_list, parse_range, CommandKind, ConfigError, Settings};
use crate::output::Table;
use hypersol::bubbles::{quantization_check, verify_bubble_estimates, Bubble, PSSequenceSpec, PSTerm, SuperpositionOptions};
use hypersol::correspond::{
    grushin_residual, grushin_to_hyperbolic, hsm_residual, hsm_to_hyperbolic, sample_points, transport_to_grushin,
    transport_to_hsm, Cylindrical, GrushinParams, HSMParams, PdeResidual,
};
use hypersol::energy::{energy, estimate_sobolev_constant, SobolevConfig};
use hypersol::geometry::DiscPoint;
use hypersol::radial::{
    classify_grid, decay_check, find_nodal_solution, log_grid, nonexistence_scan, ode_residual, RadialProfile, ScanReport,
    ShootingResult,
};
use hypersol::{Error, Params, Rational, RationalParams};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::Path;

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(e) => e.exit_code(),
        }
    }

    pub fn kind(&self) -> String {
        match self {
            Failure::Config(_) => "invalid-config".into(),
            Failure::Numeric(e) => format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or("error").to_string(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Config(e) => e.to_string(),
            Failure::Numeric(e) => e.to_string(),
        }
    }
}

pub struct Outcome {
    pub status: &'static str,
    /// A failed verification exits with the numerical failure code.
    pub passed: bool,
    pub result: Value,
    pub tables: Vec<Table>,
}

impl Outcome {
    fn ok(result: Value, tables: Vec<Table>) -> Self {
        Outcome { status: "ok", passed: true, result, tables }
    }

    fn verified(passed: bool, result: Value, tables: Vec<Table>) -> Self {
        Outcome { status: if passed { "ok" } else { "failed" }, passed, result, tables }
    }
}

pub fn run(command: CommandKind, s: &Settings) -> Result<Outcome, Failure> {
    match command {
        CommandKind::Solve => solve(s),
        CommandKind::Scan => scan(s, false),
        CommandKind::Nonexistence => scan(s, true),
        CommandKind::VerifyBubbles => verify_bubbles(s),
        CommandKind::PsDemo => ps_demo(s),
        CommandKind::Sobolev => sobolev(s),
        CommandKind::MapHsm => map_hsm(s),
        CommandKind::MapGrushin => map_grushin(s),
        CommandKind::VerifyDecay => verify_decay(s),
    }
}

fn rational_text(q: &Rational) -> String {
    if *q.denom() == 1 {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn exact_params(s: &Settings) -> Result<RationalParams, Failure> {
    Ok(Params::new(s.dim.expect("validated"), s.rational(&s.p), s.rational(&s.lambda))?)
}

fn params(s: &Settings) -> Result<Params<f64>, Failure> {
    Ok(to_real(&exact_params(s)?))
}

fn to_real(p: &RationalParams) -> Params<f64> {
    Params { dim: p.dim, p: p.p.to_f64().unwrap_or(f64::NAN), lambda: p.lambda.to_f64().unwrap_or(f64::NAN) }
}

fn params_json(p: &RationalParams) -> Value {
    json!({
        "N": p.dim,
        "p": rational_text(&p.p),
        "lambda": rational_text(&p.lambda),
        "p_value": p.p.to_f64(),
        "lambda_value": p.lambda.to_f64(),
        "critical": p.is_critical(),
        "regime": p.regime(),
    })
}

fn profile_table(profile: &RadialProfile<f64>) -> Table {
    let mut table = Table::new("profile.csv", &["t", "u", "u_prime"]);
    let mut last = f64::NEG_INFINITY;
    for ((t, u), du) in profile.grid().iter().zip(profile.values()).zip(profile.derivatives()) {
        if *t > last {
            table.rows.push(vec![(*t).into(), (*u).into(), (*du).into()]);
            last = *t;
        }
    }
    table
}

fn solution_json(sol: &ShootingResult<f64>, p: &Params<f64>, rel: f64) -> Result<Value, Failure> {
    let e = energy(&sol.profile, p, rel)?;
    Ok(json!({
        "s": sol.s,
        "classification": sol.classification,
        "node_count": sol.node_count,
        "energy": e.i_lambda,
        "energy_terms": e,
        "decay_rate": sol.decay_rate,
        "expected_decay_rate": p.decay_rate(),
        "lambda_norm": sol.lambda_norm,
        "ode_residual": ode_residual(&sol.profile, p),
        "match_defect": sol.match_defect,
        "bracket": sol.bracket,
    }))
}

fn solve_with(s: &Settings) -> Result<(Params<f64>, ShootingResult<f64>), Failure> {
    let p = params(s)?;
    let sol = find_nodal_solution(s.nodes.expect("validated"), &p, &s.radial())?;
    Ok((p, sol))
}

fn solve(s: &Settings) -> Result<Outcome, Failure> {
    let exact = exact_params(s)?;
    let (p, sol) = solve_with(s)?;
    let mut result = solution_json(&sol, &p, s.radial().quad_rel)?;
    result["params"] = params_json(&exact);
    Ok(Outcome::ok(result, vec![profile_table(&sol.profile)]))
}

fn scan_table(r: &ScanReport<f64>) -> Table {
    let mut table = Table::new("table.csv", &["s", "classification", "node_count", "energy"]);
    for e in &r.entries {
        table.rows.push(vec![e.s.into(), e.classification.as_str().into(), e.node_count.into(), e.energy.into()]);
    }
    table
}

fn scan(s: &Settings, nonexistence: bool) -> Result<Outcome, Failure> {
    let exact = exact_params(s)?;
    let p = to_real(&exact);
    let grid: Vec<f64> = log_grid(s.s_min.expect("validated"), s.s_max.expect("validated"), s.grid.expect("validated"));
    let cfg = s.radial();
    let report = if nonexistence { nonexistence_scan(&p, &grid, &cfg)? } else { classify_grid(&p, &grid, &cfg)? };
    let transitions: Vec<Value> = report
        .entries
        .windows(2)
        .filter(|w| w[0].node_count != w[1].node_count || w[0].classification != w[1].classification)
        .map(|w| json!({"s_low": w[0].s, "s_high": w[1].s, "from": w[0].classification, "to": w[1].classification,
            "nodes_from": w[0].node_count, "nodes_to": w[1].node_count}))
        .collect();
    let table = scan_table(&report);
    let mut result = json!({
        "params": params_json(&exact),
        "grid_points": grid.len(),
        "decaying_sign_changing": report.decaying_sign_changing,
        "undetermined": report.undetermined,
        "transitions": transitions,
        "entries": report.entries,
    });
    let mut outcome = Outcome::ok(Value::Null, vec![table]);
    if nonexistence {
        let found = report.decaying_sign_changing > 0;
        result["finding"] = json!(if found { "sign-changing solution found" } else { "none found" });
        outcome.status = if found { "found" } else { "none-found" };
    }
    outcome.result = result;
    Ok(outcome)
}

fn verify_bubbles(s: &Settings) -> Result<Outcome, Failure> {
    let (lo, hi) = parse_range(s.mu_decades.as_deref().expect("validated"))?;
    let grid: Vec<f64> = log_grid(lo, hi, s.grid.expect("validated"));
    let r = verify_bubble_estimates(s.dim.expect("validated"), &grid)?;
    let mut table = Table::new("slopes.csv", &["estimate", "predicted", "slope", "std_error", "applicable", "within_tolerance"]);
    for f in &r.fits {
        table.rows.push(vec![
            f.estimate.as_str().into(),
            f.predicted.into(),
            f.fit.slope.into(),
            f.fit.std_error.into(),
            if f.applicable { "true" } else { "false" }.into(),
            if f.within_tolerance { "true" } else { "false" }.into(),
        ]);
    }
    Ok(Outcome::verified(r.all_within_tolerance, serde_json::to_value(&r).expect("serialisable"), vec![table]))
}

fn ps_demo(s: &Settings) -> Result<Outcome, Failure> {
    let (p, sol) = solve_with(s)?;
    let distances = parse_list(s.distances.as_deref().expect("validated"))?;
    let epsilons = parse_list(s.epsilons.as_deref().expect("validated"))?;
    let dim = p.dim;
    let mut axis = vec![0.0; dim];
    axis[0] = 1.0;
    let origin = DiscPoint::origin(dim);
    let critical = p.is_critical();
    let term = |d: f64, eps: Option<f64>| -> Result<PSTerm<f64>, Failure> {
        let bubbles = match eps {
            Some(e) => vec![Bubble::new(e, origin.clone())?],
            None => Vec::new(),
        };
        Ok(PSTerm { translations: vec![DiscPoint::from_geodesic(&axis, d)?], bubbles })
    };
    let last_eps = critical.then(|| *epsilons.last().expect("non-empty"));
    let along_d: Vec<PSTerm<f64>> = distances.iter().map(|d| term(*d, last_eps)).collect::<Result<_, _>>()?;
    let opts = SuperpositionOptions::default();
    let spec_d = PSSequenceSpec::new(p.clone(), None, Some(sol.profile.clone()), along_d)?;
    let qd = quantization_check(&spec_d, &opts)?;
    let mut table = Table::new("quantization.csv", &["path", "n", "distance", "epsilon", "energy", "level", "gap"]);
    for (e, d) in qd.entries.iter().zip(&distances) {
        table.rows.push(vec![
            "distance".into(),
            e.n.into(),
            (*d).into(),
            last_eps.unwrap_or(f64::NAN).into(),
            e.energy.into(),
            e.level.into(),
            e.gap.into(),
        ]);
    }
    let mut result = json!({
        "solution": solution_json(&sol, &p, s.radial().quad_rel)?,
        "bubbles_included": critical,
        "along_distance": qd,
    });
    if critical {
        let d_last = *distances.last().expect("non-empty");
        let along_e: Vec<PSTerm<f64>> = epsilons.iter().map(|e| term(d_last, Some(*e))).collect::<Result<_, _>>()?;
        let spec_e = PSSequenceSpec::new(p.clone(), None, Some(sol.profile.clone()), along_e)?;
        let qe = quantization_check(&spec_e, &opts)?;
        for (e, eps) in qe.entries.iter().zip(&epsilons) {
            table.rows.push(vec![
                "epsilon".into(),
                e.n.into(),
                d_last.into(),
                (*eps).into(),
                e.energy.into(),
                e.level.into(),
                e.gap.into(),
            ]);
        }
        result["along_epsilon"] = serde_json::to_value(&qe).expect("serialisable");
    }
    Ok(Outcome::ok(result, vec![table]))
}

fn sobolev(s: &Settings) -> Result<Outcome, Failure> {
    let exact = exact_params(s)?;
    let p = to_real(&exact);
    let cfg = SobolevConfig { radial: s.radial(), ..Default::default() };
    let est = estimate_sobolev_constant(&p, &cfg)?;
    let mut result = serde_json::to_value(&est).expect("serialisable");
    result["params"] = params_json(&exact);
    let mut outcome = Outcome::ok(result, vec![profile_table(&est.minimizer_profile)]);
    if !est.converged {
        outcome.status = "unconverged";
    }
    Ok(outcome)
}

fn verify_decay(s: &Settings) -> Result<Outcome, Failure> {
    let (p, sol) = solve_with(s)?;
    let r = decay_check(&sol.profile, &p)?;
    let change = r.weighted_ratio_change();
    let passed = r.passed() && change.map_or(true, |c| c < 0.05);
    let result = json!({
        "solution": solution_json(&sol, &p, s.radial().quad_rel)?,
        "decay": r,
        "weighted_ratio_change": change,
        "refinement_tolerance": 0.05,
        "passed": passed,
    });
    Ok(Outcome::verified(passed, result, vec![profile_table(&sol.profile)]))
}

/// Re-solves the problem recorded in a `solve` report and checks that the same solution is found.
fn load_solution(path: &Path) -> Result<(Params<f64>, ShootingResult<f64>), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read solution {}: {e}", path.display())))?;
    let report: Value =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("invalid solution report {}: {e}", path.display())))?;
    if report["command"] != "solve" {
        return Err(ConfigError(format!("{} is not a solve report", path.display())).into());
    }
    let settings: Settings = serde_json::from_value(report["config"].clone())
        .map_err(|e| ConfigError(format!("invalid config in {}: {e}", path.display())))?;
    let stored = report["result"]["s"]
        .as_f64()
        .ok_or_else(|| ConfigError(format!("{} has no solution value s", path.display())))?;
    let (p, sol) = solve_with(&settings)?;
    if (sol.s - stored).abs() > 1e-9 * stored.abs().max(1.0) {
        return Err(Error::Numerical(format!("re-solved s = {} differs from the stored {stored}", sol.s)).into());
    }
    Ok((p, sol))
}

fn source_solution(s: &Settings, mapped: &Params<f64>) -> Result<(ShootingResult<f64>, Value), Failure> {
    if let Some(path) = &s.from_solution {
        let (p, sol) = load_solution(path)?;
        let near = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        if p.dim != mapped.dim || !near(p.p, mapped.p) || !near(p.lambda, mapped.lambda) {
            return Err(ConfigError(format!(
                "solution parameters (N={}, p={}, lambda={}) do not match the mapped (N={}, p={}, lambda={})",
                p.dim, p.p, p.lambda, mapped.dim, mapped.p, mapped.lambda
            ))
            .into());
        }
        let info = json!({"source": path.display().to_string(), "s": sol.s, "node_count": sol.node_count});
        return Ok((sol, info));
    }
    let sol = find_nodal_solution(s.nodes.expect("validated"), mapped, &s.radial())?;
    let info = json!({"source": "solved", "s": sol.s, "node_count": sol.node_count});
    Ok((sol, info))
}

fn sample_cloud<C: Cylindrical<f64>>(
    sol: &C,
    s: &Settings,
    residual: impl Fn(&[f64]) -> Result<PdeResidual<f64>, Error>,
) -> Result<(Table, Value), Failure> {
    let (k, m) = (sol.y_dim(), sol.z_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed.expect("validated"));
    let mut points = Vec::new();
    while points.len() < s.samples.expect("validated") {
        let x: Vec<f64> = (0..k + m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if x[..k].iter().map(|v| v * v).sum::<f64>().sqrt() >= 0.05 {
            points.push(x);
        }
    }
    let rows = sample_points(sol, &points)?;
    let mut header: Vec<String> = (1..=k).map(|i| format!("y{i}")).collect();
    header.extend((1..=m).map(|i| format!("z{i}")));
    header.push("value".into());
    let mut table = Table { file: "samples.csv".into(), header, rows: Vec::new() };
    let mut worst = 0.0f64;
    let (mut pos, mut neg) = (0usize, 0usize);
    for row in rows {
        let v = *row.last().expect("value column");
        pos += (v > 0.0) as usize;
        neg += (v < 0.0) as usize;
        worst = worst.max(residual(&row[..k + m])?.relative());
        table.rows.push(row.into_iter().map(Into::into).collect());
    }
    let stats = json!({"points": table.rows.len(), "positive": pos, "negative": neg, "max_relative_residual": worst,
        "residual_step": 1e-4});
    Ok((table, stats))
}

fn map_hsm(s: &Settings) -> Result<Outcome, Failure> {
    let hp = HSMParams::new(s.n.expect("validated"), s.k.expect("validated"), s.rational(&s.eta), s.rational(&s.t))?;
    let mapped = hsm_to_hyperbolic(&hp)?;
    let real = to_real(&mapped);
    let (sol, info) = source_solution(s, &real)?;
    let hp64 = hp.to_f64();
    let transported = transport_to_hsm(&sol.profile, &hp64)?;
    let (table, stats) = sample_cloud(&transported, s, |x| hsm_residual(&transported, x, 1e-4))?;
    let result = json!({
        "hsm": {"n": hp.n, "k": hp.k, "eta": rational_text(&hp.eta), "t": rational_text(&hp.t),
            "p_t": rational_text(&hp.p_t())},
        "mapped": params_json(&mapped),
        "solution": info,
        "samples": stats,
    });
    Ok(Outcome::ok(result, vec![table]))
}

fn map_grushin(s: &Settings) -> Result<Outcome, Failure> {
    let gp = GrushinParams::new(s.rational(&s.alpha), s.k.expect("validated"), s.h.expect("validated"))?;
    let mapped = grushin_to_hyperbolic(&gp)?;
    let real = to_real(&mapped);
    let (sol, info) = source_solution(s, &real)?;
    let gp64 = gp.to_f64();
    let transported = transport_to_grushin(&sol.profile, &gp64)?;
    let (table, stats) = sample_cloud(&transported, s, |x| grushin_residual(&transported, x, 1e-4))?;
    let result = json!({
        "grushin": {"alpha": rational_text(&gp.alpha), "k": gp.k, "h": gp.h, "Q": rational_text(&gp.q()),
            "amplitude": transported.scale()},
        "mapped": params_json(&mapped),
        "solution": info,
        "samples": stats,
    });
    Ok(Outcome::ok(result, vec![table]))
}
