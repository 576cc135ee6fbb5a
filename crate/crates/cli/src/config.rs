//! Run configuration: flags override the config file, which overrides defaults.

use clap::{Args, ValueEnum};
use hypersol::radial::RadialConfig;
use hypersol::Rational;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Solve,
    Scan,
    Nonexistence,
    VerifyBubbles,
    PsDemo,
    Sobolev,
    MapHsm,
    MapGrushin,
    VerifyDecay,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Scan => "scan",
            CommandKind::Nonexistence => "nonexistence",
            CommandKind::VerifyBubbles => "verify-bubbles",
            CommandKind::PsDemo => "ps-demo",
            CommandKind::Sobolev => "sobolev",
            CommandKind::MapHsm => "map-hsm",
            CommandKind::MapGrushin => "map-grushin",
            CommandKind::VerifyDecay => "verify-decay",
        }
    }

    /// Settings the command reads.
    fn keys(&self) -> &'static [&'static str] {
        use CommandKind::*;
        match self {
            Solve | VerifyDecay => &["N", "p", "lambda", "nodes", "s_min", "s_max", "T_max", "tol"],
            Scan | Nonexistence => &["N", "p", "lambda", "s_min", "s_max", "grid", "T_max", "tol"],
            VerifyBubbles => &["N", "mu_decades", "grid"],
            PsDemo => &["N", "p", "lambda", "nodes", "distances", "epsilons", "T_max", "tol"],
            Sobolev => &["N", "p", "lambda", "T_max", "tol"],
            MapHsm => &["n", "k", "eta", "t", "nodes", "from_solution", "samples", "seed", "T_max", "tol"],
            MapGrushin => &["alpha", "k", "h", "nodes", "from_solution", "samples", "seed", "T_max", "tol"],
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Dimension of the ball.
    #[arg(long = "N")]
    pub dim: Option<usize>,
    /// Exponent, decimal or `a/b`.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    /// Number of sign changes of the sought solution.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long = "s-min")]
    pub s_min: Option<f64>,
    #[arg(long = "s-max")]
    pub s_max: Option<f64>,
    /// Number of grid points of a scan or of the bubble scale grid.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Initial classification radius.
    #[arg(long = "T-max")]
    pub t_max: Option<f64>,
    /// Relative tolerance of the integrator and of the quadratures.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file of flat key/value settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bubble scales as `min:max`.
    #[arg(long = "mu-decades")]
    pub mu_decades: Option<String>,
    /// Total dimension of the HSM problem.
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Dimension of the `y` block.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long = "t")]
    pub t: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    /// Dimension of the `z` block of the Grushin problem.
    #[arg(long = "h")]
    pub h: Option<usize>,
    /// A `solve` report whose solution is transported.
    #[arg(long = "from-solution")]
    pub from_solution: Option<PathBuf>,
    /// Number of sampled points in the exported point cloud.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma separated translation distances.
    #[arg(long)]
    pub distances: Option<String>,
    /// Comma separated bubble scales.
    #[arg(long)]
    pub epsilons: Option<String>,
}

/// Number in a config file, either literal or text such as `"7/3"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Number(serde_json::Number),
    Text(String),
}

impl Scalar {
    fn text(self) -> String {
        match self {
            Scalar::Number(n) => n.to_string(),
            Scalar::Text(s) => s,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(rename = "N")]
    dim: Option<usize>,
    p: Option<Scalar>,
    lambda: Option<Scalar>,
    nodes: Option<usize>,
    s_min: Option<f64>,
    s_max: Option<f64>,
    grid: Option<usize>,
    #[serde(rename = "T_max")]
    t_max: Option<f64>,
    tol: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    mu_decades: Option<String>,
    n: Option<usize>,
    k: Option<usize>,
    eta: Option<Scalar>,
    t: Option<Scalar>,
    alpha: Option<Scalar>,
    h: Option<usize>,
    from_solution: Option<PathBuf>,
    samples: Option<usize>,
    distances: Option<String>,
    epsilons: Option<String>,
}

/// Fully resolved settings; keys a command does not read are dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub command: Option<CommandKind>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(rename = "T_max", skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_decades: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from_solution: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Resolves flags, an optional config file and defaults. Returns the settings and the output directory.
pub fn resolve(command: CommandKind, flags: &Flags) -> Result<(Settings, PathBuf), ConfigError> {
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .or_else(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<FileConfig>(&text)
                .or_else(|e| bad(format!("invalid config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let text = |flag: &Option<String>, f: Option<Scalar>| flag.clone().or(f.map(Scalar::text));
    let radial = RadialConfig::default();
    let mut s = Settings {
        command: Some(command),
        dim: flags.dim.or(file.dim),
        p: text(&flags.p, file.p),
        lambda: text(&flags.lambda, file.lambda),
        nodes: flags.nodes.or(file.nodes).or(Some(0)),
        s_min: flags.s_min.or(file.s_min).or(Some(radial.s_min)),
        s_max: flags.s_max.or(file.s_max),
        grid: flags.grid.or(file.grid),
        t_max: flags.t_max.or(file.t_max).or(Some(radial.t_max)),
        tol: flags.tol.or(file.tol).or(Some(radial.rtol)),
        seed: flags.seed.or(file.seed).or(Some(0)),
        mu_decades: flags.mu_decades.clone().or(file.mu_decades).or(Some("1e-6:1e-3".into())),
        n: flags.n.or(file.n),
        k: flags.k.or(file.k),
        eta: text(&flags.eta, file.eta).or(Some("0".into())),
        t: text(&flags.t, file.t).or(Some("0".into())),
        alpha: text(&flags.alpha, file.alpha),
        h: flags.h.or(file.h),
        from_solution: flags.from_solution.clone().or(file.from_solution),
        samples: flags.samples.or(file.samples).or(Some(200)),
        distances: flags.distances.clone().or(file.distances).or(Some("4,6,8,10".into())),
        epsilons: flags.epsilons.clone().or(file.epsilons).or(Some("1e-1,1e-2,1e-3".into())),
    };
    let (default_s_max, default_grid) = match command {
        CommandKind::VerifyBubbles => (None, 13),
        CommandKind::Scan | CommandKind::Nonexistence => (Some(1e8), 200),
        _ => (Some(radial.s_limit), 0),
    };
    s.s_max = s.s_max.or(default_s_max);
    s.grid = s.grid.or(Some(default_grid));
    s.retain(command.keys());
    s.validate(command)?;
    let out = flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("hypersol-out"));
    Ok((s, out))
}

impl Settings {
    fn retain(&mut self, keys: &[&str]) {
        let keep = |k: &str| keys.contains(&k);
        macro_rules! drop_unless {
            ($($field:ident => $key:expr),*) => { $( if !keep($key) { self.$field = None; } )* };
        }
        drop_unless!(dim => "N", p => "p", lambda => "lambda", nodes => "nodes", s_min => "s_min", s_max => "s_max",
            grid => "grid", t_max => "T_max", tol => "tol", seed => "seed", mu_decades => "mu_decades", n => "n",
            k => "k", eta => "eta", t => "t", alpha => "alpha", h => "h", from_solution => "from_solution",
            samples => "samples", distances => "distances", epsilons => "epsilons");
    }

    fn validate(&self, command: CommandKind) -> Result<(), ConfigError> {
        for key in command.keys() {
            let missing = match *key {
                "N" => self.dim.is_none(),
                "p" => self.p.is_none(),
                "lambda" => self.lambda.is_none(),
                "n" => self.n.is_none(),
                "k" => self.k.is_none(),
                "alpha" => self.alpha.is_none(),
                "h" => self.h.is_none(),
                _ => false,
            };
            if missing {
                return bad(format!("missing required setting `{key}` for {}", command.name()));
            }
        }
        for (name, v) in [("s_min", self.s_min), ("s_max", self.s_max), ("T_max", self.t_max), ("tol", self.tol)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive and finite, got {v}"));
                }
            }
        }
        if let (Some(a), Some(b)) = (self.s_min, self.s_max) {
            if a >= b {
                return bad(format!("s_min = {a} must be below s_max = {b}"));
            }
        }
        if matches!(command, CommandKind::Scan | CommandKind::Nonexistence | CommandKind::VerifyBubbles)
            && self.grid.unwrap_or(0) < 2
        {
            return bad("grid must have at least 2 points");
        }
        if self.samples == Some(0) {
            return bad("samples must be positive");
        }
        for (name, v) in [("p", &self.p), ("lambda", &self.lambda), ("eta", &self.eta), ("t", &self.t), ("alpha", &self.alpha)]
        {
            if let Some(v) = v {
                parse_rational(v).ok_or_else(|| ConfigError(format!("cannot parse {name} = {v:?}")))?;
            }
        }
        if let Some(m) = &self.mu_decades {
            parse_range(m)?;
        }
        for (name, v) in [("distances", &self.distances), ("epsilons", &self.epsilons)] {
            if let Some(v) = v {
                let xs = parse_list(v)?;
                if xs.is_empty() || xs.iter().any(|x| !(*x > 0.0)) {
                    return bad(format!("{name} must be a non-empty list of positive numbers"));
                }
            }
        }
        Ok(())
    }

    /// Radial solver settings with the resolved overrides applied.
    pub fn radial(&self) -> RadialConfig {
        let mut cfg = RadialConfig::default();
        if let Some(t) = self.t_max {
            cfg.t_max = t;
            cfg.t_max_limit = cfg.t_max_limit.max(t);
        }
        if let Some(tol) = self.tol {
            cfg.rtol = tol;
            cfg.quad_rel = tol;
        }
        if let Some(s) = self.s_min {
            cfg.s_min = s;
        }
        if let Some(s) = self.s_max {
            cfg.s_limit = s;
        }
        cfg
    }

    pub fn rational(&self, v: &Option<String>) -> Rational {
        parse_rational(v.as_deref().expect("validated setting")).expect("validated setting")
    }
}

/// Parses `a/b`, integers and decimals (with optional exponent) exactly; other floats are approximated.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let (a, b): (i64, i64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (b != 0).then(|| Rational::new(a, b));
    }
    exact_decimal(s).or_else(|| {
        let x: f64 = s.parse().ok()?;
        if !x.is_finite() {
            return None;
        }
        Rational::approximate_float(x)
    })
}

fn exact_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let joined: i64 = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let pow = 10i64.checked_pow(scale.unsigned_abs())?;
    let value = if scale >= 0 { Rational::from_integer(joined.checked_mul(pow)?) } else { Rational::new(joined, pow) };
    Some(if neg { -value } else { value })
}

pub fn parse_range(s: &str) -> Result<(f64, f64), ConfigError> {
    let Some((a, b)) = s.split_once(':') else { return bad(format!("expected `min:max`, got {s:?}")) };
    let (a, b): (f64, f64) = match (a.trim().parse(), b.trim().parse()) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return bad(format!("cannot parse range {s:?}")),
    };
    if !(a > 0.0 && b > a) {
        return bad(format!("range {s:?} must satisfy 0 < min < max"));
    }
    Ok((a, b))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| ConfigError(format!("cannot parse number {x:?} in {s:?}"))))
        .collect()
}
