//! Batch command-line surface. Every run writes its table plus a JSON sidecar
//! echoing the effective configuration, and prints a JSON summary on stdout.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classical::{
    eta_star, period, period_by_flow, upsilon, upsilon_flow, write_upsilon_csv, OrbitBranch,
    OrbitSpec, UpsilonRow,
};
use crate::error::Error;
use crate::montgomery::write_curve_csv;
use crate::selftest::{run_checks, write_checks_csv};
use crate::semiclassical::{
    classify_regime, default_window, husimi, write_regime_csv, HusimiWindow, ModeSequence,
};
use crate::spectrum::{write_level_csv, Martinet, ModeIndex, SpectralLine};
use crate::table::fmt_f64;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "MARTINET_OUT";
const DEFAULT_OUT: &str = "martinet-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "martinet",
    version,
    about = "Spectral and semiclassical computations for the Martinet sub-Laplacian",
    after_help = "Environment:\n  MARTINET_OUT  default output directory when neither --out nor the config file sets one (fallback: ./martinet-out)\n\nExit codes: 0 success, 1 invariant failure, 2 configuration error."
)]
struct Cli {
    /// JSON file mirroring the flags; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep of the Montgomery eigenvalue curve and its slope.
    LambdaCurve(LambdaCurveArgs),
    /// The critical point of the eigenvalue curve and the pair (η_ȷ, ζ_ȷ).
    CriticalPoint(CriticalPointArgs),
    /// Points of the level set λ_k(η, ζ) = 1.
    LevelSet(LevelSetArgs),
    /// Closed-form and flow-averaged Υ with its root.
    Upsilon(UpsilonArgs),
    /// Closed-form and event-detected orbit periods.
    Period(PeriodArgs),
    /// Mode-decomposed spectrum up to an energy cutoff.
    Spectrum(SpectrumArgs),
    /// Regime classification along a mode sequence.
    RegimeScan(RegimeScanArgs),
    /// Husimi density of one mode.
    Husimi(HusimiArgs),
    /// The invariant suite.
    Selftest(SelftestArgs),
}

macro_rules! merge {
    ($t:ident { $($f:ident),* $(,)? }) => {
        impl $t {
            fn merge(self, file: Option<Self>) -> Self {
                let file = file.unwrap_or_default();
                Self { $($f: self.$f.or(file.$f)),* }
            }
        }
    };
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct LambdaCurveArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    mu_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}
merge!(LambdaCurveArgs { k, mu_min, mu_max, steps });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct CriticalPointArgs {
    #[arg(long)]
    k: Option<usize>,
}
merge!(CriticalPointArgs { k });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct LevelSetArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    zeta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    zeta_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}
merge!(LevelSetArgs { k, zeta_min, zeta_max, steps });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct UpsilonArgs {
    #[arg(long)]
    jmath: Option<u8>,
    #[arg(long, allow_negative_numbers = true)]
    eta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eta_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}
merge!(UpsilonArgs { jmath, eta_min, eta_max, steps });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct PeriodArgs {
    #[arg(long)]
    jmath: Option<u8>,
    #[arg(long, allow_negative_numbers = true)]
    eta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eta_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}
merge!(PeriodArgs { jmath, eta_min, eta_max, steps });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct SpectrumArgs {
    #[arg(long)]
    e_max: Option<f64>,
}
merge!(SpectrumArgs { e_max });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RegimeScanArgs {
    /// cubic (n₂ = round(c·j³), n₁ = round(d·j)), pure (n₁ = 0, n₂ = j) or list.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
    /// Mode list `n1:n2,n1:n2,…` for the list family.
    #[arg(long, allow_hyphen_values = true)]
    modes: Option<String>,
}
merge!(RegimeScanArgs { family, c, d, k, len, modes });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct HusimiArgs {
    #[arg(long, allow_negative_numbers = true)]
    n1: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    n2: Option<i64>,
    #[arg(long)]
    k: Option<usize>,
    /// Cells per axis.
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xi_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xi_max: Option<f64>,
    /// Half-thickness of the shell tube.
    #[arg(long)]
    tube_width: Option<f64>,
}
merge!(HusimiArgs { n1, n2, k, cells, x_min, x_max, xi_min, xi_max, tube_width });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct SelftestArgs {}

impl SelftestArgs {
    fn merge(self, _file: Option<Self>) -> Self {
        self
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    threads: Option<usize>,
    out: Option<PathBuf>,
    format: Option<Format>,
    lambda_curve: Option<LambdaCurveArgs>,
    critical_point: Option<CriticalPointArgs>,
    level_set: Option<LevelSetArgs>,
    upsilon: Option<UpsilonArgs>,
    period: Option<PeriodArgs>,
    spectrum: Option<SpectrumArgs>,
    regime_scan: Option<RegimeScanArgs>,
    husimi: Option<HusimiArgs>,
    selftest: Option<SelftestArgs>,
}

/// Failure of a run, mapped to an exit code.
#[derive(Debug)]
enum RunError {
    Config(String),
    Invariant(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. }
            | Error::Config(_)
            | Error::UnsupportedEnergy { .. }
            | Error::DivergentPeriod { .. }
            | Error::InsufficientData { .. } => RunError::Config(e.to_string()),
            _ => RunError::Invariant(e.to_string()),
        }
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

fn config_err<T>(msg: impl Into<String>) -> RunResult<T> {
    Err(RunError::Config(msg.into()))
}

/// A named table with its sidecar header.
struct Artifact {
    stem: String,
    csv: Vec<u8>,
    rows: Value,
    header: Value,
}

/// What a subcommand produced.
struct Outcome {
    config: Value,
    artifacts: Vec<Artifact>,
    summary: Value,
    /// Invariant checks failed although the run completed.
    failed: bool,
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn positive(name: &str, v: f64) -> RunResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        config_err(format!("{name} must be positive, got {v}"))
    }
}

fn samples(lo: f64, hi: f64, steps: usize, what: &str) -> RunResult<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || steps == 0 {
        return config_err(format!("{what} range needs min < max and steps >= 1"));
    }
    Ok((0..=steps)
        .map(|i| lo + (i as f64 * (hi - lo)) / steps as f64)
        .collect())
}

fn lambda_curve(m: &Martinet, a: LambdaCurveArgs) -> RunResult<Outcome> {
    let k = a.k.unwrap_or(1);
    let (lo, hi, steps) = (a.mu_min.unwrap_or(-3.0), a.mu_max.unwrap_or(3.0), a.steps.unwrap_or(60));
    let config = json!({"k": k, "mu-min": lo, "mu-max": hi, "steps": steps});
    if k == 0 {
        return config_err("k must be >= 1");
    }
    let mus = samples(lo, hi, steps, "mu")?;
    let grid = m.solver.covering_grid(lo, hi, k);
    let rows = mus
        .par_iter()
        .map(|&mu| m.solver.curve(&[mu], k, &grid).map(|mut v| v.remove(0)))
        .collect::<crate::Result<Vec<_>>>()?;
    let min = rows
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .map(|s| json!({"mu": s.mu, "value": s.value}));
    Ok(Outcome {
        config,
        summary: json!({"samples": rows.len(), "sampled_minimum": min}),
        artifacts: vec![Artifact {
            stem: "lambda_curve".into(),
            csv: csv_bytes(|b| write_curve_csv(b, &rows)),
            rows: to_value(&rows),
            header: json!({"k": k, "grid": to_value(&grid)}),
        }],
        failed: false,
    })
}

fn critical_point(m: &Martinet, a: CriticalPointArgs) -> RunResult<Outcome> {
    let k = a.k.unwrap_or(1);
    let config = json!({"k": k});
    let pts = m.critical_points(k)?;
    let residual = pts.iter().map(|p| p.level_residual.abs()).fold(0.0, f64::max);
    let slope = pts.iter().map(|p| p.slope.abs()).fold(0.0, f64::max);
    let summary = json!({
        "k": k,
        "mu_star": pts[0].mu_star,
        "lambda_at_star": pts[0].lambda_at_star,
        "second_derivative": pts[0].second_derivative,
        "eta_0": pts[0].eta_j,
        "zeta_0": pts[0].zeta_j,
        "eta_1": pts[1].eta_j,
        "zeta_1": pts[1].zeta_j,
        "lambda_residual": residual,
        "eta_slope": slope,
    });
    let csv = csv_bytes(|b| {
        use std::io::Write;
        writeln!(b, "jmath,eta,zeta,mu_star,lambda_at_star,level_residual,slope,curvature,second_derivative")?;
        for p in &pts {
            writeln!(
                b,
                "{},{},{},{},{},{},{},{},{}",
                p.jmath,
                fmt_f64(p.eta_j),
                fmt_f64(p.zeta_j),
                fmt_f64(p.mu_star),
                fmt_f64(p.lambda_at_star),
                fmt_f64(p.level_residual),
                fmt_f64(p.slope),
                fmt_f64(p.curvature),
                fmt_f64(p.second_derivative)
            )?;
        }
        Ok(())
    });
    Ok(Outcome {
        config,
        summary,
        artifacts: vec![Artifact {
            stem: "critical_point".into(),
            csv,
            rows: to_value(&pts),
            header: json!({"k": k}),
        }],
        failed: false,
    })
}

fn level_set(m: &Martinet, a: LevelSetArgs) -> RunResult<Outcome> {
    let k = a.k.unwrap_or(1);
    let (lo, hi, steps) = (a.zeta_min.unwrap_or(-2.0), a.zeta_max.unwrap_or(2.0), a.steps.unwrap_or(40));
    let config = json!({"k": k, "zeta-min": lo, "zeta-max": hi, "steps": steps});
    let zetas: Vec<f64> = samples(lo, hi, steps, "zeta")?
        .into_iter()
        .filter(|z| *z != 0.0)
        .collect();
    let points = m.level_curve(k, &zetas)?;
    Ok(Outcome {
        config,
        summary: json!({"points": points.len()}),
        artifacts: vec![Artifact {
            stem: "level_set".into(),
            csv: csv_bytes(|b| write_level_csv(b, &points)),
            rows: to_value(&points),
            header: json!({"k": k, "level": 1.0}),
        }],
        failed: false,
    })
}

fn upsilon_sweep(a: UpsilonArgs) -> RunResult<Outcome> {
    let jmath = a.jmath.unwrap_or(0);
    let (lo, hi, steps) = (a.eta_min.unwrap_or(-2.0), a.eta_max.unwrap_or(1.0), a.steps.unwrap_or(60));
    let config = json!({"jmath": jmath, "eta-min": lo, "eta-max": hi, "steps": steps});
    let etas = samples(lo, hi, steps, "eta")?;
    let rows = etas
        .par_iter()
        .map(|&eta| {
            Ok(UpsilonRow {
                eta,
                jmath,
                closed: upsilon(jmath, eta)?,
                flow: upsilon_flow(jmath, eta)?,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let star = eta_star()?;
    let max_diff = rows.iter().map(|r| (r.closed - r.flow).abs()).fold(0.0, f64::max);
    Ok(Outcome {
        config,
        summary: json!({
            "rows": rows.len(),
            "max_abs_diff": max_diff,
            "eta_star": star.eta,
            "upsilon_slope_at_eta_star": star.derivative,
        }),
        artifacts: vec![Artifact {
            stem: "upsilon".into(),
            csv: csv_bytes(|b| write_upsilon_csv(b, &rows)),
            rows: to_value(&rows),
            header: json!({"jmath": jmath}),
        }],
        failed: false,
    })
}

#[derive(Serialize)]
struct PeriodRow {
    eta: f64,
    jmath: u8,
    branch: OrbitBranch,
    closed: f64,
    flow: f64,
}

fn period_sweep(a: PeriodArgs) -> RunResult<Outcome> {
    let jmath = a.jmath.unwrap_or(0);
    let (lo, hi, steps) = (a.eta_min.unwrap_or(-2.5), a.eta_max.unwrap_or(0.95), a.steps.unwrap_or(46));
    let config = json!({"jmath": jmath, "eta-min": lo, "eta-max": hi, "steps": steps});
    let etas = samples(lo, hi, steps, "eta")?;
    let rows: Vec<PeriodRow> = etas
        .par_iter()
        .map(|&eta| {
            let spec = OrbitSpec::unit(jmath, eta)?;
            if matches!(spec.branch, OrbitBranch::Homoclinic | OrbitBranch::Equilibrium) {
                return Ok(None);
            }
            Ok(Some(PeriodRow {
                eta,
                jmath,
                branch: spec.branch,
                closed: period(&spec)?,
                flow: period_by_flow(&spec)?,
            }))
        })
        .collect::<crate::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let max_diff = rows.iter().map(|r| (r.closed - r.flow).abs()).fold(0.0, f64::max);
    let csv = csv_bytes(|b| {
        use std::io::Write;
        writeln!(b, "eta,jmath,branch,period_closed,period_flow,abs_diff")?;
        for r in &rows {
            let branch = serde_json::to_value(r.branch).expect("serializable");
            writeln!(
                b,
                "{},{},{},{},{},{}",
                fmt_f64(r.eta),
                r.jmath,
                branch.as_str().unwrap_or_default(),
                fmt_f64(r.closed),
                fmt_f64(r.flow),
                fmt_f64((r.closed - r.flow).abs())
            )?;
        }
        Ok(())
    });
    Ok(Outcome {
        config,
        summary: json!({"rows": rows.len(), "max_abs_diff": max_diff}),
        artifacts: vec![Artifact {
            stem: "period".into(),
            csv,
            rows: to_value(&rows),
            header: json!({"jmath": jmath, "energy": 1.0}),
        }],
        failed: false,
    })
}

fn write_spectrum_csv(b: &mut Vec<u8>, lines: &[SpectralLine]) -> std::io::Result<()> {
    use std::io::Write;
    writeln!(b, "n1,n2,k,E,lambda")?;
    for l in lines {
        writeln!(
            b,
            "{},{},{},{},{}",
            l.mode.n1,
            l.mode.n2,
            l.mode.k,
            fmt_f64(l.energy),
            fmt_f64(l.lambda())
        )?;
    }
    Ok(())
}

fn spectrum(m: &Martinet, a: SpectrumArgs) -> RunResult<Outcome> {
    let e_max = a.e_max.unwrap_or(10.0);
    let config = json!({"e-max": e_max});
    let lines = m.enumerate_spectrum(e_max)?;
    let lowest: Vec<Value> = lines
        .iter()
        .take(4)
        .map(|l| json!({"n1": l.mode.n1, "n2": l.mode.n2, "k": l.mode.k, "E": l.energy}))
        .collect();
    Ok(Outcome {
        config,
        summary: json!({"count": lines.len(), "lowest": lowest}),
        artifacts: vec![Artifact {
            stem: "spectrum".into(),
            csv: csv_bytes(|b| write_spectrum_csv(b, &lines)),
            rows: to_value(&lines),
            header: json!({"e-max": e_max}),
        }],
        failed: false,
    })
}

fn parse_modes(s: &str) -> RunResult<Vec<(i64, i64)>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (a, b) = t
                .split_once(':')
                .ok_or_else(|| RunError::Config(format!("mode '{t}' is not n1:n2")))?;
            let n1 = a.trim().parse().map_err(|_| RunError::Config(format!("bad n1 in '{t}'")))?;
            let n2 = b.trim().parse().map_err(|_| RunError::Config(format!("bad n2 in '{t}'")))?;
            Ok((n1, n2))
        })
        .collect()
}

fn regime_scan(m: &Martinet, a: RegimeScanArgs) -> RunResult<Outcome> {
    let family = a.family.unwrap_or_else(|| "cubic".into());
    let k = a.k.unwrap_or(1);
    let (seq, config) = match family.as_str() {
        "cubic" => {
            let (c, d, len) = (a.c.unwrap_or(1.0), a.d.unwrap_or(0.0), a.len.unwrap_or(12));
            (
                ModeSequence::cubic(c, d, k, len),
                json!({"family": family, "c": c, "d": d, "k": k, "len": len}),
            )
        }
        "pure" => {
            let len = a.len.unwrap_or(12);
            (ModeSequence::pure(k, len), json!({"family": family, "k": k, "len": len}))
        }
        "list" => {
            let Some(modes) = a.modes else {
                return config_err("the list family needs --modes");
            };
            let seq = ModeSequence::list(parse_modes(&modes)?, k);
            (seq, json!({"family": family, "k": k, "modes": modes}))
        }
        other => return config_err(format!("unknown family '{other}' (cubic, pure, list)")),
    };
    let v = classify_regime(m, &seq)?;
    Ok(Outcome {
        config,
        summary: json!({
            "verdict": v.verdict.to_string(),
            "zeta_limit": v.zeta_limit,
            "drift": v.drift,
            "modes": v.reports.len(),
        }),
        artifacts: vec![Artifact {
            stem: "regime_scan".into(),
            csv: csv_bytes(|b| write_regime_csv(b, &v.reports)),
            rows: to_value(&v.reports),
            header: json!({"verdict": v.verdict.to_string(), "thresholds": to_value(&m.thresholds)}),
        }],
        failed: false,
    })
}

fn husimi_run(m: &Martinet, a: HusimiArgs) -> RunResult<Outcome> {
    let mode = ModeIndex::new(a.n1.unwrap_or(0), a.n2.unwrap_or(50), a.k.unwrap_or(1))?;
    let cells = a.cells.unwrap_or(100);
    let tube = positive("tube-width", a.tube_width.unwrap_or(0.2))?;
    let auto = default_window(m, &mode, cells)?;
    let window = HusimiWindow {
        x_min: a.x_min.unwrap_or(auto.x_min),
        x_max: a.x_max.unwrap_or(auto.x_max),
        xi_min: a.xi_min.unwrap_or(auto.xi_min),
        xi_max: a.xi_max.unwrap_or(auto.xi_max),
        ..auto
    };
    let config = json!({
        "n1": mode.n1, "n2": mode.n2, "k": mode.k, "cells": cells,
        "x-min": window.x_min, "x-max": window.x_max,
        "xi-min": window.xi_min, "xi-max": window.xi_max,
        "tube-width": tube,
    });
    let field = husimi(m, &mode, &window)?;
    let tube_mass = field.tube_mass(tube);
    let header = json!({
        "mode": to_value(&mode),
        "h": field.h,
        "window": to_value(&window),
        "raw_mass": field.raw_mass,
        "tube_mass": tube_mass,
        "coverage_warning": field.coverage_warning,
        "layout": "rows x, columns xi, cell centres",
    });
    Ok(Outcome {
        config,
        summary: header.clone(),
        artifacts: vec![Artifact {
            stem: "husimi".into(),
            csv: csv_bytes(|b| field.write_csv(b)),
            rows: to_value(&field.density),
            header,
        }],
        failed: false,
    })
}

fn selftest(m: &Martinet, _a: SelftestArgs) -> RunResult<Outcome> {
    let checks = run_checks(m)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    Ok(Outcome {
        config: json!({}),
        summary: json!({"checks": checks.len(), "failed": failed}),
        failed: !failed.is_empty(),
        artifacts: vec![Artifact {
            stem: "selftest".into(),
            csv: csv_bytes(|b| write_checks_csv(b, &checks)),
            rows: to_value(&checks),
            header: json!({"checks": checks.len()}),
        }],
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::LambdaCurve(_) => "lambda-curve",
        Command::CriticalPoint(_) => "critical-point",
        Command::LevelSet(_) => "level-set",
        Command::Upsilon(_) => "upsilon",
        Command::Period(_) => "period",
        Command::Spectrum(_) => "spectrum",
        Command::RegimeScan(_) => "regime-scan",
        Command::Husimi(_) => "husimi",
        Command::Selftest(_) => "selftest",
    }
}

fn load_config(path: Option<&Path>) -> RunResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| RunError::Config(format!("bad config {}: {e}", path.display())))
}

fn execute(cli: Cli) -> RunResult<Value> {
    let mut file = load_config(cli.config.as_deref())?;
    let threads = cli.threads.or(file.threads);
    let format = cli.format.or(file.format).unwrap_or(Format::Csv);
    let out = cli
        .out
        .or(file.out.take())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if threads == Some(0) {
        return config_err("threads must be >= 1");
    }
    let name = command_name(&cli.command);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    let m = Martinet::default();
    let outcome = pool.install(|| match cli.command {
        Command::LambdaCurve(a) => lambda_curve(&m, a.merge(file.lambda_curve)),
        Command::CriticalPoint(a) => critical_point(&m, a.merge(file.critical_point)),
        Command::LevelSet(a) => level_set(&m, a.merge(file.level_set)),
        Command::Upsilon(a) => upsilon_sweep(a.merge(file.upsilon)),
        Command::Period(a) => period_sweep(a.merge(file.period)),
        Command::Spectrum(a) => spectrum(&m, a.merge(file.spectrum)),
        Command::RegimeScan(a) => regime_scan(&m, a.merge(file.regime_scan)),
        Command::Husimi(a) => husimi_run(&m, a.merge(file.husimi)),
        Command::Selftest(a) => selftest(&m, a.merge(file.selftest)),
    })?;

    fs::create_dir_all(&out)
        .map_err(|e| RunError::Config(format!("cannot create {}: {e}", out.display())))?;
    let version = env!("CARGO_PKG_VERSION");
    let format_tag = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut written = Vec::new();
    for art in &outcome.artifacts {
        let meta = json!({
            "version": version,
            "command": name,
            "format": format_tag,
            "config": outcome.config,
            "header": art.header,
        });
        let files: Vec<(PathBuf, Vec<u8>)> = match format {
            Format::Csv => vec![
                (out.join(format!("{}.csv", art.stem)), art.csv.clone()),
                (out.join(format!("{}.json", art.stem)), pretty(&meta)),
            ],
            Format::Json => {
                let mut doc = meta.clone();
                doc["rows"] = art.rows.clone();
                vec![(out.join(format!("{}.json", art.stem)), pretty(&doc))]
            }
        };
        for (path, bytes) in files {
            fs::write(&path, bytes)
                .map_err(|e| RunError::Config(format!("cannot write {}: {e}", path.display())))?;
            written.push(path.display().to_string());
        }
    }
    let summary = json!({
        "version": version,
        "command": name,
        "config": outcome.config,
        "threads": threads,
        "format": format_tag,
        "artifacts": written,
        "results": outcome.summary,
        "status": if outcome.failed { "invariant-failure" } else { "ok" },
    });
    if outcome.failed {
        println!("{}", serde_json::to_string(&summary).expect("serializable"));
        return Err(RunError::Invariant(format!("{name}: invariant checks failed")));
    }
    Ok(summary)
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).expect("serializable"));
            EXIT_OK
        }
        Err(RunError::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(RunError::Invariant(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INVARIANT
        }
    }
}
