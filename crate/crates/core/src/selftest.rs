//! Compact invariant suite behind the `selftest` subcommand.

use std::io::Write;

use serde::Serialize;

use crate::classical::{
    eta_star, flow, period, period_by_flow, upsilon, upsilon_bruteforce, OrbitSpec,
};
use crate::elliptic::ellip_ke;
use crate::error::Result;
use crate::montgomery::Montgomery;
use crate::semiclassical::{
    default_window, husimi, position_density, running_max_growth, shell_tube_mass,
};
use crate::spectrum::{Martinet, MartinetParams, ModeIndex};
use crate::table::fmt_f64;

/// One invariant: `value` compared against `tolerance` in the sense of `pass`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            pass: value >= tolerance,
        }
    }
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

const ETAS: [f64; 6] = [-2.0, -1.2, -0.5, 0.0, 0.5, 0.9];

pub fn run_checks(m: &Martinet) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let mut legendre = 0.0_f64;
    for i in 1..20 {
        let k = i as f64 / 20.0;
        let (kk, ee) = ellip_ke(k)?;
        let (kp, ep) = ellip_ke((1.0 - k * k).sqrt())?;
        legendre = legendre.max((ee * kp + ep * kk - kk * kp - std::f64::consts::FRAC_PI_2).abs());
    }
    out.push(Check::at_most("elliptic_legendre_relation", legendre, 1e-10));

    out.push(Check::at_most("upsilon_at_plus_one", (upsilon(0, 1.0)? - 1.0).abs(), 0.0));
    out.push(Check::at_most("upsilon_at_minus_one", (upsilon(0, -1.0)? + 1.0).abs(), 0.0));
    let mut sym = 0.0_f64;
    for eta in [-0.9, -0.3, 0.2, 0.8, 2.5] {
        sym = sym.max((upsilon(1, eta)? - upsilon(0, -eta)?).abs());
    }
    out.push(Check::at_most("upsilon_jmath_symmetry", sym, 0.0));
    let mut ups = 0.0_f64;
    for eta in ETAS {
        ups = ups.max((upsilon(0, eta)? - upsilon_bruteforce(0, eta)?).abs());
    }
    out.push(Check::at_most("upsilon_closed_vs_orbit_average", ups, 1e-6));
    out.push(Check::at_least(
        "upsilon_continuity_near_minus_one",
        (upsilon(0, -0.99)?.min(upsilon(0, -1.01)?)) + 1.0,
        0.0,
    ));

    let star = eta_star()?;
    out.push(Check::at_most("eta_star_residual", upsilon(0, star.eta)?.abs(), 1e-10));
    out.push(Check::at_most(
        "eta_star_orbit_average_residual",
        upsilon_bruteforce(0, star.eta)?.abs(),
        1e-6,
    ));
    out.push(Check::at_least("eta_star_slope", star.derivative.abs(), 0.1));

    let mut per = 0.0_f64;
    for eta in ETAS {
        let spec = OrbitSpec::unit(0, eta)?;
        per = per.max((period(&spec)? - period_by_flow(&spec)?).abs());
    }
    out.push(Check::at_most("period_closed_vs_flow", per, 1e-6));
    let mut drift = 0.0_f64;
    for eta in [-2.0, 0.0, 0.9] {
        let spec = OrbitSpec::unit(0, eta)?;
        let t = period(&spec)?;
        drift = drift.max(flow(&spec, spec.start_state(), 100.0 * t, t / 4096.0)?.drift);
    }
    out.push(Check::at_most("verlet_energy_drift_100_periods", drift, 1e-8));

    let p = MartinetParams::new(0.7, 1.3, 1)?;
    let base = m.lambda(&p)?;
    let mut homog = 0.0_f64;
    for s in [0.5, 2.0, 5.0] {
        homog = homog.max(m.homogeneity_check(&p, s)?);
    }
    out.push(Check::at_most("scaling_homogeneity", homog, 1e-10));
    let direct = m.lambda_direct(&p, None)?;
    out.push(Check::at_most("scaling_vs_direct", ((base - direct) / base).abs(), 1e-6));

    let solver: &Montgomery = &m.solver;
    let mut hf = 0.0_f64;
    for mu in [-1.0, 0.0, 1.0] {
        let grid = solver.grid_for(mu, 2);
        for k in [1, 2] {
            let slope = solver.hf_derivative(mu, k, &grid)?;
            let d = 1e-4;
            let fd = (solver.eigenvalue_on(mu + d, k, &grid)? - solver.eigenvalue_on(mu - d, k, &grid)?)
                / (2.0 * d);
            hf = hf.max(((slope - fd) / fd).abs());
        }
    }
    out.push(Check::at_most("hellmann_feynman_vs_difference", hf, 1e-5));

    let cps = m.critical_points(1)?;
    out.push(Check::at_most(
        "critical_point_level",
        max_of(cps.iter().map(|c| c.level_residual.abs())),
        1e-8,
    ));
    out.push(Check::at_most(
        "critical_point_slope",
        max_of(cps.iter().map(|c| c.slope.abs())),
        1e-6,
    ));
    out.push(Check::at_least(
        "critical_point_convexity",
        cps[0].second_derivative,
        f64::MIN_POSITIVE,
    ));
    let grid = solver.grid_for(0.0, 40);
    let dphi = solver.eigvec_derivative(0.0, 1, &grid, 40)?;
    out.push(Check::at_most("cohomological_residual", dphi.residual, 1e-5));

    let seq: Vec<ModeIndex> = (1..=8)
        .map(|j| ModeIndex::new(0, j * j * j, 1))
        .collect::<Result<_>>()?;
    let reports = m.rs_diagnostics_all(&seq)?;
    out.push(Check::at_most(
        "mode_level_membership",
        max_of(reports.iter().map(|r| r.level_residual.abs())),
        1e-8,
    ));
    out.push(Check::at_most(
        "mode_energy_identity",
        max_of(
            reports
                .iter()
                .map(|r| (r.rs_norms[0].powi(2) + r.rs_norms[1].powi(2) - 1.0).abs()),
        ),
        1e-8,
    ));
    let growth = max_of((0..4).map(|i| {
        running_max_growth(&reports.iter().map(|r| r.rs_norms[i]).collect::<Vec<_>>())
    }));
    out.push(Check::at_most("rs_norm_growth_slope", growth, 0.05));

    let spectrum = m.enumerate_spectrum(5.0)?;
    let asym = spectrum
        .iter()
        .filter(|l| {
            !spectrum.iter().any(|o| {
                o.mode.n1 == -l.mode.n1 && o.mode.n2 == -l.mode.n2 && o.mode.k == l.mode.k
            })
        })
        .count();
    out.push(Check::at_most("spectrum_mirror_symmetry", asym as f64, 0.0));

    let mode = ModeIndex::new(0, 8, 1)?;
    let field = husimi(m, &mode, &default_window(m, &mode, 60)?)?;
    out.push(Check::at_most("husimi_mass", (field.raw_mass - 1.0).abs(), 1e-6));
    out.push(Check::at_least(
        "husimi_nonnegative",
        field.density.iter().cloned().fold(f64::INFINITY, f64::min),
        0.0,
    ));
    let mut off_shell = Vec::new();
    for j in 1..=8 {
        off_shell.push(1.0 - shell_tube_mass(m, &ModeIndex::new(0, j * j * j, 1)?, 0.2, 100)?);
    }
    let increases = off_shell.windows(2).filter(|w| w[1] > w[0]).count();
    out.push(Check::at_most("husimi_off_shell_mass_decays_m1", increases as f64, 0.0));

    let pd = position_density(m, &ModeIndex::new(0, 5, 2)?)?;
    out.push(Check::at_most("position_density_mass", (pd.mass - 1.0).abs(), 1e-10));
    Ok(out)
}

/// Writes `check,value,tolerance,pass`.
pub fn write_checks_csv<W: Write>(mut out: W, checks: &[Check]) -> std::io::Result<()> {
    writeln!(out, "check,value,tolerance,pass")?;
    for c in checks {
        writeln!(
            out,
            "{},{},{},{}",
            c.name,
            fmt_f64(c.value),
            fmt_f64(c.tolerance),
            c.pass
        )?;
    }
    Ok(())
}
