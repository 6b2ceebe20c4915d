//! Acceptance criteria, one line each. Exits non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use martinet::classical::{
    eta_star, period, period_by_flow, upsilon, upsilon_bruteforce, OrbitBranch, OrbitSpec,
};
use martinet::elliptic::{ellip_e, ellip_k};
use martinet::quad::integrate;
use martinet::roots::brent;
use martinet::semiclassical::{
    default_window, husimi, running_max_growth, shell_tube_mass, ModeSequence,
};
use martinet::spectrum::{Martinet, MartinetParams, ModeIndex};

type Outcome = martinet::Result<(bool, String)>;

const ETAS: [f64; 6] = [-2.0, -1.2, -0.5, 0.0, 0.5, 0.9];

fn elliptic_oracle() -> Outcome {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let (mut worst_k, mut worst_e, mut worst_legendre) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..20 {
        let k = i as f64 / 20.0;
        let kq = integrate(|t| 1.0 / (1.0 - (k * t.sin()).powi(2)).sqrt(), 0.0, half_pi, 1e-15, 1e-14)?;
        let eq = integrate(|t| (1.0 - (k * t.sin()).powi(2)).sqrt(), 0.0, half_pi, 1e-15, 1e-14)?;
        worst_k = worst_k.max(((ellip_k(k)? - kq) / kq).abs());
        worst_e = worst_e.max(((ellip_e(k)? - eq) / eq).abs());
        if k > 0.0 {
            let kp = (1.0 - k * k).sqrt();
            let r = ellip_e(k)? * ellip_k(kp)? + ellip_e(kp)? * ellip_k(k)? - ellip_k(k)? * ellip_k(kp)? - half_pi;
            worst_legendre = worst_legendre.max(r.abs());
        }
    }
    Ok((
        worst_k <= 1e-10 && worst_e <= 1e-10 && worst_legendre <= 1e-10,
        format!("K rel {worst_k:.1e}, E rel {worst_e:.1e}, Legendre {worst_legendre:.1e} (tol 1e-10, 20 moduli)"),
    ))
}

fn upsilon_branches() -> Outcome {
    let at_one = upsilon(0, 1.0)?;
    let at_minus_one = upsilon(0, -1.0)?;
    let mut worst = 0.0_f64;
    for eta in ETAS {
        worst = worst.max((upsilon(0, eta)? - upsilon_bruteforce(0, eta)?).abs());
    }
    Ok((
        at_one == 1.0 && at_minus_one == -1.0 && worst <= 1e-6,
        format!("Y(1) = {at_one}, Y(-1) = {at_minus_one}, closed vs orbit average {worst:.1e} (tol 1e-6)"),
    ))
}

fn eta_star_root() -> Outcome {
    let closed = eta_star()?;
    let brute = brent(|e| upsilon_bruteforce(0, e), -0.99, 0.99, 1e-12)?;
    let diff = (closed.eta - brute).abs();
    let inside = closed.eta > -1.0 && closed.eta < 1.0 && brute > -1.0 && brute < 1.0;
    Ok((
        inside && diff <= 1e-6 && closed.derivative.abs() > 0.1,
        format!(
            "eta* closed {:.12}, orbit average {:.12}, diff {diff:.1e} (tol 1e-6), Y'(eta*) {:.4} (> 0.1)",
            closed.eta, brute, closed.derivative
        ),
    ))
}

fn scaling_law(m: &Martinet) -> Outcome {
    let mut worst_direct = 0.0_f64;
    let mut worst_homog = 0.0_f64;
    for eta in [-1.0, 0.3, 1.5] {
        for zeta in [-2.0, 0.5, 3.0] {
            for k in [1, 2] {
                let p = MartinetParams::new(eta, zeta, k)?;
                let a = m.lambda(&p)?;
                let b = m.lambda_direct(&p, None)?;
                worst_direct = worst_direct.max(((a - b) / b).abs());
                for s in [0.5, 2.0, 5.0] {
                    worst_homog = worst_homog.max(m.homogeneity_check(&p, s)?);
                }
            }
        }
    }
    Ok((
        worst_direct <= 1e-6 && worst_homog <= 1e-10,
        format!("scaled vs direct rel {worst_direct:.1e} (tol 1e-6), homogeneity {worst_homog:.1e} (tol 1e-10)"),
    ))
}

fn hellmann_feynman(m: &Martinet) -> Outcome {
    let mut worst = 0.0_f64;
    for mu in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let grid = m.solver.grid_for(mu, 2);
        for k in [1, 2] {
            let slope = m.solver.hf_derivative(mu, k, &grid)?;
            let d = 1e-4;
            let fd = (m.solver.eigenvalue_on(mu + d, k, &grid)? - m.solver.eigenvalue_on(mu - d, k, &grid)?)
                / (2.0 * d);
            worst = worst.max(((slope - fd) / fd).abs());
        }
    }
    Ok((worst <= 1e-5, format!("analytic vs central difference rel {worst:.1e} (tol 1e-5, 5 mu x 2 k)")))
}

fn critical_points(m: &Martinet) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [1, 2] {
        let pts = m.critical_points(k)?;
        let level = pts.iter().map(|p| p.level_residual.abs()).fold(0.0, f64::max);
        let slope = pts.iter().map(|p| p.slope.abs()).fold(0.0, f64::max);
        let curv = pts
            .iter()
            .map(|p| ((p.curvature - p.second_derivative) / p.second_derivative).abs())
            .fold(0.0, f64::max);
        ok &= level <= 1e-8 && slope < 1e-6 && curv <= 1e-4;
        if k == 1 {
            ok &= pts[0].second_derivative > 0.0;
        }
        parts.push(format!(
            "k={k}: mu* {:.10}, level {level:.1e}, slope {slope:.1e}, curvature rel {curv:.1e}, L'' {:.6}",
            pts[0].mu_star, pts[0].second_derivative
        ));
    }
    Ok((ok, format!("{} (tol 1e-8 / 1e-6 / 1e-4)", parts.join("; "))))
}

fn periods() -> Outcome {
    let mut worst = 0.0_f64;
    for eta in ETAS {
        let spec = OrbitSpec::unit(0, eta)?;
        worst = worst.max((period(&spec)? - period_by_flow(&spec)?).abs());
        if spec.branch == OrbitBranch::RightWell {
            let left = spec.with_branch(OrbitBranch::LeftWell)?;
            worst = worst.max((period(&left)? - period_by_flow(&left)?).abs());
        }
    }
    Ok((worst <= 1e-6, format!("closed form vs event-detected flow {worst:.1e} (tol 1e-6, 6 values)")))
}

fn cohomological(m: &Martinet) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for mu in [-0.5, 0.0, 0.5] {
        let grid = m.solver.grid_for(mu, 40);
        let d = m.solver.eigvec_derivative(mu, 1, &grid, 40)?;
        ok &= d.residual <= 1e-5;
        let decay: Vec<String> = d.decay.iter().map(|(n, r)| format!("{n}:{r:.0e}")).collect();
        parts.push(format!("mu={mu}: {:.1e} [{}]", d.residual, decay.join(" ")));
    }
    Ok((ok, format!("{} (tol 1e-5)", parts.join("; "))))
}

fn mode_shadow(m: &Martinet) -> Outcome {
    let families = [
        ("(0,j^3)", ModeSequence::cubic(1.0, 0.0, 1, 14)),
        ("(j,1)", ModeSequence::list((1..=13).map(|j| (j, 1)).collect(), 1)),
        ("(-j,j^3)", ModeSequence::cubic(1.0, -1.0, 1, 13)),
    ];
    let (mut count, mut level, mut identity, mut growth) = (0, 0.0_f64, 0.0_f64, 0.0_f64);
    for (_, seq) in &families {
        let reports = m.rs_diagnostics_all(&seq.modes()?)?;
        count += reports.len();
        for r in &reports {
            level = level.max(r.level_residual.abs());
            identity = identity.max((r.rs_norms[0].powi(2) + r.rs_norms[1].powi(2) - 1.0).abs());
        }
        for i in 0..4 {
            let xs: Vec<f64> = reports.iter().map(|r| r.rs_norms[i]).collect();
            growth = growth.max(running_max_growth(&xs));
        }
    }
    Ok((
        count == 40 && level <= 1e-8 && identity <= 1e-8 && growth < 0.05,
        format!(
            "{count} modes, level {level:.1e} (tol 1e-8), rs1^2+rs2^2-1 {identity:.1e} (tol 1e-8), log-fit slope {growth:.1e} (< 0.05)"
        ),
    ))
}

fn husimi_concentration(m: &Martinet) -> Outcome {
    let mode = ModeIndex::new(0, 50, 1)?;
    let field = husimi(m, &mode, &default_window(m, &mode, 100)?)?;
    let mass_err = (field.raw_mass - 1.0).abs();
    let min = field.density.iter().cloned().fold(f64::INFINITY, f64::min);
    let tube = shell_tube_mass(m, &mode, 0.2, 200)?;
    Ok((
        mass_err <= 1e-6 && min >= 0.0 && tube >= 0.9,
        format!("mass error {mass_err:.1e} (tol 1e-6), min density {min:.1e}, tube mass {tube:.4} (need >= 0.9)"),
    ))
}

fn husimi_m1_trend(m: &Martinet) -> Outcome {
    let mut off = Vec::new();
    for j in 1..=8 {
        off.push(1.0 - shell_tube_mass(m, &ModeIndex::new(0, j * j * j, 1)?, 0.2, 100)?);
    }
    let increases = off.windows(2).filter(|w| w[1] > w[0]).count();
    let shown: Vec<String> = off.iter().map(|v| format!("{v:.3}")).collect();
    Ok((
        increases == 0,
        format!("off-shell mass along (0,j^3,1), j=1..8: [{}]", shown.join(", ")),
    ))
}

fn selftest_run(dir: &std::path::Path, threads: Option<usize>) -> std::io::Result<(Vec<u8>, Vec<u8>, i32)> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_martinet"));
    cmd.arg("--out").arg(dir);
    if let Some(t) = threads {
        cmd.arg("--threads").arg(t.to_string());
    }
    let status = cmd.arg("selftest").output()?.status;
    Ok((
        std::fs::read(dir.join("selftest.csv"))?,
        std::fs::read(dir.join("selftest.json"))?,
        status.code().unwrap_or(-1),
    ))
}

fn determinism() -> martinet::Result<(bool, String)> {
    let run = || -> std::io::Result<(bool, String)> {
        let tmp = tempfile::tempdir()?;
        let a = selftest_run(&tmp.path().join("a"), None)?;
        let b = selftest_run(&tmp.path().join("b"), None)?;
        let one = selftest_run(&tmp.path().join("t1"), Some(1))?;
        let eight = selftest_run(&tmp.path().join("t8"), Some(8))?;
        let repeat = a.0 == b.0 && a.1 == b.1;
        let threads = one.0 == eight.0 && one.1 == eight.1;
        Ok((
            repeat && threads,
            format!(
                "repeat identical {repeat}, threads 1 vs 8 identical {threads} (selftest exit code {})",
                a.2
            ),
        ))
    };
    run().map_err(|e| martinet::Error::Config(e.to_string()))
}

fn main() {
    let m = Martinet::default();
    let criteria: Vec<(&str, u64, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 elliptic oracle", 1, Box::new(elliptic_oracle)),
        ("2 upsilon branches", 10, Box::new(upsilon_branches)),
        ("3 root eta*", 5, Box::new(eta_star_root)),
        ("4 scaling law", 30, Box::new(|| scaling_law(&m))),
        ("5 Hellmann-Feynman", 20, Box::new(|| hellmann_feynman(&m))),
        ("6 critical points", 30, Box::new(|| critical_points(&m))),
        ("7 periods", 10, Box::new(periods)),
        ("8 cohomological residual", 30, Box::new(|| cohomological(&m))),
        ("9 mode-decomposition shadow", 120, Box::new(|| mode_shadow(&m))),
        ("10 Husimi concentration", 30, Box::new(|| husimi_concentration(&m))),
        ("11 determinism", 300, Box::new(determinism)),
        ("invariant Husimi off-shell decay (M1)", 60, Box::new(|| husimi_m1_trend(&m))),
    ];
    let mut failed = 0;
    for (name, limit, f) in &criteria {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let (pass, detail) = match result {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} | {detail} | {:.2} s (limit {limit} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
