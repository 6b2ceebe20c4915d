//! The Martinet eigenvalue surface `λ_k(η, ζ)` and the mode-decomposed
//! spectrum of the sub-Laplacian.
//!
//! On the mode `e^{i(n₁y + n₂z)}` the sub-Laplacian acts as
//! `𝒫_n = D_x² + (n₁ + x²n₂)²`. Substituting `x = |ζ|^{−1/3} u` gives
//!
//! ```text
//! λ_k(η, ζ) = |ζ|^{2/3} Λ_k(η·sgn ζ / |ζ|^{1/3})
//! ```
//!
//! so every mode energy is a rescaled Montgomery eigenvalue.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::montgomery::Montgomery;
use crate::oscillator::{kinetic_form, GridSpec, QuarticWell, WellSolver};
use crate::roots::brent;
use crate::table::fmt_f64;

/// Parameters `(η, ζ, k)` of `D_x² + (η + x²ζ)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartinetParams {
    pub eta: f64,
    pub zeta: f64,
    pub k: usize,
}

impl MartinetParams {
    pub fn new(eta: f64, zeta: f64, k: usize) -> Result<Self> {
        let p = Self { eta, zeta, k };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.zeta != 0.0 && self.zeta.is_finite()) {
            return Err(Error::Domain {
                what: "zeta must be finite and nonzero",
                value: self.zeta,
            });
        }
        if !self.eta.is_finite() {
            return Err(Error::Domain {
                what: "eta must be finite",
                value: self.eta,
            });
        }
        if self.k == 0 {
            return Err(Error::Config("eigenvalue index k starts at 1".into()));
        }
        Ok(())
    }

    /// The Montgomery parameter `μ = η·sgn ζ / |ζ|^{1/3}`.
    pub fn mu(&self) -> f64 {
        self.eta * self.zeta.signum() / self.zeta.abs().cbrt()
    }

    /// `|ζ|^{2/3}`.
    pub fn energy_scale(&self) -> f64 {
        self.zeta.abs().cbrt().powi(2)
    }
}

/// Lattice mode `(n₁, n₂, k)` with `n₂ ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ModeIndex {
    pub n1: i64,
    pub n2: i64,
    pub k: usize,
}

impl ModeIndex {
    pub fn new(n1: i64, n2: i64, k: usize) -> Result<Self> {
        if n2 == 0 {
            return Err(Error::Domain {
                what: "mode needs n2 != 0 (zero-mean functions in z)",
                value: 0.0,
            });
        }
        if k == 0 {
            return Err(Error::Config("eigenvalue index k starts at 1".into()));
        }
        Ok(Self { n1, n2, k })
    }

    pub fn params(&self) -> MartinetParams {
        MartinetParams {
            eta: self.n1 as f64,
            zeta: self.n2 as f64,
            k: self.k,
        }
    }

    /// `μ = n₁·sgn n₂ / |n₂|^{1/3}`.
    pub fn mu(&self) -> f64 {
        self.params().mu()
    }

    /// Index `ȷ ∈ {0, 1}` of the sign of `n₂`.
    pub fn jmath(&self) -> u8 {
        u8::from(self.n2 < 0)
    }
}

/// One of the two points where `λ_k = 1` meets `∂_ηλ_k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPointPair {
    pub jmath: u8,
    pub eta_j: f64,
    pub zeta_j: f64,
    pub mu_star: f64,
    pub lambda_at_star: f64,
    /// `λ_k(η_ȷ, ζ_ȷ) − 1`.
    pub level_residual: f64,
    /// `∂_ηλ_k(η_ȷ, ζ_ȷ)` by central differences.
    pub slope: f64,
    /// `∂²_ηλ_k(η_ȷ, ζ_ȷ)` by central differences.
    pub curvature: f64,
    /// `Λ_k''(μ*)` from the Montgomery solver.
    pub second_derivative: f64,
}

/// Branch of a level curve relative to the minimum of `Λ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `μ < μ*`.
    Left,
    /// `μ > μ*`.
    Right,
    /// `μ = μ*` (the level just touches the minimum).
    Tangent,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Left => "left",
            Branch::Right => "right",
            Branch::Tangent => "tangent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelPoint {
    pub k: usize,
    pub branch: Branch,
    pub eta: f64,
    pub zeta: f64,
}

/// One eigenvalue of the mode-decomposed operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralLine {
    pub mode: ModeIndex,
    /// Eigenvalue `E` of `𝒫_n`.
    pub energy: f64,
}

impl SpectralLine {
    /// `λ = √E`.
    pub fn lambda(&self) -> f64 {
        self.energy.sqrt()
    }
}

/// Regime tag of a mode or a mode sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    M1,
    M3(u8),
    M2M4,
    Mixed,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::M1 => "M1",
            Regime::M3(0) => "m3(0)",
            Regime::M3(_) => "m3(1)",
            Regime::M2M4 => "M2/m4",
            Regime::Mixed => "mixed",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Regime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Thresholds of the regime classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeThresholds {
    /// `|ζ̄|` above this counts as a nonzero limit.
    pub zeta_limit: f64,
    /// Largest fitted change of `ζ̄` per sequence step for a converged limit.
    pub drift: f64,
    /// Mass within `|u| < 0.5` below this counts as concentrating off the singular set.
    pub axis_mass: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            zeta_limit: 0.05,
            drift: 0.01,
            axis_mass: 0.1,
        }
    }
}

impl RegimeThresholds {
    /// Tag of a single mode from its rescaled invariants.
    pub fn tag(&self, zeta_bar: f64, axis_mass: f64, jmath: u8) -> Regime {
        if axis_mass < self.axis_mass {
            Regime::M2M4
        } else if zeta_bar.abs() > self.zeta_limit {
            Regime::M1
        } else {
            Regime::M3(jmath)
        }
    }
}

/// Per-mode semiclassical diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub mode: ModeIndex,
    /// `E`, eigenvalue of `𝒫_n`.
    pub energy: f64,
    /// `λ = √E`.
    pub lambda: f64,
    /// `h = E^{−1/2}`.
    pub h: f64,
    pub eta_bar: f64,
    pub zeta_bar: f64,
    /// `(h‖φ'‖, h‖(n₁ + x²n₂)φ‖, 2h²|n₂|‖xφ‖, 2h³|n₂|)`.
    pub rs_norms: [f64; 4],
    /// `λ_k(η̄, ζ̄) − 1`.
    pub level_residual: f64,
    /// `σ̄ = 2·x_peak·h²n₂` at the density maximum.
    pub sigma_bar: f64,
    /// `w̄ = h(n₁ + n₂⟨x²⟩)`, the mean of `hn₁ + hn₂x²` under `|φ|²`.
    pub w_bar: f64,
    /// Mass of `|φ|²` within `|u| < 0.5`, `u = |n₂|^{1/3} x`.
    pub axis_mass: f64,
    pub regime: Regime,
}

/// Solver for the Martinet surface, built on the Montgomery solver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Martinet {
    pub solver: Montgomery,
    pub thresholds: RegimeThresholds,
}

/// Step of the central differences in `η`.
const ETA_STEP: f64 = 1e-3;

impl Martinet {
    pub fn new(solver: Montgomery) -> Self {
        Self {
            solver,
            thresholds: RegimeThresholds::default(),
        }
    }

    /// `λ_k(η, ζ)` through the scaling law.
    pub fn lambda(&self, p: &MartinetParams) -> Result<f64> {
        p.validate()?;
        Ok(p.energy_scale() * self.solver.eigenvalue(p.mu(), p.k)?)
    }

    /// `λ_k(η, ζ)` by discretizing `D_x² + (η + x²ζ)²` itself.
    pub fn lambda_direct(&self, p: &MartinetParams, grid: Option<&GridSpec>) -> Result<f64> {
        p.validate()?;
        let well = QuarticWell {
            offset: p.eta,
            curvature: p.zeta,
        };
        let grid = match grid {
            Some(g) => *g,
            None => self.solver.policy.for_index(&well, p.k),
        };
        let s = WellSolver::new(well, grid)?;
        let st = s.state(p.k)?;
        s.check_truncation(st.value)?;
        Ok(st.value)
    }

    /// `∂_ηλ_k = |ζ|^{1/3} sgn ζ · Λ_k'(μ)` by the chain rule.
    pub fn eta_derivative(&self, p: &MartinetParams) -> Result<f64> {
        p.validate()?;
        let mu = p.mu();
        let grid = self.solver.grid_for(mu, p.k);
        let slope = self.solver.hf_derivative(mu, p.k, &grid)?;
        Ok(p.zeta.abs().cbrt() * p.zeta.signum() * slope)
    }

    /// `|λ_k(sη, s³ζ) − s²λ_k(η, ζ)| / (s²λ_k(η, ζ))`.
    pub fn homogeneity_check(&self, p: &MartinetParams, s: f64) -> Result<f64> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain {
                what: "homogeneity scale must be positive",
                value: s,
            });
        }
        let base = self.lambda(p)?;
        let scaled = self.lambda(&MartinetParams {
            eta: s * p.eta,
            zeta: s * s * s * p.zeta,
            k: p.k,
        })?;
        let want = s * s * base;
        Ok((scaled - want).abs() / want)
    }

    /// The points `(η_ȷ, ζ_ȷ)`, `ȷ = 0, 1`, with their level and slope checks.
    pub fn critical_points(&self, k: usize) -> Result<[CriticalPointPair; 2]> {
        let cp = self.solver.default_critical_point(k)?;
        let zeta0 = cp.value.powf(-1.5);
        let mut out = Vec::with_capacity(2);
        for jmath in 0..2u8 {
            let sign = if jmath == 0 { 1.0 } else { -1.0 };
            let zeta_j = sign * zeta0;
            let eta_j = cp.mu_star * sign * zeta_j.abs().cbrt();
            let at = |eta: f64| {
                self.lambda(&MartinetParams {
                    eta,
                    zeta: zeta_j,
                    k,
                })
            };
            let centre = at(eta_j)?;
            let up = at(eta_j + ETA_STEP)?;
            let dn = at(eta_j - ETA_STEP)?;
            let slope = (up - dn) / (2.0 * ETA_STEP);
            let curvature = (up - 2.0 * centre + dn) / (ETA_STEP * ETA_STEP);
            let level_residual = centre - 1.0;
            if !(level_residual.abs() < 1e-8 && slope.abs() < 1e-6) {
                return Err(Error::Consistency {
                    level_residual,
                    slope_residual: slope,
                });
            }
            out.push(CriticalPointPair {
                jmath,
                eta_j,
                zeta_j,
                mu_star: cp.mu_star,
                lambda_at_star: cp.value,
                level_residual,
                slope,
                curvature,
                second_derivative: cp.second_derivative,
            });
        }
        Ok([out[0], out[1]])
    }

    /// All `(η, ζ)` with `λ_k(η, ζ) = 1` for each sampled `ζ`.
    pub fn level_curve(&self, k: usize, zetas: &[f64]) -> Result<Vec<LevelPoint>> {
        let cp = self.solver.default_critical_point(k)?;
        let mut out = Vec::new();
        for &zeta in zetas {
            MartinetParams::new(0.0, zeta, k)?;
            let target = 1.0 / zeta.abs().cbrt().powi(2);
            let to_eta = |mu: f64| mu * zeta.signum() * zeta.abs().cbrt();
            let gap = target - cp.value;
            if gap < -1e-12 * target {
                continue;
            }
            if gap <= 1e-12 * target {
                out.push(LevelPoint {
                    k,
                    branch: Branch::Tangent,
                    eta: to_eta(cp.mu_star),
                    zeta,
                });
                continue;
            }
            for branch in [Branch::Left, Branch::Right] {
                let mu = self.level_crossing(k, cp.mu_star, target, branch)?;
                out.push(LevelPoint {
                    k,
                    branch,
                    eta: to_eta(mu),
                    zeta,
                });
            }
        }
        Ok(out)
    }

    /// `μ` on one side of `μ*` with `Λ_k(μ) = target > Λ_k(μ*)`.
    fn level_crossing(&self, k: usize, mu_star: f64, target: f64, branch: Branch) -> Result<f64> {
        let dir = if branch == Branch::Left { -1.0 } else { 1.0 };
        let mut step = 0.5;
        let mut far = mu_star + dir * step;
        while self.solver.eigenvalue(far, k)? <= target {
            step *= 2.0;
            far = mu_star + dir * step;
            if step > 1e6 {
                return Err(Error::NoConvergence(format!(
                    "no level crossing of {target} found on the {} branch",
                    branch.as_str()
                )));
            }
        }
        let (lo, hi) = if dir < 0.0 {
            (far, mu_star)
        } else {
            (mu_star, far)
        };
        let grid = self.solver.covering_grid(lo, hi, k);
        brent(
            |mu| Ok(self.solver.eigenvalue_on(mu, k, &grid)? - target),
            lo,
            hi,
            1e-13 * (1.0 + mu_star.abs()),
        )
    }

    /// Every eigenvalue `E ≤ e_max` of `⊕_n 𝒫_n` over `n₂ ≠ 0`, sorted by
    /// `(E, n₂, n₁, k)`.
    pub fn enumerate_spectrum(&self, e_max: f64) -> Result<Vec<SpectralLine>> {
        if !(e_max > 0.0 && e_max.is_finite()) {
            return Err(Error::Domain {
                what: "E_max must be positive",
                value: e_max,
            });
        }
        let cp = self.solver.default_critical_point(1)?;
        // Every mode satisfies E ≥ |n₂|^{2/3} Λ₁(μ*).
        let floor = cp.value * (1.0 - 1e-9);
        let n2_max = (e_max / floor).powf(1.5).floor() as i64;
        let per_n2: Vec<Vec<SpectralLine>> = (1..=n2_max)
            .into_par_iter()
            .map(|n2| self.lines_for_n2(n2, e_max, cp.mu_star))
            .collect::<Result<_>>()?;
        let mut lines: Vec<SpectralLine> = per_n2.into_iter().flatten().collect();
        sort_lines(&mut lines);
        Ok(lines)
    }

    /// Lines with `n₂ = ±n2_abs`, scanning outward from `μ*` while `Λ₁ ≤ t`.
    fn lines_for_n2(&self, n2_abs: i64, e_max: f64, mu_star: f64) -> Result<Vec<SpectralLine>> {
        let s = (n2_abs as f64).cbrt();
        let scale = s * s;
        let t = e_max / scale;
        let mut out = Vec::new();
        let mut push = |m: i64, levels: &[(usize, f64)]| {
            for &(k, value) in levels {
                let energy = scale * value;
                if energy <= e_max {
                    out.push(SpectralLine {
                        mode: ModeIndex { n1: m, n2: n2_abs, k },
                        energy,
                    });
                    out.push(SpectralLine {
                        mode: ModeIndex {
                            n1: -m,
                            n2: -n2_abs,
                            k,
                        },
                        energy,
                    });
                }
            }
        };
        // Λ₁ is unimodal with its minimum at μ*, so the admissible m form one run.
        let m0 = (mu_star * s).floor() as i64;
        let mut m = m0;
        loop {
            let levels = self.solver.values_below(m as f64 / s, t * (1.0 + 1e-12))?;
            if levels.is_empty() {
                break;
            }
            push(m, &levels);
            m -= 1;
        }
        let mut m = m0 + 1;
        loop {
            let levels = self.solver.values_below(m as f64 / s, t * (1.0 + 1e-12))?;
            if levels.is_empty() {
                break;
            }
            push(m, &levels);
            m += 1;
        }
        Ok(out)
    }

    /// Rothschild–Stein norms and rescaled invariants of one mode.
    pub fn rs_diagnostics(&self, mode: &ModeIndex) -> Result<RegimeReport> {
        let mode = ModeIndex::new(mode.n1, mode.n2, mode.k)?;
        let p = mode.params();
        let mu = p.mu();
        let grid = self.solver.grid_for(mu, mode.k);
        let st = self.solver.state_on(mu, mode.k, &grid)?;
        let dx = grid.spacing();
        let us = grid.nodes();
        let well = QuarticWell::montgomery(mu);
        // Montgomery-frame moments; Δx Σ Φ² = 1.
        let kinetic = dx * kinetic_form(&st.vector, grid.order, dx);
        let potential = dx * us.iter().zip(&st.vector).map(|(&u, &v)| well.value(u) * v * v).sum::<f64>();
        let u2 = dx * us.iter().zip(&st.vector).map(|(&u, &v)| u * u * v * v).sum::<f64>();
        let lam = st.value;
        let scale = p.energy_scale();
        let energy = scale * lam;
        let h = energy.powf(-0.5);
        let n2 = mode.n2 as f64;
        let eta_bar = h * mode.n1 as f64;
        let zeta_bar = h * h * h * n2;
        let s13 = n2.abs().cbrt();
        let rs_norms = [
            (kinetic / lam).sqrt(),
            (potential / lam).sqrt(),
            2.0 * h * h * n2.abs() * u2.sqrt() / s13,
            2.0 * h * h * h * n2.abs(),
        ];
        let level = self.lambda(&MartinetParams {
            eta: eta_bar,
            zeta: zeta_bar,
            k: mode.k,
        })?;
        let (peak_u, axis_mass) = density_summary(&us, &st.vector, dx, 0.5);
        let sigma_bar = 2.0 * (peak_u / s13) * h * h * n2;
        let w_bar = h * (mode.n1 as f64 + n2 * u2 / (s13 * s13));
        let regime = self.thresholds.tag(zeta_bar, axis_mass, mode.jmath());
        Ok(RegimeReport {
            mode,
            energy,
            lambda: energy.sqrt(),
            h,
            eta_bar,
            zeta_bar,
            rs_norms,
            level_residual: level - 1.0,
            sigma_bar,
            w_bar,
            axis_mass,
            regime,
        })
    }

    /// Diagnostics of many modes, in input order.
    pub fn rs_diagnostics_all(&self, modes: &[ModeIndex]) -> Result<Vec<RegimeReport>> {
        modes.par_iter().map(|m| self.rs_diagnostics(m)).collect()
    }
}

/// `(|u| of the density maximum, mass within |u| < eps)`.
pub(crate) fn density_summary(us: &[f64], v: &[f64], du: f64, eps: f64) -> (f64, f64) {
    let mut peak = (0.0, f64::NEG_INFINITY);
    for (&u, &x) in us.iter().zip(v) {
        let d = x * x;
        if d > peak.1 {
            peak = (u.abs(), d);
        }
    }
    let near: f64 = us
        .iter()
        .zip(v)
        .filter(|(u, _)| u.abs() < eps)
        .map(|(_, x)| x * x)
        .sum::<f64>()
        * du;
    (peak.0, near)
}

/// Sorts by `(E, n₂, n₁, k)`.
pub fn sort_lines(lines: &mut [SpectralLine]) {
    lines.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.mode.n2.cmp(&b.mode.n2))
            .then(a.mode.n1.cmp(&b.mode.n1))
            .then(a.mode.k.cmp(&b.mode.k))
    });
}

/// Writes reports as CSV `n1,n2,k,E,lambda,h,eta_bar,zeta_bar,rs1,rs2,rs3,rs4,regime`.
pub fn write_report_csv<W: Write>(mut out: W, reports: &[RegimeReport]) -> std::io::Result<()> {
    writeln!(out, "n1,n2,k,E,lambda,h,eta_bar,zeta_bar,rs1,rs2,rs3,rs4,regime")?;
    for r in reports {
        let mut row = vec![
            r.mode.n1.to_string(),
            r.mode.n2.to_string(),
            r.mode.k.to_string(),
        ];
        row.extend(
            [r.energy, r.lambda, r.h, r.eta_bar, r.zeta_bar]
                .iter()
                .chain(&r.rs_norms)
                .map(|&v| fmt_f64(v)),
        );
        row.push(r.regime.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes level-curve points as CSV `k,branch,eta,zeta`.
pub fn write_level_csv<W: Write>(mut out: W, points: &[LevelPoint]) -> std::io::Result<()> {
    writeln!(out, "k,branch,eta,zeta")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{}",
            p.k,
            p.branch.as_str(),
            fmt_f64(p.eta),
            fmt_f64(p.zeta)
        )?;
    }
    Ok(())
}
