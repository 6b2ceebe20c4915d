//! Finite-mode fingerprints of the semiclassical decomposition: regime
//! classification of mode sequences, Husimi densities on the rescaled energy
//! shell and position densities.
//!
//! Phase space is `(x, ξ)` with `ξ = h·(frequency in x)`. The mode `(n₁, n₂, k)`
//! lives on the shell `ξ² + (h n₁ + h n₂ x²)² = 1`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oscillator::GridSpec;
use crate::spectrum::{Martinet, ModeIndex, Regime, RegimeReport};
use crate::table::fmt_f64;

/// Shortest sequence accepted by [`classify_regime`].
pub const MIN_SEQUENCE: usize = 8;

/// Generator of `ModeIndex(j)`, `j = 1..=len`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceFamily {
    /// `n₂ = round(c·j³)`, `n₁ = round(d·j)`.
    Cubic { c: f64, d: f64 },
    /// `n₁ = 0`, `n₂ = j`.
    Pure,
    /// Explicit `(n₁, n₂)` pairs.
    List(Vec<(i64, i64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSequence {
    pub family: SequenceFamily,
    pub k: usize,
    pub len: usize,
}

impl ModeSequence {
    pub fn cubic(c: f64, d: f64, k: usize, len: usize) -> Self {
        Self {
            family: SequenceFamily::Cubic { c, d },
            k,
            len,
        }
    }

    pub fn pure(k: usize, len: usize) -> Self {
        Self {
            family: SequenceFamily::Pure,
            k,
            len,
        }
    }

    pub fn list(pairs: Vec<(i64, i64)>, k: usize) -> Self {
        let len = pairs.len();
        Self {
            family: SequenceFamily::List(pairs),
            k,
            len,
        }
    }

    pub fn modes(&self) -> Result<Vec<ModeIndex>> {
        (1..=self.len)
            .map(|j| {
                let (n1, n2) = match &self.family {
                    SequenceFamily::Cubic { c, d } => {
                        let jf = j as f64;
                        ((d * jf).round() as i64, (c * jf * jf * jf).round() as i64)
                    }
                    SequenceFamily::Pure => (0, j as i64),
                    SequenceFamily::List(pairs) => *pairs.get(j - 1).ok_or_else(|| {
                        Error::Config(format!("mode list has {} entries, need {}", pairs.len(), self.len))
                    })?,
                };
                ModeIndex::new(n1, n2, self.k)
            })
            .collect()
    }
}

/// Per-mode report with its regime tag.
pub fn mode_invariants(m: &Martinet, mode: &ModeIndex) -> Result<RegimeReport> {
    m.rs_diagnostics(mode)
}

/// Per-mode reports and the sequence verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceVerdict {
    pub reports: Vec<RegimeReport>,
    pub verdict: Regime,
    /// `ζ̄` of the last mode.
    pub zeta_limit: f64,
    /// Least-squares slope of `ζ̄` per step over the second half.
    pub drift: f64,
}

/// Classifies a mode sequence from the asymptotics of its rescaled invariants.
pub fn classify_regime(m: &Martinet, seq: &ModeSequence) -> Result<SequenceVerdict> {
    if seq.len < MIN_SEQUENCE {
        return Err(Error::InsufficientData {
            needed: MIN_SEQUENCE,
            got: seq.len,
        });
    }
    let modes = seq.modes()?;
    let reports = m.rs_diagnostics_all(&modes)?;
    let th = m.thresholds;
    let tail = &reports[reports.len() / 2..];
    let zs: Vec<f64> = tail.iter().map(|r| r.zeta_bar).collect();
    let drift = lsq_slope(&zs);
    let zeta_limit = *zs.last().unwrap_or(&0.0);
    let same_sign = tail.iter().all(|r| r.mode.jmath() == tail[0].mode.jmath());
    let verdict = if tail.iter().all(|r| r.regime == Regime::M2M4) {
        Regime::M2M4
    } else if zeta_limit.abs() > th.zeta_limit && drift.abs() < th.drift {
        Regime::M1
    } else if zeta_limit.abs() <= th.zeta_limit && zs[0].abs() > zeta_limit.abs() && same_sign {
        Regime::M3(tail[0].mode.jmath())
    } else {
        Regime::Mixed
    };
    Ok(SequenceVerdict {
        reports,
        verdict,
        zeta_limit,
        drift,
    })
}

/// Least-squares slope of `ys` against `0, 1, 2, …`.
fn lsq_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Least-squares slope of `log(max_{j ≤ J} values_j)` against `log J` for
/// `J` from `⌈len/2⌉` to `len`.
pub fn running_max_growth(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut running = Vec::with_capacity(n);
    let mut m = f64::NEG_INFINITY;
    for &v in values {
        m = m.max(v);
        running.push(m);
    }
    let start = n.div_ceil(2).max(1);
    let pts: Vec<(f64, f64)> = (start..=n)
        .map(|j| ((j as f64).ln(), running[j - 1].ln()))
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Writes sequence reports with the derived columns.
pub fn write_regime_csv<W: Write>(mut out: W, reports: &[RegimeReport]) -> std::io::Result<()> {
    writeln!(
        out,
        "j,n1,n2,k,E,lambda,h,eta_bar,zeta_bar,rs1,rs2,rs3,rs4,level_residual,sigma_bar,w_bar,axis_mass,regime"
    )?;
    for (j, r) in reports.iter().enumerate() {
        let mut row = vec![
            (j + 1).to_string(),
            r.mode.n1.to_string(),
            r.mode.n2.to_string(),
            r.mode.k.to_string(),
        ];
        row.extend(
            [r.energy, r.lambda, r.h, r.eta_bar, r.zeta_bar]
                .iter()
                .chain(&r.rs_norms)
                .chain(&[r.level_residual, r.sigma_bar, r.w_bar, r.axis_mass])
                .map(|&v| fmt_f64(v)),
        );
        row.push(r.regime.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Rectangular `(x, ξ)` window sampled at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HusimiWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub nxi: usize,
}

impl HusimiWindow {
    fn validate(&self) -> Result<()> {
        if !(self.x_max > self.x_min && self.xi_max > self.xi_min && self.nx >= 2 && self.nxi >= 2) {
            return Err(Error::Config(format!("degenerate Husimi window {self:?}")));
        }
        Ok(())
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn xi(&self, j: usize) -> f64 {
        self.xi_min + (j as f64 + 0.5) * (self.xi_max - self.xi_min) / self.nxi as f64
    }

    pub fn cell_area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.xi_max - self.xi_min) / (self.nx * self.nxi) as f64
    }
}

/// Husimi density of one mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HusimiField {
    pub mode: ModeIndex,
    pub h: f64,
    pub window: HusimiWindow,
    /// Row-major `nx × nξ`, normalized to unit mass on the window.
    pub density: Vec<f64>,
    /// Mass on the window before normalization.
    pub raw_mass: f64,
    pub coverage_warning: Option<String>,
}

impl HusimiField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.density[i * self.window.nxi + j]
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.window.cell_area()
    }

    /// `ξ² + (h n₁ + h n₂ x²)²`.
    pub fn shell(&self, x: f64, xi: f64) -> f64 {
        let w = self.h * (self.mode.n1 as f64 + self.mode.n2 as f64 * x * x);
        xi * xi + w * w
    }

    /// Normalized mass in the tube `|shell − 1| < width`.
    pub fn tube_mass(&self, width: f64) -> f64 {
        let w = &self.window;
        let mut m = 0.0;
        for i in 0..w.nx {
            for j in 0..w.nxi {
                if (self.shell(w.x(i), w.xi(j)) - 1.0).abs() < width {
                    m += self.at(i, j);
                }
            }
        }
        m * w.cell_area()
    }

    /// Writes the density as a dense CSV matrix (rows `x`, columns `ξ`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.window.nx {
            let row: Vec<String> = (0..self.window.nxi).map(|j| fmt_f64(self.at(i, j))).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Coherent states reach `exp(−MARGIN²/2)` at this many widths.
const MARGIN: f64 = 6.0;

struct ModeState {
    h: f64,
    /// Samples of `φ(x)` at `xs`, `Δx Σ φ² = 1`.
    xs: Vec<f64>,
    phi: Vec<f64>,
    dx: f64,
}

impl ModeState {
    /// `√⟨ξ²⟩` from a centred difference of the samples.
    fn xi_spread(&self) -> f64 {
        let kin: f64 = self
            .phi
            .windows(3)
            .map(|w| ((w[2] - w[0]) / (2.0 * self.dx)).powi(2))
            .sum::<f64>()
            * self.dx;
        self.h * kin.sqrt()
    }

    /// Largest `|ξ|` where the momentum amplitude exceeds `1e-6` of its peak.
    fn xi_extent(&self) -> f64 {
        const SAMPLES: usize = 256;
        let cap = (2.0 * MARGIN * self.xi_spread())
            .max(2.0)
            .min(self.h * std::f64::consts::PI / self.dx);
        let amp: Vec<f64> = (0..=SAMPLES)
            .map(|i| {
                let p = cap * i as f64 / SAMPLES as f64 / self.h;
                let (mut re, mut im) = (0.0, 0.0);
                for (x, v) in self.xs.iter().zip(&self.phi) {
                    let (s, c) = (p * x).sin_cos();
                    re += v * c;
                    im += v * s;
                }
                re.hypot(im)
            })
            .collect();
        let peak = amp.iter().cloned().fold(0.0, f64::max);
        let last = amp.iter().rposition(|&a| a > 1e-6 * peak).unwrap_or(0);
        cap * (last + 1).min(SAMPLES) as f64 / SAMPLES as f64
    }

    /// Highest frequency resolved without aliasing when the coherent
    /// overlaps reach `|ξ₀| ≤ xi_max`.
    fn resolves(&self, xi_max: f64) -> bool {
        let band = (xi_max + MARGIN * self.xi_spread()) / self.h + 2.0 * MARGIN / self.h.sqrt();
        std::f64::consts::PI / self.dx >= band
    }
}

const MAX_POINTS: usize = 1 << 16;

/// Mode samples fine enough for coherent overlaps up to `|ξ₀| ≤ xi_max`.
fn mode_state(m: &Martinet, mode: &ModeIndex, xi_max: f64) -> Result<ModeState> {
    let mu = mode.mu();
    let mut grid = m.solver.grid_for(mu, mode.k);
    loop {
        let st = sample_mode(m, mode, &grid)?;
        if st.resolves(xi_max) {
            return Ok(st);
        }
        if grid.points >= MAX_POINTS {
            return Err(Error::Config(format!(
                "Husimi window |xi| <= {xi_max} needs more than {MAX_POINTS} samples"
            )));
        }
        grid = GridSpec::new(grid.half_width, grid.points * 2, grid.order)?.with_safety(grid.safety)?;
    }
}

fn sample_mode(m: &Martinet, mode: &ModeIndex, grid: &GridSpec) -> Result<ModeState> {
    let st = m.solver.state_on(mode.mu(), mode.k, grid)?;
    let s = (mode.n2.abs() as f64).cbrt();
    let energy = s * s * st.value;
    // φ(x) = s^{1/2} Φ(s x).
    let xs = grid.nodes().iter().map(|u| u / s).collect();
    let phi = st.vector.iter().map(|v| v * s.sqrt()).collect();
    Ok(ModeState {
        h: energy.powf(-0.5),
        xs,
        phi,
        dx: grid.spacing() / s,
    })
}

/// Window covering the mode, its momentum spread and the shell, padded by
/// several coherent widths.
pub fn default_window(m: &Martinet, mode: &ModeIndex, cells: usize) -> Result<HusimiWindow> {
    let mode = ModeIndex::new(mode.n1, mode.n2, mode.k)?;
    let st = sample_mode(m, &mode, &m.solver.grid_for(mode.mu(), mode.k))?;
    let peak = st.phi.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let extent = st
        .xs
        .iter()
        .zip(&st.phi)
        .filter(|(_, v)| v.abs() > 1e-8 * peak)
        .fold(0.0_f64, |a, (x, _)| a.max(x.abs()));
    let pad = MARGIN * st.h.sqrt();
    let x_max = extent + pad;
    let xi_max = st.xi_extent() + pad;
    Ok(HusimiWindow {
        x_min: -x_max,
        x_max,
        nx: cells,
        xi_min: -xi_max,
        xi_max,
        nxi: cells,
    })
}

/// Husimi density `|⟨g_{x₀,ξ₀}, φ⟩|² / (2πh)` with coherent states
/// `g(x) = (πh)^{−1/4} exp(−(x − x₀)²/(2h) + iξ₀(x − x₀)/h)`.
pub fn husimi(m: &Martinet, mode: &ModeIndex, window: &HusimiWindow) -> Result<HusimiField> {
    window.validate()?;
    let mode = ModeIndex::new(mode.n1, mode.n2, mode.k)?;
    let st = mode_state(m, &mode, window.xi_min.abs().max(window.xi_max.abs()))?;
    let h = st.h;
    let norm = (std::f64::consts::PI * h).powf(-0.25);
    let reach = MARGIN * h.sqrt();
    let rows: Vec<Vec<f64>> = (0..window.nx)
        .into_par_iter()
        .map(|i| {
            let x0 = window.x(i);
            let local: Vec<(f64, f64)> = st
                .xs
                .iter()
                .zip(&st.phi)
                .filter(|(x, _)| (**x - x0).abs() <= reach)
                .map(|(&x, &v)| (x - x0, v * (-(x - x0) * (x - x0) / (2.0 * h)).exp()))
                .collect();
            (0..window.nxi)
                .map(|j| {
                    let xi0 = window.xi(j);
                    let (mut re, mut im) = (0.0, 0.0);
                    for &(d, a) in &local {
                        let (s, c) = (xi0 * d / h).sin_cos();
                        re += a * c;
                        im -= a * s;
                    }
                    let amp2 = (re * re + im * im) * (norm * st.dx).powi(2);
                    amp2 / (2.0 * std::f64::consts::PI * h)
                })
                .collect()
        })
        .collect();
    let mut density: Vec<f64> = rows.into_iter().flatten().collect();
    let raw_mass = density.iter().sum::<f64>() * window.cell_area();
    let coverage_warning = (raw_mass < 0.99).then(|| {
        format!("window holds only {:.4} of the Husimi mass", raw_mass)
    });
    if raw_mass > 0.0 {
        density.iter_mut().for_each(|d| *d /= raw_mass);
    }
    Ok(HusimiField {
        mode,
        h,
        window: *window,
        density,
        raw_mass,
        coverage_warning,
    })
}

/// Husimi mass in the tube `|shell − 1| < width`, sampled on a `cells × cells`
/// window bounding the tube only.
pub fn shell_tube_mass(m: &Martinet, mode: &ModeIndex, width: f64, cells: usize) -> Result<f64> {
    if !(width > 0.0 && width < 1.0) {
        return Err(Error::Domain {
            what: "tube width must lie in (0, 1)",
            value: width,
        });
    }
    let mode = ModeIndex::new(mode.n1, mode.n2, mode.k)?;
    let energy = m.lambda(&mode.params())?;
    let h = energy.powf(-0.5);
    let c = (1.0 + width).sqrt();
    let (a, b) = (h * mode.n1 as f64, h * mode.n2 as f64);
    let x2 = ((c - a) / b).max((-c - a) / b);
    if x2 <= 0.0 {
        return Ok(0.0);
    }
    let window = HusimiWindow {
        x_min: -x2.sqrt(),
        x_max: x2.sqrt(),
        nx: cells,
        xi_min: -c,
        xi_max: c,
        nxi: cells,
    };
    let field = husimi(m, &mode, &window)?;
    Ok(field.tube_mass(width) * field.raw_mass)
}

/// Sampled `|φ_k(x)|²` with localization statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionDensity {
    pub mode: ModeIndex,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    /// `∫|φ|² dx`.
    pub mass: f64,
    /// `(ε, mass within |u| < ε)` with `u = |n₂|^{1/3} x`.
    pub near_zero: Vec<(f64, f64)>,
    /// Principal maxima (at least half the global maximum), in `x`.
    pub maxima: Vec<f64>,
}

pub fn position_density(m: &Martinet, mode: &ModeIndex) -> Result<PositionDensity> {
    let mode = ModeIndex::new(mode.n1, mode.n2, mode.k)?;
    let st = sample_mode(m, &mode, &m.solver.grid_for(mode.mu(), mode.k))?;
    let s = (mode.n2.abs() as f64).cbrt();
    let density: Vec<f64> = st.phi.iter().map(|v| v * v).collect();
    let mass = density.iter().sum::<f64>() * st.dx;
    let near_zero = [0.1, 0.5]
        .iter()
        .map(|&eps| {
            let near = st
                .xs
                .iter()
                .zip(&density)
                .filter(|(x, _)| (s * **x).abs() < eps)
                .map(|(_, d)| d)
                .sum::<f64>()
                * st.dx;
            (eps, near)
        })
        .collect();
    let top = density.iter().cloned().fold(0.0_f64, f64::max);
    let maxima = (1..density.len() - 1)
        .filter(|&i| {
            density[i] >= 0.5 * top && density[i] > density[i - 1] && density[i] >= density[i + 1]
        })
        .map(|i| st.xs[i])
        .collect();
    Ok(PositionDensity {
        mode,
        x: st.xs,
        density,
        mass,
        near_zero,
        maxima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::MartinetParams;

    fn m() -> Martinet {
        Martinet::default()
    }

    #[test]
    fn sequence_families() {
        let cubic = ModeSequence::cubic(1.0, -1.0, 1, 3).modes().unwrap();
        let pairs: Vec<(i64, i64)> = cubic.iter().map(|m| (m.n1, m.n2)).collect();
        assert_eq!(pairs, vec![(-1, 1), (-2, 8), (-3, 27)]);
        let pure = ModeSequence::pure(2, 3).modes().unwrap();
        assert!(pure.iter().enumerate().all(|(j, m)| m.n1 == 0 && m.n2 == j as i64 + 1 && m.k == 2));
        assert!(ModeSequence::cubic(0.1, 0.0, 1, 2).modes().is_err());
        assert!(ModeSequence::list(vec![(1, 0)], 1).modes().is_err());
    }

    #[test]
    fn mode_invariant_examples() {
        let m = m();
        let r = mode_invariants(&m, &ModeIndex::new(0, 8, 1).unwrap()).unwrap();
        let h = r.h;
        let lam = m.lambda(&MartinetParams::new(0.0, h * h * h * 8.0, 1).unwrap()).unwrap();
        assert!((lam - 1.0).abs() < 1e-10);
        assert_eq!(r.eta_bar, 0.0);
        let hs: Vec<f64> = (1..=6)
            .map(|j| mode_invariants(&m, &ModeIndex::new(0, j, 1).unwrap()).unwrap().h)
            .collect();
        assert!(hs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn w_bar_is_half_the_energy_slope() {
        let m = m();
        for (n1, n2, k) in [(3, 2, 1), (-5, 1, 2), (0, -4, 1)] {
            let r = mode_invariants(&m, &ModeIndex::new(n1, n2, k).unwrap()).unwrap();
            let d = 1e-4;
            let e = |x: f64| m.lambda(&MartinetParams::new(n1 as f64 + x, n2 as f64, k).unwrap()).unwrap();
            let slope = (e(d) - e(-d)) / (2.0 * d);
            assert!((r.w_bar - r.h * slope / 2.0).abs() < 1e-6, "{n1},{n2}: {} vs {}", r.w_bar, r.h * slope / 2.0);
        }
    }

    #[test]
    fn classify_examples() {
        let m = m();
        let cubic = classify_regime(&m, &ModeSequence::cubic(1.0, 0.0, 1, 10)).unwrap();
        assert_eq!(cubic.verdict, Regime::M1);
        let lam0 = m.solver.eigenvalue(0.0, 1).unwrap();
        assert!((cubic.zeta_limit - lam0.powf(-1.5)).abs() < 1e-8);
        let right = classify_regime(&m, &ModeSequence::list((1..=12).map(|j| (j, 1)).collect(), 1)).unwrap();
        assert_eq!(right.verdict, Regime::M3(0));
        let flipped = classify_regime(&m, &ModeSequence::list((1..=12).map(|j| (-j, -1)).collect(), 1)).unwrap();
        assert_eq!(flipped.verdict, Regime::M3(1));
        let wells = classify_regime(&m, &ModeSequence::list((4..=13).map(|j| (j, -1)).collect(), 1)).unwrap();
        assert_eq!(wells.verdict, Regime::M2M4);
        assert!(matches!(
            classify_regime(&m, &ModeSequence::pure(1, 7)),
            Err(Error::InsufficientData { needed: 8, got: 7 })
        ));
    }

    #[test]
    fn running_max_growth_of_bounded_and_growing_data() {
        assert_eq!(running_max_growth(&[1.0; 10]), 0.0);
        let cubic: Vec<f64> = (1..=16).map(|j| (j * j * j) as f64).collect();
        assert!((running_max_growth(&cubic) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn husimi_normalization_and_positivity() {
        let m = m();
        let mode = ModeIndex::new(0, 8, 1).unwrap();
        let w = default_window(&m, &mode, 60).unwrap();
        let f = husimi(&m, &mode, &w).unwrap();
        assert!((f.raw_mass - 1.0).abs() < 1e-6, "raw mass {}", f.raw_mass);
        assert!((f.total_mass() - 1.0).abs() < 1e-12);
        assert!(f.density.iter().all(|&d| d >= 0.0));
        assert!(f.coverage_warning.is_none());
        let again = husimi(&m, &mode, &w).unwrap();
        assert_eq!(f.density, again.density);
    }

    #[test]
    fn husimi_symmetries_of_real_even_modes() {
        let m = m();
        let mode = ModeIndex::new(2, 3, 1).unwrap();
        let w = default_window(&m, &mode, 40).unwrap();
        let f = husimi(&m, &mode, &w).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let a = f.at(i, j);
                assert!((a - f.at(i, 39 - j)).abs() < 1e-12 * (1.0 + a));
                assert!((a - f.at(39 - i, j)).abs() < 1e-9 * (1.0 + a));
            }
        }
    }

    #[test]
    fn husimi_warns_on_small_window() {
        let m = m();
        let mode = ModeIndex::new(0, 8, 1).unwrap();
        let w = HusimiWindow {
            x_min: 0.0,
            x_max: 0.5,
            nx: 10,
            xi_min: -0.2,
            xi_max: 0.2,
            nxi: 10,
        };
        let f = husimi(&m, &mode, &w).unwrap();
        assert!(f.coverage_warning.is_some());
        let bad = HusimiWindow { nx: 1, ..w };
        assert!(husimi(&m, &mode, &bad).is_err());
    }

    #[test]
    fn husimi_concentrates_for_large_n1() {
        let m = m();
        let mass = shell_tube_mass(&m, &ModeIndex::new(50, 1, 1).unwrap(), 0.2, 80).unwrap();
        assert!(mass > 0.99, "tube mass {mass}");
    }

    #[test]
    fn position_density_examples() {
        let m = m();
        let even = position_density(&m, &ModeIndex::new(0, 5, 2).unwrap()).unwrap();
        assert!((even.mass - 1.0).abs() < 1e-10);
        let n = even.density.len();
        for i in 0..n / 2 {
            assert!((even.density[i] - even.density[n - 1 - i]).abs() < 1e-12);
            assert_eq!(even.x[i], -even.x[n - 1 - i]);
        }
        assert!(even.near_zero[0].1 < even.near_zero[1].1);
        let deep = position_density(&m, &ModeIndex::new(-40, 2, 1).unwrap()).unwrap();
        let bottom = 20f64.sqrt();
        assert_eq!(deep.maxima.len(), 2);
        assert!((deep.maxima[0] + deep.maxima[1]).abs() < 1e-12);
        assert!((deep.maxima[1] - bottom).abs() < 0.01 * bottom);
        assert!(deep.near_zero[1].1 < 1e-6);
    }

    #[test]
    fn regime_csv_columns() {
        let m = m();
        let r = mode_invariants(&m, &ModeIndex::new(1, 1, 1).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_regime_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').count();
        assert_eq!(lines.next().unwrap().split(',').count(), header);
    }
}
