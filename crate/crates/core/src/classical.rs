//! Effective classical dynamics of `H^ȷ_η(ς, ξ) = ξ² + (η + (−1)^ȷ ς²)²`.
//!
//! `H¹_η = H⁰_{−η}`, so everything reduces to `η' = (−1)^ȷ η` and ȷ = 0.
//! On the unit shell the substitution `η' + ς² = cos s`, `ξ = −sin s` gives
//! `ds/dt = 4ς`. For `−1 < η' < 1` the quarter orbit is `s ∈ [0, arccos η']`
//! and the full period is `√2 K(√((1 − η')/2))`. For `η' < −1` each well is
//! traced by `s ∈ [0, 2π)` and the period is `K(√(2/(1 − η'))) / √(1 − η')`.

use std::io::Write;

use serde::Serialize;

use crate::elliptic::{ellip_k, ellip_ke};
use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::roots::brent;
use crate::table::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseState {
    pub varsigma: f64,
    pub xi: f64,
}

impl PhaseState {
    pub fn new(varsigma: f64, xi: f64) -> Self {
        Self { varsigma, xi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitBranch {
    /// One orbit around the origin.
    Single,
    LeftWell,
    RightWell,
    /// Separatrix through the origin.
    Homoclinic,
    /// The shell is a single point.
    Equilibrium,
}

/// An orbit on the energy shell `H^ȷ_η = energy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitSpec {
    pub jmath: u8,
    pub eta: f64,
    pub energy: f64,
    pub branch: OrbitBranch,
}

impl OrbitSpec {
    /// The orbit at `energy`; two-well shells default to the right well.
    pub fn new(jmath: u8, eta: f64, energy: f64) -> Result<Self> {
        if jmath > 1 {
            return Err(Error::Config(format!("jmath must be 0 or 1, got {jmath}")));
        }
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::Domain {
                what: "orbit energy must be positive",
                value: energy,
            });
        }
        if !eta.is_finite() {
            return Err(Error::Domain {
                what: "eta must be finite",
                value: eta,
            });
        }
        let e = reduced_eta(jmath, eta);
        let floor = e * e;
        let branch = if e >= 0.0 {
            if energy < floor {
                return Err(Error::Domain {
                    what: "energy is below the potential floor eta'^2",
                    value: energy,
                });
            } else if energy == floor {
                OrbitBranch::Equilibrium
            } else {
                OrbitBranch::Single
            }
        } else if energy > floor {
            OrbitBranch::Single
        } else if energy == floor {
            OrbitBranch::Homoclinic
        } else {
            OrbitBranch::RightWell
        };
        Ok(Self {
            jmath,
            eta,
            energy,
            branch,
        })
    }

    /// The unit-energy orbit.
    pub fn unit(jmath: u8, eta: f64) -> Result<Self> {
        Self::new(jmath, eta, 1.0)
    }

    /// Switches between the two wells of a two-well shell.
    pub fn with_branch(mut self, branch: OrbitBranch) -> Result<Self> {
        let wells = [OrbitBranch::LeftWell, OrbitBranch::RightWell];
        if wells.contains(&self.branch) && wells.contains(&branch) {
            self.branch = branch;
            Ok(self)
        } else if branch == self.branch {
            Ok(self)
        } else {
            Err(Error::Config(format!(
                "branch {branch:?} is inconsistent with the shell (expected {:?})",
                self.branch
            )))
        }
    }

    /// `η' = (−1)^ȷ η`.
    pub fn reduced_eta(&self) -> f64 {
        reduced_eta(self.jmath, self.eta)
    }

    fn require_unit(&self) -> Result<()> {
        if self.energy != 1.0 {
            return Err(Error::UnsupportedEnergy {
                energy: self.energy,
            });
        }
        Ok(())
    }

    /// Turning point with `ξ = 0` on the outer side of the orbit.
    pub fn start_state(&self) -> PhaseState {
        let e = self.reduced_eta();
        let r = (self.energy.sqrt() - e).max(0.0).sqrt();
        let r = match self.branch {
            OrbitBranch::LeftWell => -r,
            OrbitBranch::Equilibrium => {
                if e < 0.0 {
                    (-e).sqrt()
                } else {
                    0.0
                }
            }
            _ => r,
        };
        PhaseState::new(r, 0.0)
    }
}

fn reduced_eta(jmath: u8, eta: f64) -> f64 {
    if jmath == 0 {
        eta
    } else {
        -eta
    }
}

/// `ξ² + (η + (−1)^ȷ ς²)²`.
pub fn hamiltonian(jmath: u8, eta: f64, s: PhaseState) -> f64 {
    let sign = if jmath == 0 { 1.0 } else { -1.0 };
    let w = eta + sign * s.varsigma * s.varsigma;
    s.xi * s.xi + w * w
}

/// `∂_ς H^ȷ_η = 4(−1)^ȷ ς (η + (−1)^ȷ ς²)`.
fn force(jmath: u8, eta: f64, varsigma: f64) -> f64 {
    let sign = if jmath == 0 { 1.0 } else { -1.0 };
    4.0 * sign * varsigma * (eta + sign * varsigma * varsigma)
}

/// Outcome of a Störmer–Verlet integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowResult {
    pub state: PhaseState,
    /// `|H(end) − H(start)|`.
    pub drift: f64,
    /// Largest `|H − H(start)|` along the path.
    pub max_excursion: f64,
    /// `drift / (dt² |t|)`.
    pub constant: f64,
    pub steps: usize,
}

/// Largest accepted energy excursion of [`flow`].
pub const FLOW_DRIFT_LIMIT: f64 = 1e-3;

struct Verlet {
    jmath: u8,
    eta: f64,
    dt: f64,
}

impl Verlet {
    #[inline]
    fn step(&self, s: &mut PhaseState) {
        let half = 0.5 * self.dt;
        s.xi -= half * force(self.jmath, self.eta, s.varsigma);
        s.varsigma += self.dt * 2.0 * s.xi;
        s.xi -= half * force(self.jmath, self.eta, s.varsigma);
    }
}

/// Advances `s0` by time `t` (either sign) with steps of size at most `dt`.
pub fn flow(spec: &OrbitSpec, s0: PhaseState, t: f64, dt: f64) -> Result<FlowResult> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain {
            what: "time step must be positive",
            value: dt,
        });
    }
    if !t.is_finite() {
        return Err(Error::Domain {
            what: "flow time must be finite",
            value: t,
        });
    }
    let steps = (t.abs() / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let v = Verlet {
        jmath: spec.jmath,
        eta: spec.eta,
        dt: h,
    };
    let h0 = hamiltonian(spec.jmath, spec.eta, s0);
    let mut s = s0;
    let mut max_excursion = 0.0_f64;
    for _ in 0..steps {
        v.step(&mut s);
        max_excursion = max_excursion.max((hamiltonian(spec.jmath, spec.eta, s) - h0).abs());
    }
    if !(max_excursion <= FLOW_DRIFT_LIMIT) {
        return Err(Error::Accuracy {
            drift: max_excursion,
            limit: FLOW_DRIFT_LIMIT,
        });
    }
    let drift = (hamiltonian(spec.jmath, spec.eta, s) - h0).abs();
    let constant = if t == 0.0 { 0.0 } else { drift / (h * h * t.abs()) };
    Ok(FlowResult {
        state: s,
        drift,
        max_excursion,
        constant,
        steps,
    })
}

/// Period of the unit-energy orbit from the elliptic closed forms.
pub fn period(spec: &OrbitSpec) -> Result<f64> {
    spec.require_unit()?;
    let e = spec.reduced_eta();
    match spec.branch {
        OrbitBranch::Homoclinic => Err(Error::DivergentPeriod { eta: e }),
        // The shell η' = 1 is the origin; report the small-orbit limit.
        OrbitBranch::Single | OrbitBranch::Equilibrium => {
            Ok(std::f64::consts::SQRT_2 * ellip_k(((1.0 - e) / 2.0).sqrt())?)
        }
        OrbitBranch::LeftWell | OrbitBranch::RightWell => {
            Ok(ellip_k((2.0 / (1.0 - e)).sqrt())? / (1.0 - e).sqrt())
        }
    }
}

/// Steps per period of the event-detected period.
const PERIOD_STEPS: usize = 4096;

/// Period from Störmer–Verlet with event detection at the section `ξ = 0`,
/// Richardson-extrapolated over `dt` and `dt/2`.
pub fn period_by_flow(spec: &OrbitSpec) -> Result<f64> {
    let estimate = period(spec)?;
    if spec.branch == OrbitBranch::Equilibrium {
        return Err(Error::Config(
            "the unit shell is an equilibrium point; there is no return".into(),
        ));
    }
    let coarse = return_time(spec, estimate / PERIOD_STEPS as f64)?;
    let fine = return_time(spec, estimate / (2 * PERIOD_STEPS) as f64)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// First return to the start section `ξ = 0` crossed in the starting direction.
fn return_time(spec: &OrbitSpec, dt: f64) -> Result<f64> {
    let v = Verlet {
        jmath: spec.jmath,
        eta: spec.eta,
        dt,
    };
    let s0 = spec.start_state();
    let dir = -force(spec.jmath, spec.eta, s0.varsigma).signum();
    let mut s = s0;
    let mut t = 0.0;
    let max_steps = 8 * PERIOD_STEPS * 4;
    for _ in 0..max_steps {
        let prev = s;
        v.step(&mut s);
        if prev.xi * dir < 0.0 && s.xi * dir >= 0.0 {
            let f0 = -force(spec.jmath, spec.eta, prev.varsigma);
            let f1 = -force(spec.jmath, spec.eta, s.varsigma);
            return Ok(t + dt * hermite_root(prev.xi, s.xi, f0 * dt, f1 * dt));
        }
        t += dt;
    }
    Err(Error::NoConvergence(format!(
        "no return to the section within {max_steps} steps"
    )))
}

/// Root in `[0, 1]` of the cubic Hermite interpolant with end values `y0`,
/// `y1` and end slopes `d0`, `d1` (per unit parameter).
fn hermite_root(y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let p = |u: f64| {
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * d0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * d1
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let up = y1 > y0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (p(mid) < 0.0) == up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const QUAD_ABS: f64 = 1e-13;
const QUAD_REL: f64 = 1e-12;

/// Time average `(1/T)∮ f dt` over the unit-energy orbit, computed in the
/// parameterization `ς(s) = √(cos s − η')`, `ξ(s) = −sin s`, `dt = ds/(4ς)`.
pub fn orbit_average<F>(spec: &OrbitSpec, mut f: F) -> Result<f64>
where
    F: FnMut(PhaseState) -> f64,
{
    spec.require_unit()?;
    let e = spec.reduced_eta();
    match spec.branch {
        OrbitBranch::Homoclinic => Ok(f(PhaseState::new(0.0, 0.0))),
        OrbitBranch::Equilibrium => Ok(f(spec.start_state())),
        OrbitBranch::Single => {
            // Four symmetric quarters; u = √(𝒯 − s) removes the endpoint singularity.
            let top = e.acos();
            let value = integrate(
                |u: f64| {
                    let (vs, w) = quarter_point(top, u);
                    let xi = -(top - u * u).sin();
                    let total = f(PhaseState::new(vs, xi))
                        + f(PhaseState::new(vs, -xi))
                        + f(PhaseState::new(-vs, xi))
                        + f(PhaseState::new(-vs, -xi));
                    w * total
                },
                0.0,
                top.sqrt(),
                QUAD_ABS,
                QUAD_REL,
            )?;
            let norm = integrate(|u| quarter_point(top, u).1, 0.0, top.sqrt(), QUAD_ABS, QUAD_REL)?;
            Ok(value / (4.0 * norm))
        }
        OrbitBranch::LeftWell | OrbitBranch::RightWell => {
            let sign = if spec.branch == OrbitBranch::LeftWell {
                -1.0
            } else {
                1.0
            };
            let value = integrate(
                |s: f64| {
                    let vs = sign * (s.cos() - e).sqrt();
                    let xi = s.sin();
                    (f(PhaseState::new(vs, -xi)) + f(PhaseState::new(vs, xi))) / vs.abs()
                },
                0.0,
                std::f64::consts::PI,
                QUAD_ABS,
                QUAD_REL,
            )?;
            let norm = integrate(
                |s: f64| 2.0 / (s.cos() - e).sqrt(),
                0.0,
                std::f64::consts::PI,
                QUAD_ABS,
                QUAD_REL,
            )?;
            Ok(value / norm)
        }
    }
}

/// `(ς, 2u/ς)` at `s = 𝒯 − u²`: the position and the weight `ds/ς` in `u`.
fn quarter_point(top: f64, u: f64) -> (f64, f64) {
    // cos s − cos 𝒯 without cancellation.
    let gap = 2.0 * (top - 0.5 * u * u).sin() * (0.5 * u * u).sin();
    let vs = gap.max(0.0).sqrt();
    let w = if u == 0.0 || vs == 0.0 {
        2.0 / top.sin().sqrt()
    } else {
        2.0 * u / vs
    };
    (vs, w)
}

/// `Υ_ȷ(η) = Υ((−1)^ȷ η)` from the elliptic closed forms:
/// `2E(k)/K(k) − 1`, `k = √((1 − η')/2)` on `(−1, 1]`; `−1` at `η' = −1`;
/// `(1 − η')E(k)/K(k) + η'`, `k = √(2/(1 − η'))` for `η' < −1`.
pub fn upsilon(jmath: u8, eta: f64) -> Result<f64> {
    if jmath > 1 {
        return Err(Error::Config(format!("jmath must be 0 or 1, got {jmath}")));
    }
    let e = reduced_eta(jmath, eta);
    if !(e <= 1.0) {
        return Err(Error::Domain {
            what: "upsilon needs (-1)^j eta <= 1",
            value: eta,
        });
    }
    if e == -1.0 {
        return Ok(-1.0);
    }
    if e > -1.0 {
        let k = ((1.0 - e) / 2.0).sqrt();
        let (kk, ee) = ellip_ke(k)?;
        Ok(2.0 * ee / kk - 1.0)
    } else {
        // (1/T)∫₀^π cos s/√(cos s − η') ds with cos s − η' = (1 − η')(1 − k² sin²(s/2)).
        let k = (2.0 / (1.0 - e)).sqrt();
        let (kk, ee) = ellip_ke(k)?;
        Ok((1.0 - e) * ee / kk + e)
    }
}

/// `Υ` as the orbit average of `η' + ς²`.
pub fn upsilon_bruteforce(jmath: u8, eta: f64) -> Result<f64> {
    let spec = OrbitSpec::unit(jmath, eta)?;
    let e = spec.reduced_eta();
    orbit_average(&spec, |s| e + s.varsigma * s.varsigma)
}

/// Time average of `f` along the Störmer–Verlet trajectory over one
/// event-detected period, Richardson-extrapolated over `dt` and `dt/2`.
pub fn flow_average<F>(spec: &OrbitSpec, mut f: F) -> Result<f64>
where
    F: FnMut(PhaseState) -> f64,
{
    spec.require_unit()?;
    match spec.branch {
        OrbitBranch::Homoclinic => return Ok(f(PhaseState::new(0.0, 0.0))),
        OrbitBranch::Equilibrium => return Ok(f(spec.start_state())),
        _ => {}
    }
    let t = period_by_flow(spec)?;
    let mut run = |n: usize| {
        let v = Verlet {
            jmath: spec.jmath,
            eta: spec.eta,
            dt: t / n as f64,
        };
        let mut s = spec.start_state();
        let mut sum = 0.0;
        for _ in 0..n {
            sum += f(s);
            v.step(&mut s);
        }
        sum / n as f64
    };
    let coarse = run(PERIOD_STEPS);
    let fine = run(2 * PERIOD_STEPS);
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `Υ` as the flow time average of `η' + ς²`.
pub fn upsilon_flow(jmath: u8, eta: f64) -> Result<f64> {
    let spec = OrbitSpec::unit(jmath, eta)?;
    let e = spec.reduced_eta();
    flow_average(&spec, |s| e + s.varsigma * s.varsigma)
}

/// The root `η*` of `Υ` on `(−1, 1)` and `Υ'(η*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaStar {
    pub eta: f64,
    pub derivative: f64,
}

/// Step of the central difference for `Υ'`.
const UPSILON_STEP: f64 = 1e-5;

pub fn eta_star() -> Result<EtaStar> {
    let eta = brent(|e| upsilon(0, e), -0.99, 0.99, 1e-14)?;
    let derivative =
        (upsilon(0, eta + UPSILON_STEP)? - upsilon(0, eta - UPSILON_STEP)?) / (2.0 * UPSILON_STEP);
    if !(derivative.abs() > 0.0) {
        return Err(Error::Nondegeneracy {
            mu: eta,
            second_derivative: derivative,
        });
    }
    Ok(EtaStar { eta, derivative })
}

/// `ν_j(σ) = |σ|(2j + 1)` for `j = 0..=jmax`.
pub fn harmonic_levels(sigma: f64, jmax: usize) -> Result<Vec<f64>> {
    if !(sigma != 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "harmonic levels need a finite nonzero sigma",
            value: sigma,
        });
    }
    Ok((0..=jmax)
        .map(|j| sigma.abs() * (2 * j + 1) as f64)
        .collect())
}

/// One row of a `Υ` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpsilonRow {
    pub eta: f64,
    pub jmath: u8,
    pub closed: f64,
    pub flow: f64,
}

/// Writes `eta,jmath,upsilon_closed,upsilon_flow,abs_diff`.
pub fn write_upsilon_csv<W: Write>(mut out: W, rows: &[UpsilonRow]) -> std::io::Result<()> {
    writeln!(out, "eta,jmath,upsilon_closed,upsilon_flow,abs_diff")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.eta),
            r.jmath,
            fmt_f64(r.closed),
            fmt_f64(r.flow),
            fmt_f64((r.closed - r.flow).abs())
        )?;
    }
    Ok(())
}
