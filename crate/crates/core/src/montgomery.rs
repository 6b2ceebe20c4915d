//! The Montgomery family `Ĥ_μ = D_x² + (μ + x²)²`: eigenvalue curves
//! `Λ_k(μ)`, Hellmann–Feynman slopes, critical points and eigenvector
//! derivatives.
//!
//! `∂_μ Ĥ_μ = 2(μ + x²)`, so `dΛ_k/dμ = 2 ⟨(μ + x²) φ_k, φ_k⟩`.

use std::io::Write;

use crate::band::SymBand;
use crate::error::{Error, Result};
use crate::oscillator::{
    assemble_full, GridPolicy, GridSpec, QuarticWell, SolvedState, WellSolver,
};
use crate::roots::brent;
use crate::table::fmt_f64;

pub use crate::oscillator::Order;

/// Default root-finding bracket for `μ*_k`.
pub const DEFAULT_BRACKET: (f64, f64) = (-3.0, 1.0);

/// One eigenpair of `Ĥ_μ` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Index starting at 1.
    pub k: usize,
    pub value: f64,
    /// Samples of `φ_k` on the grid nodes, `Δx Σ φ² = 1`.
    pub vector: Vec<f64>,
    /// `‖Ĥ_μ φ_k − Λ_k φ_k‖` in the grid L² norm.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EigencurveSample {
    pub mu: f64,
    pub k: usize,
    pub value: f64,
    pub derivative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CriticalPoint {
    pub k: usize,
    pub mu_star: f64,
    pub value: f64,
    pub second_derivative: f64,
}

/// `∂_μ φ_k` from the truncated first-order perturbation sum.
#[derive(Debug, Clone, PartialEq)]
pub struct EigvecDerivative {
    pub vector: Vec<f64>,
    /// `‖2(w − ⟨w⟩)φ_k − (Λ_k − Ĥ_μ) ∂_μφ_k‖` with all `mmax` terms.
    pub residual: f64,
    /// Residual after truncating the sum at `m ≤ 2, 4, 8, …, mmax`.
    pub decay: Vec<(usize, f64)>,
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Tolerances {
    /// Minimum relative gap between consecutive eigenvalues.
    pub gap: f64,
    /// Largest accepted eigen-residual.
    pub residual: f64,
    /// Root-finding tolerance on `μ`.
    pub root: f64,
    /// Step for central differences of slopes.
    pub fd_step: f64,
    /// Largest accepted perturbation-sum residual.
    pub truncation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gap: 1e-8,
            residual: 1e-7,
            root: 1e-12,
            fd_step: 1e-3,
            truncation: 1e-5,
        }
    }
}

/// Solver for the Montgomery family with an automatic grid policy.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct Montgomery {
    pub policy: GridPolicy,
    pub tol: Tolerances,
}

impl Montgomery {
    pub fn new(policy: GridPolicy, tol: Tolerances) -> Self {
        Self { policy, tol }
    }

    /// Automatic grid for `Λ_1..Λ_kmax` at `μ`.
    pub fn grid_for(&self, mu: f64, kmax: usize) -> GridSpec {
        self.policy.for_index(&QuarticWell::montgomery(mu), kmax)
    }

    /// One grid valid on the whole bracket `[lo, hi]`.
    pub fn covering_grid(&self, lo: f64, hi: f64, kmax: usize) -> GridSpec {
        self.policy.covering(lo, hi, kmax)
    }

    fn solver(&self, mu: f64, grid: &GridSpec) -> Result<WellSolver> {
        if !mu.is_finite() {
            return Err(Error::Domain {
                what: "mu must be finite",
                value: mu,
            });
        }
        WellSolver::new(QuarticWell::montgomery(mu), *grid)
    }

    /// The first `kmax` eigenpairs, ascending and simple.
    pub fn eigenpairs(&self, mu: f64, grid: &GridSpec, kmax: usize) -> Result<Vec<EigenPair>> {
        if kmax == 0 || kmax > grid.points / 4 {
            return Err(Error::Config(format!(
                "kmax={kmax} must be in 1..={} (N/4) for N={}",
                grid.points / 4,
                grid.points
            )));
        }
        let s = self.solver(mu, grid)?;
        solve_pairs(&s, kmax, &self.tol)
    }

    /// `Λ_k(μ)` on the automatic grid.
    pub fn eigenvalue(&self, mu: f64, k: usize) -> Result<f64> {
        let grid = self.grid_for(mu, k);
        self.eigenvalue_on(mu, k, &grid)
    }

    /// `Λ_k(μ)` on a given grid (no simplicity check against neighbours).
    pub fn eigenvalue_on(&self, mu: f64, k: usize, grid: &GridSpec) -> Result<f64> {
        let s = self.solver(mu, grid)?;
        let st = s.state(k)?;
        s.check_truncation(st.value)?;
        Ok(st.value)
    }

    /// Normalized eigenstate `k` on a given grid, truncation-checked.
    pub fn state_on(&self, mu: f64, k: usize, grid: &GridSpec) -> Result<SolvedState> {
        let s = self.solver(mu, grid)?;
        let st = s.state(k)?;
        s.check_truncation(st.value)?;
        Ok(st)
    }

    /// Normalized eigenstate `k` on the automatic grid.
    pub fn state(&self, mu: f64, k: usize) -> Result<SolvedState> {
        let grid = self.grid_for(mu, k);
        self.state_on(mu, k, &grid)
    }

    /// Every `Λ_k(μ) < threshold` as rank-labelled `(k, value)`, on a grid sized for `threshold`.
    pub fn values_below(&self, mu: f64, threshold: f64) -> Result<Vec<(usize, f64)>> {
        let grid = self
            .policy
            .for_energy(&QuarticWell::montgomery(mu), threshold.max(1.0));
        self.solver(mu, &grid)?.eigenvalues_below(threshold)
    }

    /// `(Λ_k(μ), dΛ_k/dμ)` on a given grid.
    pub fn value_and_slope(&self, mu: f64, k: usize, grid: &GridSpec) -> Result<(f64, f64)> {
        let s = self.solver(mu, grid)?;
        let st = s.state(k)?;
        s.check_truncation(st.value)?;
        let dx = grid.spacing();
        let slope = 2.0
            * grid
                .nodes()
                .iter()
                .zip(&st.vector)
                .map(|(&x, &v)| (mu + x * x) * v * v)
                .sum::<f64>()
            * dx;
        Ok((st.value, slope))
    }

    /// Hellmann–Feynman derivative `dΛ_k/dμ = 2∫(μ + x²)|φ_k|²`.
    pub fn hf_derivative(&self, mu: f64, k: usize, grid: &GridSpec) -> Result<f64> {
        Ok(self.value_and_slope(mu, k, grid)?.1)
    }

    /// `Λ_k''(μ)` by central differences of the Hellmann–Feynman slope.
    pub fn second_derivative(&self, mu: f64, k: usize, grid: &GridSpec) -> Result<f64> {
        let h = self.tol.fd_step;
        let up = self.hf_derivative(mu + h, k, grid)?;
        let dn = self.hf_derivative(mu - h, k, grid)?;
        Ok((up - dn) / (2.0 * h))
    }

    /// Locates the critical point `μ*_k` inside `bracket` and checks that it is
    /// a non-degenerate minimum below both bracket ends.
    pub fn critical_point(
        &self,
        k: usize,
        grid: &GridSpec,
        bracket: (f64, f64),
    ) -> Result<CriticalPoint> {
        let (lo, hi) = bracket;
        let mu_star = brent(|mu| self.hf_derivative(mu, k, grid), lo, hi, self.tol.root)?;
        let value = self.eigenvalue_on(mu_star, k, grid)?;
        let second_derivative = self.second_derivative(mu_star, k, grid)?;
        if !(second_derivative > 0.0) {
            return Err(Error::Nondegeneracy {
                mu: mu_star,
                second_derivative,
            });
        }
        let at_lo = self.eigenvalue_on(lo, k, grid)?;
        let at_hi = self.eigenvalue_on(hi, k, grid)?;
        if !(value < at_lo && value < at_hi) {
            return Err(Error::Consistency {
                level_residual: value - at_lo.min(at_hi),
                slope_residual: 0.0,
            });
        }
        Ok(CriticalPoint {
            k,
            mu_star,
            value,
            second_derivative,
        })
    }

    /// Critical point on the default bracket with a grid covering it.
    pub fn default_critical_point(&self, k: usize) -> Result<CriticalPoint> {
        let (lo, hi) = DEFAULT_BRACKET;
        let grid = self.covering_grid(lo, hi, k);
        self.critical_point(k, &grid, DEFAULT_BRACKET)
    }

    /// `∂_μ φ_k` by the perturbation sum over the first `mmax` eigenpairs.
    pub fn eigvec_derivative(
        &self,
        mu: f64,
        k: usize,
        grid: &GridSpec,
        mmax: usize,
    ) -> Result<EigvecDerivative> {
        if k == 0 || k > mmax {
            return Err(Error::Config(format!("need 1 <= k={k} <= mmax={mmax}")));
        }
        let pairs = self.eigenpairs(mu, grid, mmax)?;
        let dx = grid.spacing();
        let xs = grid.nodes();
        let phi_k = &pairs[k - 1];
        // 2 w φ_k with w = μ + x².
        let forcing: Vec<f64> = xs
            .iter()
            .zip(&phi_k.vector)
            .map(|(&x, &v)| 2.0 * (mu + x * x) * v)
            .collect();
        let mean_w = 0.5 * dx * forcing.iter().zip(&phi_k.vector).map(|(a, b)| a * b).sum::<f64>();
        let lhs: Vec<f64> = xs
            .iter()
            .zip(&phi_k.vector)
            .map(|(&x, &v)| 2.0 * ((mu + x * x) - mean_w) * v)
            .collect();
        let h = assemble_full(&QuarticWell::montgomery(mu), grid);

        let mut vector = vec![0.0; grid.points];
        let mut decay = Vec::new();
        let mut checkpoint = 2;
        for (m, pair) in pairs.iter().enumerate().map(|(i, p)| (i + 1, p)) {
            if m != k {
                let coeff = dx
                    * forcing
                        .iter()
                        .zip(&pair.vector)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                    / (phi_k.value - pair.value);
                vector
                    .iter_mut()
                    .zip(&pair.vector)
                    .for_each(|(d, p)| *d += coeff * p);
            }
            if m == checkpoint || m == mmax {
                decay.push((m, cohomological_residual(&h, phi_k.value, &lhs, &vector, dx)));
                checkpoint *= 2;
            }
        }
        let residual = decay.last().map(|d| d.1).unwrap_or(f64::NAN);
        if !(residual <= self.tol.truncation) {
            return Err(Error::Truncation { residual, decay });
        }
        Ok(EigvecDerivative {
            vector,
            residual,
            decay,
        })
    }

    /// `(μ, k, Λ_k, dΛ_k/dμ)` samples on a fixed grid.
    pub fn curve(&self, mus: &[f64], k: usize, grid: &GridSpec) -> Result<Vec<EigencurveSample>> {
        mus.iter()
            .map(|&mu| {
                let (value, derivative) = self.value_and_slope(mu, k, grid)?;
                Ok(EigencurveSample {
                    mu,
                    k,
                    value,
                    derivative,
                })
            })
            .collect()
    }
}

fn cohomological_residual(h: &SymBand, value: f64, lhs: &[f64], dphi: &[f64], dx: f64) -> f64 {
    let hd = h.matvec(dphi);
    let sq: f64 = lhs
        .iter()
        .zip(dphi.iter().zip(&hd))
        .map(|(l, (d, hd))| {
            let r = l - (value * d - hd);
            r * r
        })
        .sum();
    (sq * dx).sqrt()
}

fn solve_pairs(s: &WellSolver, kmax: usize, tol: &Tolerances) -> Result<Vec<EigenPair>> {
    let mut pairs = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let st = s.state(k)?;
        if st.residual > tol.residual {
            return Err(Error::NoConvergence(format!(
                "eigenpair k={k} residual {:.3e} above {:.1e}",
                st.residual, tol.residual
            )));
        }
        pairs.push(EigenPair {
            k,
            value: st.value,
            vector: st.vector,
            residual: st.residual,
        });
    }
    for w in pairs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if !(b.value - a.value > tol.gap * a.value.abs().max(1.0)) {
            return Err(Error::Degeneracy {
                k: a.k,
                lower: a.value,
                upper: b.value,
            });
        }
    }
    s.check_truncation(pairs[kmax - 1].value)?;
    Ok(pairs)
}

/// Real symmetric banded matrix for `Ĥ_μ` on the full grid.
pub fn build_hamiltonian(mu: f64, grid: &GridSpec) -> Result<SymBand> {
    grid.validate()?;
    Ok(assemble_full(&QuarticWell::montgomery(mu), grid))
}

/// Writes an eigencurve sweep as CSV `mu,k,lambda,dlambda_dmu`.
pub fn write_curve_csv<W: Write>(mut out: W, samples: &[EigencurveSample]) -> std::io::Result<()> {
    writeln!(out, "mu,k,lambda,dlambda_dmu")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(s.mu),
            s.k,
            fmt_f64(s.value),
            fmt_f64(s.derivative)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator::GridSpec;

    #[test]
    fn stencil_transcription_on_a_tiny_grid() {
        // N = 5 is below the solver minimum, so assemble directly.
        let grid = GridSpec {
            half_width: 1.0,
            points: 5,
            order: Order::Second,
            safety: 4.0,
        };
        let a = assemble_full(&QuarticWell::montgomery(0.0), &grid);
        let dx = grid.spacing();
        for i in 0..5 {
            let x = grid.node(i);
            assert_eq!(a.get(i, i), 2.0 / (dx * dx) + x.powi(4));
            if i > 0 {
                assert_eq!(a.get(i, i - 1), -1.0 / (dx * dx));
                assert_eq!(a.get(i - 1, i), -1.0 / (dx * dx));
            }
        }
        assert!(build_hamiltonian(0.0, &grid).is_err());
    }

    #[test]
    fn kmax_above_quarter_of_grid_is_rejected() {
        let m = Montgomery::default();
        let grid = GridSpec::new(5.0, 64, Order::Fourth).unwrap();
        assert!(m.eigenpairs(0.0, &grid, 17).is_err());
    }

    #[test]
    fn narrow_grid_fails_the_truncation_check() {
        let m = Montgomery::default();
        let grid = GridSpec::new(1.0, 256, Order::Fourth).unwrap();
        let err = m.eigenpairs(0.0, &grid, 2).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn curve_csv_header_and_precision() {
        let samples = [EigencurveSample {
            mu: 0.1,
            k: 1,
            value: 1.0 / 3.0,
            derivative: -2.0,
        }];
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("mu,k,lambda,dlambda_dmu"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
