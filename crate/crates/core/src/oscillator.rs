//! Finite-difference discretization of `D_x² + (a + b x²)²` on a symmetric
//! grid with Dirichlet ends, and parity-split eigensolves.
//!
//! The potential is even, so the problem splits exactly into even and odd
//! blocks on the half grid `x_j = (j + ½)Δx`. In one dimension the `k`-th
//! eigenfunction has parity `(−1)^{k−1}`: odd `k` live in the even block and
//! even `k` in the odd block. Near-degenerate tunnelling doublets therefore
//! never meet inside one block.

use std::sync::OnceLock;

use crate::band::{inverse_iteration, SymBand};
use crate::error::{Error, Result};

/// Potential `(offset + curvature·x²)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticWell {
    pub offset: f64,
    pub curvature: f64,
}

impl QuarticWell {
    /// The Montgomery potential `(μ + x²)²`.
    pub fn montgomery(mu: f64) -> Self {
        Self {
            offset: mu,
            curvature: 1.0,
        }
    }

    #[inline]
    pub fn inner(&self, x: f64) -> f64 {
        self.offset + self.curvature * x * x
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let w = self.inner(x);
        w * w
    }

    /// Equivalent well with non-negative curvature (the potential only sees `b·sgn b`).
    fn normalized(&self) -> (f64, f64) {
        let s = self.curvature.signum();
        (self.offset * s, self.curvature.abs())
    }

    /// Outer turning point `x > 0` with `V(x) = e`, or `None` when `e` is below the potential floor.
    pub fn outer_turning_point(&self, e: f64) -> Option<f64> {
        let (a, b) = self.normalized();
        let x2 = (e.max(0.0).sqrt() - a) / b;
        (x2 > 0.0).then(|| x2.sqrt())
    }
}

/// Discretization order of the second-derivative stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Order {
    Second,
    Fourth,
}

impl Order {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Order::Second),
            4 => Ok(Order::Fourth),
            other => Err(Error::Config(format!(
                "discretization order must be 2 or 4, got {other}"
            ))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Order::Second => 2,
            Order::Fourth => 4,
        }
    }

    fn bandwidth(self) -> usize {
        match self {
            Order::Second => 1,
            Order::Fourth => 2,
        }
    }
}

pub const MIN_POINTS: usize = 64;
pub const DEFAULT_SAFETY: f64 = 4.0;

/// Uniform cell-centred grid on `[−L, L]`: `x_i = −L + (i + ½)Δx`, `Δx = 2L/N`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
    pub order: Order,
    /// Required ratio `V(±L) / (largest requested eigenvalue)`.
    pub safety: f64,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize, order: Order) -> Result<Self> {
        let g = Self {
            half_width,
            points,
            order,
            safety: DEFAULT_SAFETY,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_safety(mut self, safety: f64) -> Result<Self> {
        self.safety = safety;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::Config(format!(
                "grid half-width must be positive, got {}",
                self.half_width
            )));
        }
        if self.points < MIN_POINTS || self.points % 2 != 0 {
            return Err(Error::Config(format!(
                "grid needs an even point count >= {MIN_POINTS}, got {}",
                self.points
            )));
        }
        if !(self.safety >= 1.0) {
            return Err(Error::Config(format!(
                "grid safety factor must be >= 1, got {}",
                self.safety
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// Half-grid nodes `x_j = (j + ½)Δx`, `j = 0..N/2`.
    pub fn half_nodes(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.points / 2).map(|j| (j as f64 + 0.5) * dx).collect()
    }
}

/// Stencil coefficients of `−d²/dx²`: `(diag, off1, off2)`.
fn stencil(order: Order, dx: f64) -> (f64, f64, f64) {
    match order {
        Order::Second => (2.0 / (dx * dx), -1.0 / (dx * dx), 0.0),
        Order::Fourth => {
            let c = 1.0 / (12.0 * dx * dx);
            (30.0 * c, -16.0 * c, c)
        }
    }
}

/// Full-grid matrix without validating the grid.
pub(crate) fn assemble_full(well: &QuarticWell, grid: &GridSpec) -> SymBand {
    let n = grid.points;
    let bw = grid.order.bandwidth();
    let (d0, d1, d2) = stencil(grid.order, grid.spacing());
    let mut a = SymBand::zeros(n, bw);
    for i in 0..n {
        a.set(i, i, d0 + well.value(grid.node(i)));
        if i >= 1 {
            a.set(i, i - 1, d1);
        }
        if bw >= 2 && i >= 2 {
            a.set(i, i - 2, d2);
        }
    }
    a
}

/// Parity of a half-grid block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Parity of the `k`-th eigenfunction (`k ≥ 1`).
    pub fn of_index(k: usize) -> Self {
        if k % 2 == 1 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// 0-based position of eigenvalue `k` inside its block.
    fn block_index(k: usize) -> usize {
        (k - 1) / 2
    }
}

/// Restriction of the full-grid matrix to even or odd vectors.
pub(crate) fn assemble_block(well: &QuarticWell, grid: &GridSpec, parity: Parity) -> SymBand {
    let m = grid.points / 2;
    let bw = grid.order.bandwidth();
    let (d0, d1, d2) = stencil(grid.order, grid.spacing());
    let s = parity.sign();
    let xs = grid.half_nodes();
    let mut a = SymBand::zeros(m, bw);
    for j in 0..m {
        a.set(j, j, d0 + well.value(xs[j]));
        if j >= 1 {
            a.set(j, j - 1, d1);
        }
        if bw >= 2 && j >= 2 {
            a.set(j, j - 2, d2);
        }
    }
    // Mirror images of u_0 (and u_1 for the wide stencil) across x = 0.
    a.add(0, 0, s * d1);
    if bw >= 2 {
        a.add(0, 1, s * d2);
    }
    a
}

/// Extends half-grid samples to the full grid by parity.
pub(crate) fn extend(half: &[f64], parity: Parity) -> Vec<f64> {
    let m = half.len();
    let s = parity.sign();
    let mut full = Vec::with_capacity(2 * m);
    full.extend(half.iter().rev().map(|v| s * v));
    full.extend_from_slice(half);
    full
}

/// Discrete kinetic energy `⟨−D_h v, v⟩` on the full grid (Euclidean, zero ghosts),
/// evaluated as a sum of squared differences to avoid cancellation.
pub(crate) fn kinetic_form(v: &[f64], order: Order, dx: f64) -> f64 {
    let n = v.len();
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= n {
            0.0
        } else {
            v[i as usize]
        }
    };
    let diff_sum = |step: isize| -> f64 {
        (-step..n as isize)
            .map(|i| {
                let d = at(i + step) - at(i);
                d * d
            })
            .sum()
    };
    match order {
        Order::Second => diff_sum(1) / (dx * dx),
        Order::Fourth => (16.0 * diff_sum(1) - diff_sum(2)) / (12.0 * dx * dx),
    }
}

/// One solved eigenfunction on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedState {
    pub k: usize,
    pub value: f64,
    /// Samples on the full grid, `Δx Σ φ² = 1`, first lobe positive.
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn fix_sign(v: &mut [f64]) {
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-3 * peak) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Per-parity block matrix.
pub(crate) struct Block {
    matrix: SymBand,
}

impl Block {
    pub fn new(well: &QuarticWell, grid: &GridSpec, parity: Parity) -> Self {
        Self {
            matrix: assemble_block(well, grid, parity),
        }
    }
}

/// Parity-split solver for one well on one grid.
pub struct WellSolver {
    well: QuarticWell,
    grid: GridSpec,
    even: OnceLock<Block>,
    odd: OnceLock<Block>,
}

impl WellSolver {
    pub fn new(well: QuarticWell, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        if !(well.curvature != 0.0 && well.curvature.is_finite() && well.offset.is_finite()) {
            return Err(Error::Domain {
                what: "quartic well needs finite offset and nonzero curvature",
                value: well.curvature,
            });
        }
        Ok(Self {
            even: OnceLock::new(),
            odd: OnceLock::new(),
            well,
            grid,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn well(&self) -> &QuarticWell {
        &self.well
    }

    fn block(&self, parity: Parity) -> &Block {
        let cell = match parity {
            Parity::Even => &self.even,
            Parity::Odd => &self.odd,
        };
        cell.get_or_init(|| Block::new(&self.well, &self.grid, parity))
    }

    /// Full-grid, L²-normalized eigenstate `k ≥ 1` with a Rayleigh-refined value.
    pub fn state(&self, k: usize) -> Result<SolvedState> {
        if k == 0 || k > self.grid.points {
            return Err(Error::Config(format!("eigenvalue index {k} out of range")));
        }
        let parity = Parity::of_index(k);
        let block = self.block(parity);
        let rough = block.matrix.eigenvalue(Parity::block_index(k));
        let (half, _, residual) = inverse_iteration(&block.matrix, rough);
        let dx = self.grid.spacing();
        let full = extend(&half, parity);
        let kinetic = kinetic_form(&full, self.grid.order, dx);
        let potential: f64 = self
            .grid
            .nodes()
            .iter()
            .zip(&full)
            .map(|(&x, &v)| self.well.value(x) * v * v)
            .sum();
        let norm2: f64 = full.iter().map(|v| v * v).sum();
        let value = (kinetic + potential) / norm2;
        let scale = 1.0 / (norm2 * dx).sqrt();
        let mut vector: Vec<f64> = full.iter().map(|v| v * scale).collect();
        fix_sign(&mut vector);
        Ok(SolvedState {
            k,
            value,
            vector,
            residual,
        })
    }

    /// Rayleigh-refined eigenvalue `k`.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        Ok(self.state(k)?.value)
    }

    /// All eigenvalues strictly below `threshold`, ascending, as `(k, value)`.
    ///
    /// Labels are ranks of the merged values, so `k` stays increasing even when
    /// a tunnelling doublet is split below resolution and the two parity
    /// blocks return it in the wrong order.
    pub fn eigenvalues_below(&self, threshold: f64) -> Result<Vec<(usize, f64)>> {
        let mut values = Vec::new();
        for parity in [Parity::Even, Parity::Odd] {
            let count = self.block(parity).matrix.count_below(threshold);
            for j in 0..count {
                let k = match parity {
                    Parity::Even => 2 * j + 1,
                    Parity::Odd => 2 * j + 2,
                };
                let v = self.eigenvalue(k)?;
                if v < threshold {
                    values.push(v);
                }
            }
        }
        values.sort_by(f64::total_cmp);
        Ok(values.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect())
    }

    /// `V(±L)`, the potential at the truncation boundary.
    pub fn boundary_potential(&self) -> f64 {
        self.well.value(self.grid.half_width)
    }

    /// Checks that `V(±L)` clears `value` by the grid's safety factor.
    pub fn check_truncation(&self, value: f64) -> Result<()> {
        let v = self.boundary_potential();
        if v < self.grid.safety * value {
            return Err(Error::Config(format!(
                "Dirichlet truncation too tight: V(L)={v:.4e} < {} x eigenvalue {value:.4e}; widen the grid",
                self.grid.safety
            )));
        }
        Ok(())
    }

    pub fn full_matrix(&self) -> SymBand {
        assemble_full(&self.well, &self.grid)
    }
}

/// WKB estimate of eigenvalue `k` from `∫ √(E − V) dx = π (k − ½)`.
pub fn wkb_estimate(well: &QuarticWell, k: usize) -> f64 {
    let target = std::f64::consts::PI * (k as f64 - 0.5);
    let action = |e: f64| -> f64 {
        match well.outer_turning_point(e) {
            None => 0.0,
            Some(xt) => {
                let m = 512;
                let h = xt / m as f64;
                2.0 * (0..m)
                    .map(|i| {
                        let x = (i as f64 + 0.5) * h;
                        (e - well.value(x)).max(0.0).sqrt()
                    })
                    .sum::<f64>()
                    * h
            }
        }
    };
    let mut hi = 1.0_f64.max(well.value(0.0));
    while action(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if action(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Automatic grid selection.
///
/// The half-width is the smallest `L` (rounded up to a multiple of 1/16) for
/// which the Agmon action `∫_{x_t}^{L} √(V − E) dx` beyond the outer turning
/// point of the target energy reaches `decay_action`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GridPolicy {
    pub points: usize,
    pub order: Order,
    pub safety: f64,
    pub decay_action: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            points: 2048,
            order: Order::Fourth,
            safety: DEFAULT_SAFETY,
            decay_action: 18.0,
        }
    }
}

impl GridPolicy {
    /// Grid adequate for eigenvalues up to index `kmax`.
    pub fn for_index(&self, well: &QuarticWell, kmax: usize) -> GridSpec {
        let e = 1.25 * wkb_estimate(well, kmax.max(1)) + 1.0;
        self.for_energy(well, e)
    }

    /// Grid adequate for eigenvalues up to `energy`.
    pub fn for_energy(&self, well: &QuarticWell, energy: f64) -> GridSpec {
        let xt = well.outer_turning_point(energy).unwrap_or(0.0);
        let step = 1e-3 * (1.0 + xt);
        let mut x = xt;
        let mut action = 0.0;
        while action < self.decay_action || well.value(x) < self.safety * energy {
            let mid = x + 0.5 * step;
            action += (well.value(mid) - energy).max(0.0).sqrt() * step;
            x += step;
        }
        let half_width = (x * 16.0).ceil() / 16.0;
        GridSpec {
            half_width,
            points: self.points,
            order: self.order,
            safety: self.safety,
        }
    }

    /// One grid covering every offset in `[lo, hi]` (unit curvature) up to index `kmax`.
    pub fn covering(&self, lo: f64, hi: f64, kmax: usize) -> GridSpec {
        let samples = 33;
        let mut best = self.for_index(&QuarticWell::montgomery(lo), kmax);
        for i in 1..samples {
            let mu = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            let g = self.for_index(&QuarticWell::montgomery(mu), kmax);
            if g.half_width > best.half_width {
                best = g;
            }
        }
        best
    }
}
